#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace confctrl {

// Minimal 8-bit RGB PNG writer/reader (zlib-backed). Writes filter type 0;
// the reader handles all five standard filters.
void write_png_rgb8(const std::string& path, const uint8_t* rgb, int width, int height);
std::vector<uint8_t> read_png_rgb8(const std::string& path, int& width, int& height);

}  // namespace confctrl
