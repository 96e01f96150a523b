#include "confctrl/pngio.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace confctrl {

namespace {

void put_u32(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(uint8_t(x >> 24));
  v.push_back(uint8_t(x >> 16));
  v.push_back(uint8_t(x >> 8));
  v.push_back(uint8_t(x));
}

uint32_t get_u32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | p[3];
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& data) {
  put_u32(out, uint32_t(data.size()));
  const size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uint32_t crc =
      crc32(0, out.data() + crc_start, uInt(out.size() - crc_start));
  put_u32(out, crc);
}

}  // namespace

void write_png_rgb8(const std::string& path, const uint8_t* rgb, int width, int height) {
  std::vector<uint8_t> raw;
  raw.reserve(size_t(height) * (size_t(width) * 3 + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter type 0
    raw.insert(raw.end(), rgb + size_t(y) * width * 3, rgb + size_t(y + 1) * width * 3);
  }
  uLongf comp_len = compressBound(uLong(raw.size()));
  std::vector<uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), uLong(raw.size()), 9) != Z_OK)
    throw std::runtime_error("png: deflate failed");
  comp.resize(comp_len);

  std::vector<uint8_t> out{0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<uint8_t> ihdr;
  put_u32(ihdr, uint32_t(width));
  put_u32(ihdr, uint32_t(height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type RGB
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", comp);
  append_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("png: cannot open " + path);
  f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  if (!f) throw std::runtime_error("png: write failed for " + path);
}

std::vector<uint8_t> read_png_rgb8(const std::string& path, int& width, int& height) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("png: cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  static const uint8_t magic[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (buf.size() < 8 || std::memcmp(buf.data(), magic, 8) != 0)
    throw std::runtime_error("png: bad signature in " + path);

  width = height = 0;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  while (pos + 12 <= buf.size()) {
    const uint32_t len = get_u32(buf.data() + pos);
    const char* type = reinterpret_cast<const char*>(buf.data() + pos + 4);
    const uint8_t* data = buf.data() + pos + 8;
    if (pos + 12 + len > buf.size()) throw std::runtime_error("png: truncated chunk");
    if (std::memcmp(type, "IHDR", 4) == 0) {
      width = int(get_u32(data));
      height = int(get_u32(data + 4));
      if (data[8] != 8 || data[9] != 2 || data[12] != 0)
        throw std::runtime_error("png: unsupported format (need 8-bit RGB)");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (width <= 0 || height <= 0) throw std::runtime_error("png: missing IHDR");

  const size_t stride = size_t(width) * 3;
  std::vector<uint8_t> raw(size_t(height) * (stride + 1));
  uLongf raw_len = uLongf(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), uLong(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw std::runtime_error("png: inflate failed");

  std::vector<uint8_t> out(size_t(height) * stride);
  auto paeth = [](int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    return pb <= pc ? b : c;
  };
  for (int y = 0; y < height; ++y) {
    const uint8_t filter = raw[size_t(y) * (stride + 1)];
    const uint8_t* src = raw.data() + size_t(y) * (stride + 1) + 1;
    uint8_t* dst = out.data() + size_t(y) * stride;
    const uint8_t* up = y > 0 ? out.data() + size_t(y - 1) * stride : nullptr;
    for (size_t x = 0; x < stride; ++x) {
      const int left = x >= 3 ? dst[x - 3] : 0;
      const int above = up ? up[x] : 0;
      const int ul = (up && x >= 3) ? up[x - 3] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += above; break;
        case 3: v += (left + above) / 2; break;
        case 4: v += paeth(left, above, ul); break;
        default: throw std::runtime_error("png: unknown filter type");
      }
      dst[x] = uint8_t(v);
    }
  }
  return out;
}

}  // namespace confctrl
