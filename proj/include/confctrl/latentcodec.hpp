#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace confctrl {

// Raw video pixels, T x H x W x 3, values in [0,1].
struct VideoFrames {
  int t = 0, height = 0, width = 0;
  std::vector<float> data;

  float& at(int f, int y, int x, int c) {
    return data[((size_t(f) * height + y) * width + x) * 3 + c];
  }
  float at(int f, int y, int x, int c) const {
    return data[((size_t(f) * height + y) * width + x) * 3 + c];
  }
  static VideoFrames zeros(int t, int h, int w) {
    return {t, h, w, std::vector<float>(size_t(t) * h * w * 3, 0.0f)};
  }
};

// Latent tensor T x C x H' x W' with C = 3*p*p. Exactly invertible patchify
// codec: each non-overlapping p x p x 3 pixel block becomes 3p^2 channels,
// followed by the fixed affine z = (x - 0.5) * 2.
struct LatentVideo {
  int t = 0, channels = 0, height = 0, width = 0;
  int patch = 0;                     // codec patch size p
  int orig_height = 0, orig_width = 0;
  std::vector<float> data;

  size_t size() const { return data.size(); }
  float& at(int f, int c, int y, int x) {
    return data[((size_t(f) * channels + c) * height + y) * width + x];
  }
  float at(int f, int c, int y, int x) const {
    return data[((size_t(f) * channels + c) * height + y) * width + x];
  }
  bool same_shape(const LatentVideo& o) const {
    return t == o.t && channels == o.channels && height == o.height && width == o.width;
  }
  static LatentVideo zeros_like(const LatentVideo& o) {
    LatentVideo z = o;
    z.data.assign(o.data.size(), 0.0f);
    return z;
  }
};

LatentVideo encode(const VideoFrames& frames, int patch = 2);
VideoFrames decode(const LatentVideo& z);

// Separable linear interpolation, temporal axis first, then height, then
// width. Align-corners sampling: output index i maps to input coordinate
// i * (n_in - 1) / (n_out - 1). Identity when sizes already match.
LatentVideo resize_latent(const LatentVideo& z, int t_out, int h_out, int w_out);

// Same resampling on a raw T x C x H x W buffer; used for confidence planes.
std::vector<float> resize_planes(const std::vector<float>& data, int t, int c,
                                 int h, int w, int t_out, int h_out, int w_out);

}  // namespace confctrl
