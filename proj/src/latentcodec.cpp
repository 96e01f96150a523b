#include "confctrl/latentcodec.hpp"

#include <cmath>

namespace confctrl {

LatentVideo encode(const VideoFrames& frames, int patch) {
  if (patch < 1) throw std::invalid_argument("encode: patch must be >= 1");
  if (frames.height % patch != 0 || frames.width % patch != 0)
    throw std::invalid_argument("encode: spatial size not divisible by patch");
  LatentVideo z;
  z.t = frames.t;
  z.patch = patch;
  z.orig_height = frames.height;
  z.orig_width = frames.width;
  z.height = frames.height / patch;
  z.width = frames.width / patch;
  z.channels = 3 * patch * patch;
  z.data.resize(size_t(z.t) * z.channels * z.height * z.width);
  for (int f = 0; f < z.t; ++f)
    for (int py = 0; py < patch; ++py)
      for (int px = 0; px < patch; ++px)
        for (int c = 0; c < 3; ++c) {
          const int ch = (py * patch + px) * 3 + c;
          for (int y = 0; y < z.height; ++y)
            for (int x = 0; x < z.width; ++x) {
              const double v = frames.at(f, y * patch + py, x * patch + px, c);
              z.at(f, ch, y, x) = float(2.0 * v - 1.0);
            }
        }
  return z;
}

VideoFrames decode(const LatentVideo& z) {
  if (z.channels != 3 * z.patch * z.patch)
    throw std::invalid_argument("decode: channel count inconsistent with patch");
  VideoFrames out = VideoFrames::zeros(z.t, z.orig_height, z.orig_width);
  const int patch = z.patch;
  for (int f = 0; f < z.t; ++f)
    for (int py = 0; py < patch; ++py)
      for (int px = 0; px < patch; ++px)
        for (int c = 0; c < 3; ++c) {
          const int ch = (py * patch + px) * 3 + c;
          for (int y = 0; y < z.height; ++y)
            for (int x = 0; x < z.width; ++x) {
              const double v = z.at(f, ch, y, x);
              out.at(f, y * patch + py, x * patch + px, c) = float((v + 1.0) * 0.5);
            }
        }
  return out;
}

namespace {

// 1-D align-corners linear resample along one axis of a strided buffer.
void resample_axis(const std::vector<float>& in, std::vector<float>& out,
                   size_t outer, int n_in, int n_out, size_t inner) {
  if (n_in == n_out) {
    out = in;
    return;
  }
  out.resize(outer * n_out * inner);
  for (size_t o = 0; o < outer; ++o) {
    const float* src = in.data() + o * n_in * inner;
    float* dst = out.data() + o * size_t(n_out) * inner;
    for (int i = 0; i < n_out; ++i) {
      double pos = 0.0;
      if (n_out > 1 && n_in > 1) pos = double(i) * (n_in - 1) / (n_out - 1);
      int i0 = int(pos);
      if (i0 >= n_in - 1) i0 = n_in - 2;
      if (n_in == 1) {
        for (size_t k = 0; k < inner; ++k) dst[size_t(i) * inner + k] = src[k];
        continue;
      }
      const double w1 = pos - i0;
      const double w0 = 1.0 - w1;
      const float* a = src + size_t(i0) * inner;
      const float* b = a + inner;
      for (size_t k = 0; k < inner; ++k)
        dst[size_t(i) * inner + k] = float(w0 * a[k] + w1 * b[k]);
    }
  }
}

}  // namespace

std::vector<float> resize_planes(const std::vector<float>& data, int t, int c,
                                 int h, int w, int t_out, int h_out, int w_out) {
  if (t_out < 1 || h_out < 1 || w_out < 1)
    throw std::invalid_argument("resize: target sizes must be >= 1");
  // temporal axis: channel dim rides along in the inner stride
  std::vector<float> tmp;
  resample_axis(data, tmp, 1, t, t_out, size_t(c) * h * w);
  std::vector<float> tmp2;
  resample_axis(tmp, tmp2, size_t(t_out) * c, h, h_out, size_t(w));
  std::vector<float> out;
  resample_axis(tmp2, out, size_t(t_out) * c * h_out, w, w_out, 1);
  return out;
}

LatentVideo resize_latent(const LatentVideo& z, int t_out, int h_out, int w_out) {
  LatentVideo out = z;
  out.t = t_out;
  out.height = h_out;
  out.width = w_out;
  out.data = resize_planes(z.data, z.t, z.channels, z.height, z.width, t_out, h_out, w_out);
  return out;
}

}  // namespace confctrl
