#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "confctrl/backbone.hpp"
#include "confctrl/latentcodec.hpp"
#include "confctrl/rng.hpp"
#include "confctrl/tensor.hpp"

namespace confctrl {

struct FlowConfig {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda_grad = 0.05;
  int sample_steps = 50;
  double learning_rate = 1e-4;
  int train_steps = 1000;
  uint64_t seed = 0;
  bool renormalize_init = false;  // optional variance renormalization, off by default
  bool use_confidence = true;     // off: w == 1 (uniform-confidence ablation)

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0 || lambda_grad < 0)
      throw std::invalid_argument("flow config: lambdas must be >= 0");
    if (sample_steps < 1) throw std::invalid_argument("flow config: sample_steps must be >= 1");
  }
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// z_0 = lambda1 * (w . z_pc) + lambda2 * eps, elementwise. w is a single
// confidence plane per frame, broadcast over channels.
inline LatentVideo confidence_init(const LatentVideo& z_pc,
                                   const std::vector<float>& w_plane,  // T x H' x W'
                                   const LatentVideo& noise, const FlowConfig& cfg) {
  if (!z_pc.same_shape(noise))
    throw std::invalid_argument("confidence_init: z_pc and noise shape mismatch");
  if (w_plane.size() != size_t(z_pc.t) * z_pc.height * z_pc.width)
    throw std::invalid_argument("confidence_init: confidence plane size mismatch");
  LatentVideo z0 = LatentVideo::zeros_like(z_pc);
  const size_t plane = size_t(z_pc.height) * z_pc.width;
  const float l1 = float(cfg.lambda1), l2 = float(cfg.lambda2);
  for (int f = 0; f < z_pc.t; ++f)
    for (int c = 0; c < z_pc.channels; ++c) {
      const size_t off = (size_t(f) * z_pc.channels + c) * plane;
      const float* wp = w_plane.data() + size_t(f) * plane;
      for (size_t i = 0; i < plane; ++i) {
        const float w = cfg.use_confidence ? wp[i] : 1.0f;
        float v = l1 * (w * z_pc.data[off + i]) + l2 * noise.data[off + i];
        if (cfg.renormalize_init) {
          const float denom = std::sqrt(l1 * l1 * w * w + l2 * l2);
          if (denom > 0) v /= denom;
        }
        z0.data[off + i] = v;
      }
    }
  return z0;
}

inline LatentVideo rf_interpolate(const LatentVideo& z0, const LatentVideo& z1, double t) {
  if (!z0.same_shape(z1)) throw std::invalid_argument("rf_interpolate: shape mismatch");
  if (t < 0 || t > 1) throw std::invalid_argument("rf_interpolate: t outside [0,1]");
  LatentVideo zt = LatentVideo::zeros_like(z0);
  const float a = float(1.0 - t), b = float(t);
  for (size_t i = 0; i < z0.size(); ++i) zt.data[i] = a * z0.data[i] + b * z1.data[i];
  return zt;
}

// ---- plain-value losses (mean reduction) ----

inline double rf_loss(const std::vector<float>& v_pred, const std::vector<float>& z_target) {
  if (v_pred.size() != z_target.size()) throw std::invalid_argument("rf_loss: shape mismatch");
  double s = 0;
  for (size_t i = 0; i < v_pred.size(); ++i) {
    const double d = double(v_pred[i]) - double(z_target[i]);
    s += d * d;
  }
  return s / double(v_pred.size());
}

// forward differences along width and height of each latent frame/channel
inline double grad_reg_loss(const std::vector<float>& v_pred,
                            const std::vector<float>& z_target, int t, int c, int h, int w) {
  if (v_pred.size() != z_target.size() || v_pred.size() != size_t(t) * c * h * w)
    throw std::invalid_argument("grad_reg_loss: shape mismatch");
  double sx = 0, sy = 0;
  size_t nx = 0, ny = 0;
  for (int f = 0; f < t; ++f)
    for (int ch = 0; ch < c; ++ch) {
      const size_t off = (size_t(f) * c + ch) * h * w;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x + 1 < w; ++x) {
          const size_t i = off + size_t(y) * w + x;
          const double gv = double(v_pred[i + 1]) - double(v_pred[i]);
          const double gt = double(z_target[i + 1]) - double(z_target[i]);
          sx += std::abs(gv - gt);
          ++nx;
        }
      for (int y = 0; y + 1 < h; ++y)
        for (int x = 0; x < w; ++x) {
          const size_t i = off + size_t(y) * w + x;
          const double gv = double(v_pred[i + w]) - double(v_pred[i]);
          const double gt = double(z_target[i + w]) - double(z_target[i]);
          sy += std::abs(gv - gt);
          ++ny;
        }
    }
  return (nx ? sx / double(nx) : 0.0) + (ny ? sy / double(ny) : 0.0);
}

inline double total_loss(const std::vector<float>& v_pred, const std::vector<float>& z_target,
                         int t, int c, int h, int w, const FlowConfig& cfg) {
  return rf_loss(v_pred, z_target) +
         cfg.lambda_grad * grad_reg_loss(v_pred, z_target, t, c, h, w);
}

// ---- in-graph loss (differentiable), shared by training and the gradient oracle ----

namespace detail {

inline std::shared_ptr<std::vector<int64_t>> diff_indices(int t, int c, int h, int w,
                                                          int axis, int side) {
  // axis 0 = width, 1 = height; side 0 = low element, 1 = high element
  auto idx = std::make_shared<std::vector<int64_t>>();
  for (int f = 0; f < t; ++f)
    for (int ch = 0; ch < c; ++ch) {
      const int64_t off = (int64_t(f) * c + ch) * h * w;
      const int hh = axis == 1 ? h - 1 : h;
      const int ww = axis == 0 ? w - 1 : w;
      for (int y = 0; y < hh; ++y)
        for (int x = 0; x < ww; ++x) {
          int64_t i = off + int64_t(y) * w + x;
          if (side == 1) i += (axis == 0) ? 1 : w;
          idx->push_back(i);
        }
    }
  return idx;
}

}  // namespace detail

template <typename T>
struct LossTerms {
  ad::Tensor<T> rf, grad, total;
};

template <typename T>
LossTerms<T> build_loss(const ad::Tensor<T>& v_pred, const std::vector<T>& z_target,
                        int t, int c, int h, int w, const FlowConfig& cfg) {
  using Tn = ad::Tensor<T>;
  if (v_pred.numel() != z_target.size())
    throw std::invalid_argument("build_loss: shape mismatch");
  Tn target = Tn::from({t, c, h, w}, z_target);
  Tn v = ad::reshape(v_pred, {t, c, h, w});
  LossTerms<T> out;
  out.rf = ad::mean_all(ad::square(ad::sub(v, target)));

  auto xl = detail::diff_indices(t, c, h, w, 0, 0);
  auto xr = detail::diff_indices(t, c, h, w, 0, 1);
  auto yl = detail::diff_indices(t, c, h, w, 1, 0);
  auto yh = detail::diff_indices(t, c, h, w, 1, 1);
  const std::vector<int> xs{t, c, h, w - 1}, ys{t, c, h - 1, w};
  Tn dxv = ad::sub(ad::gather(v, xr, xs), ad::gather(v, xl, xs));
  Tn dxt = ad::sub(ad::gather(target, xr, xs), ad::gather(target, xl, xs));
  Tn dyv = ad::sub(ad::gather(v, yh, ys), ad::gather(v, yl, ys));
  Tn dyt = ad::sub(ad::gather(target, yh, ys), ad::gather(target, yl, ys));
  out.grad = ad::add(ad::mean_all(ad::abs(ad::sub(dxv, dxt))),
                     ad::mean_all(ad::abs(ad::sub(dyv, dyt))));
  out.total = ad::add(out.rf, ad::scale(out.grad, T(cfg.lambda_grad)));
  return out;
}

// ---- Euler sampler ----

// Explicit Euler from t = 0 to 1 on a uniform grid. post_step (optional) is
// applied after every integration step, e.g. to re-impose endpoint latents.
template <typename VelFn>
LatentVideo euler_sample(const LatentVideo& z0, int steps, VelFn&& vel,
                         const std::function<void(LatentVideo&)>& post_step = {}) {
  if (steps < 1) throw std::invalid_argument("euler_sample: steps must be >= 1");
  LatentVideo z = z0;
  const float dt = 1.0f / float(steps);
  for (int i = 0; i < steps; ++i) {
    const double t = double(i) / steps;
    const std::vector<float> v = vel(z, t);
    if (v.size() != z.size()) throw std::invalid_argument("euler_sample: velocity size mismatch");
    for (size_t j = 0; j < z.size(); ++j) z.data[j] += dt * v[j];
    if (post_step) post_step(z);
  }
  return z;
}

// ---- optimizer ----

struct AdamConfig {
  double lr = 1e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  AdamConfig& config() { return cfg_; }
  int64_t step_count() const { return step_; }

  struct Moments {
    std::vector<T> m, v;
  };
  std::map<std::string, Moments>& state() { return state_; }
  void set_step_count(int64_t s) { step_ = s; }

  // Applies one update from grads accumulated in the parameter tensors.
  void step(std::map<std::string, ad::Tensor<T>>& params) {
    ++step_;
    const T b1 = T(cfg_.beta1), b2 = T(cfg_.beta2);
    const T bc1 = T(1) - T(std::pow(cfg_.beta1, double(step_)));
    const T bc2 = T(1) - T(std::pow(cfg_.beta2, double(step_)));
    for (auto& [name, t] : params) {
      auto& mom = state_[name];
      if (mom.m.empty()) {
        mom.m.assign(t.numel(), T(0));
        mom.v.assign(t.numel(), T(0));
      }
      const auto& g = t.grad();
      if (g.size() != t.numel()) continue;  // param unused in this graph
      auto& val = t.val();
      for (size_t i = 0; i < val.size(); ++i) {
        mom.m[i] = b1 * mom.m[i] + (T(1) - b1) * g[i];
        mom.v[i] = b2 * mom.v[i] + (T(1) - b2) * g[i] * g[i];
        const T mh = mom.m[i] / bc1;
        const T vh = mom.v[i] / bc2;
        val[i] -= T(cfg_.lr) * mh / (std::sqrt(vh) + T(cfg_.eps));
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::map<std::string, Moments> state_;
  int64_t step_ = 0;
};

}  // namespace confctrl
