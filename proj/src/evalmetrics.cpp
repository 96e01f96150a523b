#include "confctrl/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace confctrl {

double psnr(const std::vector<float>& pred, const std::vector<float>& gt) {
  if (pred.size() != gt.size() || pred.empty())
    throw std::invalid_argument("psnr: shape mismatch");
  double mse = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = double(pred[i]) - double(gt[i]);
    mse += d * d;
  }
  mse /= double(pred.size());
  if (mse < 1e-10) return 99.0;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const std::vector<float>& pred, const std::vector<float>& gt, int h, int w) {
  if (pred.size() != gt.size() || pred.size() != size_t(h) * w * 3)
    throw std::invalid_argument("ssim: shape mismatch");
  if (h < 8 || w < 8) throw std::invalid_argument("ssim: image smaller than window");
  constexpr int win = 8;
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // K1^2, K2^2 at L = 1
  double total = 0;
  int count = 0;
  for (int c = 0; c < 3; ++c)
    for (int wy = 0; wy + win <= h; wy += win)
      for (int wx = 0; wx + win <= w; wx += win) {
        double ma = 0, mb = 0;
        for (int y = 0; y < win; ++y)
          for (int x = 0; x < win; ++x) {
            const size_t i = (size_t(wy + y) * w + wx + x) * 3 + c;
            ma += pred[i];
            mb += gt[i];
          }
        ma /= win * win;
        mb /= win * win;
        double va = 0, vb = 0, cov = 0;
        for (int y = 0; y < win; ++y)
          for (int x = 0; x < win; ++x) {
            const size_t i = (size_t(wy + y) * w + wx + x) * 3 + c;
            va += (pred[i] - ma) * (pred[i] - ma);
            vb += (gt[i] - mb) * (gt[i] - mb);
            cov += (pred[i] - ma) * (gt[i] - mb);
          }
        va /= win * win - 1;
        vb /= win * win - 1;
        cov /= win * win - 1;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
  return total / count;
}

namespace {

struct Objective {
  const SceneSample* scene;
  const float* frame;  // H*W*3

  // mean squared photometric error plus rendered coverage
  std::pair<double, double> operator()(const CameraPose& pose) const {
    const ProjectionFrame rendered =
        project_point_cloud(scene->clean_cloud, pose, scene->intrinsics);
    double mse = 0;
    size_t covered = 0;
    const size_t n = rendered.rgb.size();
    for (size_t i = 0; i < n; ++i) {
      const double d = double(rendered.rgb[i]) - double(frame[i]);
      mse += d * d;
    }
    for (uint8_t m : rendered.mask) covered += m;
    return {mse / double(n), double(covered) / double(rendered.mask.size())};
  }
};

CameraPose perturb(const CameraPose& base, int coord, double step) {
  CameraPose delta;
  if (coord < 3) {
    Eigen::Vector3d axis = Eigen::Vector3d::Zero();
    axis[coord] = 1.0;
    delta.rotation = Eigen::AngleAxisd(step, axis).toRotationMatrix();
  } else {
    delta.translation[coord - 3] = step;
  }
  return compose(delta, base);
}

RecoveredPose fit_frame(const float* frame, const SceneSample& scene,
                        const RecoveryOptions& opt) {
  Objective obj{&scene, frame};
  const CameraPose& a = scene.poses.front();
  const CameraPose& b = scene.poses.back();

  CameraPose best_pose = a;
  double best_err = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= opt.grid_steps; ++i) {
    const CameraPose cand = interpolate_pose(a, b, double(i) / opt.grid_steps);
    const double err = obj(cand).first;
    if (err < best_err) {  // strict: ties keep the smaller s
      best_err = err;
      best_pose = cand;
    }
  }

  double rot_step = 0.04, trans_step = 0.04;
  for (int round = 0; round < opt.descent_rounds; ++round) {
    bool improved = false;
    for (int coord = 0; coord < 6; ++coord) {
      const double step = coord < 3 ? rot_step : trans_step;
      for (double sgn : {1.0, -1.0}) {
        const CameraPose cand = perturb(best_pose, coord, sgn * step);
        const double err = obj(cand).first;
        if (err < best_err) {
          best_err = err;
          best_pose = cand;
          improved = true;
        }
      }
    }
    if (!improved) {
      rot_step *= 0.5;
      trans_step *= 0.5;
    }
  }

  RecoveredPose out;
  out.pose = best_pose;
  auto [err, cov] = obj(best_pose);
  out.residual = err;
  out.coverage = cov;
  out.unreliable = err > opt.residual_threshold || cov < opt.coverage_threshold;
  return out;
}

double pair_rotation_angle(const CameraPose& p, const CameraPose& g) {
  const double tr = (p.rotation * g.rotation.transpose()).trace();
  const double arg = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(arg);
}

}  // namespace

std::vector<RecoveredPose> recover_trajectory(const VideoFrames& frames,
                                              const SceneSample& scene,
                                              const RecoveryOptions& opt) {
  if (frames.height != scene.intrinsics.height || frames.width != scene.intrinsics.width)
    throw std::invalid_argument("recover_trajectory: resolution mismatch");
  std::vector<RecoveredPose> out(frames.t);
  const size_t frame_sz = size_t(frames.height) * frames.width * 3;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int t = 0; t < frames.t; ++t)
    out[t] = fit_frame(frames.data.data() + size_t(t) * frame_sz, scene, opt);
  return out;
}

std::vector<CameraPose> relative_to_first(const std::vector<CameraPose>& poses) {
  std::vector<CameraPose> out;
  out.reserve(poses.size());
  const CameraPose inv0 = inverse(poses.front());
  for (const auto& p : poses) out.push_back(compose(p, inv0));
  return out;
}

// Plain per-frame means; expressing both trajectories relative to their first
// camera is the caller's job (evaluate_video does it via relative_to_first).
double translation_error(const std::vector<CameraPose>& pred,
                         const std::vector<CameraPose>& gt) {
  if (pred.size() != gt.size() || pred.empty())
    throw std::invalid_argument("translation_error: trajectory length mismatch");
  double s = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    s += (pred[i].translation - gt[i].translation).norm();
  return s / double(pred.size());
}

double rotation_error(const std::vector<CameraPose>& pred,
                      const std::vector<CameraPose>& gt) {
  if (pred.size() != gt.size() || pred.empty())
    throw std::invalid_argument("rotation_error: trajectory length mismatch");
  double s = 0;
  for (size_t i = 0; i < pred.size(); ++i) s += pair_rotation_angle(pred[i], gt[i]);
  return s / double(pred.size());
}

EvalReport evaluate_video(const VideoFrames& video, const SceneSample& scene,
                          const RecoveryOptions& opt) {
  EvalReport r;
  const int T = video.t;
  const size_t frame_sz = size_t(video.height) * video.width * 3;
  double psum = 0, ssum = 0, pmid = 0;
  for (int t = 0; t < T; ++t) {
    std::vector<float> pred(video.data.begin() + t * frame_sz,
                            video.data.begin() + (t + 1) * frame_sz);
    const double p = psnr(pred, scene.frames[t].rgb);
    const double s = ssim(pred, scene.frames[t].rgb, video.height, video.width);
    r.psnr_per_frame.push_back(p);
    r.ssim_per_frame.push_back(s);
    psum += p;
    ssum += s;
    if (t > 0 && t < T - 1) pmid += p;
  }
  r.psnr_mean = psum / T;
  r.ssim_mean = ssum / T;
  r.psnr_mid_mean = T > 2 ? pmid / (T - 2) : r.psnr_mean;

  const auto recovered = recover_trajectory(video, scene, opt);
  std::vector<CameraPose> pred_poses;
  for (const auto& rp : recovered) {
    pred_poses.push_back(rp.pose);
    r.unreliable.push_back(rp.unreliable);
  }
  const auto rel_p = relative_to_first(pred_poses);
  const auto rel_g = relative_to_first(scene.poses);
  r.e_t = translation_error(rel_p, rel_g);
  r.e_r = rotation_error(rel_p, rel_g);
  for (size_t i = 0; i < rel_p.size(); ++i) {
    r.per_frame_trans_err.push_back((rel_p[i].translation - rel_g[i].translation).norm());
    r.per_frame_rot_err.push_back(pair_rotation_angle(rel_p[i], rel_g[i]));
  }
  return r;
}

}  // namespace confctrl
