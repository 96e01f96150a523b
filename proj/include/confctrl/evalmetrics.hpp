#pragma once

#include <vector>

#include "confctrl/geometry.hpp"
#include "confctrl/latentcodec.hpp"
#include "confctrl/scenegen.hpp"

namespace confctrl {

// 10*log10(1/MSE), capped at 99 dB when MSE < 1e-10. Images H x W x 3 in [0,1].
double psnr(const std::vector<float>& pred, const std::vector<float>& gt);

// Standard SSIM index, 8x8 non-overlapping uniform windows, K1 = 0.01,
// K2 = 0.03, dynamic range 1.0, averaged over windows and channels.
double ssim(const std::vector<float>& pred, const std::vector<float>& gt, int h, int w);

struct RecoveredPose {
  CameraPose pose;
  double residual = 0;   // mean squared photometric error at the optimum
  double coverage = 0;   // fraction of pixels covered by the fitted render
  bool unreliable = false;
};

struct RecoveryOptions {
  int grid_steps = 64;            // coarse sweep over s in {0, 1/64, ..., 1}
  int descent_rounds = 24;
  double residual_threshold = 0.01;
  double coverage_threshold = 0.01;
};

// Photometric pose fitting against renders of the scene's clean cloud:
// coarse sweep over the endpoint-interpolation parameter, then local 6-DoF
// coordinate descent. Ties in the sweep break toward smaller s.
std::vector<RecoveredPose> recover_trajectory(const VideoFrames& frames,
                                              const SceneSample& scene,
                                              const RecoveryOptions& opt = {});

// Re-expresses a trajectory relative to its own first camera.
std::vector<CameraPose> relative_to_first(const std::vector<CameraPose>& poses);

// Mean Euclidean / geodesic per-frame errors. Both trajectories are expected
// to already share a frame of reference; evaluate_video normalizes each with
// relative_to_first before calling these.
double translation_error(const std::vector<CameraPose>& pred,
                         const std::vector<CameraPose>& gt);
double rotation_error(const std::vector<CameraPose>& pred,
                      const std::vector<CameraPose>& gt);

struct EvalReport {
  std::vector<double> psnr_per_frame;
  std::vector<double> ssim_per_frame;
  double psnr_mean = 0, ssim_mean = 0;
  double psnr_mid_mean = 0;  // intermediate frames only (endpoints excluded)
  double e_t = 0, e_r = 0;
  std::vector<double> per_frame_trans_err, per_frame_rot_err;
  std::vector<bool> unreliable;
};

EvalReport evaluate_video(const VideoFrames& video, const SceneSample& scene,
                          const RecoveryOptions& opt = {});

}  // namespace confctrl
