#pragma once

#include <cstdint>
#include <stdexcept>

#include "confctrl/geometry.hpp"

namespace confctrl {

struct SceneSpec {
  uint64_t seed = 0;
  int num_points = 512;
  int height = 32, width = 32;
  int num_frames = 9;               // odd, so a middle frame exists
  double depth_noise_sigma = 0.05;  // world units, along the first camera's rays
  double conf_sharpness = 2.0;
  double trajectory_spread = 0.6;   // radians, max endpoint rotation
  double focal = 40.0;              // pixels, at the 32x32 reference size

  void validate() const {
    if (num_frames < 3 || num_frames % 2 == 0)
      throw std::invalid_argument("scene spec: num_frames must be odd and >= 3");
    if (height < 8 || width < 8)
      throw std::invalid_argument("scene spec: resolution must be >= 8");
    if (depth_noise_sigma < 0)
      throw std::invalid_argument("scene spec: sigma must be >= 0");
  }
};

// Per-frame pixel track of one world point, for pose recovery.
struct Correspondence {
  Eigen::Vector3d world;
  std::vector<Eigen::Vector2d> pixels;  // one per frame (continuous coords)
};

struct SceneSample {
  SceneSpec spec;
  CameraIntrinsics intrinsics;
  std::vector<CameraPose> poses;          // T world-to-camera
  std::vector<ProjectionFrame> frames;    // renders of clean_cloud
  ConfidentPointCloud clean_cloud;        // confidence == 1
  ConfidentPointCloud noisy_cloud;
  std::vector<Correspondence> correspondences;
};

struct SceneGenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic for a given spec. Throws SceneGenerationError when 16
// attempts fail to keep >= 50% of points inside every frame's frustum.
SceneSample make_scene(const SceneSpec& spec);

// Positional perturbation along the first camera's view rays; confidence
// exp(-sharpness * |delta| / sigma) is informative about per-point error.
ConfidentPointCloud corrupt_cloud(const ConfidentPointCloud& clean,
                                  const CameraPose& first_cam,
                                  double sigma, double sharpness, uint64_t seed);

}  // namespace confctrl
