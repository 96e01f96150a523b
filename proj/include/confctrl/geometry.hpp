#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <limits>
#include <stdexcept>
#include <vector>

namespace confctrl {

// Conventions used throughout: world-to-camera poses, +z forward, pixel
// (0,0) at the top-left, pixel centers at integer + 0.5.

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const {
    if (fx <= 0 || fy <= 0) throw std::invalid_argument("intrinsics: focal lengths must be positive");
    if (width < 1 || height < 1) throw std::invalid_argument("intrinsics: image size must be >= 1");
  }

  // Same camera observed on a grid downscaled by an integer factor.
  CameraIntrinsics scaled(int factor) const {
    return {fx / factor, fy / factor, cx / factor, cy / factor,
            width / factor, height / factor};
  }
};

struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world-to-camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& world) const {
    return rotation * world + translation;
  }
  Eigen::Vector3d camera_center() const {
    return -(rotation.transpose() * translation);
  }
  void validate(double tol = 1e-6) const;

  static CameraPose identity() { return {}; }
};

CameraPose compose(const CameraPose& a, const CameraPose& b);
CameraPose inverse(const CameraPose& a);

// Slerp on rotations (shortest arc), lerp on translations. s in [0,1].
CameraPose interpolate_pose(const CameraPose& a, const CameraPose& b, double s);

struct ConfidentPointCloud {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3f> colors;      // [0,1]
  std::vector<float> confidence;            // [0,1]

  size_t size() const { return positions.size(); }
};

struct PluckerImage {
  int height = 0, width = 0;
  std::vector<Eigen::Vector3d> directions;  // row-major H*W, unit norm
  std::vector<Eigen::Vector3d> moments;     // m = c x d

  const Eigen::Vector3d& dir(int y, int x) const { return directions[size_t(y) * width + x]; }
  const Eigen::Vector3d& mom(int y, int x) const { return moments[size_t(y) * width + x]; }
};

PluckerImage plucker_embedding(const CameraPose& pose, const CameraIntrinsics& intr);

inline constexpr float kDepthSentinel = std::numeric_limits<float>::infinity();
inline constexpr double kNearPlane = 1e-4;

struct ProjectionFrame {
  int height = 0, width = 0;
  std::vector<float> rgb;      // H*W*3
  std::vector<float> depth;    // H*W, +inf where empty
  std::vector<float> conf;     // H*W
  std::vector<uint8_t> mask;   // H*W, 1 = covered

  float* px(int y, int x) { return &rgb[(size_t(y) * width + x) * 3]; }
  const float* px(int y, int x) const { return &rgb[(size_t(y) * width + x) * 3]; }
};

// Nearest-pixel point splatting with a z-buffer. Points with camera-space
// depth <= kNearPlane are culled. The winning point's color and confidence
// fill the pixel; no blending.
ProjectionFrame project_point_cloud(const ConfidentPointCloud& pc,
                                    const CameraPose& pose,
                                    const CameraIntrinsics& intr);

struct KabschDegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Least-squares rigid transform (no scale) mapping src onto dst.
// Throws KabschDegenerateError for N < 3 or collinear/coincident input.
CameraPose kabsch_align(const std::vector<Eigen::Vector3d>& src,
                        const std::vector<Eigen::Vector3d>& dst);

}  // namespace confctrl
