#include "confctrl/scenegen.hpp"

#include <algorithm>
#include <cmath>

#include "confctrl/rng.hpp"

namespace confctrl {

namespace {

Eigen::Vector3d random_unit(Rng& rng) {
  for (;;) {
    Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
    const double n = v.norm();
    if (n > 1e-6) return v / n;
  }
}

CameraPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  Eigen::Vector3d fwd = (target - eye).normalized();
  Eigen::Vector3d up(0, -1, 0);
  if (std::abs(fwd.dot(up)) > 0.99) up = Eigen::Vector3d(1, 0, 0);
  const Eigen::Vector3d right = up.cross(fwd).normalized();
  const Eigen::Vector3d down = fwd.cross(right);
  CameraPose p;
  p.rotation.row(0) = right;
  p.rotation.row(1) = down;
  p.rotation.row(2) = fwd;
  p.translation = -(p.rotation * eye);
  return p;
}

ConfidentPointCloud sample_cloud(const SceneSpec& spec, Rng& rng) {
  ConfidentPointCloud pc;
  pc.positions.reserve(spec.num_points);
  pc.colors.reserve(spec.num_points);
  pc.confidence.assign(spec.num_points, 1.0f);

  const int n_slab = spec.num_points / 4;
  const int n_blob_points = spec.num_points - n_slab;
  const int n_blobs = 3 + int(rng.next_below(4));
  struct Blob {
    Eigen::Vector3d center;
    double radius;
    Eigen::Vector3f color;
  };
  std::vector<Blob> blobs(n_blobs);
  for (auto& b : blobs) {
    b.center = Eigen::Vector3d(rng.uniform(-0.55, 0.55), rng.uniform(-0.45, 0.35),
                               rng.uniform(-0.55, 0.55));
    b.radius = rng.uniform(0.12, 0.3);
    b.color = Eigen::Vector3f(float(rng.uniform(0.15, 1.0)),
                              float(rng.uniform(0.15, 1.0)),
                              float(rng.uniform(0.15, 1.0)));
  }
  for (int i = 0; i < n_blob_points; ++i) {
    const Blob& b = blobs[i % n_blobs];
    Eigen::Vector3d p = b.center + b.radius * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    pc.positions.push_back(p);
    Eigen::Vector3f c = b.color;
    for (int k = 0; k < 3; ++k)
      c[k] = std::clamp(c[k] + float(rng.uniform(-0.08, 0.08)), 0.0f, 1.0f);
    pc.colors.push_back(c);
  }
  // ground-plane slab under the blobs
  for (int i = 0; i < n_slab; ++i) {
    pc.positions.emplace_back(rng.uniform(-0.9, 0.9), 0.55 + rng.uniform(-0.02, 0.02),
                              rng.uniform(-0.9, 0.9));
    const float g = float(rng.uniform(0.25, 0.55));
    pc.colors.emplace_back(g, g, float(std::clamp(g + 0.1, 0.0, 1.0)));
  }
  return pc;
}

// Positions are stored as f32 on disk; quantize up front so a reloaded
// scene renders pixel-identically to the in-memory one.
void quantize_positions(ConfidentPointCloud& pc) {
  for (auto& p : pc.positions)
    p = Eigen::Vector3f(p.cast<float>()).cast<double>();
}

bool in_frustum(const Eigen::Vector3d& p, const CameraPose& pose,
                const CameraIntrinsics& intr) {
  const Eigen::Vector3d cam = pose.apply(p);
  if (cam.z() <= kNearPlane) return false;
  const double u = intr.fx * cam.x() / cam.z() + intr.cx;
  const double v = intr.fy * cam.y() / cam.z() + intr.cy;
  return u >= 0 && u < intr.width && v >= 0 && v < intr.height;
}

Eigen::Vector2d project_px(const Eigen::Vector3d& p, const CameraPose& pose,
                           const CameraIntrinsics& intr) {
  const Eigen::Vector3d cam = pose.apply(p);
  return {intr.fx * cam.x() / cam.z() + intr.cx,
          intr.fy * cam.y() / cam.z() + intr.cy};
}

bool try_make_scene(const SceneSpec& spec, uint64_t sub_seed, SceneSample& out) {
  Rng rng(sub_seed, "scene");
  out = SceneSample{};
  out.spec = spec;
  out.intrinsics = {spec.focal * spec.width / 32.0, spec.focal * spec.height / 32.0,
                    spec.width / 2.0, spec.height / 2.0, spec.width, spec.height};

  out.clean_cloud = sample_cloud(spec, rng);
  quantize_positions(out.clean_cloud);
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : out.clean_cloud.positions) centroid += p;
  centroid /= double(out.clean_cloud.size());

  const double radius = rng.uniform(2.0, 2.6);
  const Eigen::Vector3d dir_a = random_unit(rng);
  const Eigen::Vector3d axis = random_unit(rng);
  const double angle = rng.uniform(0.5, 1.0) * spec.trajectory_spread;
  const Eigen::Vector3d dir_b = Eigen::AngleAxisd(angle, axis) * dir_a;

  const CameraPose pose_a = look_at(centroid + radius * dir_a, centroid);
  const CameraPose pose_b = look_at(centroid + radius * dir_b, centroid);

  const int T = spec.num_frames;
  out.poses.resize(T);
  for (int t = 0; t < T; ++t)
    out.poses[t] = interpolate_pose(pose_a, pose_b, double(t) / (T - 1));

  // keep the scene visible along the whole trajectory
  std::vector<uint8_t> all_visible(out.clean_cloud.size(), 1);
  size_t n_all = 0;
  for (size_t i = 0; i < out.clean_cloud.size(); ++i) {
    for (int t = 0; t < T; ++t) {
      if (!in_frustum(out.clean_cloud.positions[i], out.poses[t], out.intrinsics)) {
        all_visible[i] = 0;
        break;
      }
    }
    n_all += all_visible[i];
  }
  if (n_all * 2 < out.clean_cloud.size()) return false;

  out.frames.reserve(T);
  for (int t = 0; t < T; ++t)
    out.frames.push_back(project_point_cloud(out.clean_cloud, out.poses[t], out.intrinsics));

  out.noisy_cloud = corrupt_cloud(out.clean_cloud, out.poses[0], spec.depth_noise_sigma,
                                  spec.conf_sharpness, Rng::derive(sub_seed, "corrupt", 0));
  quantize_positions(out.noisy_cloud);

  const size_t max_corr = 32;
  const size_t stride = std::max<size_t>(1, n_all / max_corr);
  for (size_t i = 0, kept = 0; i < out.clean_cloud.size() && out.correspondences.size() < max_corr; ++i) {
    if (!all_visible[i]) continue;
    if (kept++ % stride != 0) continue;
    Correspondence c;
    c.world = out.clean_cloud.positions[i];
    c.pixels.reserve(T);
    for (int t = 0; t < T; ++t)
      c.pixels.push_back(project_px(c.world, out.poses[t], out.intrinsics));
    out.correspondences.push_back(std::move(c));
  }
  return out.correspondences.size() >= 8;
}

}  // namespace

ConfidentPointCloud corrupt_cloud(const ConfidentPointCloud& clean,
                                  const CameraPose& first_cam,
                                  double sigma, double sharpness, uint64_t seed) {
  if (sigma < 0) throw std::invalid_argument("corrupt_cloud: sigma must be >= 0");
  ConfidentPointCloud out = clean;
  out.confidence.assign(clean.size(), 1.0f);
  if (sigma == 0) return out;

  Rng rng(seed, "corrupt-cloud");
  const Eigen::Vector3d center = first_cam.camera_center();
  for (size_t i = 0; i < out.size(); ++i) {
    Eigen::Vector3d ray = out.positions[i] - center;
    const double n = ray.norm();
    if (n > 1e-12) ray /= n;
    const double delta = sigma * rng.normal();
    out.positions[i] += delta * ray;
    out.confidence[i] = float(std::exp(-sharpness * std::abs(delta) / sigma));
  }
  return out;
}

SceneSample make_scene(const SceneSpec& spec) {
  spec.validate();
  for (int attempt = 0; attempt < 16; ++attempt) {
    SceneSample out;
    if (try_make_scene(spec, Rng::derive(spec.seed, "scene-attempt", attempt), out))
      return out;
  }
  throw SceneGenerationError("make_scene: no valid trajectory after 16 attempts");
}

}  // namespace confctrl
