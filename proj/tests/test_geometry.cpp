#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "confctrl/geometry.hpp"
#include "confctrl/rng.hpp"

using namespace confctrl;

namespace {

CameraPose random_pose(Rng& rng) {
  const Eigen::Vector3d axis =
      Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
  CameraPose p;
  p.rotation = Eigen::AngleAxisd(rng.uniform(-3.0, 3.0), axis).toRotationMatrix();
  p.translation = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  return p;
}

ConfidentPointCloud random_cloud(Rng& rng, int n) {
  ConfidentPointCloud pc;
  for (int i = 0; i < n; ++i) {
    pc.positions.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    pc.colors.emplace_back(float(rng.next_float()), float(rng.next_float()),
                           float(rng.next_float()));
    pc.confidence.push_back(rng.next_float());
  }
  return pc;
}

}  // namespace

TEST_CASE("pose compose/inverse algebra") {
  Rng rng(1, "pose");
  for (int i = 0; i < 50; ++i) {
    const CameraPose a = random_pose(rng), b = random_pose(rng);
    const Eigen::Vector3d x(rng.normal(), rng.normal(), rng.normal());
    // compose applies b first, then a
    CHECK((compose(a, b).apply(x) - a.apply(b.apply(x))).norm() < 1e-12);
    CHECK((compose(a, inverse(a)).rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK(compose(a, inverse(a)).translation.norm() < 1e-12);
    CHECK((inverse(a).apply(a.apply(x)) - x).norm() < 1e-12);
    CHECK((a.apply(a.camera_center())).norm() < 1e-12);
  }
}

TEST_CASE("pose interpolation") {
  Rng rng(2, "slerp");
  const CameraPose a = random_pose(rng), b = random_pose(rng);
  // endpoints are returned exactly, not via quaternion round-trip
  CHECK(interpolate_pose(a, b, 0.0).rotation == a.rotation);
  CHECK(interpolate_pose(a, b, 1.0).rotation == b.rotation);

  // halfway between identity and a z-rotation by theta is a z-rotation by theta/2
  const double theta = 1.2;
  CameraPose id, rz;
  rz.rotation = Eigen::AngleAxisd(theta, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  rz.translation = Eigen::Vector3d(2, 0, 0);
  const CameraPose mid = interpolate_pose(id, rz, 0.5);
  const Eigen::Matrix3d expect =
      Eigen::AngleAxisd(theta / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  CHECK((mid.rotation - expect).norm() < 1e-12);
  CHECK((mid.translation - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);
  mid.validate();

  // shortest arc: interpolating between nearly opposite quaternion signs
  for (double s : {0.25, 0.5, 0.75}) {
    const CameraPose p = interpolate_pose(a, b, s);
    p.validate();
    CHECK(std::abs(p.rotation.determinant() - 1.0) < 1e-9);
  }
}

TEST_CASE("plucker embedding properties on random cameras") {
  Rng rng(3, "plucker");
  const CameraIntrinsics intr{20.0, 22.0, 8.0, 7.5, 16, 15};
  for (int trial = 0; trial < 20; ++trial) {
    const CameraPose pose = random_pose(rng);
    const PluckerImage pl = plucker_embedding(pose, intr);
    REQUIRE(pl.width == 16);
    REQUIRE(pl.height == 15);
    const Eigen::Vector3d c = pose.camera_center();
    for (int i = 0; i < 50; ++i) {
      const int y = int(rng.next_below(15)), x = int(rng.next_below(16));
      const Eigen::Vector3d d = pl.dir(y, x), m = pl.mom(y, x);
      CHECK(std::abs(d.norm() - 1.0) < 1e-12);   // unit direction
      CHECK(std::abs(d.dot(m)) < 1e-12);         // moment orthogonal to direction
      CHECK((c.cross(d) - m).norm() < 1e-12);    // m = c x d
      // any point on the ray reproduces the moment
      const Eigen::Vector3d p = c + rng.uniform(0.1, 5.0) * d;
      CHECK((p.cross(d) - m).norm() < 1e-9);
    }
    // the pixel containing the principal point looks along the optical axis
    const Eigen::Vector3d axis = pose.rotation.transpose() * Eigen::Vector3d(0, 0, 1);
    // pixel (x=8, y=7) center is (8.5, 7.5); cx = 8.0, cy = 7.5
    const Eigen::Vector3d dir_cam(0.5 / intr.fx, 0.0, 1.0);
    const Eigen::Vector3d expect = (pose.rotation.transpose() * dir_cam).normalized();
    CHECK((pl.dir(7, 8) - expect).norm() < 1e-12);
    CHECK(pl.dir(7, 8).dot(axis) > 0.99);
  }
}

TEST_CASE("z-buffer projection matches an exhaustive per-pixel oracle") {
  Rng rng(4, "zbuf");
  const CameraIntrinsics intr{10.0, 10.0, 4.0, 4.0, 8, 8};
  for (int trial = 0; trial < 100; ++trial) {
    CameraPose pose = random_pose(rng);
    pose.translation = Eigen::Vector3d(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
                                       rng.uniform(1.5, 3.0));
    const ConfidentPointCloud pc = random_cloud(rng, 60);
    const ProjectionFrame f = project_point_cloud(pc, pose, intr);

    // oracle: first point (in input order) with strictly smallest depth wins
    std::map<std::pair<int, int>, size_t> winner;
    for (size_t i = 0; i < pc.size(); ++i) {
      const Eigen::Vector3d cam = pose.apply(pc.positions[i]);
      if (cam.z() <= kNearPlane) continue;
      const int px = int(std::floor(intr.fx * cam.x() / cam.z() + intr.cx));
      const int py = int(std::floor(intr.fy * cam.y() / cam.z() + intr.cy));
      if (px < 0 || px >= 8 || py < 0 || py >= 8) continue;
      const auto key = std::make_pair(py, px);
      auto it = winner.find(key);
      if (it == winner.end()) {
        winner[key] = i;
      } else {
        const float d_new = float(cam.z());
        const float d_old = float(pose.apply(pc.positions[it->second]).z());
        if (d_new < d_old) it->second = i;
      }
    }
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const size_t idx = size_t(y) * 8 + x;
        auto it = winner.find({y, x});
        if (it == winner.end()) {
          CHECK(f.mask[idx] == 0);
          CHECK(f.depth[idx] == kDepthSentinel);
          CHECK(f.conf[idx] == 0.0f);
        } else {
          REQUIRE(f.mask[idx] == 1);
          CHECK(f.conf[idx] == pc.confidence[it->second]);
          CHECK(f.rgb[idx * 3 + 0] == pc.colors[it->second].x());
          CHECK(f.depth[idx] == float(pose.apply(pc.positions[it->second]).z()));
        }
      }
  }
}

TEST_CASE("projection is equivariant under a rigid world transform") {
  Rng rng(5, "equiv");
  const CameraIntrinsics intr{12.0, 12.0, 6.0, 6.0, 12, 12};
  for (int trial = 0; trial < 10; ++trial) {
    CameraPose pose = random_pose(rng);
    pose.translation.z() += 2.5;
    ConfidentPointCloud pc = random_cloud(rng, 80);
    const ProjectionFrame ref = project_point_cloud(pc, pose, intr);

    const CameraPose g = random_pose(rng);  // world-to-world rigid motion
    ConfidentPointCloud moved = pc;
    for (auto& p : moved.positions) p = g.apply(p);
    const CameraPose pose2 = compose(pose, inverse(g));
    const ProjectionFrame out = project_point_cloud(moved, pose2, intr);

    CHECK(out.mask == ref.mask);
    CHECK(out.rgb == ref.rgb);
    CHECK(out.conf == ref.conf);
    for (size_t i = 0; i < ref.depth.size(); ++i)
      if (ref.mask[i])
        CHECK(out.depth[i] == doctest::Approx(ref.depth[i]).epsilon(1e-5));
  }
}

TEST_CASE("near-plane culling") {
  ConfidentPointCloud pc;
  pc.positions.emplace_back(0.0, 0.0, -1.0);    // behind the camera
  pc.positions.emplace_back(0.0, 0.0, 5e-5);    // in front but inside the near plane
  pc.positions.emplace_back(0.0, 0.0, 1.0);
  pc.colors.assign(3, Eigen::Vector3f(1, 1, 1));
  pc.confidence.assign(3, 1.0f);
  const CameraIntrinsics intr{4.0, 4.0, 2.0, 2.0, 4, 4};
  const ProjectionFrame f = project_point_cloud(pc, CameraPose::identity(), intr);
  int covered = 0;
  for (uint8_t m : f.mask) covered += m;
  CHECK(covered == 1);
  CHECK(f.depth[2 * 4 + 2] == 1.0f);
}

TEST_CASE("kabsch recovers a random rigid transform") {
  Rng rng(6, "kabsch");
  for (int trial = 0; trial < 30; ++trial) {
    const CameraPose g = random_pose(rng);
    std::vector<Eigen::Vector3d> src, dst;
    for (int i = 0; i < 10; ++i) {
      src.emplace_back(rng.normal(), rng.normal(), rng.normal());
      dst.push_back(g.apply(src.back()));
    }
    const CameraPose fit = kabsch_align(src, dst);
    CHECK((fit.rotation - g.rotation).norm() < 1e-9);
    CHECK((fit.translation - g.translation).norm() < 1e-9);
  }
}

TEST_CASE("kabsch degenerate inputs throw") {
  std::vector<Eigen::Vector3d> two{{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(kabsch_align(two, two), KabschDegenerateError);

  std::vector<Eigen::Vector3d> line, line_dst;
  for (int i = 0; i < 5; ++i) {
    line.emplace_back(double(i), 0.0, 0.0);
    line_dst.emplace_back(0.0, double(i), 0.0);
  }
  CHECK_THROWS_AS(kabsch_align(line, line_dst), KabschDegenerateError);

  std::vector<Eigen::Vector3d> same(4, Eigen::Vector3d(1, 2, 3));
  CHECK_THROWS_AS(kabsch_align(same, same), KabschDegenerateError);

  std::vector<Eigen::Vector3d> a(3), b(4);
  CHECK_THROWS_AS(kabsch_align(a, b), std::invalid_argument);
}

TEST_CASE("kabsch is the least-squares optimum under noise") {
  Rng rng(7, "kabsch-noise");
  const CameraPose g = random_pose(rng);
  std::vector<Eigen::Vector3d> src, dst;
  for (int i = 0; i < 40; ++i) {
    src.emplace_back(rng.normal(), rng.normal(), rng.normal());
    dst.push_back(g.apply(src.back()) +
                  0.01 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()));
  }
  const CameraPose fit = kabsch_align(src, dst);
  auto residual = [&](const CameraPose& p) {
    double s = 0;
    for (size_t i = 0; i < src.size(); ++i) s += (p.apply(src[i]) - dst[i]).squaredNorm();
    return s;
  };
  const double r_fit = residual(fit);
  // perturbing the fit must not improve the residual
  for (int i = 0; i < 20; ++i) {
    CameraPose p = fit;
    p.rotation = Eigen::AngleAxisd(
                     0.01, Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal())
                               .normalized()) *
                 p.rotation;
    p.translation += 0.01 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    CHECK(residual(p) >= r_fit);
  }
}

TEST_CASE("intrinsics validation and scaling") {
  CameraIntrinsics bad{0.0, 1.0, 0.0, 0.0, 4, 4};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  const CameraIntrinsics intr{40.0, 40.0, 16.0, 16.0, 32, 32};
  const CameraIntrinsics half = intr.scaled(2);
  CHECK(half.fx == 20.0);
  CHECK(half.cx == 8.0);
  CHECK(half.width == 16);
}
