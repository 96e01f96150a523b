#include "confctrl/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace confctrl {

void CameraPose::validate(double tol) const {
  const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
  if (err.cwiseAbs().maxCoeff() >= tol)
    throw std::invalid_argument("pose: rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) >= tol)
    throw std::invalid_argument("pose: rotation determinant is not +1");
}

CameraPose compose(const CameraPose& a, const CameraPose& b) {
  // x -> a(b(x))
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

CameraPose inverse(const CameraPose& a) {
  CameraPose out;
  out.rotation = a.rotation.transpose();
  out.translation = -(out.rotation * a.translation);
  return out;
}

CameraPose interpolate_pose(const CameraPose& a, const CameraPose& b, double s) {
  Eigen::Quaterniond qa(a.rotation), qb(b.rotation);
  if (qa.dot(qb) < 0) qb.coeffs() = -qb.coeffs();  // shortest arc
  Eigen::Quaterniond q = qa.slerp(s, qb);
  CameraPose out;
  out.rotation = q.normalized().toRotationMatrix();
  out.translation = (1.0 - s) * a.translation + s * b.translation;
  if (s == 0.0) out = a;
  if (s == 1.0) out = b;
  return out;
}

PluckerImage plucker_embedding(const CameraPose& pose, const CameraIntrinsics& intr) {
  intr.validate();
  PluckerImage out;
  out.height = intr.height;
  out.width = intr.width;
  out.directions.resize(size_t(intr.height) * intr.width);
  out.moments.resize(size_t(intr.height) * intr.width);
  const Eigen::Matrix3d r_c2w = pose.rotation.transpose();
  const Eigen::Vector3d center = pose.camera_center();
  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      const Eigen::Vector3d dir_cam((x + 0.5 - intr.cx) / intr.fx,
                                    (y + 0.5 - intr.cy) / intr.fy, 1.0);
      const Eigen::Vector3d d = (r_c2w * dir_cam).normalized();
      out.directions[size_t(y) * intr.width + x] = d;
      out.moments[size_t(y) * intr.width + x] = center.cross(d);
    }
  }
  return out;
}

ProjectionFrame project_point_cloud(const ConfidentPointCloud& pc,
                                    const CameraPose& pose,
                                    const CameraIntrinsics& intr) {
  intr.validate();
  ProjectionFrame f;
  f.height = intr.height;
  f.width = intr.width;
  const size_t n_px = size_t(intr.height) * intr.width;
  f.rgb.assign(n_px * 3, 0.0f);
  f.depth.assign(n_px, kDepthSentinel);
  f.conf.assign(n_px, 0.0f);
  f.mask.assign(n_px, 0);

  for (size_t i = 0; i < pc.size(); ++i) {
    const Eigen::Vector3d cam = pose.apply(pc.positions[i]);
    if (cam.z() <= kNearPlane) continue;
    const double u = intr.fx * cam.x() / cam.z() + intr.cx;
    const double v = intr.fy * cam.y() / cam.z() + intr.cy;
    const int px = static_cast<int>(std::floor(u));
    const int py = static_cast<int>(std::floor(v));
    if (px < 0 || px >= intr.width || py < 0 || py >= intr.height) continue;
    const size_t idx = size_t(py) * intr.width + px;
    const float depth = static_cast<float>(cam.z());
    if (depth < f.depth[idx]) {
      f.depth[idx] = depth;
      f.mask[idx] = 1;
      f.conf[idx] = pc.confidence[i];
      f.rgb[idx * 3 + 0] = pc.colors[i].x();
      f.rgb[idx * 3 + 1] = pc.colors[i].y();
      f.rgb[idx * 3 + 2] = pc.colors[i].z();
    }
  }
  return f;
}

CameraPose kabsch_align(const std::vector<Eigen::Vector3d>& src,
                        const std::vector<Eigen::Vector3d>& dst) {
  if (src.size() != dst.size())
    throw std::invalid_argument("kabsch: size mismatch");
  const size_t n = src.size();
  if (n < 3) throw KabschDegenerateError("kabsch: need at least 3 points");

  Eigen::Vector3d c_src = Eigen::Vector3d::Zero(), c_dst = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    c_src += src[i];
    c_dst += dst[i];
  }
  c_src /= double(n);
  c_dst /= double(n);

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  double spread = 0;
  for (size_t i = 0; i < n; ++i) {
    h += (src[i] - c_src) * (dst[i] - c_dst).transpose();
    spread += (src[i] - c_src).squaredNorm();
  }
  if (spread < 1e-18) throw KabschDegenerateError("kabsch: coincident points");

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  // Collinear source points leave the rotation about the line unconstrained.
  const Eigen::Vector3d sv = svd.singularValues();
  if (sv(1) < 1e-9 * std::max(sv(0), 1e-300))
    throw KabschDegenerateError("kabsch: collinear points");

  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(2, 2) = -1;
  CameraPose out;
  out.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  out.translation = c_dst - out.rotation * c_src;
  return out;
}

}  // namespace confctrl
