#include "relnav/pnp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "relnav/error.hpp"

namespace relnav {

namespace {

struct Correspondence {
  Vec3 point;  // landmark in F
  Vec2 ray;    // normalized image coordinates in the camera frame
  Vec2 pixel;
  double sigma;
};

// Camera-from-follower pose: p_C = R p_F + t.
struct CamPose {
  Mat3 R;
  Vec3 t;
};

std::optional<CamPose> from_homography(const std::vector<Correspondence>& c, const Vec3& centroid, const Mat3& basis) {
  const int n = static_cast<int>(c.size());
  Eigen::MatrixXd A(2 * n, 9);
  for (int k = 0; k < n; ++k) {
    const Vec3 q = basis.transpose() * (c[k].point - centroid);
    const double X = q.x(), Y = q.y(), u = c[k].ray.x(), v = c[k].ray.y();
    A.row(2 * k) << X, Y, 1.0, 0.0, 0.0, 0.0, -u * X, -u * Y, -u;
    A.row(2 * k + 1) << 0.0, 0.0, 0.0, X, Y, 1.0, -v * X, -v * Y, -v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 H;
  H << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const double scale = 2.0 / (H.col(0).norm() + H.col(1).norm());
  H *= scale;
  if (H(2, 2) < 0.0) H = -H;  // plane origin must be in front of the camera
  Mat3 M;
  M.col(0) = H.col(0);
  M.col(1) = H.col(1);
  M.col(2) = H.col(0).cross(H.col(1));
  const Mat3 Rp = so3::orthonormalize(M);
  if (!std::isfinite(Rp.sum())) return std::nullopt;
  CamPose pose;
  pose.R = Rp * basis.transpose();
  pose.t = H.col(2) - pose.R * centroid;
  return pose;
}

std::optional<CamPose> from_dlt(const std::vector<Correspondence>& c) {
  const int n = static_cast<int>(c.size());
  Eigen::MatrixXd A(2 * n, 12);
  for (int k = 0; k < n; ++k) {
    const Eigen::Vector4d X(c[k].point.x(), c[k].point.y(), c[k].point.z(), 1.0);
    const double u = c[k].ray.x(), v = c[k].ray.y();
    A.row(2 * k) << X.transpose(), Eigen::RowVector4d::Zero(), -u * X.transpose();
    A.row(2 * k + 1) << Eigen::RowVector4d::Zero(), X.transpose(), -v * X.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd p = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> P;
  P << p.segment<4>(0).transpose(), p.segment<4>(4).transpose(), p.segment<4>(8).transpose();
  Mat3 M = P.leftCols<3>();
  double s = std::cbrt(M.determinant());
  if (std::abs(s) < 1e-15) return std::nullopt;
  P /= s;
  M = P.leftCols<3>();
  CamPose pose;
  pose.R = so3::orthonormalize(M);
  pose.t = P.col(3);
  return pose;
}

double refine(const std::vector<Correspondence>& c, CamPose& pose) {
  auto rms = [&](const CamPose& q) {
    double e = 0.0;
    for (const auto& k : c) {
      const Vec3 pc = q.R * k.point + q.t;
      if (pc.z() <= kMinDepth) return std::numeric_limits<double>::infinity();
      e += (pc.head<2>() / pc.z() - k.ray).squaredNorm();
    }
    return std::sqrt(e / c.size());
  };
  double err = rms(pose);
  for (int it = 0; it < 10 && std::isfinite(err); ++it) {
    Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
    for (const auto& k : c) {
      const Vec3 pc = pose.R * k.point + pose.t;
      const double iz = 1.0 / pc.z();
      Eigen::Matrix<double, 2, 3> dpi;
      dpi << iz, 0.0, -pc.x() * iz * iz, 0.0, iz, -pc.y() * iz * iz;
      Eigen::Matrix<double, 2, 6> J;
      J.leftCols<3>() = dpi * (-pose.R * so3::skew(k.point));
      J.rightCols<3>() = dpi;
      const Vec2 r = pc.head<2>() * iz - k.ray;
      H += J.transpose() * J;
      b += J.transpose() * r;
    }
    const Eigen::Matrix<double, 6, 1> d = H.ldlt().solve(-b);
    if (!d.allFinite()) break;
    CamPose next{pose.R * so3::exp_map(d.head<3>()), pose.t + d.tail<3>()};
    const double next_err = rms(next);
    if (!(next_err <= err)) break;
    pose = next;
    err = next_err;
    if (d.norm() < 1e-12) break;
  }
  return err;
}

}  // namespace

PnpResult pnp_initialize(std::span<const FeatureObservation> observations, const std::map<int, Vec3>& landmarks,
                         const CameraModel& cam) {
  std::vector<Correspondence> c;
  for (const auto& obs : observations) {
    const auto it = landmarks.find(obs.feature_id);
    if (it == landmarks.end()) continue;
    const Vec2 ray((obs.pixel.x() - cam.cx) / cam.fx, (obs.pixel.y() - cam.cy) / cam.fy);
    c.push_back({it->second, ray, obs.pixel, obs.sigma});
  }
  if (c.size() < 4) {
    throw Error(ErrorKind::DegenerateConfiguration, "PnP needs at least 4 correspondences, got " +
                                                        std::to_string(c.size()));
  }

  Vec3 centroid = Vec3::Zero();
  for (const auto& k : c) centroid += k.point;
  centroid /= static_cast<double>(c.size());
  Eigen::MatrixXd D(c.size(), 3);
  for (std::size_t k = 0; k < c.size(); ++k) D.row(k) = (c[k].point - centroid).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(D, Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv(1) < 1e-6 * std::max(sv(0), 1e-12)) {
    throw Error(ErrorKind::DegenerateConfiguration, "landmarks are collinear");
  }
  const bool coplanar = sv(2) < 1e-6 * sv(0);

  Mat3 basis = svd.matrixV();
  if (basis.determinant() < 0.0) basis.col(2) *= -1.0;

  std::vector<CamPose> candidates;
  if (coplanar) {
    if (auto p = from_homography(c, centroid, basis)) candidates.push_back(*p);
  } else {
    if (c.size() < 6) {
      throw Error(ErrorKind::DegenerateConfiguration, "non-coplanar PnP needs at least 6 correspondences");
    }
    if (auto p = from_dlt(c)) candidates.push_back(*p);
    // A plane fitted to the set still gives a usable start when the DLT is poorly conditioned.
    if (auto p = from_homography(c, centroid, basis)) candidates.push_back(*p);
  }
  if (candidates.empty()) throw Error(ErrorKind::DegenerateConfiguration, "no PnP solution");

  double best = std::numeric_limits<double>::infinity();
  CamPose best_pose = candidates.front();
  for (CamPose pose : candidates) {
    const double e = refine(c, pose);
    if (e < best) {
      best = e;
      best_pose = pose;
    }
  }
  if (!std::isfinite(best)) throw Error(ErrorKind::DegenerateConfiguration, "PnP solution behind the camera");

  // p_C = R_L^C (R p + t) + t_LC  =>  R = R_C^L R_cam, t = R_C^L (t_cam - t_LC).
  PnpResult out;
  out.R = cam.R_L_to_C.transpose() * best_pose.R;
  out.t = cam.R_L_to_C.transpose() * (best_pose.t - cam.t_L_in_C);
  out.rms_reprojection = best * 0.5 * (cam.fx + cam.fy);
  return out;
}

}  // namespace relnav
