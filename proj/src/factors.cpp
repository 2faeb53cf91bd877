#include "relnav/factors.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "relnav/error.hpp"

namespace relnav {

void CameraModel::validate() const {
  if (!(fx > 0.0 && fy > 0.0 && cx > 0.0 && cx < width && cy > 0.0 && cy < height)) {
    throw Error(ErrorKind::InvalidArgument, "camera intrinsics out of range");
  }
  if (!so3::is_rotation(R_L_to_C)) throw Error(ErrorKind::InvalidArgument, "camera mount is not a rotation");
}

bool CameraModel::in_image(const Vec2& px) const {
  return px.x() >= 0.0 && px.x() <= width && px.y() >= 0.0 && px.y() <= height;
}

Vec3 to_camera(const CameraModel& cam, const RelativeState& s, const Vec3& p) {
  return cam.R_L_to_C * (s.R * p + s.t) + cam.t_L_in_C;
}

Vec2 project(const CameraModel& cam, const RelativeState& s, const Vec3& p) {
  const Vec3 pc = to_camera(cam, s, p);
  if (pc.z() <= kMinDepth) throw Error(ErrorKind::BehindCamera, "point depth " + std::to_string(pc.z()));
  return {cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy};
}

FeatureLinearization feature_residual_jacobian(const CameraModel& cam, const RelativeState& s,
                                               const FeatureObservation& obs, const Vec3& landmark) {
  const Vec3 pc = to_camera(cam, s, landmark);
  if (pc.z() <= kMinDepth) throw Error(ErrorKind::BehindCamera, "point depth " + std::to_string(pc.z()));
  const double iz = 1.0 / pc.z();
  const Vec2 pred(cam.fx * pc.x() * iz + cam.cx, cam.fy * pc.y() * iz + cam.cy);
  Eigen::Matrix<double, 2, 3> dpi;
  dpi << cam.fx * iz, 0.0, -cam.fx * pc.x() * iz * iz,
         0.0, cam.fy * iz, -cam.fy * pc.y() * iz * iz;
  const double w = 1.0 / obs.sigma;
  const Eigen::Matrix<double, 2, 3> A = -w * dpi * cam.R_L_to_C;

  FeatureLinearization lin;
  lin.residual = w * (obs.pixel - pred);
  lin.J_pose.leftCols<3>() = A * (-s.R * so3::skew(landmark));
  lin.J_pose.rightCols<3>() = A;
  lin.J_point = A * s.R;
  return lin;
}

Vec3 bias_rw_residual(const Vec3& beta_i, const Vec3& beta_j, double sigma_u, double T) {
  if (!(T > 0.0)) throw Error(ErrorKind::InvalidArgument, "bias random walk needs T > 0");
  return (beta_j - beta_i) / (sigma_u * std::sqrt(T));
}

Eigen::VectorXd PriorFactor::residual(const RelativeState& x) const { return boxminus(x, mean, dim); }

Eigen::MatrixXd PriorFactor::jacobian(const RelativeState& x) const {
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(dim, dim);
  J.topLeftCorner<3, 3>() = so3::right_jacobian_inv(so3::log_map(mean.R.transpose() * x.R));
  return J;
}

Eigen::MatrixXd PriorFactor::covariance() const {
  return info.ldlt().solve(Eigen::MatrixXd::Identity(dim, dim));
}

PriorFactor make_diagonal_prior(const RelativeState& mean, const PriorSigmas& s, int dim,
                                const PriorSigmas& leader) {
  Eigen::VectorXd sig(dim);
  sig.segment<3>(0).setConstant(s.att);
  sig.segment<3>(3).setConstant(s.trans);
  sig.segment<3>(6).setConstant(s.vel);
  sig.segment<3>(9).setConstant(s.bg);
  sig.segment<3>(12).setConstant(s.ba);
  if (dim == kFullDim) {
    sig.segment<3>(15).setConstant(leader.bg);
    sig.segment<3>(18).setConstant(leader.ba);
  }
  PriorFactor p;
  p.mean = mean;
  p.dim = dim;
  p.info = sig.array().square().inverse().matrix().asDiagonal();
  return p;
}

}  // namespace relnav
