#pragma once

#include <Eigen/Core>

#include "relnav/state.hpp"

namespace relnav {

using Vec2 = Eigen::Vector2d;

/// Pinhole camera rigidly mounted on the leader.
struct CameraModel {
  double fx = 460.0;
  double fy = 460.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;
  Mat3 R_L_to_C = Mat3::Identity();  // R_L^C
  Vec3 t_L_in_C = Vec3::Zero();      // t_{L|C}^C

  void validate() const;
  bool in_image(const Vec2& px) const;
};

inline constexpr double kMinDepth = 1e-3;

struct FeatureObservation {
  int feature_id = 0;
  Vec2 pixel = Vec2::Zero();
  double sigma = 1.0;  // pixels
};

/// Point on the follower expressed in the camera frame.
Vec3 to_camera(const CameraModel& cam, const RelativeState& state, const Vec3& point_F);

/// Throws BehindCamera when the camera-frame depth is below kMinDepth.
Vec2 project(const CameraModel& cam, const RelativeState& state, const Vec3& point_F);

struct FeatureLinearization {
  Vec2 residual;                         // (observed - predicted) / sigma
  Eigen::Matrix<double, 2, 6> J_pose;    // w.r.t. [alpha, t] of the state
  Eigen::Matrix<double, 2, 3> J_point;   // w.r.t. the landmark in F
};

FeatureLinearization feature_residual_jacobian(const CameraModel& cam, const RelativeState& state,
                                               const FeatureObservation& obs, const Vec3& landmark);

/// Whitened bias random-walk residual; Jacobians are -+I / (sigma_u sqrt(T)).
Vec3 bias_rw_residual(const Vec3& beta_i, const Vec3& beta_j, double sigma_u, double T);

/// Gaussian prior on one state, in the local coordinates of `mean`.
struct PriorFactor {
  RelativeState mean;
  Eigen::MatrixXd info;  // dim x dim
  int dim = kMinorDim;

  Eigen::VectorXd residual(const RelativeState& x) const;
  Eigen::MatrixXd jacobian(const RelativeState& x) const;
  Eigen::MatrixXd covariance() const;
};

/// Diagonal prior built from per-block standard deviations.
struct PriorSigmas {
  double att = 0.02;
  double trans = 0.02;
  double vel = 0.2;
  double bg = 0.01;
  double ba = 0.05;
};

PriorFactor make_diagonal_prior(const RelativeState& mean, const PriorSigmas& sigmas, int dim,
                                const PriorSigmas& leader_sigmas);

}  // namespace relnav
