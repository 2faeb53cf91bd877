#pragma once

#include <Eigen/Core>

#include "relnav/so3.hpp"

namespace relnav {

/// Pose and velocity of the follower body frame F relative to the leader body
/// frame L, plus both IMUs' biases.
///
/// Tangent-space ordering: [alpha(3), t(3), v(3), bg_F(3), ba_F(3), bg_L(3), ba_L(3)].
/// Attitude is perturbed on the right (R = R_hat Exp(alpha)), everything else additively.
struct RelativeState {
  Mat3 R = Mat3::Identity();  // R_F^L
  Vec3 t = Vec3::Zero();      // t_{F|L}^L, m
  Vec3 v = Vec3::Zero();      // time derivative of t in L, m/s
  Vec3 bg_F = Vec3::Zero();
  Vec3 ba_F = Vec3::Zero();
  Vec3 bg_L = Vec3::Zero();
  Vec3 ba_L = Vec3::Zero();
  double stamp = 0.0;
};

enum class OptMode { FullOpt, MinorOpt };

/// FullOpt estimates the leader biases; MinorOpt holds them at zero.
struct EstimatorMode {
  OptMode opt = OptMode::MinorOpt;
  bool smoother_enabled = false;
  bool estimate_landmarks = false;

  void validate() const;
};

inline constexpr int kFullDim = 21;
inline constexpr int kMinorDim = 15;

constexpr int state_dim(OptMode m) { return m == OptMode::FullOpt ? kFullDim : kMinorDim; }

/// Retraction; delta has 15 or 21 entries. With 15 the leader biases are untouched.
RelativeState boxplus(const RelativeState& x, const Eigen::VectorXd& delta);

/// Local coordinates of b around a, such that boxplus(a, boxminus(b, a)) == b.
Eigen::VectorXd boxminus(const RelativeState& b, const RelativeState& a, int dim);

}  // namespace relnav
