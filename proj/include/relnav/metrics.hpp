#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

#include "relnav/state.hpp"

namespace relnav {

struct StateError {
  Vec3 dtheta = Vec3::Zero();  // Log(R_hat^T R)
  Vec3 dp = Vec3::Zero();      // t - t_hat
  Vec3 dv = Vec3::Zero();      // v - v_hat
};

StateError state_error(const RelativeState& estimate, const RelativeState& truth);

/// sqrt(mean |e|^2); 0 for an empty range.
double rmse(std::span<const Vec3> errors);

/// Translation RMSE with no alignment. Throws LengthMismatch.
double compute_ate(std::span<const RelativeState> estimates, std::span<const RelativeState> truth);

/// Per-axis 3-sigma bounds of the attitude, translation and velocity blocks.
struct Envelope {
  Vec3 att = Vec3::Zero();
  Vec3 trans = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
};

Envelope three_sigma(const Eigen::MatrixXd& cov);

}  // namespace relnav
