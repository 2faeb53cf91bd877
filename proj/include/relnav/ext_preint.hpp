#pragma once

#include <Eigen/Core>

#include "relnav/imu_preint.hpp"
#include "relnav/state.hpp"

namespace relnav {

using Vec9 = Eigen::Matrix<double, 9, 1>;

/// Relative-state constraint between instants i and j built from the two
/// platforms' preintegrations. Residual and covariance rows are ordered
/// [attitude, velocity, translation].
struct ExtendedFactor {
  Preintegration pre_F;
  Preintegration pre_L;
  Vec3 omega_Li_meas = Vec3::Zero();  // raw leader gyro at i and j (interpolated to the frame times)
  Vec3 omega_Lj_meas = Vec3::Zero();
  double T = 0.0;
  Mat9 cov_C = Mat9::Zero();
  Mat9 info_C = Mat9::Zero();
};

struct PredictedState {
  Mat3 R;
  Vec3 v;
  Vec3 t;
};

struct CovarianceOptions {
  bool include_cross_terms = true;  // the S + S^T correction from the first leader gyro sample
};

/// Predicts the relative pose/velocity at j from the state at i.
PredictedState predict_state(const ExtendedFactor& f, const RelativeState& state_i);

/// Linearized covariance of the extended preintegration error.
/// Throws NonPsdResult if the symmetrized result is indefinite beyond round-off.
Mat9 propagate_covariance(const ExtendedFactor& f, const RelativeState& state_i, const PredictedState& state_j,
                          const ImuNoiseParams& noise_L, const CovarianceOptions& options = {});

/// Assembles the factor, evaluating cov_C/info_C at the state propagated from state_i.
ExtendedFactor make_extended_factor(Preintegration pre_F, Preintegration pre_L, const Vec3& omega_Li_meas,
                                    const Vec3& omega_Lj_meas, const RelativeState& state_i,
                                    const ImuNoiseParams& noise_L, const CovarianceOptions& options = {});

Vec9 residual(const ExtendedFactor& f, const RelativeState& state_i, const RelativeState& state_j);

/// 9 x (2 dim) Jacobian w.r.t. [delta x_i, delta x_j], dim = 21 (FullOpt) or 15 (MinorOpt).
Eigen::MatrixXd residual_jacobians(const ExtendedFactor& f, const RelativeState& state_i,
                                   const RelativeState& state_j, int dim);

}  // namespace relnav
