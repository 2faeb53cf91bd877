#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relnav/ext_preint.hpp"
#include "relnav/sim.hpp"

namespace relnav {

/// Analytic Jacobians vs central differences at random states.
struct JacobianSuiteReport {
  int states = 0;
  long entries = 0;
  long failures = 0;               // entries above tolerance
  long structural_violations = 0;  // expected-zero blocks with a nonzero entry
  double max_error = 0.0;          // |a - n| / max(1, |n|)
  bool pass = false;
};

JacobianSuiteReport jacobian_suite(int n_states = 100, std::uint64_t seed = 1, double tol = 1e-5);

/// True where residual_jacobians may be nonzero, at 3x3 block resolution
/// (rows: attitude, velocity, translation; columns: 2 * dim / 3 blocks).
std::vector<std::vector<bool>> extended_jacobian_structure(int dim);

/// Sampled covariance of injected-noise extended residuals vs the closed form.
struct CovarianceOracleReport {
  int trials = 0;
  int steps = 0;
  Mat9 sampled = Mat9::Zero();
  Mat9 model = Mat9::Zero();
  Mat9 model_no_cross = Mat9::Zero();
  double rel_frobenius = 0.0;           // |S - M| / |S|
  double rel_frobenius_no_cross = 0.0;
  double corr_error = 0.0;              // same on correlation-normalized matrices
  double corr_error_no_cross = 0.0;
  bool pass = false;
};

/// `parallel` selects the OpenMP kernel; both produce identical numbers.
CovarianceOracleReport covariance_oracle(int trials = 100000, int steps = 10, std::uint64_t seed = 1,
                                         bool parallel = true);

/// Noise-free residuals of every frame interval at the true states.
struct ConvergenceReport {
  std::vector<double> periods;  // s
  std::vector<double> rms;      // RMS of |r| over all intervals
  std::vector<double> ratios;   // rms[k] / rms[k + 1]
  std::vector<double> rms_kink_free;  // intervals without an acceleration switch
  bool pass = false;
};

ConvergenceReport convergence_oracle(const ScenarioConfig& base, const std::vector<double>& imu_rates = {250, 500, 1000});

/// First-order bias correction vs full re-integration.
struct BiasUpdateReport {
  std::vector<double> deltas;
  std::vector<double> errors;
  std::vector<double> slopes;  // log2(e[k+1] / e[k])
  bool pass = false;
};

BiasUpdateReport bias_update_oracle(const ScenarioConfig& base, const std::vector<double>& deltas = {0.002, 0.004, 0.008},
                                    double window = 1.0);

/// Schur-complement information vs the inverse of the marginal covariance.
struct MarginalizationReport {
  int instances = 0;
  double max_error = 0.0;  // max abs entry difference, relative to max |entry|
  bool pass = false;
};

MarginalizationReport marginalization_oracle(int instances = 50, std::uint64_t seed = 1, double tol = 1e-9);

}  // namespace relnav
