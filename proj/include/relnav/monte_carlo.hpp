#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relnav/estimator.hpp"
#include "relnav/metrics.hpp"
#include "relnav/sim.hpp"

namespace relnav {

struct MonteCarloConfig {
  ScenarioConfig scenario;  // scenario.seed is the master seed
  int n_runs = 100;
  EstimatorMode mode;
  int gn_iterations = 1;
  CovarianceOptions cov_options;
  PriorSigmas leader_prior{0.0, 0.0, 0.0, 0.01, 0.05};  // FullOpt only
  bool exact_init = false;          // start from the true state
  double steady_state_start = 1.0;  // s; RMSE ignores earlier frames
  double landmark_prior_sigma = 0.005;

  void validate() const;
};

struct Rmse {
  double att_deg = 0.0;
  double trans_m = 0.0;
  double vel_mps = 0.0;
};

struct TimestepError {
  double t = 0.0;
  StateError err;
  Envelope env;  // zero for smoothed estimates
  bool detections = false;
};

struct RunResult {
  int run = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;

  std::vector<TimestepError> track;     // one per frame
  std::vector<TimestepError> smoothed;  // empty unless the smoother ran
  Rmse track_rmse;
  Rmse smooth_rmse;
  double track_ate = 0.0;
  double smooth_ate = 0.0;
  int envelope_inside = 0;  // per-axis translation errors within 3 sigma
  int envelope_total = 0;
  double seconds = 0.0;     // wall time; not part of any deterministic output
};

struct MonteCarloReport {
  std::vector<RunResult> runs;
  std::vector<double> t;                  // frame times
  std::vector<Rmse> track_per_time;       // across successful runs
  std::vector<Rmse> smooth_per_time;
  Rmse track_overall;                     // steady-state portion
  Rmse smooth_overall;
  double median_track_trans = 0.0;
  double envelope_fraction = 0.0;
  int failed = 0;
};

/// Sub-seed of run `run` under a master seed.
std::uint64_t run_seed(std::uint64_t master, int run);

/// One complete run: scenario, initial error, tracking and optional smoothing.
/// Never throws; failures are reported in the result.
RunResult run_single(const MonteCarloConfig& cfg, int run);

/// Runs are distributed over OpenMP threads; the reduction is ordered by run index.
MonteCarloReport run_monte_carlo(const MonteCarloConfig& cfg);

/// Single-threaded reference with identical output.
MonteCarloReport run_monte_carlo_serial(const MonteCarloConfig& cfg);

/// Deterministic reduction of per-run results (exposed for tests).
MonteCarloReport aggregate(const MonteCarloConfig& cfg, std::vector<RunResult> runs);

}  // namespace relnav
