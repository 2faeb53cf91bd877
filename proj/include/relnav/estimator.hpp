#pragma once

#include <Eigen/Core>

#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relnav/ext_preint.hpp"
#include "relnav/factors.hpp"
#include "relnav/gauss_newton.hpp"
#include "relnav/imu_preint.hpp"

namespace relnav {

struct TrackerConfig {
  EstimatorMode mode;
  CameraModel cam;
  ImuNoiseParams noise_F;
  ImuNoiseParams noise_L;
  double imu_rate = 250.0;     // nominal, for the gap check
  int gn_iterations = 1;
  double huber_threshold = 2.0;
  double reset_timeout = 2.0;  // s without detections before re-initializing
  CovarianceOptions cov_options;

  // Prior used when the tracker initializes itself from PnP.
  PriorSigmas pnp_prior{0.05, 0.05, 0.5, 0.05, 0.1};
  // Leader-bias block of any diagonal prior in FullOpt.
  PriorSigmas leader_prior{0.0, 0.0, 0.0, 0.01, 0.05};

  void validate() const;
};

enum class TrackStatus {
  Updated,       // normal predict/correct cycle
  Initializing,  // waiting for a second consecutive detected frame
  Initialized,   // state set from PnP at this frame
  SkippedMissingImu,
  Idle,          // not initialized and nothing to do
};

const char* to_string(TrackStatus s);

struct TrackRecord {
  double t = 0.0;
  RelativeState state;
  Eigen::MatrixXd cov;  // dim x dim marginal covariance
  bool detections = false;
  int segment = 0;      // increments on every (re)initialization
};

/// Everything the smoother needs, copied out of the tracker.
struct TrackingSnapshot {
  OptMode mode = OptMode::MinorOpt;
  CameraModel cam;
  std::vector<RelativeState> states;
  std::vector<double> stamps;
  std::vector<ExtendedEdge> extended;
  std::vector<BiasEdge> biases;
  std::vector<StatePriorEdge> priors;  // one per tracking segment
  std::vector<std::vector<FeatureObservation>> observations;  // per state
  std::map<int, Vec3> landmarks;
  std::vector<std::size_t> record_index;  // state k -> index into the tracker history
};

/// Two-state sliding-window tracker: predicts with the extended factor, corrects
/// with the frame's features, then marginalizes the older state.
class Tracker {
 public:
  Tracker(TrackerConfig cfg, std::map<int, Vec3> landmarks);

  Tracker(const Tracker&) = delete;
  Tracker& operator=(const Tracker&) = delete;

  /// Starts from a known state and prior (Monte-Carlo style initialization).
  void initialize(const RelativeState& x0, const PriorFactor& prior,
                  std::span<const FeatureObservation> observations = {});

  /// Processes the frame at time t. The IMU spans may hold the full streams.
  TrackStatus process(double t, std::span<const FeatureObservation> observations,
                      std::span<const ImuSample> imu_F, std::span<const ImuSample> imu_L);

  bool initialized() const { return initialized_; }
  const RelativeState& state() const { return prior_.mean; }
  const PriorFactor& prior() const { return prior_; }
  const std::string& last_error() const { return last_error_; }

  std::vector<TrackRecord> history() const;
  TrackingSnapshot snapshot() const;

  /// Overwrites history entries with smoothed states; called between cycles.
  void replace_history(const TrackingSnapshot& snap, const std::vector<RelativeState>& smoothed);

  const TrackerConfig& config() const { return cfg_; }

 private:
  struct Pending {
    double t;
    Mat3 R;
    Vec3 t_rel;
  };

  TrackStatus try_pnp_init(double t, std::span<const FeatureObservation> obs);
  void start_segment(const RelativeState& x0, const PriorFactor& prior, std::span<const FeatureObservation> obs,
                     bool detections);
  void reset();

  TrackerConfig cfg_;
  std::map<int, Vec3> landmarks_;
  std::vector<int> landmark_ids_;      // problem index -> feature id
  std::map<int, int> landmark_index_;  // feature id -> problem index

  bool initialized_ = false;
  PriorFactor prior_;
  double last_detection_t_ = 0.0;
  std::optional<Pending> pending_;
  std::string last_error_;
  int segment_ = 0;

  mutable std::mutex mu_;
  std::vector<TrackRecord> history_;
  TrackingSnapshot log_;
};

/// Window of `samples` covering [t0, t1] with one sample on either side.
/// Throws MissingImu if the window is not covered or has a gap above max_gap.
std::span<const ImuSample> imu_window(std::span<const ImuSample> samples, double t0, double t1, double max_gap);

struct SmootherOptions {
  bool estimate_landmarks = false;
  double landmark_sigma = 0.005;
  int max_iterations = 50;
  double step_tol = 1e-8;
  double huber_threshold = 2.0;
};

struct SmoothResult {
  std::vector<RelativeState> states;
  std::map<int, Vec3> landmarks;  // refined when estimated, nominal otherwise
  SolveReport report;
};

/// Batch Gauss-Newton over every state, extended factor, bias link and feature.
SmoothResult smooth(const TrackingSnapshot& snap, const SmootherOptions& options);

/// Builds the problem `smooth` solves (exposed for tests).
GaussNewtonProblem build_smoothing_problem(const TrackingSnapshot& snap, const SmootherOptions& options,
                                           std::vector<int>* landmark_ids = nullptr);

/// Smooths a snapshot of `tracker` on a background thread and writes the
/// result back into its history. The tracker must outlive the future.
std::future<SmoothResult> launch_smoother(Tracker& tracker, const SmootherOptions& options);

}  // namespace relnav
