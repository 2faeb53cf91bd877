#include "relnav/estimator.hpp"

#include <algorithm>
#include <cmath>

#include "relnav/error.hpp"
#include "relnav/pnp.hpp"

namespace relnav {

namespace {

constexpr double kTimeEps = 1e-9;

void add_bias_edges(std::vector<BiasEdge>& out, int i, int j, double T, const TrackerConfig& cfg) {
  out.push_back({i, j, BiasBlock::GyroF, cfg.noise_F.sigma_gu, T});
  out.push_back({i, j, BiasBlock::AccF, cfg.noise_F.sigma_au, T});
  if (cfg.mode.opt == OptMode::FullOpt) {
    out.push_back({i, j, BiasBlock::GyroL, cfg.noise_L.sigma_gu, T});
    out.push_back({i, j, BiasBlock::AccL, cfg.noise_L.sigma_au, T});
  }
}

}  // namespace

void TrackerConfig::validate() const {
  mode.validate();
  cam.validate();
  noise_F.validate();
  noise_L.validate();
  if (!(imu_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "imu_rate must be positive");
  if (gn_iterations < 1) throw Error(ErrorKind::InvalidArgument, "gn_iterations must be at least 1");
  if (!(reset_timeout > 0.0)) throw Error(ErrorKind::InvalidArgument, "reset_timeout must be positive");
}

const char* to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::Updated: return "updated";
    case TrackStatus::Initializing: return "initializing";
    case TrackStatus::Initialized: return "initialized";
    case TrackStatus::SkippedMissingImu: return "skipped_missing_imu";
    case TrackStatus::Idle: return "idle";
  }
  return "unknown";
}

std::span<const ImuSample> imu_window(std::span<const ImuSample> samples, double t0, double t1, double max_gap) {
  auto after_t0 = std::upper_bound(samples.begin(), samples.end(), t0 + kTimeEps,
                                   [](double t, const ImuSample& s) { return t < s.t; });
  if (after_t0 == samples.begin()) {
    throw Error(ErrorKind::MissingImu, "no sample at or before t = " + std::to_string(t0));
  }
  auto end = std::lower_bound(samples.begin(), samples.end(), t1 - kTimeEps,
                              [](const ImuSample& s, double t) { return s.t < t; });
  if (end == samples.end()) {
    throw Error(ErrorKind::MissingImu, "no sample at or after t = " + std::to_string(t1));
  }
  const auto b = static_cast<std::size_t>(std::distance(samples.begin(), after_t0) - 1);
  const auto e = static_cast<std::size_t>(std::distance(samples.begin(), end));
  for (std::size_t k = b + 1; k <= e; ++k) {
    if (samples[k].t - samples[k - 1].t > max_gap) {
      throw Error(ErrorKind::MissingImu, "gap of " + std::to_string(samples[k].t - samples[k - 1].t) +
                                             " s before t = " + std::to_string(samples[k].t));
    }
  }
  return samples.subspan(b, e - b + 1);
}

Tracker::Tracker(TrackerConfig cfg, std::map<int, Vec3> landmarks)
    : cfg_(std::move(cfg)), landmarks_(std::move(landmarks)) {
  cfg_.validate();
  for (const auto& [id, p] : landmarks_) {
    landmark_index_[id] = static_cast<int>(landmark_ids_.size());
    landmark_ids_.push_back(id);
  }
  log_.mode = cfg_.mode.opt;
  log_.cam = cfg_.cam;
  log_.landmarks = landmarks_;
}

void Tracker::initialize(const RelativeState& x0, const PriorFactor& prior,
                         std::span<const FeatureObservation> observations) {
  if (prior.dim != state_dim(cfg_.mode.opt)) {
    throw Error(ErrorKind::InvalidArgument, "prior dimension does not match the estimator mode");
  }
  std::lock_guard<std::mutex> lock(mu_);
  PriorFactor p = prior;
  p.mean = x0;
  start_segment(x0, p, observations, !observations.empty());
}

void Tracker::start_segment(const RelativeState& x0, const PriorFactor& prior,
                            std::span<const FeatureObservation> obs, bool detections) {
  initialized_ = true;
  pending_.reset();
  prior_ = prior;
  last_detection_t_ = x0.stamp;
  ++segment_;

  history_.push_back({x0.stamp, x0, prior.covariance(), detections, segment_});
  const int k = static_cast<int>(log_.states.size());
  log_.states.push_back(x0);
  log_.stamps.push_back(x0.stamp);
  log_.priors.push_back({k, prior});
  log_.observations.emplace_back(obs.begin(), obs.end());
  log_.record_index.push_back(history_.size() - 1);
}

void Tracker::reset() {
  initialized_ = false;
  pending_.reset();
}

TrackStatus Tracker::try_pnp_init(double t, std::span<const FeatureObservation> obs) {
  PnpResult r;
  try {
    r = pnp_initialize(obs, landmarks_, cfg_.cam);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateConfiguration && e.kind() != ErrorKind::BehindCamera) throw;
    last_error_ = e.what();
    pending_.reset();
    return TrackStatus::Initializing;
  }
  if (!pending_) {
    pending_ = Pending{t, r.R, r.t};
    return TrackStatus::Initializing;
  }
  RelativeState x0;
  x0.R = r.R;
  x0.t = r.t;
  x0.stamp = t;
  const int dim = state_dim(cfg_.mode.opt);
  start_segment(x0, make_diagonal_prior(x0, cfg_.pnp_prior, dim, cfg_.leader_prior), obs, true);
  return TrackStatus::Initialized;
}

TrackStatus Tracker::process(double t, std::span<const FeatureObservation> observations,
                             std::span<const ImuSample> imu_F, std::span<const ImuSample> imu_L) {
  std::lock_guard<std::mutex> lock(mu_);
  const bool detected = !observations.empty();

  if (initialized_) {
    if (!(t > prior_.mean.stamp + kTimeEps)) {
      throw Error(ErrorKind::NonMonotonicTime, "frame at t = " + std::to_string(t) + " is not after the state");
    }
    const bool lost = !detected && t - last_detection_t_ > cfg_.reset_timeout;
    const bool stale = t - prior_.mean.stamp > cfg_.reset_timeout;
    if (lost || stale) reset();
  }
  if (!initialized_) {
    if (!detected) {
      pending_.reset();
      return TrackStatus::Idle;
    }
    return try_pnp_init(t, observations);
  }

  const RelativeState xi = prior_.mean;
  const double ti = xi.stamp;
  const double max_gap = 2.0 / cfg_.imu_rate + kTimeEps;
  std::span<const ImuSample> wF, wL;
  try {
    wF = imu_window(imu_F, ti, t, max_gap);
    wL = imu_window(imu_L, ti, t, max_gap);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::MissingImu) throw;
    last_error_ = e.what();
    return TrackStatus::SkippedMissingImu;
  }

  Preintegration pF = integrate(wF, xi.bg_F, xi.ba_F, cfg_.noise_F, ti, t);
  Preintegration pL = integrate(wL, xi.bg_L, xi.ba_L, cfg_.noise_L, ti, t);
  const Vec3 w_i = interpolate(wL, ti).gyro;
  const Vec3 w_j = interpolate(wL, t).gyro;
  auto factor = std::make_shared<const ExtendedFactor>(
      make_extended_factor(std::move(pF), std::move(pL), w_i, w_j, xi, cfg_.noise_L, cfg_.cov_options));

  const PredictedState pred = predict_state(*factor, xi);
  RelativeState xj = xi;
  xj.R = pred.R;
  xj.t = pred.t;
  xj.v = pred.v;
  xj.stamp = t;

  GaussNewtonProblem p;
  p.mode = cfg_.mode.opt;
  p.cam = cfg_.cam;
  p.states = {xi, xj};
  p.huber_threshold = cfg_.huber_threshold;
  for (int id : landmark_ids_) p.landmarks.push_back(landmarks_.at(id));
  p.priors.push_back({0, prior_});
  p.extended.push_back({0, 1, factor});
  add_bias_edges(p.biases, 0, 1, factor->T, cfg_);
  for (const FeatureObservation& o : observations) {
    auto it = landmark_index_.find(o.feature_id);
    if (it != landmark_index_.end()) p.features.push_back({1, it->second, o});
  }

  solve_gauss_newton(p, cfg_.gn_iterations, 0.0);
  prior_ = marginalize(p, 1);
  if (detected) last_detection_t_ = t;

  history_.push_back({t, prior_.mean, prior_.covariance(), detected, segment_});
  const int k = static_cast<int>(log_.states.size());
  log_.states.push_back(prior_.mean);
  log_.stamps.push_back(t);
  log_.extended.push_back({k - 1, k, factor});
  add_bias_edges(log_.biases, k - 1, k, factor->T, cfg_);
  log_.observations.emplace_back(observations.begin(), observations.end());
  log_.record_index.push_back(history_.size() - 1);
  return TrackStatus::Updated;
}

std::vector<TrackRecord> Tracker::history() const {
  std::lock_guard<std::mutex> lock(mu_);
  return history_;
}

TrackingSnapshot Tracker::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_;
}

void Tracker::replace_history(const TrackingSnapshot& snap, const std::vector<RelativeState>& smoothed) {
  if (smoothed.size() != snap.states.size() || snap.record_index.size() != snap.states.size()) {
    throw Error(ErrorKind::LengthMismatch, "smoothed states do not match the snapshot");
  }
  std::lock_guard<std::mutex> lock(mu_);
  for (std::size_t k = 0; k < smoothed.size(); ++k) {
    const std::size_t r = snap.record_index[k];
    if (r >= history_.size()) throw Error(ErrorKind::LengthMismatch, "snapshot is newer than the history");
    history_[r].state = smoothed[k];
    if (k < log_.states.size()) log_.states[k] = smoothed[k];
  }
}

}  // namespace relnav
