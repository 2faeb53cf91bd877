#include "relnav/monte_carlo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "relnav/error.hpp"

namespace relnav {

namespace {

constexpr std::uint32_t kInitErrorStream = 6;

Vec3 draw3(std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double x = n(rng), y = n(rng), z = n(rng);
  return sigma * Vec3(x, y, z);
}

std::vector<TimestepError> errors_against_truth(const std::vector<RelativeState>& est, const GroundTruth& gt,
                                                double frame_rate, const std::vector<Eigen::MatrixXd>* covs,
                                                const std::vector<bool>* detections) {
  std::vector<TimestepError> out;
  out.reserve(est.size());
  for (std::size_t k = 0; k < est.size(); ++k) {
    const auto idx = static_cast<std::size_t>(std::llround(est[k].stamp * frame_rate));
    if (idx >= gt.relative.size()) throw Error(ErrorKind::LengthMismatch, "estimate stamp beyond the ground truth");
    TimestepError e;
    e.t = gt.frame_times[idx];
    e.err = state_error(est[k], gt.relative[idx]);
    if (covs) e.env = three_sigma((*covs)[k]);
    if (detections) e.detections = (*detections)[k];
    out.push_back(e);
  }
  return out;
}

Rmse rmse_of(const std::vector<TimestepError>& errs, double t_min) {
  std::vector<Vec3> a, p, v;
  for (const TimestepError& e : errs) {
    if (e.t < t_min) continue;
    a.push_back(e.err.dtheta);
    p.push_back(e.err.dp);
    v.push_back(e.err.dv);
  }
  return {rmse(a) * 180.0 / M_PI, rmse(p), rmse(v)};
}

double ate_of(const std::vector<TimestepError>& errs) {
  std::vector<Vec3> p;
  for (const TimestepError& e : errs) p.push_back(e.err.dp);
  return rmse(p);
}

}  // namespace

void MonteCarloConfig::validate() const {
  scenario.validate();
  mode.validate();
  if (n_runs < 1) throw Error(ErrorKind::InvalidArgument, "n_runs must be at least 1");
  if (gn_iterations < 1) throw Error(ErrorKind::InvalidArgument, "gn_iterations must be at least 1");
}

std::uint64_t run_seed(std::uint64_t master, int run) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(run) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RunResult run_single(const MonteCarloConfig& cfg, int run) {
  const auto start = std::chrono::steady_clock::now();
  RunResult res;
  res.run = run;
  res.seed = run_seed(cfg.scenario.seed, run);
  try {
    ScenarioConfig sc = cfg.scenario;
    sc.seed = res.seed;
    const Scenario s = make_scenario(sc);

    TrackerConfig tc;
    tc.mode = cfg.mode;
    tc.cam = sc.cam;
    tc.noise_F = sc.noise_F;
    tc.noise_L = sc.noise_L;
    tc.imu_rate = sc.imu_rate;
    tc.gn_iterations = cfg.gn_iterations;
    tc.cov_options = cfg.cov_options;
    tc.leader_prior = cfg.leader_prior;

    std::map<int, Vec3> landmarks;
    for (std::size_t id = 0; id < s.landmarks_nominal.size(); ++id) landmarks[static_cast<int>(id)] = s.landmarks_nominal[id];
    Tracker tracker(tc, landmarks);

    const InitialErrorSigmas& ie = sc.initial_error;
    RelativeState x0 = s.truth.relative.front();
    x0.bg_L.setZero();
    x0.ba_L.setZero();
    if (!cfg.exact_init) {
      std::seed_seq seq{static_cast<std::uint32_t>(res.seed), static_cast<std::uint32_t>(res.seed >> 32),
                        kInitErrorStream, 0x5eedu};
      std::mt19937_64 rng(seq);
      Eigen::VectorXd d(kMinorDim);
      d << draw3(rng, ie.att), draw3(rng, ie.trans), draw3(rng, ie.vel), draw3(rng, ie.bg), draw3(rng, ie.ba);
      x0 = boxplus(x0, d);
    }
    const int dim = state_dim(cfg.mode.opt);
    const PriorFactor prior =
        make_diagonal_prior(x0, PriorSigmas{ie.att, ie.trans, ie.vel, ie.bg, ie.ba}, dim, cfg.leader_prior);
    tracker.initialize(x0, prior, s.frames.front().observations);
    for (std::size_t k = 1; k < s.frames.size(); ++k) {
      const Frame& f = s.frames[k];
      tracker.process(f.t, f.observations, s.imu_F, s.imu_L);
    }

    const std::vector<TrackRecord> hist = tracker.history();
    std::vector<RelativeState> est;
    std::vector<Eigen::MatrixXd> covs;
    std::vector<bool> det;
    for (const TrackRecord& r : hist) {
      est.push_back(r.state);
      covs.push_back(r.cov);
      det.push_back(r.detections);
    }
    res.track = errors_against_truth(est, s.truth, sc.frame_rate, &covs, &det);
    res.track_rmse = rmse_of(res.track, cfg.steady_state_start);
    res.track_ate = ate_of(res.track);
    for (const TimestepError& e : res.track) {
      for (int a = 0; a < 3; ++a) {
        ++res.envelope_total;
        if (std::abs(e.err.dp(a)) <= e.env.trans(a)) ++res.envelope_inside;
      }
    }

    if (cfg.mode.smoother_enabled) {
      SmootherOptions so;
      so.estimate_landmarks = cfg.mode.estimate_landmarks;
      so.landmark_sigma = cfg.landmark_prior_sigma;
      const SmoothResult sr = smooth(tracker.snapshot(), so);
      res.smoothed = errors_against_truth(sr.states, s.truth, sc.frame_rate, nullptr, &det);
      res.smooth_rmse = rmse_of(res.smoothed, cfg.steady_state_start);
      res.smooth_ate = ate_of(res.smoothed);
    }
    res.ok = true;
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

MonteCarloReport aggregate(const MonteCarloConfig& cfg, std::vector<RunResult> runs) {
  MonteCarloReport rep;
  rep.runs = std::move(runs);
  // Floating-point sums below depend on order; reduce by run index.
  std::stable_sort(rep.runs.begin(), rep.runs.end(), [](const RunResult& a, const RunResult& b) { return a.run < b.run; });
  const double rate = cfg.scenario.frame_rate;
  const int n_frames = static_cast<int>(std::floor(cfg.scenario.duration() * rate + 1e-9)) + 1;
  for (int k = 0; k < n_frames; ++k) rep.t.push_back(k / rate);

  auto per_time = [&](bool smoothed) {
    std::vector<Eigen::Vector3d> sums(n_frames, Eigen::Vector3d::Zero());  // att, trans, vel squared
    std::vector<int> counts(n_frames, 0);
    for (const RunResult& r : rep.runs) {
      if (!r.ok) continue;
      for (const TimestepError& e : smoothed ? r.smoothed : r.track) {
        const auto k = static_cast<std::size_t>(std::llround(e.t * rate));
        if (k >= sums.size()) continue;
        sums[k] += Eigen::Vector3d(e.err.dtheta.squaredNorm(), e.err.dp.squaredNorm(), e.err.dv.squaredNorm());
        ++counts[k];
      }
    }
    std::vector<Rmse> out(n_frames);
    Eigen::Vector3d total = Eigen::Vector3d::Zero();
    int total_n = 0;
    for (int k = 0; k < n_frames; ++k) {
      if (counts[k] == 0) continue;
      const Eigen::Vector3d m = sums[k] / counts[k];
      out[k] = {std::sqrt(m(0)) * 180.0 / M_PI, std::sqrt(m(1)), std::sqrt(m(2))};
      if (rep.t[k] >= cfg.steady_state_start) {
        total += sums[k];
        total_n += counts[k];
      }
    }
    Rmse overall;
    if (total_n > 0) {
      const Eigen::Vector3d m = total / total_n;
      overall = {std::sqrt(m(0)) * 180.0 / M_PI, std::sqrt(m(1)), std::sqrt(m(2))};
    }
    return std::make_pair(out, overall);
  };

  std::tie(rep.track_per_time, rep.track_overall) = per_time(false);
  if (cfg.mode.smoother_enabled) std::tie(rep.smooth_per_time, rep.smooth_overall) = per_time(true);

  std::vector<double> trans;
  long inside = 0, total = 0;
  for (const RunResult& r : rep.runs) {
    if (!r.ok) {
      ++rep.failed;
      continue;
    }
    trans.push_back(r.track_rmse.trans_m);
    inside += r.envelope_inside;
    total += r.envelope_total;
  }
  if (!trans.empty()) {
    std::sort(trans.begin(), trans.end());
    const std::size_t m = trans.size() / 2;
    rep.median_track_trans = trans.size() % 2 ? trans[m] : 0.5 * (trans[m - 1] + trans[m]);
  }
  rep.envelope_fraction = total > 0 ? static_cast<double>(inside) / static_cast<double>(total) : 0.0;
  return rep;
}

MonteCarloReport run_monte_carlo(const MonteCarloConfig& cfg) {
  cfg.validate();
  std::vector<RunResult> runs(cfg.n_runs);
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < cfg.n_runs; ++r) runs[r] = run_single(cfg, r);
  return aggregate(cfg, std::move(runs));
}

MonteCarloReport run_monte_carlo_serial(const MonteCarloConfig& cfg) {
  cfg.validate();
  std::vector<RunResult> runs;
  runs.reserve(cfg.n_runs);
  for (int r = 0; r < cfg.n_runs; ++r) runs.push_back(run_single(cfg, r));
  return aggregate(cfg, std::move(runs));
}

}  // namespace relnav
