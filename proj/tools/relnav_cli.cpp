#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "relnav/config.hpp"
#include "relnav/csv_io.hpp"
#include "relnav/error.hpp"
#include "relnav/estimator.hpp"
#include "relnav/metrics.hpp"
#include "relnav/monte_carlo.hpp"
#include "relnav/oracles.hpp"
#include "relnav/sim.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace relnav;

namespace {

enum Exit { kOk = 0, kUsage = 1, kVerifyFailed = 2, kRuntime = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode;
  bool smoother = false;
  bool estimate_landmarks = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "master random seed");
  app->add_option("--mode", c.mode, "full or minor")->check(CLI::IsMember({"full", "minor"}));
  app->add_flag("--smoother", c.smoother, "run the full smoother after tracking");
  app->add_flag("--estimate-landmarks", c.estimate_landmarks, "smoother refines the fiducial corners");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (c.seed) cfg.scenario.seed = *c.seed;
  if (c.mode == "full") cfg.mode.opt = OptMode::FullOpt;
  if (c.mode == "minor") cfg.mode.opt = OptMode::MinorOpt;
  if (c.smoother) cfg.mode.smoother_enabled = true;
  if (c.estimate_landmarks) cfg.mode.estimate_landmarks = cfg.mode.smoother_enabled = true;
  cfg.mode.validate();
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

json rmse_json(const Rmse& r) { return {{"att_deg", r.att_deg}, {"trans_m", r.trans_m}, {"vel_mps", r.vel_mps}}; }

int cmd_sim(const Common& common, const std::string& out, std::optional<double> lambda, std::optional<double> gamma) {
  RunConfig cfg = resolve(common);
  if (lambda) cfg.scenario.lambda = *lambda;
  if (gamma) cfg.scenario.gamma = *gamma;
  const Scenario s = make_scenario(cfg.scenario);
  ensure_dir(out);
  write_imu_csv(join(out, "imu_F.csv"), s.imu_F);
  write_imu_csv(join(out, "imu_L.csv"), s.imu_L);
  write_frames_csv(join(out, "frames.csv"), s.frames);
  write_truth_csv(join(out, "truth.csv"), s.truth.relative);
  std::map<int, Vec3> nominal, truth;
  for (std::size_t k = 0; k < s.landmarks_nominal.size(); ++k) {
    nominal[static_cast<int>(k)] = s.landmarks_nominal[k];
    truth[static_cast<int>(k)] = s.truth.landmarks[k];
  }
  write_landmarks_csv(join(out, "landmarks.csv"), nominal);
  write_landmarks_csv(join(out, "landmarks_true.csv"), truth);
  std::printf("wrote %zu frames, %zu IMU samples per platform to %s\n", s.frames.size(), s.imu_F.size(), out.c_str());
  return kOk;
}

std::vector<TimestepError> match_truth(const std::vector<TrackRecord>& recs, const std::vector<RelativeState>& truth) {
  std::vector<TimestepError> out;
  std::size_t j = 0;
  for (const TrackRecord& r : recs) {
    while (j < truth.size() && truth[j].stamp < r.t - 1e-6) ++j;
    if (j == truth.size()) break;
    if (std::abs(truth[j].stamp - r.t) > 1e-6) continue;
    TimestepError e;
    e.t = r.t;
    e.err = state_error(r.state, truth[j]);
    out.push_back(e);
  }
  return out;
}

json error_summary(const std::vector<TimestepError>& errs) {
  std::vector<Vec3> a, p, v;
  for (const TimestepError& e : errs) {
    a.push_back(e.err.dtheta);
    p.push_back(e.err.dp);
    v.push_back(e.err.dv);
  }
  return {{"matched", errs.size()}, {"rmse", rmse_json({rmse(a) * 180.0 / M_PI, rmse(p), rmse(v)})}, {"ate_m", rmse(p)}};
}

int cmd_track(const Common& common, const std::string& in, const std::string& out, bool force_smoother) {
  RunConfig cfg = resolve(common);
  if (force_smoother) cfg.mode.smoother_enabled = true;
  const auto imu_F = read_imu_csv(join(in, "imu_F.csv"));
  const auto imu_L = read_imu_csv(join(in, "imu_L.csv"));
  const auto frames = read_frames_csv(join(in, "frames.csv"), cfg.scenario.pixel_sigma);
  const auto landmarks = read_landmarks_csv(join(in, "landmarks.csv"));

  Tracker tracker(tracker_config(cfg), landmarks);
  std::map<std::string, int> counts;
  for (const Frame& f : frames) ++counts[to_string(tracker.process(f.t, f.observations, imu_F, imu_L))];

  ensure_dir(out);
  const std::vector<TrackRecord> tracked = tracker.history();
  write_estimates_csv(join(out, "track.csv"), tracked);

  json summary;
  summary["mode"] = cfg.mode.opt == OptMode::FullOpt ? "full" : "minor";
  summary["frames"] = frames.size();
  summary["status_counts"] = counts;
  const std::string truth_path = join(in, "truth.csv");
  std::vector<RelativeState> truth;
  if (fs::exists(truth_path)) truth = read_truth_csv(truth_path);
  if (!truth.empty()) summary["track"] = error_summary(match_truth(tracked, truth));

  if (cfg.mode.smoother_enabled) {
    if (tracked.empty()) throw Error(ErrorKind::SingularSystem, "tracking produced no states to smooth");
    SmootherOptions so;
    so.estimate_landmarks = cfg.mode.estimate_landmarks;
    const SmoothResult sr = launch_smoother(tracker, so).get();
    std::vector<TrackRecord> smoothed = tracker.history();
    for (TrackRecord& r : smoothed) r.cov.resize(0, 0);
    write_estimates_csv(join(out, "smoothed.csv"), smoothed);
    if (cfg.mode.estimate_landmarks) write_landmarks_csv(join(out, "landmarks_refined.csv"), sr.landmarks);
    summary["smoother_iterations"] = sr.report.iterations;
    if (!truth.empty()) summary["smoothed"] = error_summary(match_truth(smoothed, truth));
  }
  write_text_file(join(out, "summary.json"), summary.dump(2) + "\n");
  std::printf("%s\n", summary.dump().c_str());
  return kOk;
}

int cmd_mc(const Common& common, const std::string& out, std::vector<double> lambdas, std::vector<double> gammas,
           std::optional<int> runs, bool serial) {
  RunConfig cfg = resolve(common);
  if (lambdas.empty()) lambdas = cfg.lambdas;
  if (gammas.empty()) gammas = cfg.gammas;
  if (runs) cfg.runs = *runs;
  ensure_dir(out);

  std::string csv = "lambda,gamma,t,att_deg,trans_m,vel_mps";
  if (cfg.mode.smoother_enabled) csv += ",smooth_att_deg,smooth_trans_m,smooth_vel_mps";
  csv += "\n";
  json results = json::array();
  for (double lambda : lambdas) {
    for (double gamma : gammas) {
      RunConfig c = cfg;
      c.scenario.lambda = lambda;
      c.scenario.gamma = gamma;
      const MonteCarloConfig mc = monte_carlo_config(c);
      const MonteCarloReport rep = serial ? run_monte_carlo_serial(mc) : run_monte_carlo(mc);
      for (std::size_t k = 0; k < rep.t.size(); ++k) {
        const Rmse& r = rep.track_per_time[k];
        csv += fmt::format("{},{},{:.6f},{:.9g},{:.9g},{:.9g}", lambda, gamma, rep.t[k], r.att_deg, r.trans_m, r.vel_mps);
        if (cfg.mode.smoother_enabled) {
          const Rmse& s = rep.smooth_per_time[k];
          csv += fmt::format(",{:.9g},{:.9g},{:.9g}", s.att_deg, s.trans_m, s.vel_mps);
        }
        csv += "\n";
      }
      json entry = {{"lambda", lambda},
                    {"gamma", gamma},
                    {"runs", mc.n_runs},
                    {"failed", rep.failed},
                    {"rmse", rmse_json(rep.track_overall)},
                    {"median_trans_m", rep.median_track_trans},
                    {"envelope_fraction", rep.envelope_fraction}};
      if (cfg.mode.smoother_enabled) entry["smoothed_rmse"] = rmse_json(rep.smooth_overall);
      json failures = json::array();
      double seconds = 0.0;
      for (const RunResult& r : rep.runs) {
        seconds += r.seconds;
        if (!r.ok) failures.push_back({{"run", r.run}, {"seed", r.seed}, {"error", r.error}});
      }
      entry["failures"] = failures;
      results.push_back(entry);
      std::fprintf(stderr, "lambda=%g gamma=%g: trans %.4f m, att %.3f deg, vel %.4f m/s (%d failed, %.1f s cpu)\n",
                   lambda, gamma, rep.track_overall.trans_m, rep.track_overall.att_deg, rep.track_overall.vel_mps,
                   rep.failed, seconds);
    }
  }
  json summary = {{"seed", cfg.scenario.seed},
                  {"mode", cfg.mode.opt == OptMode::FullOpt ? "full" : "minor"},
                  {"smoother", cfg.mode.smoother_enabled},
                  {"estimate_landmarks", cfg.mode.estimate_landmarks},
                  {"steady_state_start", cfg.steady_state_start},
                  {"results", results}};
  write_text_file(join(out, "rmse_vs_time.csv"), csv);
  write_text_file(join(out, "summary.json"), summary.dump(2) + "\n");
  return kOk;
}

int cmd_verify(const Common& common, const std::string& suite, int trials) {
  const RunConfig cfg = resolve(common);
  const std::uint64_t seed = cfg.scenario.seed;
  bool all_pass = true;
  auto line = [&](const std::string& name, bool pass, const std::string& detail) {
    all_pass = all_pass && pass;
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  };
  const bool all = suite == "all";
  if (all || suite == "jacobians") {
    const auto r = jacobian_suite(100, seed);
    line("jacobians", r.pass,
         fmt::format("{} entries, {} above 1e-5, {} structural violations, max error {:.3e}", r.entries, r.failures,
                     r.structural_violations, r.max_error));
  }
  if (all || suite == "covariance") {
    const auto r = covariance_oracle(trials, 10, seed);
    line("covariance", r.pass,
         fmt::format("rel Frobenius {:.4f} (without cross terms {:.4f}), correlation error {:.4f} (without {:.4f})",
                     r.rel_frobenius, r.rel_frobenius_no_cross, r.corr_error, r.corr_error_no_cross));
  }
  if (all || suite == "marginalization") {
    const auto r = marginalization_oracle(50, seed);
    line("marginalization", r.pass, fmt::format("{} instances, max relative error {:.3e}", r.instances, r.max_error));
  }
  if (all || suite == "convergence") {
    const auto r = convergence_oracle(cfg.scenario);
    line("convergence", r.pass,
         fmt::format("rms {:.3e} {:.3e} {:.3e}, ratios {:.3f} {:.3f}", r.rms[0], r.rms[1], r.rms[2], r.ratios[0],
                     r.ratios[1]));
  }
  if (all || suite == "bias") {
    const auto r = bias_update_oracle(cfg.scenario);
    line("bias", r.pass,
         fmt::format("errors {:.3e} {:.3e} {:.3e}, slopes {:.3f} {:.3f}", r.errors[0], r.errors[1], r.errors[2],
                     r.slopes[0], r.slopes[1]));
  }
  return all_pass ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Leader-follower relative state estimation: simulation, tracking, smoothing, evaluation"};
  app.require_subcommand(1);
  Common common;

  auto* sim = app.add_subcommand("sim", "write a synthetic scenario as CSV files");
  std::string sim_out = "scenario";
  std::optional<double> sim_lambda, sim_gamma;
  sim->add_option("--out", sim_out, "output directory");
  sim->add_option("--lambda", sim_lambda, "acceleration amplitude, m/s^2");
  sim->add_option("--gamma", sim_gamma, "fraction of frames with detections");
  add_common(sim, common);

  auto* track = app.add_subcommand("track", "run the tracker on scenario CSVs");
  std::string in_dir = "scenario", out_dir = "results";
  track->add_option("--in", in_dir, "scenario directory")->check(CLI::ExistingDirectory);
  track->add_option("--out", out_dir, "output directory");
  add_common(track, common);

  auto* smooth = app.add_subcommand("smooth", "track, then run the full smoother");
  smooth->add_option("--in", in_dir, "scenario directory")->check(CLI::ExistingDirectory);
  smooth->add_option("--out", out_dir, "output directory");
  add_common(smooth, common);

  auto* mc = app.add_subcommand("mc", "Monte-Carlo sweep over lambda x gamma");
  std::vector<double> lambdas, gammas;
  std::optional<int> runs;
  bool serial = false;
  std::string mc_out = "mc";
  mc->add_option("--lambda", lambdas, "acceleration amplitudes (default 3 9 15)");
  mc->add_option("--gamma", gammas, "recognition rates (default 1.0 0.75)");
  mc->add_option("--runs", runs, "runs per configuration")->check(CLI::PositiveNumber);
  mc->add_option("--out", mc_out, "output directory");
  mc->add_flag("--serial", serial, "use the single-threaded reference loop");
  add_common(mc, common);

  auto* verify = app.add_subcommand("verify", "run the oracle suites");
  std::string suite = "all";
  int trials = 100000;
  verify->add_option("--suite", suite, "jacobians, covariance, marginalization, convergence, bias or all")
      ->check(CLI::IsMember({"jacobians", "covariance", "marginalization", "convergence", "bias", "all"}));
  verify->add_option("--trials", trials, "covariance oracle trials")->check(CLI::Range(100, 100000000));
  add_common(verify, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) return cmd_sim(common, sim_out, sim_lambda, sim_gamma);
    if (*track) return cmd_track(common, in_dir, out_dir, false);
    if (*smooth) return cmd_track(common, in_dir, out_dir, true);
    if (*mc) return cmd_mc(common, mc_out, lambdas, gammas, runs, serial);
    if (*verify) return cmd_verify(common, suite, trials);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == ErrorKind::InvalidArgument ? kUsage : kRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kUsage;
}
