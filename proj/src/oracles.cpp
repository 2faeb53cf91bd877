#include "relnav/oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "relnav/error.hpp"
#include "relnav/estimator.hpp"
#include "relnav/gauss_newton.hpp"
#include "relnav/monte_carlo.hpp"

namespace relnav {

namespace {

using Rng = std::mt19937_64;

Vec3 uniform3(Rng& rng, double a) {
  std::uniform_real_distribution<double> u(-a, a);
  const double x = u(rng), y = u(rng), z = u(rng);
  return {x, y, z};
}

Vec3 normal3(Rng& rng, double s) {
  std::normal_distribution<double> n(0.0, s);
  const double x = n(rng), y = n(rng), z = n(rng);
  return {x, y, z};
}

RelativeState random_state(Rng& rng) {
  RelativeState s;
  s.R = so3::exp_map(uniform3(rng, 2.0));
  s.t = uniform3(rng, 1.0);
  s.v = uniform3(rng, 1.0);
  s.bg_F = uniform3(rng, 0.05);
  s.ba_F = uniform3(rng, 0.1);
  s.bg_L = uniform3(rng, 0.05);
  s.ba_L = uniform3(rng, 0.1);
  return s;
}

std::vector<ImuSample> random_imu(Rng& rng, int n, double dt) {
  std::vector<ImuSample> out;
  const Vec3 acc0 = Vec3(0.0, 0.0, 9.81) + uniform3(rng, 2.0);
  const Vec3 gyro0 = uniform3(rng, 1.0);
  for (int k = 0; k <= n; ++k) out.push_back({k * dt, acc0 + uniform3(rng, 0.5), gyro0 + uniform3(rng, 0.2)});
  return out;
}

// Largest-entry comparison shared by both Jacobian families.
void compare(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric, double tol, JacobianSuiteReport& rep) {
  for (int r = 0; r < analytic.rows(); ++r) {
    for (int c = 0; c < analytic.cols(); ++c) {
      const double e = std::abs(analytic(r, c) - numeric(r, c)) / std::max(1.0, std::abs(numeric(r, c)));
      rep.max_error = std::max(rep.max_error, e);
      ++rep.entries;
      if (e > tol) ++rep.failures;
    }
  }
}

Eigen::VectorXd unit(int n, int k, double h) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  d(k) = h;
  return d;
}

Mat9 correlation(const Mat9& C, const Eigen::Matrix<double, 9, 1>& sd) {
  return sd.cwiseInverse().asDiagonal() * C * sd.cwiseInverse().asDiagonal();
}

}  // namespace

std::vector<std::vector<bool>> extended_jacobian_structure(int dim) {
  if (dim != kFullDim && dim != kMinorDim) throw Error(ErrorKind::InvalidArgument, "dim must be 15 or 21");
  const int nb = dim / 3;
  std::vector<std::vector<bool>> m(3, std::vector<bool>(2 * nb, false));
  enum { A = 0, T = 1, V = 2, BGF = 3, BAF = 4, BGL = 5, BAL = 6 };
  auto set = [&](int row, int block, bool at_j = false) {
    if (block < nb) m[row][block + (at_j ? nb : 0)] = true;
  };
  // attitude
  set(0, A); set(0, BGF); set(0, BGL); set(0, A, true);
  // velocity
  for (int b : {A, T, V, BGF, BAF, BGL, BAL}) set(1, b);
  set(1, T, true); set(1, V, true); set(1, BGL, true);
  // translation
  for (int b : {A, T, V, BGF, BAF, BGL, BAL}) set(2, b);
  set(2, T, true);
  return m;
}

JacobianSuiteReport jacobian_suite(int n_states, std::uint64_t seed, double tol) {
  Rng rng(seed);
  JacobianSuiteReport rep;
  const double h = 1e-6;
  const int dim = kFullDim;
  const auto mask = extended_jacobian_structure(dim);
  const ImuNoiseParams nF = follower_noise_table(), nL = leader_noise_table();
  const CameraModel cam = ScenarioConfig::default_camera();

  for (int s = 0; s < n_states; ++s) {
    // Extended factor at random states with a nonzero bias correction.
    const RelativeState si = random_state(rng);
    RelativeState sj = random_state(rng);
    const auto imu_F = random_imu(rng, 10, 0.004);
    const auto imu_L = random_imu(rng, 10, 0.004);
    const Vec3 bgF0 = si.bg_F + uniform3(rng, 0.01), baF0 = si.ba_F + uniform3(rng, 0.02);
    const Vec3 bgL0 = si.bg_L + uniform3(rng, 0.01), baL0 = si.ba_L + uniform3(rng, 0.02);
    ExtendedFactor f;
    f.pre_F = integrate(imu_F, bgF0, baF0, nF, 0.0, 0.04);
    f.pre_L = integrate(imu_L, bgL0, baL0, nL, 0.0, 0.04);
    f.omega_Li_meas = imu_L.front().gyro;
    f.omega_Lj_meas = imu_L.back().gyro;
    f.T = 0.04;

    const Eigen::MatrixXd J = residual_jacobians(f, si, sj, dim);
    Eigen::MatrixXd N(9, 2 * dim);
    for (int c = 0; c < 2 * dim; ++c) {
      const bool at_i = c < dim;
      const Eigen::VectorXd d = unit(dim, at_i ? c : c - dim, h);
      const Vec9 rp = at_i ? residual(f, boxplus(si, d), sj) : residual(f, si, boxplus(sj, d));
      const Vec9 rm = at_i ? residual(f, boxplus(si, -d), sj) : residual(f, si, boxplus(sj, -d));
      N.col(c) = (rp - rm) / (2.0 * h);
    }
    compare(J, N, tol, rep);
    for (int rb = 0; rb < 3; ++rb) {
      for (int cb = 0; cb < 2 * dim / 3; ++cb) {
        if (mask[rb][cb]) continue;
        const bool nonzero = (J.block<3, 3>(3 * rb, 3 * cb).array() != 0.0).any() ||
                             (N.block<3, 3>(3 * rb, 3 * cb).array().abs() > 1e-8).any();
        if (nonzero) ++rep.structural_violations;
      }
    }

    // Feature factor: a landmark placed in front of the camera.
    RelativeState x = random_state(rng);
    const Vec3 pc(uniform3(rng, 0.3).head<2>().x(), uniform3(rng, 0.3).y(), 0.4 + std::abs(uniform3(rng, 1.0).z()));
    const Vec3 pL = cam.R_L_to_C.transpose() * (pc - cam.t_L_in_C);
    const Vec3 landmark = x.R.transpose() * (pL - x.t);
    FeatureObservation obs{0, Vec2(300.0, 250.0) + uniform3(rng, 5.0).head<2>(), 1.0};
    const FeatureLinearization lin = feature_residual_jacobian(cam, x, obs, landmark);
    Eigen::MatrixXd Ja(2, 9), Jn(2, 9);
    Ja << lin.J_pose, lin.J_point;
    for (int c = 0; c < 6; ++c) {
      const Eigen::VectorXd d = unit(kMinorDim, c, h);
      Jn.col(c) = (feature_residual_jacobian(cam, boxplus(x, d), obs, landmark).residual -
                   feature_residual_jacobian(cam, boxplus(x, -d), obs, landmark).residual) /
                  (2.0 * h);
    }
    for (int c = 0; c < 3; ++c) {
      const Vec3 d = unit(3, c, h);
      Jn.col(6 + c) = (feature_residual_jacobian(cam, x, obs, landmark + d).residual -
                       feature_residual_jacobian(cam, x, obs, landmark - d).residual) /
                      (2.0 * h);
    }
    compare(Ja, Jn, tol, rep);
  }
  rep.states = n_states;
  rep.pass = rep.failures == 0 && rep.structural_violations == 0;
  return rep;
}

CovarianceOracleReport covariance_oracle(int trials, int steps, std::uint64_t seed, bool parallel) {
  if (trials < 2 || steps < 1) throw Error(ErrorKind::InvalidArgument, "need >= 2 trials and >= 1 step");
  const ImuNoiseParams nF = follower_noise_table(), nL = leader_noise_table();
  const double dt = 0.004;
  const double T = steps * dt;

  RelativeState si;
  si.R = so3::exp_map(Vec3(0.3, -0.2, 0.4));
  si.t = Vec3(0.6, 0.1, 0.2);
  si.v = Vec3(0.3, -0.2, 0.1);

  std::vector<ImuSample> F0, L0;
  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    F0.push_back({t, Vec3(0.8, -0.5, 9.81) + Vec3(0.3, 0.1, -0.2) * k / steps, Vec3(0.5, -0.4, 0.3)});
    L0.push_back({t, Vec3(-0.4, 0.6, 9.81), Vec3(0.1, 0.2, -1.6) + Vec3(0.05, 0.0, 0.1) * k / steps});
  }
  const ExtendedFactor nominal = make_extended_factor(integrate(F0, Vec3::Zero(), Vec3::Zero(), nF, 0.0, T),
                                                      integrate(L0, Vec3::Zero(), Vec3::Zero(), nL, 0.0, T),
                                                      L0.front().gyro, L0.back().gyro, si, nL);
  const PredictedState pj = predict_state(nominal, si);
  RelativeState sj = si;
  sj.R = pj.R;
  sj.t = pj.t;
  sj.v = pj.v;

  const double sgF = nF.sigma_gv / std::sqrt(dt), saF = nF.sigma_av / std::sqrt(dt);
  const double sgL = nL.sigma_gv / std::sqrt(dt), saL = nL.sigma_av / std::sqrt(dt);
  auto one_trial = [&](int n) {
    Rng rng(run_seed(seed, n));
    std::vector<ImuSample> F = F0, L = L0;
    for (ImuSample& s : F) {
      s.acc += normal3(rng, saF);
      s.gyro += normal3(rng, sgF);
    }
    for (ImuSample& s : L) {
      s.acc += normal3(rng, saL);
      s.gyro += normal3(rng, sgL);
    }
    ExtendedFactor f;
    f.pre_F = integrate(F, Vec3::Zero(), Vec3::Zero(), nF, 0.0, T, false);
    f.pre_L = integrate(L, Vec3::Zero(), Vec3::Zero(), nL, 0.0, T, false);
    f.omega_Li_meas = L.front().gyro;
    f.omega_Lj_meas = L.back().gyro;
    f.T = T;
    return residual(f, si, sj);
  };

  std::vector<Vec9> r(trials);
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int n = 0; n < trials; ++n) r[n] = one_trial(n);
  } else {
    for (int n = 0; n < trials; ++n) r[n] = one_trial(n);
  }

  Vec9 mean = Vec9::Zero();
  for (const Vec9& x : r) mean += x;
  mean /= trials;
  Mat9 S = Mat9::Zero();
  for (const Vec9& x : r) S += (x - mean) * (x - mean).transpose();
  S /= (trials - 1);

  CovarianceOracleReport rep;
  rep.trials = trials;
  rep.steps = steps;
  rep.sampled = S;
  rep.model = propagate_covariance(nominal, si, pj, nL);
  rep.model_no_cross = propagate_covariance(nominal, si, pj, nL, CovarianceOptions{false});
  rep.rel_frobenius = (S - rep.model).norm() / S.norm();
  rep.rel_frobenius_no_cross = (S - rep.model_no_cross).norm() / S.norm();
  const Vec9 sd = S.diagonal().cwiseSqrt();
  const Mat9 Cs = correlation(S, sd);
  rep.corr_error = (Cs - correlation(rep.model, sd)).norm() / Cs.norm();
  rep.corr_error_no_cross = (Cs - correlation(rep.model_no_cross, sd)).norm() / Cs.norm();
  // Omitting the cross terms has to cost clearly more than the sampling noise.
  rep.pass = rep.rel_frobenius <= 0.10 && rep.corr_error_no_cross >= 2.0 * rep.corr_error;
  return rep;
}

ConvergenceReport convergence_oracle(const ScenarioConfig& base, const std::vector<double>& imu_rates) {
  ConvergenceReport rep;
  for (double rate : imu_rates) {
    ScenarioConfig sc = base;
    sc.imu_rate = rate;
    sc.imu_noise = false;
    sc.pixel_noise = false;
    sc.bias_sigma_g_F = sc.bias_sigma_a_F = sc.bias_sigma_g_L = sc.bias_sigma_a_L = 0.0;
    const GroundTruth gt = generate_trajectories(sc);
    const auto imu_F = synthesize_imu(gt, sc, Platform::Follower);
    const auto imu_L = synthesize_imu(gt, sc, Platform::Leader);
    const double half = 0.5 * sc.segment_duration();

    double sum = 0.0, sum_free = 0.0;
    int n = 0, n_free = 0;
    for (std::size_t k = 0; k + 1 < gt.frame_times.size(); ++k) {
      const double t0 = gt.frame_times[k], t1 = gt.frame_times[k + 1];
      const auto wF = imu_window(imu_F, t0, t1, 1.0);
      const auto wL = imu_window(imu_L, t0, t1, 1.0);
      ExtendedFactor f;
      f.pre_F = integrate(wF, Vec3::Zero(), Vec3::Zero(), sc.noise_F, t0, t1, false);
      f.pre_L = integrate(wL, Vec3::Zero(), Vec3::Zero(), sc.noise_L, t0, t1, false);
      f.omega_Li_meas = interpolate(wL, t0).gyro;
      f.omega_Lj_meas = interpolate(wL, t1).gyro;
      f.T = t1 - t0;
      const double e2 = residual(f, gt.relative[k], gt.relative[k + 1]).squaredNorm();
      sum += e2;
      ++n;
      if (std::floor(t0 / half) == std::floor(t1 / half) && std::fmod(t1, half) > 1e-9) {
        sum_free += e2;
        ++n_free;
      }
    }
    rep.periods.push_back(1.0 / rate);
    rep.rms.push_back(std::sqrt(sum / n));
    rep.rms_kink_free.push_back(n_free ? std::sqrt(sum_free / n_free) : 0.0);
  }
  rep.pass = rep.rms.size() >= 2;
  for (std::size_t k = 0; k + 1 < rep.rms.size(); ++k) {
    const double ratio = rep.rms[k] / rep.rms[k + 1];
    rep.ratios.push_back(ratio);
    if (!(ratio >= 3.0 && ratio <= 5.0)) rep.pass = false;
  }
  return rep;
}

BiasUpdateReport bias_update_oracle(const ScenarioConfig& base, const std::vector<double>& deltas, double window) {
  ScenarioConfig sc = base;
  sc.imu_noise = false;
  sc.bias_sigma_g_F = sc.bias_sigma_a_F = sc.bias_sigma_g_L = sc.bias_sigma_a_L = 0.0;
  const GroundTruth gt = generate_trajectories(sc);
  const auto imu = synthesize_imu(gt, sc, Platform::Follower);
  const double t0 = 1.0, t1 = std::min(t0 + window, imu.back().t);
  const Preintegration p0 = integrate(imu, Vec3::Zero(), Vec3::Zero(), sc.noise_F, t0, t1, false);
  const Vec3 ug = Vec3(1.0, -1.0, 1.0).normalized(), ua = Vec3(-1.0, 1.0, 1.0).normalized();

  BiasUpdateReport rep;
  rep.deltas = deltas;
  for (double d : deltas) {
    const Vec3 dbg = d * ug, dba = d * ua;
    const CorrectedDeltas c = first_order_bias_update(p0, dbg, dba);
    const Preintegration full = integrate(imu, dbg, dba, sc.noise_F, t0, t1, false);
    rep.errors.push_back(so3::log_map(c.dR.transpose() * full.dR).norm() + (c.dv - full.dv).norm() +
                         (c.dp - full.dp).norm());
  }
  rep.pass = rep.errors.size() >= 2;
  for (std::size_t k = 0; k + 1 < rep.errors.size(); ++k) {
    const double slope = std::log(rep.errors[k + 1] / rep.errors[k]) / std::log(deltas[k + 1] / deltas[k]);
    rep.slopes.push_back(slope);
    if (!(slope >= 1.8 && slope <= 2.2)) rep.pass = false;
  }
  return rep;
}

MarginalizationReport marginalization_oracle(int instances, std::uint64_t seed, double tol) {
  Rng rng(seed);
  std::uniform_int_distribution<int> blocks(2, 4);
  std::normal_distribution<double> nd(0.0, 1.0);
  MarginalizationReport rep;
  rep.instances = instances;
  const int d = kMinorDim;
  for (int k = 0; k < instances; ++k) {
    const int nb = blocks(rng);
    const int n = nb * d;
    Eigen::MatrixXd A(n + 5, n);
    for (int r = 0; r < A.rows(); ++r)
      for (int c = 0; c < n; ++c) A(r, c) = nd(rng);
    const Eigen::MatrixXd H = A.transpose() * A + 0.1 * Eigen::MatrixXd::Identity(n, n);
    const int keep = std::uniform_int_distribution<int>(0, nb - 1)(rng);

    const SchurResult s = schur_complement(H, keep * d, d);
    const Eigen::MatrixXd cov = H.inverse();
    const Eigen::MatrixXd marginal = cov.block(keep * d, keep * d, d, d).inverse();
    const double err = (s.info - marginal).cwiseAbs().maxCoeff() / marginal.cwiseAbs().maxCoeff();
    rep.max_error = std::max(rep.max_error, err);
  }
  rep.pass = rep.max_error <= tol;
  return rep;
}

}  // namespace relnav
