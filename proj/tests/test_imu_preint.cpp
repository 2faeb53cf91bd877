#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "relnav/error.hpp"
#include "relnav/estimator.hpp"
#include "relnav/imu_preint.hpp"
#include "relnav/sim.hpp"

using namespace relnav;

namespace {

std::vector<ImuSample> constant_stream(const Vec3& acc, const Vec3& gyro, double dt, int n) {
  std::vector<ImuSample> s;
  for (int k = 0; k <= n; ++k) s.push_back({k * dt, acc, gyro});
  return s;
}

std::vector<ImuSample> wavy_stream(double dt, int n) {
  std::vector<ImuSample> s;
  for (int k = 0; k <= n; ++k) {
    const double t = k * dt;
    s.push_back({t, Vec3(0.5 * std::sin(3 * t), -0.2 + 0.3 * std::cos(2 * t), 9.81 + 0.1 * t),
                 Vec3(0.4 * std::cos(t), 0.3, -0.5 * std::sin(2 * t))});
  }
  return s;
}

const ImuNoiseParams kNoise{2.269e-3, 1.536e-5, 8.182e-3, 6.154e-4};

// Ground-truth gravity-free deltas of a platform between two instants.
struct Deltas {
  Mat3 dR;
  Vec3 dv, dp;
};

Deltas true_deltas(const PlatformState& a, const PlatformState& b, double T, const Vec3& g) {
  return {a.R.transpose() * b.R, a.R.transpose() * (b.v - a.v - g * T),
          a.R.transpose() * (b.p - a.p - a.v * T - 0.5 * g * T * T)};
}

}  // namespace

TEST(Integrate, NullMotion) {
  const auto s = constant_stream(Vec3::Zero(), Vec3::Zero(), 0.004, 100);
  const Preintegration p = integrate(s, Vec3::Zero(), Vec3::Zero(), kNoise, 0.0, 0.4);
  EXPECT_LT((p.dR - Mat3::Identity()).norm(), 1e-15);
  EXPECT_EQ(p.dv, Vec3::Zero());
  EXPECT_EQ(p.dp, Vec3::Zero());
  EXPECT_NEAR(p.T, 0.4, 1e-12);
}

TEST(Integrate, ConstantRateIsExact) {
  const auto s = constant_stream(Vec3::Zero(), Vec3(0, 0, 1), 0.004, 125);
  const Preintegration p = integrate(s, Vec3::Zero(), Vec3::Zero(), kNoise, 0.0, 0.5);
  EXPECT_LT((p.dR - so3::exp_map(Vec3(0, 0, 0.5))).norm(), 1e-9);
  EXPECT_EQ(p.n_samples, 125);
}

TEST(Integrate, BiasIsSubtracted) {
  const Vec3 bg(0.01, -0.02, 0.03), ba(0.1, 0.2, -0.1);
  const auto s = constant_stream(ba, bg, 0.004, 50);
  const Preintegration p = integrate(s, bg, ba, kNoise, 0.0, 0.2);
  EXPECT_LT((p.dR - Mat3::Identity()).norm(), 1e-14);
  EXPECT_LT(p.dv.norm(), 1e-14);
  EXPECT_LT(p.dp.norm(), 1e-14);
}

TEST(Integrate, BoundaryInterpolation) {
  // Window ends between samples: the first partial step uses the interpolated rate.
  const auto s = wavy_stream(0.004, 100);
  const Preintegration p = integrate(s, Vec3::Zero(), Vec3::Zero(), kNoise, 0.001, 0.0395);
  EXPECT_NEAR(p.T, 0.0385, 1e-12);
  EXPECT_NEAR(p.first.dt, 0.003, 1e-12);
  const ImuSample a = interpolate(s, 0.001);
  EXPECT_LT((p.first.dR - so3::exp_map(a.gyro * 0.003)).norm(), 1e-14);
}

TEST(Integrate, SecondOrderAgainstAnalyticTrajectory) {
  std::vector<double> err_p;
  for (double rate : {250.0, 500.0, 1000.0}) {
    ScenarioConfig cfg;
    cfg.imu_rate = rate;
    cfg.imu_noise = false;
    cfg.bias_sigma_g_F = cfg.bias_sigma_a_F = 0.0;
    cfg.num_segments = 8;
    const GroundTruth gt = generate_trajectories(cfg);
    const auto imu = synthesize_imu(gt, cfg, Platform::Follower);
    double sum = 0.0, rot = 0.0, vel = 0.0;
    int n = 0;
    for (std::size_t k = 0; k + 1 < gt.frame_times.size(); ++k) {
      const double t0 = gt.frame_times[k], t1 = gt.frame_times[k + 1];
      const Preintegration p = integrate(imu_window(imu, t0, t1, 1.0), Vec3::Zero(), Vec3::Zero(), cfg.noise_F, t0, t1, false);
      const Deltas d = true_deltas(gt.follower[k], gt.follower[k + 1], t1 - t0, cfg.gravity);
      rot = std::max(rot, so3::log_map(d.dR.transpose() * p.dR).norm());
      vel = std::max(vel, (d.dv - p.dv).norm());
      sum += (d.dp - p.dp).squaredNorm();
      ++n;
    }
    EXPECT_LT(rot, 1e-11);  // increment-form samples make rotation and velocity exact
    EXPECT_LT(vel, 1e-10);
    err_p.push_back(std::sqrt(sum / n));
  }
  EXPECT_NEAR(err_p[0] / err_p[1], 4.0, 1.0);
  EXPECT_NEAR(err_p[1] / err_p[2], 4.0, 1.0);
}

TEST(Integrate, EmptyIntervalErrors) {
  const auto s = wavy_stream(0.004, 10);
  EXPECT_THROW(
      {
        try {
          integrate(s, Vec3::Zero(), Vec3::Zero(), kNoise, 0.1, 0.2);
        } catch (const Error& e) {
          EXPECT_EQ(e.kind(), ErrorKind::EmptyInterval);
          throw;
        }
      },
      Error);
  EXPECT_THROW(integrate(s, Vec3::Zero(), Vec3::Zero(), kNoise, 0.02, 0.02), Error);
  EXPECT_THROW(integrate({}, Vec3::Zero(), Vec3::Zero(), kNoise, 0.0, 0.01), Error);
}

TEST(Integrate, NonMonotonicTimeErrors) {
  auto s = wavy_stream(0.004, 10);
  s[5].t = s[4].t;
  try {
    integrate(s, Vec3::Zero(), Vec3::Zero(), kNoise, 0.0, 0.04);
    FAIL() << "expected NonMonotonicTime";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonMonotonicTime);
  }
}

TEST(Integrate, CovarianceSymmetricPsdAndGrowing) {
  const auto s = wavy_stream(0.004, 200);
  Preintegrator pi(Vec3::Zero(), Vec3::Zero(), kNoise);
  double last_trace = 0.0;
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    pi.add(s[k].acc, s[k].gyro, 0.004);
    const Mat9& C = pi.result().cov;
    EXPECT_LT((C - C.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Mat9>(C).eigenvalues().minCoeff(), -1e-12);
    EXPECT_GE(C.trace(), last_trace);
    last_trace = C.trace();
  }
  EXPECT_TRUE(so3::is_rotation(pi.result().dR));
}

TEST(Integrate, LongChainsStayOrthonormal) {
  Preintegrator pi(Vec3::Zero(), Vec3::Zero(), kNoise, false);
  for (int k = 0; k < 5000; ++k) pi.add(Vec3(0, 0, 9.81), Vec3(0.7, -1.1, 0.4), 0.004);
  EXPECT_TRUE(so3::is_rotation(pi.result().dR, 1e-12));
}

TEST(Integrate, CompositionConsistency) {
  const auto s = wavy_stream(0.004, 100);
  const Preintegration a = integrate(s, Vec3::Zero(), Vec3::Zero(), kNoise, 0.0, 0.16);
  const Preintegration b = integrate(s, Vec3::Zero(), Vec3::Zero(), kNoise, 0.16, 0.4);
  const Preintegration ab = integrate(s, Vec3::Zero(), Vec3::Zero(), kNoise, 0.0, 0.4);
  const CorrectedDeltas c = compose({a.dR, a.dv, a.dp}, {b.dR, b.dv, b.dp}, b.T);
  EXPECT_LT((c.dR - ab.dR).norm(), 1e-10);
  EXPECT_LT((c.dv - ab.dv).norm(), 1e-10);
  EXPECT_LT((c.dp - ab.dp).norm(), 1e-10);
}

TEST(BiasUpdate, ZeroDeltaIsIdentity) {
  const auto s = wavy_stream(0.004, 100);
  const Preintegration p = integrate(s, Vec3(0.01, 0, 0), Vec3(0, 0.1, 0), kNoise, 0.0, 0.4);
  const CorrectedDeltas c = first_order_bias_update(p, Vec3::Zero(), Vec3::Zero());
  EXPECT_EQ(c.dR, p.dR);
  EXPECT_EQ(c.dv, p.dv);
  EXPECT_EQ(c.dp, p.dp);
}

TEST(BiasUpdate, GyroBiasErrorIsQuadratic) {
  const auto s = wavy_stream(0.004, 250);
  const Preintegration p = integrate(s, Vec3::Zero(), Vec3::Zero(), kNoise, 0.0, 1.0);
  std::vector<double> err;
  for (double d : {0.005, 0.0025, 0.00125}) {
    const Vec3 dbg(d, 0, 0);
    const CorrectedDeltas c = first_order_bias_update(p, dbg, Vec3::Zero());
    const Preintegration full = integrate(s, dbg, Vec3::Zero(), kNoise, 0.0, 1.0);
    err.push_back(so3::log_map(c.dR.transpose() * full.dR).norm() + (c.dv - full.dv).norm() + (c.dp - full.dp).norm());
  }
  EXPECT_NEAR(err[0] / err[1], 4.0, 0.4);
  EXPECT_NEAR(err[1] / err[2], 4.0, 0.4);
}

TEST(BiasUpdate, AccelBiasLeavesRotation) {
  const auto s = wavy_stream(0.004, 100);
  const Preintegration p = integrate(s, Vec3::Zero(), Vec3::Zero(), kNoise, 0.0, 0.4);
  const CorrectedDeltas c = first_order_bias_update(p, Vec3::Zero(), Vec3(0.01, 0, 0));
  EXPECT_EQ(c.dR, p.dR);
  // Velocity and position are linear in the accelerometer bias.
  const Preintegration full = integrate(s, Vec3::Zero(), Vec3(0.01, 0, 0), kNoise, 0.0, 0.4);
  EXPECT_LT((c.dv - full.dv).norm(), 1e-12);
  EXPECT_LT((c.dp - full.dp).norm(), 1e-12);
}

TEST(CrossCov, SingleStep) {
  const auto s = constant_stream(Vec3(0.1, 0.2, 9.8), Vec3(0.3, -0.2, 0.5), 0.004, 1);
  const Preintegration p = integrate(s, Vec3::Zero(), Vec3::Zero(), kNoise, 0.0, 0.004);
  const GyroCrossCov e = cross_cov_terms(p, kNoise);
  EXPECT_LT(e.E_v.norm(), 1e-18);
  EXPECT_LT(e.E_p.norm(), 1e-18);
  const Mat3 expected = so3::right_jacobian(Vec3(0.3, -0.2, 0.5) * 0.004) * kNoise.sigma_gv * kNoise.sigma_gv;
  EXPECT_LT((e.E_phi - expected).norm(), 1e-15);
}

TEST(CrossCov, ZeroNoise) {
  const auto s = wavy_stream(0.004, 10);
  const Preintegration p = integrate(s, Vec3::Zero(), Vec3::Zero(), ImuNoiseParams{}, 0.0, 0.04);
  const GyroCrossCov e = cross_cov_terms(p, ImuNoiseParams{});
  EXPECT_EQ(e.E_phi, Mat3::Zero());
  EXPECT_EQ(e.E_v, Mat3::Zero());
  EXPECT_EQ(e.E_p, Mat3::Zero());
}

TEST(CrossCov, MatchesSampledCorrelation) {
  const double dt = 0.004;
  const int n = 10;
  // Larger rates make the cross terms well above the sampling noise.
  std::vector<ImuSample> s;
  for (int k = 0; k <= n; ++k) s.push_back({k * dt, Vec3(2.0, -1.0, 9.81) + Vec3(0.5, 0.2, 0.0) * k, Vec3(1.5, -2.0, 3.0)});
  const Preintegration nominal = integrate(s, Vec3::Zero(), Vec3::Zero(), kNoise, 0.0, n * dt, false);
  const GyroCrossCov model = cross_cov_terms(nominal, kNoise);

  // Noise on the other samples is independent of eta0 and leaves the expectation
  // unchanged, so only the first gyro sample is perturbed to keep the estimate sharp.
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd(0.0, 1.0);
  const double sg = kNoise.sigma_gv / std::sqrt(dt);
  Mat3 Ephi = Mat3::Zero(), Ev = Mat3::Zero(), Ep = Mat3::Zero();
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    std::vector<ImuSample> noisy = s;
    const Vec3 eta0 = sg * Vec3(nd(rng), nd(rng), nd(rng));
    noisy[0].gyro += eta0;
    const Preintegration p = integrate(noisy, Vec3::Zero(), Vec3::Zero(), kNoise, 0.0, n * dt, false);
    Ephi += so3::log_map(nominal.dR.transpose() * p.dR) * eta0.transpose();
    Ev += (p.dv - nominal.dv) * eta0.transpose();
    Ep += (p.dp - nominal.dp) * eta0.transpose();
  }
  Ephi /= trials;
  Ev /= trials;
  Ep /= trials;
  EXPECT_LT((Ephi - model.E_phi).norm() / model.E_phi.norm(), 0.1);
  EXPECT_LT((Ev - model.E_v).norm() / model.E_v.norm(), 0.1);
  EXPECT_LT((Ep - model.E_p).norm() / model.E_p.norm(), 0.1);
}

TEST(NoiseParams, ValidateRejectsNonPositive) {
  EXPECT_NO_THROW(kNoise.validate());
  EXPECT_THROW((ImuNoiseParams{0.0, 1e-5, 1e-2, 1e-4}.validate()), Error);
  EXPECT_THROW((ImuNoiseParams{1e-3, -1e-5, 1e-2, 1e-4}.validate()), Error);
}
