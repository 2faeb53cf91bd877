#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>
#include <random>

#include "relnav/error.hpp"
#include "relnav/estimator.hpp"
#include "relnav/factors.hpp"
#include "relnav/gauss_newton.hpp"
#include "relnav/oracles.hpp"
#include "relnav/sim.hpp"

using namespace relnav;

namespace {

CameraModel plain_camera() {
  CameraModel c;
  c.fx = c.fy = 460.0;
  c.cx = 320.0;
  c.cy = 240.0;
  return c;
}

RelativeState random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  RelativeState s;
  s.R = so3::exp_map(0.2 * Vec3(n(rng), n(rng), n(rng)));
  s.t = Vec3(0.05 * n(rng), 0.05 * n(rng), 0.7 + 0.05 * n(rng));
  return s;
}

// Two consecutive frames of the default scenario as a tracking-sized problem.
GaussNewtonProblem two_state_problem(std::uint64_t seed, bool perturb) {
  ScenarioConfig cfg;
  cfg.seed = seed;
  cfg.num_segments = 4;
  const Scenario sc = make_scenario(cfg);
  int k = 10;
  while (sc.frames[k + 1].observations.size() < 8) ++k;
  const double t0 = sc.frames[k].t, t1 = sc.frames[k + 1].t;
  const RelativeState& xi = sc.truth.relative[k];

  GaussNewtonProblem p;
  p.mode = OptMode::MinorOpt;
  p.cam = cfg.cam;
  p.states = {xi, sc.truth.relative[k + 1]};
  p.landmarks = sc.landmarks_nominal;
  const auto wF = imu_window(sc.imu_F, t0, t1, 1.0), wL = imu_window(sc.imu_L, t0, t1, 1.0);
  auto f = std::make_shared<ExtendedFactor>(make_extended_factor(
      integrate(wF, xi.bg_F, xi.ba_F, cfg.noise_F, t0, t1), integrate(wL, xi.bg_L, xi.ba_L, cfg.noise_L, t0, t1),
      interpolate(wL, t0).gyro, interpolate(wL, t1).gyro, xi, cfg.noise_L));
  p.extended.push_back({0, 1, f});
  p.priors.push_back({0, make_diagonal_prior(xi, PriorSigmas{}, kMinorDim, PriorSigmas{})});
  for (int b = 0; b < 2; ++b) {
    p.biases.push_back({0, 1, static_cast<BiasBlock>(b), b == 0 ? cfg.noise_F.sigma_gu : cfg.noise_F.sigma_au,
                        t1 - t0});
  }
  for (std::size_t m = 0; m < 8; ++m) {
    const FeatureObservation& o = sc.frames[k + 1].observations[m];
    p.features.push_back({1, o.feature_id, o});
  }
  if (perturb) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(kMinorDim);
    d.segment<3>(0) = Vec3(0.02, -0.01, 0.015);
    d.segment<3>(3) = Vec3(0.01, 0.02, -0.01);
    d.segment<3>(6) = Vec3(0.1, -0.05, 0.05);
    p.states[1] = boxplus(p.states[1], d);
  }
  return p;
}

Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd A(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) A(r, c) = g(rng);
  return A * A.transpose() + n * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST(Project, OpticalAxis) {
  const Vec2 px = project(plain_camera(), RelativeState{}, Vec3(0, 0, 1));
  EXPECT_DOUBLE_EQ(px.x(), 320.0);
  EXPECT_DOUBLE_EQ(px.y(), 240.0);
}

TEST(Project, OffAxisPoint) {
  const Vec2 px = project(plain_camera(), RelativeState{}, Vec3(0.1, 0, 1));
  EXPECT_NEAR(px.x(), 366.0, 1e-12);
  EXPECT_NEAR(px.y(), 240.0, 1e-12);
}

TEST(Project, BehindCamera) {
  try {
    project(plain_camera(), RelativeState{}, Vec3(0, 0, -1));
    FAIL() << "expected BehindCamera";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BehindCamera);
  }
  EXPECT_THROW(project(plain_camera(), RelativeState{}, Vec3(0, 0, 5e-4)), Error);
}

TEST(Project, MatchesHomogeneousTransform) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  CameraModel cam = ScenarioConfig::default_camera();
  cam.t_L_in_C = Vec3(0.01, -0.02, 0.03);
  for (int trial = 0; trial < 200; ++trial) {
    const RelativeState s = random_state(rng);
    const Vec3 pt(0.05 * n(rng), 0.05 * n(rng), 0.05 * n(rng));
    Eigen::Matrix4d T_FL = Eigen::Matrix4d::Identity(), T_LC = Eigen::Matrix4d::Identity();
    T_FL.topLeftCorner<3, 3>() = s.R;
    T_FL.topRightCorner<3, 1>() = s.t;
    T_LC.topLeftCorner<3, 3>() = cam.R_L_to_C;
    T_LC.topRightCorner<3, 1>() = cam.t_L_in_C;
    const Eigen::Vector4d pc = T_LC * T_FL * Eigen::Vector4d(pt.x(), pt.y(), pt.z(), 1.0);
    Eigen::Matrix3d K;
    K << cam.fx, 0, cam.cx, 0, cam.fy, cam.cy, 0, 0, 1;
    const Vec3 h = K * pc.head<3>();
    const Vec2 expected = h.head<2>() / h.z();
    EXPECT_LT((project(cam, s, pt) - expected).norm(), 1e-9);
  }
}

TEST(FeatureFactor, ZeroResidualAtExactProjection) {
  const CameraModel cam = plain_camera();
  RelativeState s;
  s.t = Vec3(0.01, 0.02, 0.7);
  const Vec3 lm(0.07, -0.07, 0.0);
  FeatureObservation o{3, project(cam, s, lm), 1.0};
  EXPECT_LT(feature_residual_jacobian(cam, s, o, lm).residual.norm(), 1e-12);
}

TEST(FeatureFactor, OnePixelWhitened) {
  const CameraModel cam = plain_camera();
  RelativeState s;
  s.t = Vec3(0.0, 0.0, 0.7);
  const Vec3 lm(0.07, 0.07, 0.0);
  FeatureObservation o{0, project(cam, s, lm) + Vec2(1.0, 0.0), 1.0};
  const Vec2 r = feature_residual_jacobian(cam, s, o, lm).residual;
  EXPECT_NEAR(std::abs(r.x()), 1.0, 1e-12);
  EXPECT_NEAR(r.y(), 0.0, 1e-12);
  o.sigma = 2.0;
  EXPECT_NEAR(std::abs(feature_residual_jacobian(cam, s, o, lm).residual.x()), 0.5, 1e-12);
}

TEST(FeatureFactor, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  const CameraModel cam = ScenarioConfig::default_camera();
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    RelativeState s = random_state(rng);
    // Keep the point in front of the tilted camera.
    s.t = cam.R_L_to_C.transpose() * Vec3(0.05 * n(rng), 0.05 * n(rng), 0.7);
    const Vec3 lm(0.05 * n(rng), 0.05 * n(rng), 0.05 * n(rng));
    FeatureObservation o{0, project(cam, s, lm) + Vec2(n(rng), n(rng)), 1.5};
    const FeatureLinearization lin = feature_residual_jacobian(cam, s, o, lm);
    for (int c = 0; c < 6; ++c) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(kMinorDim);
      d(c) = h;
      const Vec2 rp = feature_residual_jacobian(cam, boxplus(s, d), o, lm).residual;
      const Vec2 rm = feature_residual_jacobian(cam, boxplus(s, -d), o, lm).residual;
      const Vec2 num = (rp - rm) / (2 * h);
      for (int r = 0; r < 2; ++r) EXPECT_LE(std::abs(lin.J_pose(r, c) - num(r)), 1e-5 * std::max(1.0, std::abs(num(r))));
    }
    for (int c = 0; c < 3; ++c) {
      Vec3 d = Vec3::Zero();
      d(c) = h;
      const Vec2 num = (feature_residual_jacobian(cam, s, o, lm + d).residual -
                        feature_residual_jacobian(cam, s, o, lm - d).residual) /
                       (2 * h);
      for (int r = 0; r < 2; ++r) EXPECT_LE(std::abs(lin.J_point(r, c) - num(r)), 1e-5 * std::max(1.0, std::abs(num(r))));
    }
  }
}

TEST(FeatureFactor, NoiseOnlyResidualsHaveUnitVariance) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  const CameraModel cam = plain_camera();
  RelativeState s;
  s.t = Vec3(0.0, 0.0, 0.7);
  const Vec3 lm(0.07, -0.07, 0.0);
  const double sigma = 1.3;
  double sum2 = 0.0;
  const int N = 10000;
  for (int k = 0; k < N; ++k) {
    FeatureObservation o{0, project(cam, s, lm) + sigma * Vec2(n(rng), n(rng)), sigma};
    sum2 += feature_residual_jacobian(cam, s, o, lm).residual.squaredNorm();
  }
  EXPECT_NEAR(sum2 / (2.0 * N), 1.0, 0.10);
}

TEST(BiasRandomWalk, Examples) {
  const double su = 0.02, T = 0.04;
  EXPECT_EQ(bias_rw_residual(Vec3(1, 2, 3), Vec3(1, 2, 3), su, T), Vec3::Zero());
  const Vec3 r = bias_rw_residual(Vec3::Zero(), Vec3(su * std::sqrt(T), 0, 0), su, T);
  EXPECT_NEAR(r.x(), 1.0, 1e-12);
  EXPECT_EQ(r.y(), 0.0);
  EXPECT_EQ(r.z(), 0.0);
}

TEST(BiasRandomWalk, SimulatedIncrementVariance) {
  const double su = 1.536e-5, T = 0.04, dt = 0.004;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  const int N = 10000;
  double sum2 = 0.0;
  for (int k = 0; k < N; ++k) {
    double b = 0.0;
    for (int s = 0; s < 10; ++s) b += su * std::sqrt(dt) * n(rng);
    sum2 += b * b;
  }
  EXPECT_NEAR(sum2 / N / (su * su * T), 1.0, 0.05);
  // Whitened increments are unit variance for the same draws.
  EXPECT_NEAR(bias_rw_residual(Vec3::Zero(), Vec3(std::sqrt(sum2 / N), 0, 0), su, T).x(), 1.0, 0.05);
}

TEST(GaussNewton, FixedPoint) {
  GaussNewtonProblem p = two_state_problem(3, false);
  // Anchor state 1 at the factor's prediction so every residual vanishes.
  const PredictedState pr = predict_state(*p.extended[0].factor, p.states[0]);
  p.states[1].R = pr.R;
  p.states[1].t = pr.t;
  p.states[1].v = pr.v;
  for (FeatureEdge& e : p.features) e.obs.pixel = project(p.cam, p.states[1], p.landmarks[e.landmark]);
  const auto before = p.states;
  const SolveReport rep = solve_gauss_newton(p, 1, 0.0);
  EXPECT_LT(rep.last_step_norm, 1e-10);
  for (int k = 0; k < 2; ++k) EXPECT_LT(boxminus(p.states[k], before[k], kMinorDim).norm(), 1e-10);
}

TEST(GaussNewton, SinglePriorSolvedInOneIteration) {
  std::mt19937_64 rng(4);
  GaussNewtonProblem p;
  RelativeState m = random_state(rng);
  m.v = Vec3(0.1, 0.2, 0.3);
  m.bg_F = Vec3(0.01, 0, 0);
  m.bg_L = Vec3(0, 0.01, 0);
  for (OptMode mode : {OptMode::MinorOpt, OptMode::FullOpt}) {
    p.mode = mode;
    const int d = state_dim(mode);
    p.priors = {{0, make_diagonal_prior(m, PriorSigmas{}, d, PriorSigmas{0, 0, 0, 0.01, 0.05})}};
    Eigen::VectorXd off = Eigen::VectorXd::LinSpaced(d, -0.3, 0.3);
    p.states = {boxplus(m, off)};
    solve_gauss_newton(p, 1, 0.0);
    EXPECT_LT(boxminus(p.states[0], m, d).norm(), 1e-12);
  }
}

TEST(GaussNewton, CostDecreasesOnTwoStateProblem) {
  GaussNewtonProblem p = two_state_problem(5, true);
  const SolveReport rep = solve_gauss_newton(p, 5, 0.0);
  ASSERT_EQ(rep.cost_history.size(), 6u);
  EXPECT_LT(rep.cost_history[1], rep.cost_history[0]);
  for (std::size_t k = 1; k < rep.cost_history.size(); ++k) EXPECT_LE(rep.cost_history[k], rep.cost_history[k - 1]);
  EXPECT_LT(rep.final_cost, 0.01 * rep.initial_cost);
}

TEST(GaussNewton, UnanchoredSystemIsSingular) {
  GaussNewtonProblem p = two_state_problem(5, false);
  p.priors.clear();
  p.features.clear();
  try {
    solve_gauss_newton(p, 1);
    FAIL() << "expected SingularSystem";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularSystem);
  }
}

TEST(Marginalization, BlockDiagonalKeepsBlock) {
  std::mt19937_64 rng(2);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(30, 30);
  H.topLeftCorner(15, 15) = random_spd(15, rng);
  H.bottomRightCorner(15, 15) = random_spd(15, rng);
  const SchurResult s = schur_complement(H, 15, 15);
  EXPECT_LT((s.info - H.bottomRightCorner(15, 15)).norm(), 1e-12 * H.norm());
  EXPECT_FALSE(s.regularized);
}

TEST(Marginalization, MatchesFullInverse) {
  std::mt19937_64 rng(8);
  for (int n : {30, 42}) {
    const Eigen::MatrixXd H = random_spd(n, rng);
    const int d = n / 2;
    const SchurResult s = schur_complement(H, d, n - d);
    const Eigen::MatrixXd marg = H.inverse().bottomRightCorner(n - d, n - d);
    const Eigen::MatrixXd cov = s.info.inverse();
    EXPECT_LT((cov - marg).cwiseAbs().maxCoeff() / marg.cwiseAbs().maxCoeff(), 1e-9);
  }
  const MarginalizationReport r = marginalization_oracle(50, 1, 1e-9);
  EXPECT_TRUE(r.pass) << r.max_error;
}

TEST(Marginalization, OutputIsSymmetricPsd) {
  std::mt19937_64 rng(3);
  Eigen::MatrixXd H = random_spd(12, rng);
  H(0, 11) += 1e-9;  // slight asymmetry
  const SchurResult s = schur_complement(H, 6, 6);
  EXPECT_LT((s.info - s.info.transpose()).norm(), 1e-14 * s.info.norm());
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.info).eigenvalues().minCoeff(), 0.0);
}

TEST(Marginalization, StaticSequenceKeepsEstimate) {
  // Both platforms at rest, no noise: marginalize repeatedly and re-solve.
  ScenarioConfig cfg;
  const double dt = 1.0 / cfg.imu_rate, T = 1.0 / cfg.frame_rate;
  RelativeState x;
  x.R = so3::exp_map(Vec3(0.1, 0.05, -0.2));
  x.t = Vec3(0.02, -0.01, 0.7);
  std::vector<ImuSample> F, L;
  for (int k = 0; k <= 20 * 10 + 2; ++k) {
    F.push_back({k * dt, x.R.transpose() * Vec3(0, 0, 9.81), Vec3::Zero()});
    L.push_back({k * dt, Vec3(0, 0, 9.81), Vec3::Zero()});
  }
  PriorFactor prior = make_diagonal_prior(x, PriorSigmas{}, kMinorDim, PriorSigmas{});
  const std::vector<Vec3> lms = cube_corners(cfg.tag_side);
  for (int step = 0; step < 20; ++step) {
    const double t0 = step * T, t1 = t0 + T;
    GaussNewtonProblem p;
    p.cam = cfg.cam;
    p.states = {prior.mean, prior.mean};
    p.landmarks = lms;
    p.priors = {{0, prior}};
    auto f = std::make_shared<ExtendedFactor>(make_extended_factor(
        integrate(F, Vec3::Zero(), Vec3::Zero(), cfg.noise_F, t0, t1),
        integrate(L, Vec3::Zero(), Vec3::Zero(), cfg.noise_L, t0, t1), Vec3::Zero(), Vec3::Zero(), prior.mean,
        cfg.noise_L));
    p.extended = {{0, 1, f}};
    p.biases = {{0, 1, BiasBlock::GyroF, cfg.noise_F.sigma_gu, T}, {0, 1, BiasBlock::AccF, cfg.noise_F.sigma_au, T}};
    solve_gauss_newton(p, 1, 0.0);
    prior = marginalize(p, 1);
    EXPECT_LT(boxminus(prior.mean, x, kMinorDim).norm(), 1e-10);
  }
}
