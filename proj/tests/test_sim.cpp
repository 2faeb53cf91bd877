#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "relnav/imu_preint.hpp"
#include "relnav/sim.hpp"

using namespace relnav;

namespace {

bool same_samples(const std::vector<ImuSample>& a, const std::vector<ImuSample>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k].t != b[k].t || a[k].acc != b[k].acc || a[k].gyro != b[k].gyro) return false;
  return true;
}

}  // namespace

TEST(Trajectory, SegmentLengthIncludesClimb) {
  ScenarioConfig cfg;
  const double d_F = std::sqrt(0.283 * 0.283 + 0.1 * 0.1);
  EXPECT_NEAR(cfg.segment_duration(), 2.0 * std::sqrt(d_F / cfg.lambda), 1e-15);
  const Trajectory tr(cfg);
  for (int k = 0; k < 8; ++k) {
    const Vec3 dF = tr.vertex(Platform::Follower, k + 1) - tr.vertex(Platform::Follower, k);
    const Vec3 dL = tr.vertex(Platform::Leader, k + 1) - tr.vertex(Platform::Leader, k);
    EXPECT_NEAR(dF.head<2>().norm(), 0.283, 1e-12);
    EXPECT_NEAR(dL.head<2>().norm(), 1.414, 1e-12);
    EXPECT_NEAR(dF.z(), 0.1, 1e-12);
    EXPECT_NEAR(dL.z(), 0.1, 1e-12);
    EXPECT_NEAR(dF.norm(), d_F, 1e-12);
  }
  // Four segments close the square in plan view.
  EXPECT_LT((tr.vertex(Platform::Follower, 4) - tr.vertex(Platform::Follower, 0) - Vec3(0, 0, 0.4)).norm(), 1e-12);
}

TEST(Trajectory, VerticesReachedTogether) {
  ScenarioConfig cfg;
  const Trajectory tr(cfg);
  const double T = tr.segment_duration();
  for (int k = 0; k < 6; ++k) {
    EXPECT_LT((tr.evaluate(Platform::Follower, k * T).p - tr.vertex(Platform::Follower, k)).norm(), 1e-12);
    EXPECT_LT((tr.evaluate(Platform::Leader, k * T).p - tr.vertex(Platform::Leader, k)).norm(), 1e-12);
    EXPECT_LT(tr.evaluate(Platform::Follower, k * T).v.norm(), 1e-12);
  }
}

TEST(Trajectory, TriangularSpeedProfile) {
  ScenarioConfig cfg;
  cfg.lambda = 9.0;
  const Trajectory tr(cfg);
  const double T = tr.segment_duration();
  const double peak = cfg.lambda * T / 2.0;
  const double t0 = 3 * T;
  EXPECT_NEAR(tr.evaluate(Platform::Follower, t0 + 0.5 * T).v.norm(), peak, 1e-12);
  EXPECT_NEAR(tr.evaluate(Platform::Follower, t0 + 0.25 * T).v.norm(), 0.5 * peak, 1e-12);
  EXPECT_NEAR(tr.evaluate(Platform::Follower, t0 + 0.75 * T).v.norm(), 0.5 * peak, 1e-12);
  EXPECT_NEAR(tr.evaluate(Platform::Follower, t0 + 0.3 * T).a.norm(), cfg.lambda, 1e-12);
  const double dL = std::hypot(1.414, 0.1), dF = std::hypot(0.283, 0.1);
  EXPECT_NEAR(tr.evaluate(Platform::Leader, t0 + 0.3 * T).a.norm(), cfg.lambda * dL / dF, 1e-9);
  for (int k = 1; k < 20; ++k) {
    const double s1 = tr.evaluate(Platform::Follower, t0 + (k - 1) * T / 40).v.norm();
    const double s2 = tr.evaluate(Platform::Follower, t0 + k * T / 40).v.norm();
    EXPECT_GT(s2, s1);
  }
}

TEST(Trajectory, ConstantRelativeHeight) {
  ScenarioConfig cfg;
  const GroundTruth gt = generate_trajectories(cfg);
  for (const RelativeState& x : gt.relative) EXPECT_NEAR(x.t.z(), 0.2, 1e-12);
}

TEST(Trajectory, RelativeStateMatchesInertialSeries) {
  ScenarioConfig cfg;
  const GroundTruth gt = generate_trajectories(cfg);
  for (std::size_t k = 0; k < gt.relative.size(); ++k) {
    const PlatformState& L = gt.leader[k];
    const PlatformState& F = gt.follower[k];
    const RelativeState& x = gt.relative[k];
    EXPECT_LT((L.R * x.R - F.R).norm(), 1e-12);
    EXPECT_LT((L.p + L.R * x.t - F.p).norm(), 1e-12);
    // Inertial relative velocity from the body-frame derivative.
    EXPECT_LT((L.v + L.R * (x.v + L.omega.cross(x.t)) - F.v).norm(), 1e-12);
  }
}

TEST(Trajectory, FiniteDifferencesMatchDerivatives) {
  ScenarioConfig cfg;
  const Trajectory tr(cfg);
  const double T = tr.segment_duration(), h = 1e-5;
  for (Platform w : {Platform::Leader, Platform::Follower}) {
    for (int k = 0; k < 200; ++k) {
      const double t = 0.013 + k * 0.037;
      const double tau = std::fmod(t, 0.5 * T);
      if (tau < 2 * h || tau > 0.5 * T - 2 * h) continue;
      const PlatformState a = tr.evaluate(w, t - h), b = tr.evaluate(w, t + h), c = tr.evaluate(w, t);
      EXPECT_LT(((b.p - a.p) / (2 * h) - c.v).norm(), 1e-8);
      EXPECT_LT(((b.v - a.v) / (2 * h) - c.a).norm(), 1e-7);
      const Vec3 w_fd = so3::log_map(a.R.transpose() * b.R) / (2 * h);
      EXPECT_LT((w_fd - c.omega).norm(), 1e-8);
    }
  }
  // Relative velocity is the derivative of relative translation.
  for (int k = 0; k < 100; ++k) {
    const double t = 0.011 + k * 0.05;
    const double tau = std::fmod(t, 0.5 * T);
    if (tau < 2 * h || tau > 0.5 * T - 2 * h) continue;
    const Vec3 fd = (tr.relative(t + h).t - tr.relative(t - h).t) / (2 * h);
    EXPECT_LT((fd - tr.relative(t).v).norm(), 1e-8);
  }
}

TEST(SynthesizeImu, SlowMotionSeesGravityReaction) {
  // The trajectory always moves; at a tiny amplitude the translational
  // acceleration vanishes and only the gravity reaction and body rate remain.
  ScenarioConfig cfg;
  cfg.lambda = 1e-6;
  cfg.num_segments = 1;
  cfg.imu_noise = false;
  cfg.bias_sigma_g_F = cfg.bias_sigma_a_F = 0.0;
  GroundTruth gt = generate_trajectories(cfg);
  gt.frame_times.resize(5);
  for (Platform w : {Platform::Leader, Platform::Follower}) {
    const auto s = synthesize_imu(gt, cfg, w);
    ASSERT_EQ(s.size(), 41u);
    for (const ImuSample& m : s) {
      const PlatformState st = gt.trajectory.evaluate(w, m.t);
      EXPECT_NEAR(m.acc.norm(), 9.81, 1e-5);
      EXPECT_LT((m.acc - st.R.transpose() * Vec3(0, 0, 9.81)).norm(), 1e-5);
      EXPECT_LT((m.gyro - st.omega).norm(), 1e-12);
    }
  }
}

TEST(SynthesizeImu, WhiteNoiseVariance) {
  ScenarioConfig cfg;
  cfg.lambda = 0.01;
  cfg.num_segments = 13;
  cfg.bias_sigma_g_F = cfg.bias_sigma_a_F = 0.0;
  const GroundTruth gt = generate_trajectories(cfg);
  ScenarioConfig clean = cfg;
  clean.imu_noise = false;
  const auto noisy = synthesize_imu(gt, cfg, Platform::Follower);
  const auto exact = synthesize_imu(gt, clean, Platform::Follower);
  ASSERT_EQ(noisy.size(), exact.size());
  double sg = 0.0, sa = 0.0;
  long n = 0;
  for (std::size_t k = 0; k < noisy.size(); ++k) {
    sg += (noisy[k].gyro - exact[k].gyro).squaredNorm();
    sa += (noisy[k].acc - exact[k].acc).squaredNorm();
    n += 3;
  }
  ASSERT_GE(n, 100000);
  const double dt = 1.0 / cfg.imu_rate;
  EXPECT_NEAR(sg / n / (cfg.noise_F.sigma_gv * cfg.noise_F.sigma_gv / dt), 1.0, 0.03);
  EXPECT_NEAR(sa / n / (cfg.noise_F.sigma_av * cfg.noise_F.sigma_av / dt), 1.0, 0.03);
}

TEST(SynthesizeImu, ReintegrationReproducesRotation) {
  ScenarioConfig cfg;
  cfg.imu_noise = false;
  cfg.bias_sigma_g_F = cfg.bias_sigma_a_F = 0.0;
  cfg.num_segments = 4;
  const GroundTruth gt = generate_trajectories(cfg);
  const auto s = synthesize_imu(gt, cfg, Platform::Follower);
  for (std::size_t k = 0; k + 1 < gt.frame_times.size(); ++k) {
    const Preintegration p = integrate(s, Vec3::Zero(), Vec3::Zero(), cfg.noise_F, gt.frame_times[k],
                                       gt.frame_times[k + 1], false);
    const Mat3 dR = gt.follower[k].R.transpose() * gt.follower[k + 1].R;
    EXPECT_LT(so3::log_map(p.dR.transpose() * dR).norm(), 1e-10);
    const Vec3 dv = gt.follower[k].R.transpose() * (gt.follower[k + 1].v - gt.follower[k].v - cfg.gravity * p.T);
    EXPECT_LT((p.dv - dv).norm(), 1e-10);
  }
}

TEST(SynthesizeFrames, HeadOnFaceIsVisible) {
  ScenarioConfig cfg;
  cfg.pixel_noise = false;
  cfg.num_segments = 1;
  GroundTruth gt = generate_trajectories(cfg);
  const Vec3 z_c = cfg.cam.R_L_to_C.row(2).transpose();
  const Vec3 x_c = cfg.cam.R_L_to_C.row(0).transpose();
  RelativeState x;
  x.R.col(0) = -z_c;
  x.R.col(1) = x_c;
  x.R.col(2) = (-z_c).cross(x_c);
  x.t = 0.7 * z_c - x.R * Vec3(0.5 * cfg.tag_side, 0, 0);
  gt.frame_times = {0.0};
  gt.relative = {x};
  const auto frames = synthesize_frames(gt, cfg);
  ASSERT_EQ(frames.size(), 1u);
  ASSERT_EQ(frames[0].observations.size(), 4u);
  for (int c = 0; c < 4; ++c) EXPECT_EQ(frames[0].observations[c].feature_id, c);
  // The face centre lands on the principal point.
  Vec2 mean = Vec2::Zero();
  for (const auto& o : frames[0].observations) mean += 0.25 * o.pixel;
  EXPECT_NEAR(mean.x(), cfg.cam.cx, 1e-9);
  EXPECT_NEAR(mean.y(), cfg.cam.cy, 1e-9);

  // Turned away: nothing visible.
  gt.relative[0].R = x.R * so3::exp_map(Vec3(0, 0, M_PI));
  gt.relative[0].t = 0.7 * z_c + gt.relative[0].R * Vec3(0.5 * cfg.tag_side, 0, 0);
  const auto back = synthesize_frames(gt, cfg);
  for (const auto& o : back[0].observations) EXPECT_GE(o.feature_id, 4);
}

TEST(SynthesizeFrames, EveryKeptFrameHasATag) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ScenarioConfig cfg;
    cfg.seed = seed;
    const Scenario sc = make_scenario(cfg);
    int kept = 0;
    for (const Frame& f : sc.frames) {
      if (f.dropped) continue;
      ++kept;
      EXPECT_GE(f.observations.size(), 4u) << "t = " << f.t;
      EXPECT_EQ(f.observations.size() % 4, 0u);
      for (const auto& o : f.observations) EXPECT_TRUE(cfg.cam.in_image(o.pixel));
    }
    EXPECT_EQ(kept, static_cast<int>(sc.frames.size()));
  }
}

TEST(Dropout, ExactCount) {
  const auto drop = dropout_pattern(1000, 0.8);
  EXPECT_EQ(std::count(drop.begin(), drop.end(), false), 800);
  const auto quarter = dropout_pattern(12, 0.75);
  for (int k = 0; k < 12; ++k) EXPECT_EQ(quarter[k], k % 4 == 3) << k;
  const auto none = dropout_pattern(50, 1.0);
  EXPECT_EQ(std::count(none.begin(), none.end(), true), 0);
}

TEST(Dropout, AppliedToScenario) {
  ScenarioConfig cfg;
  cfg.gamma = 0.75;
  const Scenario sc = make_scenario(cfg);
  int dropped = 0;
  for (const Frame& f : sc.frames) {
    if (f.dropped) {
      ++dropped;
      EXPECT_TRUE(f.observations.empty());
    }
  }
  EXPECT_EQ(dropped, static_cast<int>(sc.frames.size()) / 4);
}

TEST(Scenario, DeterministicUnderSeed) {
  ScenarioConfig cfg;
  cfg.seed = 42;
  cfg.landmark_sigma = 0.005;
  const Scenario a = make_scenario(cfg), b = make_scenario(cfg);
  EXPECT_TRUE(same_samples(a.imu_F, b.imu_F));
  EXPECT_TRUE(same_samples(a.imu_L, b.imu_L));
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (std::size_t k = 0; k < a.frames.size(); ++k) {
    ASSERT_EQ(a.frames[k].observations.size(), b.frames[k].observations.size());
    for (std::size_t m = 0; m < a.frames[k].observations.size(); ++m)
      EXPECT_EQ(a.frames[k].observations[m].pixel, b.frames[k].observations[m].pixel);
  }
  for (std::size_t k = 0; k < a.landmarks_nominal.size(); ++k) EXPECT_EQ(a.landmarks_nominal[k], b.landmarks_nominal[k]);
  cfg.seed = 43;
  EXPECT_FALSE(same_samples(a.imu_F, make_scenario(cfg).imu_F));
}

TEST(Scenario, LandmarkPerturbationScale) {
  ScenarioConfig cfg;
  cfg.num_segments = 1;
  cfg.landmark_sigma = 0.005;
  double s2 = 0.0;
  int n = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    cfg.seed = seed;
    const Scenario sc = make_scenario(cfg);
    for (std::size_t k = 0; k < sc.landmarks_nominal.size(); ++k) {
      s2 += (sc.landmarks_nominal[k] - sc.truth.landmarks[k]).squaredNorm();
      n += 3;
    }
  }
  EXPECT_NEAR(std::sqrt(s2 / n), 0.005, 0.0005);
}

TEST(Scenario, ConfigValidation) {
  ScenarioConfig cfg;
  cfg.gamma = 0.0;
  EXPECT_THROW(cfg.validate(), std::exception);
  cfg = ScenarioConfig{};
  cfg.imu_rate = 260.0;
  EXPECT_THROW(cfg.validate(), std::exception);
  cfg = ScenarioConfig{};
  cfg.lambda = -1.0;
  EXPECT_THROW(cfg.validate(), std::exception);
}

TEST(Cube, CornersOnFaces) {
  const auto c = cube_corners(0.14);
  ASSERT_EQ(c.size(), 24u);
  for (int f = 0; f < 6; ++f) {
    const Vec3 n = cube_face_normal(f);
    Vec3 centre = Vec3::Zero();
    for (int k = 0; k < 4; ++k) {
      EXPECT_NEAR(n.dot(c[4 * f + k]), 0.07, 1e-15);
      EXPECT_NEAR((c[4 * f + k] - c[4 * f + (k + 1) % 4]).norm(), 0.14, 1e-15);
      centre += 0.25 * c[4 * f + k];
    }
    EXPECT_LT((centre - 0.07 * n).norm(), 1e-15);
    // Corners run counter-clockwise seen from outside.
    const Vec3 cr = (c[4 * f + 1] - c[4 * f]).cross(c[4 * f + 2] - c[4 * f + 1]);
    EXPECT_GT(cr.dot(n), 0.0);
  }
}
