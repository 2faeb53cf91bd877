#include "relnav/sim.hpp"

#include <cmath>
#include <random>

#include "relnav/error.hpp"

namespace relnav {

namespace {

enum Stream : std::uint64_t { kBiasStream = 1, kImuFStream = 2, kImuLStream = 3, kPixelStream = 4, kLandmarkStream = 5 };

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eedu};
  return std::mt19937_64(seq);
}

Vec3 gaussian3(std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double x = n(rng), y = n(rng), z = n(rng);
  return sigma * Vec3(x, y, z);
}

Mat3 rot_z(double a) {
  Mat3 R;
  R << std::cos(a), -std::sin(a), 0.0, std::sin(a), std::cos(a), 0.0, 0.0, 0.0, 1.0;
  return R;
}

const Vec3 kFollowerAxes[3] = {Vec3(1.0, 0.0, 0.0), Vec3(0.0, 1.0, 0.0), Vec3(1.0, 1.0, 1.0).normalized()};

}  // namespace

ImuNoiseParams leader_noise_table() { return {1.528e-3, 1.867e-5, 1.244e-2, 7.841e-4}; }
ImuNoiseParams follower_noise_table() { return {2.269e-3, 1.536e-5, 8.182e-3, 6.154e-4}; }

CameraModel ScenarioConfig::default_camera(double tilt) {
  CameraModel cam;
  // Optical axis along the leader's forward (x) axis, pitched up by `tilt`; image x to the right.
  const Vec3 z_c(std::cos(tilt), 0.0, std::sin(tilt));
  const Vec3 x_c(0.0, -1.0, 0.0);
  const Vec3 y_c = z_c.cross(x_c);
  cam.R_L_to_C.row(0) = x_c.transpose();
  cam.R_L_to_C.row(1) = y_c.transpose();
  cam.R_L_to_C.row(2) = z_c.transpose();
  return cam;
}

void ScenarioConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorKind::InvalidArgument, "gamma must be in (0, 1]");
  if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be positive");
  if (!(frame_rate > 0.0 && imu_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "rates must be positive");
  const double ratio = imu_rate / frame_rate;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw Error(ErrorKind::InvalidArgument, "imu_rate must be a multiple of frame_rate");
  }
  if (num_segments < 1) throw Error(ErrorKind::InvalidArgument, "need at least one segment");
  noise_F.validate();
  noise_L.validate();
  cam.validate();
}

double ScenarioConfig::segment_duration() const {
  const double d_F = std::hypot(follower_square, climb);
  return 2.0 * std::sqrt(d_F / lambda);
}

Trajectory::Trajectory(const ScenarioConfig& cfg) : cfg_(cfg), T_seg_(cfg.segment_duration()) {
  const int groups = cfg.num_segments / 4 + 2;
  follower_group_start_.resize(groups);
  follower_group_start_[0] = Mat3::Identity();
  for (int g = 1; g < groups; ++g) {
    follower_group_start_[g] =
        follower_group_start_[g - 1] * so3::exp_map(kFollowerAxes[(g - 1) % 3] * cfg.follower_rotation);
  }
}

Vec3 Trajectory::vertex(Platform which, int k) const {
  // Clockwise seen from above, starting at (+a, +a).
  static const double sx[4] = {1.0, 1.0, -1.0, -1.0};
  static const double sy[4] = {1.0, -1.0, -1.0, 1.0};
  const bool leader = which == Platform::Leader;
  const double a = 0.5 * (leader ? cfg_.leader_square : cfg_.follower_square);
  const double z0 = leader ? 0.0 : cfg_.relative_height;
  const int m = ((k % 4) + 4) % 4;
  return {a * sx[m], a * sy[m], z0 + cfg_.climb * k};
}

double Trajectory::along_track(double tau, double* rate, double* accel) const {
  const double T = T_seg_;
  const double k = 4.0 / (T * T);
  if (tau <= 0.5 * T) {
    *rate = k * tau;
    *accel = k;
    return 0.5 * k * tau * tau;
  }
  const double r = T - tau;
  *rate = k * r;
  *accel = -k;
  return 1.0 - 0.5 * k * r * r;
}

PlatformState Trajectory::evaluate(Platform which, double t) const {
  const int seg = static_cast<int>(std::floor(t / T_seg_));
  const double tau = t - seg * T_seg_;
  double du = 0.0, ddu = 0.0;
  const double u = along_track(tau, &du, &ddu);
  const Vec3 a = vertex(which, seg);
  const Vec3 d = vertex(which, seg + 1) - a;

  PlatformState s;
  s.p = a + u * d;
  s.v = du * d;
  s.a = ddu * d;
  if (which == Platform::Leader) {
    // Constant yaw rate of -pi/2 per segment keeps the body x axis toward the square's center.
    const double rate = -0.5 * M_PI / T_seg_;
    s.R = rot_z(-0.75 * M_PI + rate * t);
    s.omega = Vec3(0.0, 0.0, rate);
  } else {
    const double group_T = 4.0 * T_seg_;
    const int g = std::max(0, static_cast<int>(std::floor(t / group_T)));
    const double frac = (t - g * group_T) / group_T;
    const Vec3& axis = kFollowerAxes[g % 3];
    s.R = follower_group_start_[g] * so3::exp_map(axis * cfg_.follower_rotation * frac);
    s.omega = axis * cfg_.follower_rotation / group_T;
  }
  return s;
}

RelativeState Trajectory::relative(double t) const {
  const PlatformState L = evaluate(Platform::Leader, t);
  const PlatformState F = evaluate(Platform::Follower, t);
  RelativeState x;
  x.stamp = t;
  x.R = L.R.transpose() * F.R;
  x.t = L.R.transpose() * (F.p - L.p);
  x.v = L.R.transpose() * (F.v - L.v) - L.omega.cross(x.t);
  return x;
}

std::vector<Vec3> cube_corners(double side) {
  std::vector<Vec3> pts;
  const double h = 0.5 * side;
  for (int f = 0; f < 6; ++f) {
    const Vec3 n = cube_face_normal(f);
    // Two in-face axes forming a right-handed frame with the outward normal.
    const Vec3 u = (std::abs(n.x()) > 0.5 ? Vec3(0.0, 1.0, 0.0) : Vec3(1.0, 0.0, 0.0)).cross(n).normalized();
    const Vec3 w = n.cross(u);
    const double su[4] = {-1.0, 1.0, 1.0, -1.0};
    const double sw[4] = {-1.0, -1.0, 1.0, 1.0};
    for (int c = 0; c < 4; ++c) pts.push_back(h * n + h * su[c] * u + h * sw[c] * w);
  }
  return pts;
}

Vec3 cube_face_normal(int face) {
  Vec3 n = Vec3::Zero();
  n(face / 2) = (face % 2 == 0) ? 1.0 : -1.0;
  return n;
}

GroundTruth generate_trajectories(const ScenarioConfig& cfg) {
  cfg.validate();
  GroundTruth gt{Trajectory(cfg), {}, {}, {}, {}, {}, {}};
  auto rng = make_rng(cfg.seed, kBiasStream);
  gt.biases.bg_F = gaussian3(rng, cfg.bias_sigma_g_F);
  gt.biases.ba_F = gaussian3(rng, cfg.bias_sigma_a_F);
  gt.biases.bg_L = gaussian3(rng, cfg.bias_sigma_g_L);
  gt.biases.ba_L = gaussian3(rng, cfg.bias_sigma_a_L);

  const int n_frames = static_cast<int>(std::floor(cfg.duration() * cfg.frame_rate + 1e-9)) + 1;
  for (int k = 0; k < n_frames; ++k) {
    const double t = k / cfg.frame_rate;
    gt.frame_times.push_back(t);
    gt.leader.push_back(gt.trajectory.evaluate(Platform::Leader, t));
    gt.follower.push_back(gt.trajectory.evaluate(Platform::Follower, t));
    RelativeState x = gt.trajectory.relative(t);
    x.bg_F = gt.biases.bg_F;
    x.ba_F = gt.biases.ba_F;
    x.bg_L = gt.biases.bg_L;
    x.ba_L = gt.biases.ba_L;
    gt.relative.push_back(x);
  }
  gt.landmarks = cube_corners(cfg.tag_side);
  return gt;
}

std::vector<ImuSample> synthesize_imu(const GroundTruth& gt, const ScenarioConfig& cfg, Platform which) {
  const bool leader = which == Platform::Leader;
  const ImuNoiseParams& noise = leader ? cfg.noise_L : cfg.noise_F;
  const Vec3 bg = leader ? gt.biases.bg_L : gt.biases.bg_F;
  const Vec3 ba = leader ? gt.biases.ba_L : gt.biases.ba_F;
  auto rng = make_rng(cfg.seed, leader ? kImuLStream : kImuFStream);

  const double dt = 1.0 / cfg.imu_rate;
  const int n = static_cast<int>(std::llround(gt.frame_times.back() * cfg.imu_rate)) + 1;
  const double sg = cfg.imu_noise ? noise.sigma_gv / std::sqrt(dt) : 0.0;
  const double sa = cfg.imu_noise ? noise.sigma_av / std::sqrt(dt) : 0.0;

  std::vector<ImuSample> out;
  out.reserve(n);
  PlatformState cur = gt.trajectory.evaluate(which, 0.0);
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    const PlatformState next = gt.trajectory.evaluate(which, (k + 1) * dt);
    ImuSample s;
    s.t = t;
    s.gyro = so3::log_map(cur.R.transpose() * next.R) / dt + bg + gaussian3(rng, sg);
    s.acc = cur.R.transpose() * (next.v - cur.v - cfg.gravity * dt) / dt + ba + gaussian3(rng, sa);
    out.push_back(s);
    cur = next;
  }
  return out;
}

std::vector<bool> dropout_pattern(int n, double gamma) {
  std::vector<bool> drop(n, false);
  const double q = 1.0 - gamma;
  for (int k = 0; k < n; ++k) {
    const auto before = static_cast<long long>(std::floor(k * q + 1e-9));
    const auto after = static_cast<long long>(std::floor((k + 1) * q + 1e-9));
    drop[k] = after > before;
  }
  return drop;
}

std::vector<Frame> synthesize_frames(const GroundTruth& gt, const ScenarioConfig& cfg) {
  auto rng = make_rng(cfg.seed, kPixelStream);
  std::normal_distribution<double> pix(0.0, 1.0);
  const CameraModel& cam = cfg.cam;
  const Vec3 cam_center_L = -cam.R_L_to_C.transpose() * cam.t_L_in_C;

  std::vector<Frame> frames;
  std::vector<int> eligible;
  for (std::size_t k = 0; k < gt.frame_times.size(); ++k) {
    const RelativeState& x = gt.relative[k];
    Frame fr;
    fr.t = gt.frame_times[k];
    const Vec3 cam_center_F = x.R.transpose() * (cam_center_L - x.t);
    for (int face = 0; face < 6; ++face) {
      // Noise is drawn for every face so the pixel stream does not depend on visibility or dropout.
      Eigen::Matrix<double, 2, 4> noise;
      for (int c = 0; c < 4; ++c) {
        const double nu = pix(rng), nv = pix(rng);
        noise.col(c) = cfg.pixel_noise ? Vec2(cfg.pixel_sigma * nu, cfg.pixel_sigma * nv) : Vec2(0.0, 0.0);
      }
      const Vec3 n = cube_face_normal(face);
      const Vec3 center = 0.5 * cfg.tag_side * n;
      const Vec3 sight = (center - cam_center_F).normalized();
      if (n.dot(sight) > -0.5) continue;  // outside the 120..240 degree cone
      std::vector<FeatureObservation> obs;
      for (int c = 0; c < 4; ++c) {
        const int id = 4 * face + c;
        const Vec3 pc = to_camera(cam, x, gt.landmarks[id]);
        if (pc.z() <= kMinDepth) break;
        const Vec2 px = Vec2(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy) + noise.col(c);
        if (!cam.in_image(px)) break;
        obs.push_back({id, px, cfg.pixel_sigma});
      }
      if (obs.size() == 4) fr.observations.insert(fr.observations.end(), obs.begin(), obs.end());
    }
    if (!fr.observations.empty()) eligible.push_back(static_cast<int>(k));
    frames.push_back(std::move(fr));
  }

  const std::vector<bool> drop = dropout_pattern(static_cast<int>(eligible.size()), cfg.gamma);
  for (std::size_t e = 0; e < eligible.size(); ++e) {
    if (drop[e]) {
      frames[eligible[e]].observations.clear();
      frames[eligible[e]].dropped = true;
    }
  }
  return frames;
}

Scenario make_scenario(const ScenarioConfig& cfg) {
  Scenario s{cfg, generate_trajectories(cfg), {}, {}, {}, {}};
  s.imu_F = synthesize_imu(s.truth, cfg, Platform::Follower);
  s.imu_L = synthesize_imu(s.truth, cfg, Platform::Leader);
  s.frames = synthesize_frames(s.truth, cfg);
  s.landmarks_nominal = s.truth.landmarks;
  if (cfg.landmark_sigma > 0.0) {
    auto rng = make_rng(cfg.seed, kLandmarkStream);
    for (Vec3& p : s.landmarks_nominal) p += gaussian3(rng, cfg.landmark_sigma);
  }
  return s;
}

}  // namespace relnav
