#pragma once

#include <cstdint>
#include <vector>

#include "relnav/factors.hpp"
#include "relnav/imu_preint.hpp"
#include "relnav/state.hpp"

namespace relnav {

/// Continuous-time noise densities used by both platforms in the synthetic scenarios.
ImuNoiseParams leader_noise_table();
ImuNoiseParams follower_noise_table();

struct InitialErrorSigmas {
  double att = 0.02;   // rad
  double trans = 0.02; // m
  double vel = 0.2;    // m/s
  double bg = 0.01;    // rad/s
  double ba = 0.05;    // m/s^2
};

enum class Platform { Leader, Follower };

struct ScenarioConfig {
  double lambda = 9.0;   // follower acceleration amplitude, m/s^2
  double gamma = 1.0;    // recognition rate
  std::uint64_t seed = 1;
  double imu_rate = 250.0;
  double frame_rate = 25.0;
  int num_segments = 24;

  ImuNoiseParams noise_F = follower_noise_table();
  ImuNoiseParams noise_L = leader_noise_table();
  bool imu_noise = true;
  bool pixel_noise = true;
  double pixel_sigma = 1.0;

  CameraModel cam = default_camera();
  double tag_side = 0.14;         // also the cube edge
  double follower_square = 0.283; // planar side length of the follower's square path
  double leader_square = 1.414;
  double climb = 0.1;             // per segment, both platforms
  double relative_height = 0.2;   // follower above leader
  double follower_rotation = 0.7853981633974483;  // per 4-segment group

  InitialErrorSigmas initial_error;
  // Constant true biases are drawn with these sigmas (gyro, accel).
  double bias_sigma_g_F = 0.01;
  double bias_sigma_a_F = 0.05;
  double bias_sigma_g_L = 0.0;
  double bias_sigma_a_L = 0.0;

  double landmark_sigma = 0.0;  // perturbation of the nominal corner coordinates
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);

  static CameraModel default_camera(double tilt = 0.29);
  void validate() const;
  double segment_duration() const;
  double duration() const { return num_segments * segment_duration(); }
};

struct PlatformState {
  Mat3 R = Mat3::Identity();  // body to inertial
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();      // inertial acceleration
  Vec3 omega = Vec3::Zero();  // body rate
};

/// Closed-form twin trajectories: cyclically ascending square paths traversed
/// with an accelerate/decelerate speed profile per segment.
class Trajectory {
 public:
  explicit Trajectory(const ScenarioConfig& cfg);

  PlatformState evaluate(Platform which, double t) const;
  RelativeState relative(double t) const;  // biases left at zero

  double segment_duration() const { return T_seg_; }
  Vec3 vertex(Platform which, int k) const;

 private:
  double along_track(double tau, double* rate, double* accel) const;

  ScenarioConfig cfg_;
  double T_seg_;
  std::vector<Mat3> follower_group_start_;
};

struct TrueBiases {
  Vec3 bg_F = Vec3::Zero();
  Vec3 ba_F = Vec3::Zero();
  Vec3 bg_L = Vec3::Zero();
  Vec3 ba_L = Vec3::Zero();
};

struct GroundTruth {
  Trajectory trajectory;
  std::vector<double> frame_times;
  std::vector<PlatformState> leader;    // at frame times
  std::vector<PlatformState> follower;
  std::vector<RelativeState> relative;  // with the true biases
  TrueBiases biases;
  std::vector<Vec3> landmarks;          // t_{k|F}^F, index = feature id
};

struct Frame {
  double t = 0.0;
  std::vector<FeatureObservation> observations;
  bool dropped = false;  // removed to emulate the recognition rate
};

struct Scenario {
  ScenarioConfig cfg;
  GroundTruth truth;
  std::vector<ImuSample> imu_F;
  std::vector<ImuSample> imu_L;
  std::vector<Frame> frames;
  std::vector<Vec3> landmarks_nominal;  // coordinates the estimator is given
};

/// Corner coordinates of the fiducial cube: face f in 0..5, corner c in 0..3, id = 4 f + c.
std::vector<Vec3> cube_corners(double side);
Vec3 cube_face_normal(int face);

GroundTruth generate_trajectories(const ScenarioConfig& cfg);

/// Samples are interval increments: the rotation and specific-force velocity
/// change over [t_k, t_k + dt] divided by dt, plus bias and white noise.
std::vector<ImuSample> synthesize_imu(const GroundTruth& gt, const ScenarioConfig& cfg, Platform which);

std::vector<Frame> synthesize_frames(const GroundTruth& gt, const ScenarioConfig& cfg);

/// Indices in 0..n-1 removed so that floor((1 - gamma) n) frames drop, spread evenly.
std::vector<bool> dropout_pattern(int n, double gamma);

Scenario make_scenario(const ScenarioConfig& cfg);

}  // namespace relnav
