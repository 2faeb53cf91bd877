#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "relnav/estimator.hpp"
#include "relnav/imu_preint.hpp"
#include "relnav/sim.hpp"

namespace relnav {

// All readers and writers throw Error(Io) with the file path in the message.

/// t,ax,ay,az,gx,gy,gz
void write_imu_csv(const std::string& path, std::span<const ImuSample> samples);
std::vector<ImuSample> read_imu_csv(const std::string& path);

/// t,feature_id,u,v. A frame without detections is one row with feature_id -1.
void write_frames_csv(const std::string& path, const std::vector<Frame>& frames);
std::vector<Frame> read_frames_csv(const std::string& path, double pixel_sigma = 1.0);

/// t,qw,qx,qy,qz,tx,ty,tz,vx,vy,vz (R_F^L as a unit quaternion, qw >= 0)
void write_truth_csv(const std::string& path, std::span<const RelativeState> states);
std::vector<RelativeState> read_truth_csv(const std::string& path);

/// feature_id,x,y,z in the follower body frame
void write_landmarks_csv(const std::string& path, const std::map<int, Vec3>& landmarks);
std::map<int, Vec3> read_landmarks_csv(const std::string& path);

/// Truth columns plus biases and the translation 3-sigma bounds (zero when unknown).
void write_estimates_csv(const std::string& path, const std::vector<TrackRecord>& records);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace relnav
