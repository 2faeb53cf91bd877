#pragma once

#include <map>
#include <span>

#include "relnav/factors.hpp"

namespace relnav {

struct PnpResult {
  Mat3 R;  // R_F^L
  Vec3 t;  // t_{F|L}^L
  double rms_reprojection = 0.0;  // pixels
};

/// Pose of the follower relative to the leader from known fiducial corners.
/// Coplanar sets use a homography; general sets (>= 6 points) use the DLT.
/// Both are refined by at most 10 Gauss-Newton reprojection iterations.
/// Throws DegenerateConfiguration for fewer than 4 points, collinear points,
/// or 4-5 non-coplanar points.
PnpResult pnp_initialize(std::span<const FeatureObservation> observations, const std::map<int, Vec3>& landmarks,
                         const CameraModel& cam);

}  // namespace relnav
