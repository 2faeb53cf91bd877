#include "relnav/state.hpp"

#include "relnav/error.hpp"

namespace relnav {

void EstimatorMode::validate() const {
  if (estimate_landmarks && !smoother_enabled) {
    throw Error(ErrorKind::InvalidArgument, "landmark estimation requires the smoother");
  }
}

RelativeState boxplus(const RelativeState& x, const Eigen::VectorXd& delta) {
  if (delta.size() != kFullDim && delta.size() != kMinorDim) {
    throw Error(ErrorKind::InvalidArgument, "state increment must have 15 or 21 entries");
  }
  RelativeState y = x;
  y.R = x.R * so3::exp_map(delta.segment<3>(0));
  y.t += delta.segment<3>(3);
  y.v += delta.segment<3>(6);
  y.bg_F += delta.segment<3>(9);
  y.ba_F += delta.segment<3>(12);
  if (delta.size() == kFullDim) {
    y.bg_L += delta.segment<3>(15);
    y.ba_L += delta.segment<3>(18);
  }
  return y;
}

Eigen::VectorXd boxminus(const RelativeState& b, const RelativeState& a, int dim) {
  Eigen::VectorXd d(dim);
  d.segment<3>(0) = so3::log_map(a.R.transpose() * b.R);
  d.segment<3>(3) = b.t - a.t;
  d.segment<3>(6) = b.v - a.v;
  d.segment<3>(9) = b.bg_F - a.bg_F;
  d.segment<3>(12) = b.ba_F - a.ba_F;
  if (dim == kFullDim) {
    d.segment<3>(15) = b.bg_L - a.bg_L;
    d.segment<3>(18) = b.ba_L - a.ba_L;
  }
  return d;
}

}  // namespace relnav
