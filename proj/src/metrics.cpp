#include "relnav/metrics.hpp"

#include <cmath>
#include <string>

#include "relnav/error.hpp"

namespace relnav {

StateError state_error(const RelativeState& est, const RelativeState& truth) {
  return {so3::log_map(est.R.transpose() * truth.R), truth.t - est.t, truth.v - est.v};
}

double rmse(std::span<const Vec3> errors) {
  if (errors.empty()) return 0.0;
  double sum = 0.0;
  for (const Vec3& e : errors) sum += e.squaredNorm();
  return std::sqrt(sum / static_cast<double>(errors.size()));
}

double compute_ate(std::span<const RelativeState> est, std::span<const RelativeState> truth) {
  if (est.size() != truth.size()) {
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(est.size()) + " estimates vs " + std::to_string(truth.size()) + " truth states");
  }
  std::vector<Vec3> e;
  e.reserve(est.size());
  for (std::size_t k = 0; k < est.size(); ++k) e.push_back(truth[k].t - est[k].t);
  return rmse(e);
}

Envelope three_sigma(const Eigen::MatrixXd& cov) {
  if (cov.rows() < 9 || cov.cols() != cov.rows()) {
    throw Error(ErrorKind::InvalidArgument, "covariance must be square with at least 9 rows");
  }
  const Eigen::VectorXd d = cov.diagonal().cwiseMax(0.0).cwiseSqrt() * 3.0;
  return {d.segment<3>(0), d.segment<3>(3), d.segment<3>(6)};
}

}  // namespace relnav
