#include "relnav/so3.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "relnav/error.hpp"

namespace relnav {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyInterval: return "EmptyInterval";
    case ErrorKind::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorKind::NonPsdResult: return "NonPsdResult";
    case ErrorKind::BehindCamera: return "BehindCamera";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::SingularBlock: return "SingularBlock";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::MissingImu: return "MissingImu";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

namespace so3 {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 exp_map(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 W = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + W + 0.5 * W * W;
  }
  return Mat3::Identity() + (std::sin(theta) / theta) * W +
         ((1.0 - std::cos(theta)) / theta2) * W * W;
}

Vec3 log_map(const Mat3& R) {
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const Vec3 axis_sin(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));  // 2 sin(theta) * axis
  if (c > 1.0 - 1e-12) {
    // theta ~ 0: R ~ I + W + W^2/2, antisymmetric part is 2W to third order.
    return 0.5 * axis_sin;
  }
  const double theta = std::acos(c);
  if (c < -1.0 + 1e-6) {
    // theta ~ pi: sin(theta) is ill-conditioned, use R + I = 2 a a^T (1 + O(pi - theta)).
    const Mat3 B = 0.5 * (R + R.transpose()) + Mat3::Identity();
    int k = 0;
    B.diagonal().maxCoeff(&k);
    Vec3 a = B.col(k) / std::sqrt(std::max(B(k, k), 1e-300));
    a.normalize();
    if (a.dot(axis_sin) < 0.0) a = -a;
    // Refine theta from the antisymmetric part so that the round trip stays accurate below pi.
    const double s = 0.5 * axis_sin.dot(a);
    return std::atan2(s, c) * a;
  }
  return (theta / (2.0 * std::sin(theta))) * axis_sin;
}

Mat3 right_jacobian(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 W = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() - 0.5 * W + (1.0 / 6.0) * W * W;
  }
  return Mat3::Identity() - ((1.0 - std::cos(theta)) / theta2) * W +
         ((theta - std::sin(theta)) / (theta2 * theta)) * W * W;
}

Mat3 right_jacobian_inv(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 W = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + 0.5 * W + (1.0 / 12.0) * W * W;
  }
  const double coeff = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Mat3::Identity() + 0.5 * W + coeff * W * W;
}

Mat3 orthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0.0) U.col(2) *= -1.0;
  return U * V.transpose();
}

bool is_rotation(const Mat3& R, double tol) {
  return (R.transpose() * R - Mat3::Identity()).norm() < tol && std::abs(R.determinant() - 1.0) < tol;
}

}  // namespace so3
}  // namespace relnav
