#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace relnav {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

namespace so3 {

// Below this angle the closed forms are replaced by their Taylor expansions.
inline constexpr double kSmallAngle = 1e-6;

Mat3 skew(const Vec3& v);

/// Rodrigues formula. Exp(phi) = exp(phi^).
Mat3 exp_map(const Vec3& phi);

/// Inverse of exp_map; returns the rotation vector with norm in [0, pi].
/// The theta ~ pi branch recovers the axis from the symmetric part of R.
Vec3 log_map(const Mat3& R);

/// Right Jacobian: Exp(phi + d) ~= Exp(phi) Exp(Jr(phi) d).
Mat3 right_jacobian(const Vec3& phi);
Mat3 right_jacobian_inv(const Vec3& phi);

/// Nearest rotation in Frobenius norm (polar decomposition via SVD).
Mat3 orthonormalize(const Mat3& R);

bool is_rotation(const Mat3& R, double tol = 1e-9);

}  // namespace so3
}  // namespace relnav
