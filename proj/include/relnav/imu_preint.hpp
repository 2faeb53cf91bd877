#pragma once

#include <Eigen/Core>

#include <span>

#include "relnav/so3.hpp"

namespace relnav {

using Mat9 = Eigen::Matrix<double, 9, 9>;

struct ImuSample {
  double t = 0.0;  // s
  Vec3 acc = Vec3::Zero();   // m/s^2, specific force in body frame
  Vec3 gyro = Vec3::Zero();  // rad/s
};

/// Continuous-time densities. White noise converts to sigma^2 / dt per
/// sample, random walk to sigma^2 * dt per interval.
struct ImuNoiseParams {
  double sigma_gv = 0.0;  // rad/(s sqrt(Hz))
  double sigma_gu = 0.0;  // rad/(s^2 sqrt(Hz))
  double sigma_av = 0.0;  // m/(s^2 sqrt(Hz))
  double sigma_au = 0.0;  // m/(s^3 sqrt(Hz))

  void validate() const;
  ImuNoiseParams scaled(double k) const { return {k * sigma_gv, k * sigma_gu, k * sigma_av, k * sigma_au}; }
};

/// State of the first integration step, kept for the gyro cross-covariance terms.
struct FirstStep {
  Mat3 dR = Mat3::Identity();   // rotation increment of the first step
  Mat3 Jr = Mat3::Identity();   // right Jacobian of the first step's rotation vector
  Vec3 dv = Vec3::Zero();
  Vec3 dp = Vec3::Zero();
  double dt = 0.0;
};

/// Gravity-free increments between two instants, expressed in the body frame at the start.
/// Covariance is ordered [phi, v, p].
struct Preintegration {
  Mat3 dR = Mat3::Identity();
  Vec3 dv = Vec3::Zero();
  Vec3 dp = Vec3::Zero();
  Mat9 cov = Mat9::Zero();

  Mat3 dR_dbg = Mat3::Zero();
  Mat3 dv_dbg = Mat3::Zero();
  Mat3 dv_dba = Mat3::Zero();
  Mat3 dp_dbg = Mat3::Zero();
  Mat3 dp_dba = Mat3::Zero();

  Vec3 bias_g = Vec3::Zero();  // linearization point of the bias Jacobians
  Vec3 bias_a = Vec3::Zero();

  double T = 0.0;
  FirstStep first;
  int n_samples = 0;
};

struct CorrectedDeltas {
  Mat3 dR;
  Vec3 dv;
  Vec3 dp;
};

struct GyroCrossCov {
  Mat3 E_phi;  // E(dphi_ij eta_gv_i^T)
  Mat3 E_v;    // E(dv_ij   eta_gv_i^T)
  Mat3 E_p;    // E(dp_ij   eta_gv_i^T)
};

/// Incremental zero-order-hold integrator. Each add() consumes one measurement
/// held constant over dt.
class Preintegrator {
 public:
  Preintegrator(const Vec3& bias_g, const Vec3& bias_a, const ImuNoiseParams& noise,
                bool propagate_covariance = true);

  void add(const Vec3& acc, const Vec3& gyro, double dt);

  const Preintegration& result() const { return p_; }

 private:
  Preintegration p_;
  ImuNoiseParams noise_;
  bool propagate_cov_;
  int since_orthonormalize_ = 0;
};

/// Linear interpolation of a measurement stream at time t.
ImuSample interpolate(std::span<const ImuSample> samples, double t);

/// Integrates the stream over [t_start, t_end]; the window ends are linearly
/// interpolated to create boundary samples.
Preintegration integrate(std::span<const ImuSample> samples, const Vec3& bias_g, const Vec3& bias_a,
                         const ImuNoiseParams& noise, double t_start, double t_end,
                         bool propagate_covariance = true);

CorrectedDeltas first_order_bias_update(const Preintegration& p, const Vec3& delta_bg, const Vec3& delta_ba);

/// Correlation of the preintegration error with the white noise on the first
/// gyro sample, in closed form.
GyroCrossCov cross_cov_terms(const Preintegration& p, const ImuNoiseParams& noise);

/// Standard composition of consecutive increments [i,k] + [k,j] -> [i,j] (deltas only).
CorrectedDeltas compose(const CorrectedDeltas& a, const CorrectedDeltas& b, double T_b);

}  // namespace relnav
