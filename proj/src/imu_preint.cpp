#include "relnav/imu_preint.hpp"

#include <cmath>
#include <string>

#include "relnav/error.hpp"

namespace relnav {

namespace {
constexpr double kTimeEps = 1e-9;
constexpr int kOrthonormalizeEvery = 1000;
}  // namespace

void ImuNoiseParams::validate() const {
  if (!(sigma_gv > 0.0 && sigma_gu > 0.0 && sigma_av > 0.0 && sigma_au > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "IMU noise densities must be strictly positive");
  }
}

Preintegrator::Preintegrator(const Vec3& bias_g, const Vec3& bias_a, const ImuNoiseParams& noise,
                             bool propagate_covariance)
    : noise_(noise), propagate_cov_(propagate_covariance) {
  p_.bias_g = bias_g;
  p_.bias_a = bias_a;
}

void Preintegrator::add(const Vec3& acc, const Vec3& gyro, double dt) {
  const Vec3 w = gyro - p_.bias_g;
  const Vec3 a = acc - p_.bias_a;
  const Vec3 phi = w * dt;
  const Mat3 dR_step = so3::exp_map(phi);
  const Mat3 Jr = so3::right_jacobian(phi);
  const Mat3 Ra = p_.dR;  // rotation at the start of the step
  const Mat3 a_hat = so3::skew(a);
  const double dt2 = dt * dt;

  if (propagate_cov_) {
    Mat9 A = Mat9::Identity();
    A.block<3, 3>(0, 0) = dR_step.transpose();
    A.block<3, 3>(3, 0) = -Ra * a_hat * dt;
    A.block<3, 3>(6, 0) = -0.5 * Ra * a_hat * dt2;
    A.block<3, 3>(6, 3) = Mat3::Identity() * dt;
    Eigen::Matrix<double, 9, 3> Bg = Eigen::Matrix<double, 9, 3>::Zero();
    Eigen::Matrix<double, 9, 3> Ba = Eigen::Matrix<double, 9, 3>::Zero();
    Bg.block<3, 3>(0, 0) = Jr * dt;
    Ba.block<3, 3>(3, 0) = Ra * dt;
    Ba.block<3, 3>(6, 0) = 0.5 * Ra * dt2;
    const double var_g = noise_.sigma_gv * noise_.sigma_gv / dt;
    const double var_a = noise_.sigma_av * noise_.sigma_av / dt;
    p_.cov = A * p_.cov * A.transpose() + var_g * Bg * Bg.transpose() + var_a * Ba * Ba.transpose();
    p_.cov = 0.5 * (p_.cov + p_.cov.transpose());
  }

  // Bias Jacobians: p uses the v and R Jacobians from before this step.
  p_.dp_dba += p_.dv_dba * dt - 0.5 * Ra * dt2;
  p_.dp_dbg += p_.dv_dbg * dt - 0.5 * Ra * a_hat * p_.dR_dbg * dt2;
  p_.dv_dba += -Ra * dt;
  p_.dv_dbg += -Ra * a_hat * p_.dR_dbg * dt;
  p_.dR_dbg = dR_step.transpose() * p_.dR_dbg - Jr * dt;

  p_.dp += p_.dv * dt + 0.5 * Ra * a * dt2;
  p_.dv += Ra * a * dt;
  p_.dR = Ra * dR_step;
  if (++since_orthonormalize_ >= kOrthonormalizeEvery) {
    p_.dR = so3::orthonormalize(p_.dR);
    since_orthonormalize_ = 0;
  }

  if (p_.n_samples == 0) {
    p_.first = FirstStep{dR_step, Jr, p_.dv, p_.dp, dt};
  }
  p_.T += dt;
  ++p_.n_samples;
}

ImuSample interpolate(std::span<const ImuSample> samples, double t) {
  if (samples.empty() || t < samples.front().t - kTimeEps || t > samples.back().t + kTimeEps) {
    throw Error(ErrorKind::EmptyInterval, "no samples bracket t = " + std::to_string(t));
  }
  // First sample with time >= t.
  std::size_t hi = 0;
  while (hi < samples.size() && samples[hi].t < t - kTimeEps) ++hi;
  if (std::abs(samples[hi].t - t) <= kTimeEps || hi == 0) return {t, samples[hi].acc, samples[hi].gyro};
  const ImuSample& a = samples[hi - 1];
  const ImuSample& b = samples[hi];
  const double s = (t - a.t) / (b.t - a.t);
  return {t, (1.0 - s) * a.acc + s * b.acc, (1.0 - s) * a.gyro + s * b.gyro};
}

Preintegration integrate(std::span<const ImuSample> samples, const Vec3& bias_g, const Vec3& bias_a,
                         const ImuNoiseParams& noise, double t_start, double t_end, bool propagate_covariance) {
  for (std::size_t k = 1; k < samples.size(); ++k) {
    if (!(samples[k].t > samples[k - 1].t)) {
      throw Error(ErrorKind::NonMonotonicTime, "sample " + std::to_string(k) + " at t = " +
                                                   std::to_string(samples[k].t) + " does not advance time");
    }
  }
  if (!(t_end > t_start + kTimeEps) || samples.size() < 2 || samples.front().t > t_start + kTimeEps ||
      samples.back().t < t_end - kTimeEps) {
    throw Error(ErrorKind::EmptyInterval, "samples do not cover [" + std::to_string(t_start) + ", " +
                                              std::to_string(t_end) + "]");
  }

  // Last sample at or before t_start.
  std::size_t k = 0;
  while (k + 1 < samples.size() && samples[k + 1].t <= t_start + kTimeEps) ++k;

  Preintegrator integrator(bias_g, bias_a, noise, propagate_covariance);
  double cur_t = t_start;
  ImuSample cur = interpolate(samples, t_start);
  for (std::size_t n = k + 1; n < samples.size(); ++n) {
    const double next_t = std::min(samples[n].t, t_end);
    const double dt = next_t - cur_t;
    if (dt > kTimeEps) integrator.add(cur.acc, cur.gyro, dt);
    if (samples[n].t >= t_end - kTimeEps) break;
    cur_t = samples[n].t;
    cur = samples[n];
  }
  if (integrator.result().n_samples == 0) {
    throw Error(ErrorKind::EmptyInterval, "no sample interval inside the window");
  }
  return integrator.result();
}

CorrectedDeltas first_order_bias_update(const Preintegration& p, const Vec3& delta_bg, const Vec3& delta_ba) {
  return {p.dR * so3::exp_map(p.dR_dbg * delta_bg),
          p.dv + p.dv_dbg * delta_bg + p.dv_dba * delta_ba,
          p.dp + p.dp_dbg * delta_bg + p.dp_dba * delta_ba};
}

GyroCrossCov cross_cov_terms(const Preintegration& p, const ImuNoiseParams& noise) {
  const FirstStep& f = p.first;
  // Discrete variance sigma^2/dt times the step length dt.
  const Mat3 M = f.dR * f.Jr * (noise.sigma_gv * noise.sigma_gv);
  GyroCrossCov e;
  e.E_phi = p.dR.transpose() * M;
  e.E_v = so3::skew(f.dv - p.dv) * M;
  e.E_p = so3::skew(f.dp - p.dp + f.dv * (p.T - f.dt)) * M;
  return e;
}

CorrectedDeltas compose(const CorrectedDeltas& a, const CorrectedDeltas& b, double T_b) {
  return {a.dR * b.dR, a.dv + a.dR * b.dv, a.dp + a.dv * T_b + a.dR * b.dp};
}

}  // namespace relnav
