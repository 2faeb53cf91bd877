#include "relnav/ext_preint.hpp"

#include <Eigen/Eigenvalues>

#include "relnav/error.hpp"

namespace relnav {

using so3::skew;

namespace {

struct Corrected {
  CorrectedDeltas F;
  CorrectedDeltas L;
  Vec3 xF;  // dR_dbg * delta_bg, the rotation-vector correction of each platform
  Vec3 xL;
};

Corrected corrected(const ExtendedFactor& f, const RelativeState& s) {
  const Vec3 dbgF = s.bg_F - f.pre_F.bias_g;
  const Vec3 dbaF = s.ba_F - f.pre_F.bias_a;
  const Vec3 dbgL = s.bg_L - f.pre_L.bias_g;
  const Vec3 dbaL = s.ba_L - f.pre_L.bias_a;
  return {first_order_bias_update(f.pre_F, dbgF, dbaF), first_order_bias_update(f.pre_L, dbgL, dbaL),
          f.pre_F.dR_dbg * dbgF, f.pre_L.dR_dbg * dbgL};
}

}  // namespace

PredictedState predict_state(const ExtendedFactor& f, const RelativeState& si) {
  const Corrected c = corrected(f, si);
  const Vec3 w_i = f.omega_Li_meas - si.bg_L;
  const Vec3 w_j = f.omega_Lj_meas - si.bg_L;
  const Mat3 RLt = c.L.dR.transpose();
  PredictedState p;
  p.R = RLt * si.R * c.F.dR;
  p.t = RLt * (si.R * c.F.dp - c.L.dp + si.t + si.v * f.T) + RLt * skew(w_i) * si.t * f.T;
  p.v = RLt * (si.R * c.F.dv - c.L.dv + si.v + skew(w_i) * si.t) - skew(w_j) * p.t;
  return p;
}

Mat9 propagate_covariance(const ExtendedFactor& f, const RelativeState& si, const PredictedState& sj,
                          const ImuNoiseParams& noise_L, const CovarianceOptions& options) {
  const Mat3& dRF = f.pre_F.dR;
  const Mat3& dRL = f.pre_L.dR;
  const Mat3 dRC = dRL.transpose() * si.R * dRF;
  const Vec3 w_j = f.omega_Lj_meas - si.bg_L;
  const Vec3 y = sj.v + skew(w_j) * sj.t;
  const Mat3 I3 = Mat3::Identity();

  Mat9 K_F = Mat9::Zero();
  K_F.block<3, 3>(0, 0) = I3;
  K_F.block<3, 3>(3, 3) = si.R;
  K_F.block<3, 3>(6, 6) = si.R;

  Mat9 K_L = Mat9::Zero();
  K_L.block<3, 3>(0, 0) = -dRC.transpose();
  K_L.block<3, 3>(3, 0) = dRL * skew(y);
  K_L.block<3, 3>(3, 3) = -I3;
  K_L.block<3, 3>(6, 0) = dRL * skew(sj.t);
  K_L.block<3, 3>(6, 6) = -I3;

  // Columns: gyro noise on the leader's boundary samples at i and j.
  Eigen::Matrix<double, 9, 6> K_Lg = Eigen::Matrix<double, 9, 6>::Zero();
  K_Lg.block<3, 3>(3, 0) = -skew(si.t);
  K_Lg.block<3, 3>(3, 3) = dRL * skew(sj.t);
  K_Lg.block<3, 3>(6, 0) = -skew(si.t) * f.T;

  const double var_gv = noise_L.sigma_gv * noise_L.sigma_gv / f.pre_L.first.dt;

  Mat9 cov = K_F * f.pre_F.cov * K_F.transpose() + K_L * f.pre_L.cov * K_L.transpose() +
             var_gv * K_Lg * K_Lg.transpose();

  if (options.include_cross_terms) {
    // Only the sample at i enters pre_L; the sample at j opens the next interval.
    const GyroCrossCov e = cross_cov_terms(f.pre_L, noise_L);
    Eigen::Matrix<double, 9, 6> E = Eigen::Matrix<double, 9, 6>::Zero();
    E.block<3, 3>(0, 0) = e.E_phi;
    E.block<3, 3>(3, 0) = e.E_v;
    E.block<3, 3>(6, 0) = e.E_p;
    const Mat9 S = K_L * E * K_Lg.transpose();
    cov += S + S.transpose();
  }
  cov = 0.5 * (cov + cov.transpose());

  const double min_eig = Eigen::SelfAdjointEigenSolver<Mat9>(cov, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (min_eig < -1e-9) {
    throw Error(ErrorKind::NonPsdResult, "extended covariance has eigenvalue " + std::to_string(min_eig));
  }
  return cov;
}

ExtendedFactor make_extended_factor(Preintegration pre_F, Preintegration pre_L, const Vec3& omega_Li_meas,
                                    const Vec3& omega_Lj_meas, const RelativeState& state_i,
                                    const ImuNoiseParams& noise_L, const CovarianceOptions& options) {
  ExtendedFactor f;
  f.T = pre_F.T;
  f.pre_F = std::move(pre_F);
  f.pre_L = std::move(pre_L);
  if (std::abs(f.pre_L.T - f.T) > 1e-9) {
    throw Error(ErrorKind::InvalidArgument, "leader and follower preintegration windows differ");
  }
  f.omega_Li_meas = omega_Li_meas;
  f.omega_Lj_meas = omega_Lj_meas;
  f.cov_C = propagate_covariance(f, state_i, predict_state(f, state_i), noise_L, options);
  const Mat9 reg = f.cov_C + 1e-12 * Mat9::Identity();
  f.info_C = reg.ldlt().solve(Mat9::Identity());
  f.info_C = 0.5 * (f.info_C + f.info_C.transpose());
  return f;
}

Vec9 residual(const ExtendedFactor& f, const RelativeState& si, const RelativeState& sj) {
  const Corrected c = corrected(f, si);
  const Vec3 w_i = f.omega_Li_meas - si.bg_L;
  const Vec3 w_j = f.omega_Lj_meas - sj.bg_L;
  const Vec3 vi_inertial = si.v + skew(w_i) * si.t;  // R_I^L times the inertial relative velocity at i
  Vec9 r;
  r.segment<3>(0) = so3::log_map(sj.R.transpose() * c.L.dR.transpose() * si.R * c.F.dR);
  r.segment<3>(3) = si.R * c.F.dv - c.L.dv - c.L.dR * (sj.v + skew(w_j) * sj.t) + vi_inertial;
  r.segment<3>(6) = si.R * c.F.dp - c.L.dp - c.L.dR * sj.t + si.t + vi_inertial * f.T;
  return r;
}

Eigen::MatrixXd residual_jacobians(const ExtendedFactor& f, const RelativeState& si, const RelativeState& sj,
                                   int dim) {
  if (dim != kFullDim && dim != kMinorDim) {
    throw Error(ErrorKind::InvalidArgument, "Jacobian dimension must be 15 or 21 per state");
  }
  const Corrected c = corrected(f, si);
  const Vec3 w_i = f.omega_Li_meas - si.bg_L;
  const Vec3 w_j = f.omega_Lj_meas - sj.bg_L;
  const Vec3 r_phi = so3::log_map(sj.R.transpose() * c.L.dR.transpose() * si.R * c.F.dR);
  const Mat3 Jri = so3::right_jacobian_inv(r_phi);
  const Mat3 Jri_neg = so3::right_jacobian_inv(-r_phi);
  const Mat3 I3 = Mat3::Identity();
  const double T = f.T;

  // Rotation preintegration derivatives w.r.t. bias, exact at a nonzero bias correction.
  const Mat3 dRF_dbg = so3::right_jacobian(c.xF) * f.pre_F.dR_dbg;
  const Mat3 dRL_dbg = so3::right_jacobian(c.xL) * f.pre_L.dR_dbg;
  const Vec3 y_j = sj.v + skew(w_j) * sj.t;

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(9, 2 * dim);
  const int j0 = dim;

  // Attitude rows.
  J.block<3, 3>(0, 0) = Jri * c.F.dR.transpose();
  J.block<3, 3>(0, 9) = Jri * dRF_dbg;
  J.block<3, 3>(0, j0 + 0) = -Jri_neg;

  // Velocity rows.
  J.block<3, 3>(3, 0) = -si.R * skew(c.F.dv);
  J.block<3, 3>(3, 3) = skew(w_i);
  J.block<3, 3>(3, 6) = I3;
  J.block<3, 3>(3, 9) = si.R * f.pre_F.dv_dbg;
  J.block<3, 3>(3, 12) = si.R * f.pre_F.dv_dba;
  J.block<3, 3>(3, j0 + 3) = -c.L.dR * skew(w_j);
  J.block<3, 3>(3, j0 + 6) = -c.L.dR;

  // Translation rows.
  J.block<3, 3>(6, 0) = -si.R * skew(c.F.dp);
  J.block<3, 3>(6, 3) = I3 + skew(w_i) * T;
  J.block<3, 3>(6, 6) = I3 * T;
  J.block<3, 3>(6, 9) = si.R * f.pre_F.dp_dbg;
  J.block<3, 3>(6, 12) = si.R * f.pre_F.dp_dba;
  J.block<3, 3>(6, j0 + 3) = -c.L.dR;

  if (dim == kFullDim) {
    J.block<3, 3>(0, 15) = -Jri_neg * sj.R.transpose() * dRL_dbg;
    J.block<3, 3>(3, 15) = -f.pre_L.dv_dbg + c.L.dR * skew(y_j) * dRL_dbg + skew(si.t);
    J.block<3, 3>(3, 18) = -f.pre_L.dv_dba;
    J.block<3, 3>(3, j0 + 15) = -c.L.dR * skew(sj.t);
    J.block<3, 3>(6, 15) = -f.pre_L.dp_dbg + c.L.dR * skew(sj.t) * dRL_dbg + skew(si.t) * T;
    J.block<3, 3>(6, 18) = -f.pre_L.dp_dba;
  }
  return J;
}

}  // namespace relnav
