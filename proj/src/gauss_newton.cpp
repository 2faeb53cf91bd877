#include "relnav/gauss_newton.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <string>

#include "relnav/error.hpp"

namespace relnav {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

struct Block {
  int col;
  Eigen::MatrixXd J;
};

int bias_offset(BiasBlock b) { return 9 + 3 * static_cast<int>(b); }

const Vec3& bias_of(const RelativeState& s, BiasBlock b) {
  switch (b) {
    case BiasBlock::GyroF: return s.bg_F;
    case BiasBlock::AccF: return s.ba_F;
    case BiasBlock::GyroL: return s.bg_L;
    case BiasBlock::AccL: return s.ba_L;
  }
  return s.bg_F;
}

class Accumulator {
 public:
  explicit Accumulator(int n) : b_(Eigen::VectorXd::Zero(n)) {}

  // Adds r^T W r / 2 and J^T W J, J^T W r for a residual touching a few column blocks.
  void add(const Eigen::VectorXd& r, const std::vector<Block>& blocks, const Eigen::MatrixXd& W) {
    cost_ += 0.5 * r.dot(W * r);
    accumulate(r, blocks, W);
  }

  void add_robust(const Eigen::VectorXd& r, const std::vector<Block>& blocks, double weight, double rho) {
    cost_ += 0.5 * rho;
    accumulate(r, blocks, weight * Eigen::MatrixXd::Identity(r.size(), r.size()));
  }

  NormalEquations finish(int n, int dropped) {
    NormalEquations ne;
    ne.H.resize(n, n);
    ne.H.setFromTriplets(trip_.begin(), trip_.end());
    ne.b = b_;
    ne.cost = cost_;
    ne.dropped_features = dropped;
    return ne;
  }

 private:
  void accumulate(const Eigen::VectorXd& r, const std::vector<Block>& blocks, const Eigen::MatrixXd& W) {
    for (const Block& a : blocks) {
      const Eigen::MatrixXd JtW = a.J.transpose() * W;
      b_.segment(a.col, a.J.cols()) += JtW * r;
      for (const Block& c : blocks) {
        const Eigen::MatrixXd Hac = JtW * c.J;
        for (int u = 0; u < Hac.rows(); ++u)
          for (int v = 0; v < Hac.cols(); ++v)
            if (Hac(u, v) != 0.0) trip_.emplace_back(a.col + u, c.col + v, Hac(u, v));
      }
    }
  }

  Triplets trip_;
  Eigen::VectorXd b_;
  double cost_ = 0.0;
};

struct Huber {
  double weight;
  double rho;  // robustified squared norm
};

Huber huber(double sq, double k) {
  const double e = std::sqrt(sq);
  if (e <= k) return {1.0, sq};
  return {k / e, 2.0 * k * e - k * k};
}

template <typename Visitor>
void visit_factors(const GaussNewtonProblem& p, Visitor&& vis, int* dropped) {
  const int d = p.dim();
  const int lm0 = static_cast<int>(p.states.size()) * d;

  for (const StatePriorEdge& e : p.priors) {
    const RelativeState& x = p.states[e.state];
    vis.quadratic(e.prior.residual(x), std::vector<Block>{{e.state * d, e.prior.jacobian(x)}}, e.prior.info);
  }
  for (const ExtendedEdge& e : p.extended) {
    const RelativeState& xi = p.states[e.i];
    const RelativeState& xj = p.states[e.j];
    const Eigen::MatrixXd J = residual_jacobians(*e.factor, xi, xj, d);
    vis.quadratic(residual(*e.factor, xi, xj),
                  std::vector<Block>{{e.i * d, J.leftCols(d)}, {e.j * d, J.rightCols(d)}}, e.factor->info_C);
  }
  for (const BiasEdge& e : p.biases) {
    if (bias_offset(e.block) + 3 > d) continue;
    const double s = 1.0 / (e.sigma_u * std::sqrt(e.T));
    const Vec3 r = bias_rw_residual(bias_of(p.states[e.i], e.block), bias_of(p.states[e.j], e.block), e.sigma_u, e.T);
    const Eigen::Matrix3d I = Eigen::Matrix3d::Identity() * s;
    vis.quadratic(r, std::vector<Block>{{e.i * d + bias_offset(e.block), -I}, {e.j * d + bias_offset(e.block), I}},
                  Eigen::Matrix3d::Identity());
  }
  for (const FeatureEdge& e : p.features) {
    FeatureLinearization lin;
    try {
      lin = feature_residual_jacobian(p.cam, p.states[e.state], e.obs, p.landmarks[e.landmark]);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::BehindCamera) throw;
      ++*dropped;
      continue;
    }
    std::vector<Block> blocks{{e.state * d, lin.J_pose}};
    if (p.estimate_landmarks) blocks.push_back({lm0 + 3 * e.landmark, lin.J_point});
    vis.robust(lin.residual, blocks);
  }
  if (p.estimate_landmarks) {
    for (const LandmarkPriorEdge& e : p.landmark_priors) {
      const double w = 1.0 / e.sigma;
      vis.quadratic(w * (p.landmarks[e.landmark] - e.mean),
                    std::vector<Block>{{lm0 + 3 * e.landmark, w * Eigen::MatrixXd::Identity(3, 3)}},
                    Eigen::Matrix3d::Identity());
    }
  }
}

struct CostVisitor {
  double k;
  double cost = 0.0;
  void quadratic(const Eigen::VectorXd& r, const std::vector<Block>&, const Eigen::MatrixXd& W) {
    cost += 0.5 * r.dot(W * r);
  }
  void robust(const Eigen::VectorXd& r, const std::vector<Block>&) { cost += 0.5 * huber(r.squaredNorm(), k).rho; }
};

struct LinearizeVisitor {
  double k;
  Accumulator acc;
  void quadratic(const Eigen::VectorXd& r, const std::vector<Block>& blocks, const Eigen::MatrixXd& W) {
    acc.add(r, blocks, W);
  }
  void robust(const Eigen::VectorXd& r, const std::vector<Block>& blocks) {
    const Huber h = huber(r.squaredNorm(), k);
    acc.add_robust(r, blocks, h.weight, h.rho);
  }
};

}  // namespace

int GaussNewtonProblem::num_variables() const {
  return static_cast<int>(states.size()) * dim() + (estimate_landmarks ? 3 * static_cast<int>(landmarks.size()) : 0);
}

void GaussNewtonProblem::validate() const {
  const int ns = static_cast<int>(states.size());
  const int nl = static_cast<int>(landmarks.size());
  auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); };
  for (const auto& e : extended)
    if (e.i < 0 || e.i >= ns || e.j < 0 || e.j >= ns || !e.factor) bad("extended factor references a missing state");
  for (const auto& e : features)
    if (e.state < 0 || e.state >= ns || e.landmark < 0 || e.landmark >= nl) bad("feature factor references a missing node");
  for (const auto& e : biases)
    if (e.i < 0 || e.i >= ns || e.j < 0 || e.j >= ns) bad("bias factor references a missing state");
  for (const auto& e : priors)
    if (e.state < 0 || e.state >= ns || e.prior.dim != dim()) bad("prior references a missing state or has the wrong size");
  for (const auto& e : landmark_priors)
    if (e.landmark < 0 || e.landmark >= nl) bad("landmark prior references a missing landmark");
}

double total_cost(const GaussNewtonProblem& p) {
  CostVisitor v{p.huber_threshold};
  int dropped = 0;
  visit_factors(p, v, &dropped);
  return v.cost;
}

NormalEquations linearize(const GaussNewtonProblem& p) {
  const int n = p.num_variables();
  LinearizeVisitor v{p.huber_threshold, Accumulator(n)};
  int dropped = 0;
  visit_factors(p, v, &dropped);
  return v.acc.finish(n, dropped);
}

void apply_increment(GaussNewtonProblem& p, const Eigen::VectorXd& delta) {
  const int d = p.dim();
  for (std::size_t k = 0; k < p.states.size(); ++k) {
    p.states[k] = boxplus(p.states[k], delta.segment(static_cast<int>(k) * d, d));
  }
  if (p.estimate_landmarks) {
    const int lm0 = static_cast<int>(p.states.size()) * d;
    for (std::size_t l = 0; l < p.landmarks.size(); ++l) p.landmarks[l] += delta.segment<3>(lm0 + 3 * static_cast<int>(l));
  }
}

SolveReport solve_gauss_newton(GaussNewtonProblem& p, int iterations, double step_tol) {
  p.validate();
  SolveReport report;
  report.initial_cost = total_cost(p);
  report.final_cost = report.initial_cost;
  report.cost_history.push_back(report.initial_cost);
  for (int it = 0; it < iterations; ++it) {
    const NormalEquations ne = linearize(p);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(ne.H);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any()) {
      throw Error(ErrorKind::SingularSystem, "normal equations are not positive definite (missing prior?)");
    }
    Eigen::VectorXd delta = ldlt.solve(-ne.b);
    ++report.iterations;
    report.last_step_norm = delta.norm();
    if (report.last_step_norm < step_tol) break;

    const double before = report.final_cost;
    double after = before;
    for (int halving = 0; halving <= 10; ++halving) {
      GaussNewtonProblem trial = p;
      apply_increment(trial, delta);
      after = total_cost(trial);
      if (after <= before * (1.0 + 1e-12) + 1e-15) {
        p.states = std::move(trial.states);
        p.landmarks = std::move(trial.landmarks);
        break;
      }
      delta *= 0.5;
    }
    if (after > before * (1.0 + 1e-12) + 1e-15) {
      report.last_step_norm = 0.0;
      break;
    }
    report.final_cost = after;
    report.cost_history.push_back(after);
    report.last_step_norm = delta.norm();
    if (report.last_step_norm < step_tol) break;
  }
  return report;
}

SchurResult schur_complement(const Eigen::MatrixXd& H, int keep_begin, int keep_size) {
  const int n = static_cast<int>(H.rows());
  std::vector<int> keep_idx, elim_idx;
  for (int k = 0; k < n; ++k) (k >= keep_begin && k < keep_begin + keep_size ? keep_idx : elim_idx).push_back(k);
  const int nk = static_cast<int>(keep_idx.size());
  const int ne = static_cast<int>(elim_idx.size());
  Eigen::MatrixXd Hkk(nk, nk), Hke(nk, ne), Hee(ne, ne);
  for (int a = 0; a < nk; ++a) {
    for (int b = 0; b < nk; ++b) Hkk(a, b) = H(keep_idx[a], keep_idx[b]);
    for (int b = 0; b < ne; ++b) Hke(a, b) = H(keep_idx[a], elim_idx[b]);
  }
  for (int a = 0; a < ne; ++a)
    for (int b = 0; b < ne; ++b) Hee(a, b) = H(elim_idx[a], elim_idx[b]);

  SchurResult out;
  Eigen::MatrixXd info = Hkk;
  if (ne > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(Hee);
    if (llt.info() != Eigen::Success) {
      out.regularized = true;
      llt.compute(Hee + 1e-12 * Eigen::MatrixXd::Identity(ne, ne));
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::SingularBlock, "eliminated block is not positive definite");
      }
    }
    info -= Hke * llt.solve(Hke.transpose());
  }
  info = 0.5 * (info + info.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
  if (es.eigenvalues().minCoeff() < 0.0) {
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    info = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    info = 0.5 * (info + info.transpose());
  }
  out.info = info;
  return out;
}

PriorFactor marginalize(const GaussNewtonProblem& p, int keep, bool* regularized) {
  const NormalEquations ne = linearize(p);
  const int d = p.dim();
  const SchurResult s = schur_complement(Eigen::MatrixXd(ne.H), keep * d, d);
  if (regularized) *regularized = s.regularized;
  PriorFactor prior;
  prior.mean = p.states[keep];
  prior.dim = d;
  prior.info = s.info;
  return prior;
}

}  // namespace relnav
