#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <memory>
#include <vector>

#include "relnav/ext_preint.hpp"
#include "relnav/factors.hpp"

namespace relnav {

enum class BiasBlock { GyroF = 0, AccF = 1, GyroL = 2, AccL = 3 };

struct ExtendedEdge {
  int i = 0;
  int j = 0;
  std::shared_ptr<const ExtendedFactor> factor;
};

struct FeatureEdge {
  int state = 0;
  int landmark = 0;  // index into GaussNewtonProblem::landmarks
  FeatureObservation obs;
};

struct BiasEdge {
  int i = 0;
  int j = 0;
  BiasBlock block = BiasBlock::GyroF;
  double sigma_u = 0.0;
  double T = 0.0;
};

struct StatePriorEdge {
  int state = 0;
  PriorFactor prior;
};

struct LandmarkPriorEdge {
  int landmark = 0;
  Vec3 mean = Vec3::Zero();
  double sigma = 0.005;
};

/// Nodes and factors of one least-squares problem. States use 15 (MinorOpt) or
/// 21 (FullOpt) tangent dimensions; landmarks add 3 each when estimated.
struct GaussNewtonProblem {
  OptMode mode = OptMode::MinorOpt;
  CameraModel cam;
  std::vector<RelativeState> states;
  std::vector<Vec3> landmarks;
  bool estimate_landmarks = false;
  double huber_threshold = 2.0;  // whitened pixels, feature factors only

  std::vector<ExtendedEdge> extended;
  std::vector<FeatureEdge> features;
  std::vector<BiasEdge> biases;
  std::vector<StatePriorEdge> priors;
  std::vector<LandmarkPriorEdge> landmark_priors;

  int dim() const { return state_dim(mode); }
  int num_variables() const;
  void validate() const;
};

/// 0.5 * sum of (robustified) squared whitened residuals.
double total_cost(const GaussNewtonProblem& p);

struct NormalEquations {
  Eigen::SparseMatrix<double> H;  // J^T W J
  Eigen::VectorXd b;              // J^T W r
  double cost = 0.0;
  int dropped_features = 0;
};

NormalEquations linearize(const GaussNewtonProblem& p);

/// Applies one stacked increment to every node.
void apply_increment(GaussNewtonProblem& p, const Eigen::VectorXd& delta);

struct SolveReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double last_step_norm = 0.0;
  std::vector<double> cost_history;
};

/// Solves H delta = -b and retracts, for `iterations` steps or until the step
/// norm falls below `step_tol`. A step that increases the cost is halved (up to
/// 10 times). Throws SingularSystem when the factorization fails.
SolveReport solve_gauss_newton(GaussNewtonProblem& p, int iterations, double step_tol = 1e-10);

struct SchurResult {
  Eigen::MatrixXd info;
  bool regularized = false;  // the eliminated block needed the 1e-12 I ridge
};

/// Eliminates every variable outside [keep_begin, keep_begin + keep_size).
/// The result is symmetrized and projected onto the PSD cone.
SchurResult schur_complement(const Eigen::MatrixXd& H, int keep_begin, int keep_size);

/// Linearizes the problem at its current values and marginalizes every node
/// except state `keep`, returning a prior centered at that state's estimate.
PriorFactor marginalize(const GaussNewtonProblem& p, int keep, bool* regularized = nullptr);

}  // namespace relnav
