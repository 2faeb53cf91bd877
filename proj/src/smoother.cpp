#include "relnav/error.hpp"
#include "relnav/estimator.hpp"

namespace relnav {

GaussNewtonProblem build_smoothing_problem(const TrackingSnapshot& snap, const SmootherOptions& options,
                                           std::vector<int>* landmark_ids) {
  if (snap.observations.size() != snap.states.size()) {
    throw Error(ErrorKind::LengthMismatch, "one observation list per state is required");
  }
  GaussNewtonProblem p;
  p.mode = snap.mode;
  p.cam = snap.cam;
  p.states = snap.states;
  p.huber_threshold = options.huber_threshold;
  p.estimate_landmarks = options.estimate_landmarks;
  p.extended = snap.extended;
  p.biases = snap.biases;
  p.priors = snap.priors;

  std::map<int, int> index;
  std::vector<int> ids;
  for (const auto& [id, pt] : snap.landmarks) {
    index[id] = static_cast<int>(ids.size());
    ids.push_back(id);
    p.landmarks.push_back(pt);
  }
  for (std::size_t k = 0; k < snap.observations.size(); ++k) {
    for (const FeatureObservation& o : snap.observations[k]) {
      auto it = index.find(o.feature_id);
      if (it != index.end()) p.features.push_back({static_cast<int>(k), it->second, o});
    }
  }
  if (options.estimate_landmarks) {
    for (std::size_t l = 0; l < ids.size(); ++l) {
      p.landmark_priors.push_back({static_cast<int>(l), p.landmarks[l], options.landmark_sigma});
    }
  }
  if (landmark_ids) *landmark_ids = ids;
  return p;
}

SmoothResult smooth(const TrackingSnapshot& snap, const SmootherOptions& options) {
  if (snap.priors.empty()) throw Error(ErrorKind::SingularSystem, "smoothing needs at least one state prior");
  std::vector<int> ids;
  GaussNewtonProblem p = build_smoothing_problem(snap, options, &ids);
  SmoothResult out;
  out.report = solve_gauss_newton(p, options.max_iterations, options.step_tol);
  out.states = std::move(p.states);
  for (std::size_t l = 0; l < ids.size(); ++l) out.landmarks[ids[l]] = p.landmarks[l];
  return out;
}

}  // namespace relnav

namespace relnav {

std::future<SmoothResult> launch_smoother(Tracker& tracker, const SmootherOptions& options) {
  TrackingSnapshot snap = tracker.snapshot();
  return std::async(std::launch::async, [&tracker, snap = std::move(snap), options] {
    SmoothResult r = smooth(snap, options);
    tracker.replace_history(snap, r.states);
    return r;
  });
}

}  // namespace relnav
