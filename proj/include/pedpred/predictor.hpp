#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedpred/lqr.hpp"
#include "pedpred/roadgraph.hpp"
#include "pedpred/types.hpp"

namespace pedpred {

using BranchId = std::size_t;

struct GaussianBelief {
  PedestrianState mean;
  Mat4 cov = Mat4::Zero();
};

struct BeliefStep {
  int step = 0;
  GaussianBelief belief;
};

enum class BranchEnd {
  kOpen,      // still propagating, or reached the horizon
  kSwitched,  // handed off to children at an edge switch
  kPruned,    // switch point reached but the branch budget was exhausted
};

/// Belief trajectory along a single edge.
struct Branch {
  BranchId id = 0;
  EdgeId edge = 0;
  std::optional<BranchId> parent;
  int spawn_step = 0;
  std::vector<BeliefStep> beliefs;
  std::vector<BranchId> children;
  BranchEnd end = BranchEnd::kOpen;
  // Arc length of the time-indexed reference at the last belief.
  double ref_progress = 0.0;
  // Past a dead end: keeps following the edge line, no further switching.
  bool coasting = false;

  bool alive() const { return end == BranchEnd::kOpen; }
  int last_step() const { return beliefs.back().step; }
  const GaussianBelief& last() const { return beliefs.back().belief; }
};

struct PredictorParams {
  Mat4 W = default_process_noise();
  int horizon = 200;
  double t_s = 0.1;
  std::size_t max_branches = 64;
  LqrWeights weights = LqrWeights::scaled_identity(0.02, 1.0);
  bool allow_uturn = false;

  /// 0.3 * diag(0.1, 0.1, 0.1, pi/180).
  static Mat4 default_process_noise();
  void validate() const;
};

struct PredictionTree {
  std::vector<Branch> branches;
  int horizon = 0;
  double t_s = 0.1;
  PredictorParams params;
  // Set when some children were not spawned because of max_branches.
  bool truncated = false;

  const Branch& branch(BranchId id) const { return branches.at(id); }
  std::vector<BranchId> roots() const;
  std::vector<BranchId> leaves() const;
};

/// Mean/covariance trajectory from a root to one leaf. beliefs[k] is the
/// belief at step k; at a switch step the child's hand-off belief is used.
struct PredictedPath {
  BranchId leaf = 0;
  std::vector<BranchId> lineage;
  std::vector<GaussianBelief> beliefs;
};

/// Starting branches for a measured state: projects onto the nearest edge
/// (exact distance ties resolved by heading agreement, then edge id) and
/// spawns onto successor edges right away when already within the switch
/// distance. Ids are assigned 0..n-1.
std::vector<Branch> init_branches(const RoadGraph& graph,
                                  const PedestrianState& measured,
                                  const Mat4& initial_cov = Mat4::Zero(),
                                  bool allow_uturn = false);

/// Closed-loop propagation in deviation form around the time-indexed
/// reference `ref` (the reference at the current step):
///   e = x - r_k,  x+ = r_{k+1} + A_K e,  P+ = A_K P A_K' + W.
GaussianBelief step_belief(const GaussianBelief& belief, const EdgeController& ctrl,
                           const ReferenceState& ref, const Mat4& W);

/// Advances `branch` by one step. When the switch condition fires, the
/// branch ends and the hand-off children are returned (ids unassigned).
std::vector<Branch> step_branch(Branch& branch, const RoadGraph& graph,
                                const ControllerCache& cache,
                                const PredictorParams& params);

/// Runs the full horizon. The cache must have been built with the same
/// weights and t_s as `params`.
PredictionTree predict(const RoadGraph& graph, const PedestrianState& state,
                       const Mat4& initial_cov, const PredictorParams& params,
                       const ControllerCache& cache);

/// Convenience overload that builds its own controller cache.
PredictionTree predict(const RoadGraph& graph, const PedestrianState& state,
                       const Mat4& initial_cov, const PredictorParams& params);

std::vector<PredictedPath> enumerate_paths(const PredictionTree& tree);

/// Edge successors used at a switch, honoring the U-turn rule.
std::vector<EdgeId> successor_edges(const RoadGraph& graph, const Edge& current,
                                    bool allow_uturn);

struct ConfidenceEllipse {
  double semi_major = 0.0;  // m
  double semi_minor = 0.0;  // m
  double orientation = 0.0;  // rad, major axis angle in (-pi/2, pi/2]
};

/// Chi-square(2) quantile: -2 ln(1 - p).
double chi2_2dof_quantile(double p);

/// Level set of a 2D Gaussian containing probability `percentile`.
ConfidenceEllipse confidence_ellipse(const Mat2& position_cov, double percentile);

nlohmann::json to_json(const PredictionTree& tree);
PredictionTree tree_from_json(const nlohmann::json& doc);

}  // namespace pedpred
