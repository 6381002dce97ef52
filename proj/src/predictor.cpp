#include "pedpred/predictor.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "pedpred/error.hpp"

namespace pedpred {

namespace {

constexpr double kCandidateTolerance = 1e-9;  // m
constexpr double kPsdClamp = 1e-10;

Mat4 symmetrize(const Mat4& M) { return 0.5 * (M + M.transpose()); }

// Clamps tiny negative eigenvalues produced by rounding.
Mat4 clamp_psd(const Mat4& M) {
  if (Eigen::LLT<Mat4>(M).info() == Eigen::Success) return M;
  Eigen::SelfAdjointEigenSolver<Mat4> es(M);
  if (es.eigenvalues().minCoeff() >= 0.0) return M;
  if (es.eigenvalues().minCoeff() < -kPsdClamp) {
    throw Error(ErrorCode::kInvalidParams, "covariance lost positive semidefiniteness");
  }
  const Vec4 clamped = es.eigenvalues().cwiseMax(0.0);
  return symmetrize(es.eigenvectors() * clamped.asDiagonal() *
                    es.eigenvectors().transpose());
}

Branch make_branch(const Edge& edge, const GaussianBelief& belief, int step,
                   std::optional<BranchId> parent) {
  Branch b;
  b.edge = edge.id;
  b.parent = parent;
  b.spawn_step = step;
  GaussianBelief handoff = belief;
  handoff.mean.theta = edge.heading;
  b.beliefs.push_back({step, handoff});
  b.ref_progress = progress_along(edge, handoff.mean.position());
  return b;
}

}  // namespace

Mat4 PredictorParams::default_process_noise() {
  return 0.3 * Vec4(0.1, 0.1, 0.1, kPi / 180.0).asDiagonal().toDenseMatrix();
}

void PredictorParams::validate() const {
  if (horizon < 0) throw Error(ErrorCode::kInvalidParams, "horizon must be >= 0");
  if (!(t_s > 0.0)) throw Error(ErrorCode::kInvalidParams, "t_s must be positive");
  if (max_branches < 1) throw Error(ErrorCode::kInvalidParams, "max_branches must be >= 1");
  if (!W.allFinite() || (W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::kInvalidParams, "W must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat4> es(W);
  if (es.eigenvalues().minCoeff() < -1e-12) {
    throw Error(ErrorCode::kInvalidParams, "W must be positive semidefinite");
  }
}

std::vector<BranchId> PredictionTree::roots() const {
  std::vector<BranchId> out;
  for (const Branch& b : branches) {
    if (!b.parent) out.push_back(b.id);
  }
  return out;
}

std::vector<BranchId> PredictionTree::leaves() const {
  std::vector<BranchId> out;
  for (const Branch& b : branches) {
    if (b.children.empty()) out.push_back(b.id);
  }
  return out;
}

std::vector<EdgeId> successor_edges(const RoadGraph& graph, const Edge& current,
                                    bool allow_uturn) {
  const auto& out = graph.outgoing_edges(current.to_node);
  if (allow_uturn) return out;
  std::vector<EdgeId> forward;
  for (EdgeId id : out) {
    if (graph.edge(id).to_node != current.from_node) forward.push_back(id);
  }
  // A U-turn is the only way on at a dead end.
  return forward.empty() ? out : forward;
}

std::vector<Branch> init_branches(const RoadGraph& graph,
                                  const PedestrianState& measured,
                                  const Mat4& initial_cov, bool allow_uturn) {
  const auto candidates = graph.nearest_candidates(measured.position(), kCandidateTolerance);
  const Edge* chosen = nullptr;
  double best_alignment = -2.0;
  for (const Projection& p : candidates) {
    const Edge& e = graph.edge(p.edge);
    const double alignment = std::cos(measured.theta - e.heading);
    if (alignment > best_alignment + 1e-12) {
      best_alignment = alignment;
      chosen = &e;
    }
  }

  GaussianBelief belief{measured, symmetrize(initial_cov)};
  belief.mean.theta = chosen->heading + normalize_angle(measured.theta - chosen->heading);

  std::vector<Branch> out;
  if (remaining_distance(belief.mean, *chosen) <= chosen->switch_distance) {
    for (EdgeId id : successor_edges(graph, *chosen, allow_uturn)) {
      out.push_back(make_branch(graph.edge(id), belief, 0, std::nullopt));
    }
  }
  if (out.empty()) {
    Branch root;
    root.edge = chosen->id;
    root.beliefs.push_back({0, belief});
    root.ref_progress = progress_along(*chosen, belief.mean.position());
    // Already past a dead end.
    root.coasting = remaining_distance(belief.mean, *chosen) <= chosen->switch_distance;
    out.push_back(std::move(root));
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = i;
  return out;
}

GaussianBelief step_belief(const GaussianBelief& belief, const EdgeController& ctrl,
                           const ReferenceState& ref, const Mat4& W) {
  const DiscreteModel& m = ctrl.model;
  const Vec4 r_now = ref.state();
  const Vec4 r_next = m.A * r_now + m.B * ref.input() + m.c;
  const Vec4 e = belief.mean.vec() - r_now;
  GaussianBelief out;
  out.mean = PedestrianState::from_vec(r_next + ctrl.A_K * e);
  out.cov = symmetrize(ctrl.A_K * belief.cov * ctrl.A_K.transpose() + W);
  return out;
}

std::vector<Branch> step_branch(Branch& branch, const RoadGraph& graph,
                                const ControllerCache& cache,
                                const PredictorParams& params) {
  if (!branch.alive()) {
    throw Error(ErrorCode::kInvalidParams, "stepping a terminated branch");
  }
  const Edge& edge = graph.edge(branch.edge);
  const EdgeController& ctrl = cache.get(edge);
  const ReferenceState ref = reference_on_line(edge, branch.ref_progress);

  GaussianBelief next = step_belief(branch.last(), ctrl, ref, params.W);
  next.cov = clamp_psd(next.cov);
  const int step = branch.last_step() + 1;
  branch.beliefs.push_back({step, next});
  branch.ref_progress += edge.v_ref * params.t_s;

  std::vector<Branch> children;
  if (branch.coasting || remaining_distance(next.mean, edge) > edge.switch_distance) {
    return children;
  }
  const auto successors = successor_edges(graph, edge, params.allow_uturn);
  if (successors.empty()) {
    branch.coasting = true;
    return children;
  }
  for (EdgeId id : successors) {
    children.push_back(make_branch(graph.edge(id), next, step, branch.id));
  }
  branch.end = BranchEnd::kSwitched;
  return children;
}

PredictionTree predict(const RoadGraph& graph, const PedestrianState& state,
                       const Mat4& initial_cov, const PredictorParams& params,
                       const ControllerCache& cache) {
  params.validate();
  if (graph.empty()) throw Error(ErrorCode::kInvalidParams, "empty road graph");

  PredictionTree tree;
  tree.horizon = params.horizon;
  tree.t_s = params.t_s;
  tree.params = params;
  tree.branches = init_branches(graph, state, initial_cov, params.allow_uturn);
  if (tree.branches.size() > params.max_branches) {
    tree.branches.resize(params.max_branches);
    tree.truncated = true;
  }

  for (int k = 0; k < params.horizon; ++k) {
    const std::size_t frontier_end = tree.branches.size();
    for (BranchId id = 0; id < frontier_end; ++id) {
      if (!tree.branches[id].alive()) continue;
      std::vector<Branch> children = step_branch(tree.branches[id], graph, cache, params);
      if (children.empty()) continue;
      const std::size_t room = params.max_branches - tree.branches.size();
      if (children.size() > room) {
        // Newest spawns are the deepest; drop them first.
        children.resize(room);
        tree.truncated = true;
        if (children.empty()) tree.branches[id].end = BranchEnd::kPruned;
      }
      for (Branch& child : children) {
        child.id = tree.branches.size();
        tree.branches[id].children.push_back(child.id);
        tree.branches.push_back(std::move(child));
      }
    }
  }
  return tree;
}

PredictionTree predict(const RoadGraph& graph, const PedestrianState& state,
                       const Mat4& initial_cov, const PredictorParams& params) {
  ControllerCache cache(params.weights, params.t_s);
  return predict(graph, state, initial_cov, params, cache);
}

std::vector<PredictedPath> enumerate_paths(const PredictionTree& tree) {
  std::vector<PredictedPath> paths;
  for (BranchId leaf : tree.leaves()) {
    PredictedPath path;
    path.leaf = leaf;
    for (std::optional<BranchId> id = leaf; id; id = tree.branch(*id).parent) {
      path.lineage.push_back(*id);
    }
    std::reverse(path.lineage.begin(), path.lineage.end());
    for (BranchId id : path.lineage) {
      const Branch& b = tree.branch(id);
      for (const BeliefStep& s : b.beliefs) {
        if (s.step < static_cast<int>(path.beliefs.size())) {
          path.beliefs[s.step] = s.belief;  // hand-off replaces parent's last
        } else {
          path.beliefs.push_back(s.belief);
        }
      }
    }
    paths.push_back(std::move(path));
  }
  return paths;
}

double chi2_2dof_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::kInvalidParams, "percentile must lie in (0, 1)");
  }
  return -2.0 * std::log1p(-p);
}

ConfidenceEllipse confidence_ellipse(const Mat2& position_cov, double percentile) {
  const double scale = chi2_2dof_quantile(percentile);
  Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (position_cov + position_cov.transpose()));
  const Eigen::Vector2d lambda = es.eigenvalues().cwiseMax(0.0);  // ascending
  ConfidenceEllipse out;
  out.semi_major = std::sqrt(lambda[1] * scale);
  out.semi_minor = std::sqrt(lambda[0] * scale);
  const Vec2 major = es.eigenvectors().col(1);
  double angle = std::atan2(major.y(), major.x());
  if (angle > kPi / 2.0) angle -= kPi;
  if (angle <= -kPi / 2.0) angle += kPi;
  out.orientation = angle;
  return out;
}

nlohmann::json to_json(const PredictionTree& tree) {
  nlohmann::json doc;
  doc["format"] = 1;
  doc["t_s"] = tree.t_s;
  doc["horizon"] = tree.horizon;
  doc["truncated"] = tree.truncated;
  doc["max_branches"] = tree.params.max_branches;
  nlohmann::json branches = nlohmann::json::array();
  for (const Branch& b : tree.branches) {
    nlohmann::json jb;
    jb["id"] = b.id;
    jb["edge"] = b.edge;
    jb["parent"] = b.parent ? nlohmann::json(*b.parent) : nlohmann::json(nullptr);
    jb["spawn_step"] = b.spawn_step;
    jb["children"] = b.children;
    jb["end"] = b.end == BranchEnd::kOpen       ? "open"
                : b.end == BranchEnd::kSwitched ? "switched"
                                                : "pruned";
    nlohmann::json steps = nlohmann::json::array();
    for (const BeliefStep& s : b.beliefs) {
      const PedestrianState& m = s.belief.mean;
      std::vector<double> cov(16);
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) cov[r * 4 + c] = s.belief.cov(r, c);
      steps.push_back({{"k", s.step}, {"mean", {m.x, m.y, m.v, m.theta}}, {"cov", cov}});
    }
    jb["steps"] = std::move(steps);
    branches.push_back(std::move(jb));
  }
  doc["branches"] = std::move(branches);
  return doc;
}

PredictionTree tree_from_json(const nlohmann::json& doc) {
  try {
    PredictionTree tree;
    tree.t_s = doc.at("t_s").get<double>();
    tree.horizon = doc.at("horizon").get<int>();
    tree.truncated = doc.value("truncated", false);
    tree.params.t_s = tree.t_s;
    tree.params.horizon = tree.horizon;
    tree.params.max_branches = doc.value("max_branches", std::size_t{64});
    for (const auto& jb : doc.at("branches")) {
      Branch b;
      b.id = jb.at("id").get<BranchId>();
      b.edge = jb.at("edge").get<EdgeId>();
      if (!jb.at("parent").is_null()) b.parent = jb.at("parent").get<BranchId>();
      b.spawn_step = jb.at("spawn_step").get<int>();
      b.children = jb.value("children", std::vector<BranchId>{});
      const std::string end = jb.value("end", std::string("open"));
      b.end = end == "switched" ? BranchEnd::kSwitched
              : end == "pruned" ? BranchEnd::kPruned
                                : BranchEnd::kOpen;
      for (const auto& js : jb.at("steps")) {
        BeliefStep s;
        s.step = js.at("k").get<int>();
        const auto mean = js.at("mean").get<std::vector<double>>();
        const auto cov = js.at("cov").get<std::vector<double>>();
        if (mean.size() != 4 || cov.size() != 16) {
          throw Error(ErrorCode::kMalformedDocument, "bad belief dimensions");
        }
        s.belief.mean = {mean[0], mean[1], mean[2], mean[3]};
        for (int r = 0; r < 4; ++r)
          for (int c = 0; c < 4; ++c) s.belief.cov(r, c) = cov[r * 4 + c];
        b.beliefs.push_back(s);
      }
      tree.branches.push_back(std::move(b));
    }
    return tree;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kMalformedDocument, ex.what());
  }
}

}  // namespace pedpred
