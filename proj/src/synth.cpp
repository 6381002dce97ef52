#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>

#include <Eigen/Eigenvalues>

#include "pedpred/error.hpp"
#include "pedpred/evaluation.hpp"

namespace pedpred {

namespace {

// A node is a dead end when it touches a single neighbour (through edges in
// either direction).
bool is_dead_end(const RoadGraph& graph, NodeId node) {
  std::optional<NodeId> neighbour;
  for (const Edge& e : graph.edges()) {
    NodeId other;
    if (e.from_node == node) {
      other = e.to_node;
    } else if (e.to_node == node) {
      other = e.from_node;
    } else {
      continue;
    }
    if (neighbour && *neighbour != other) return false;
    neighbour = other;
  }
  return true;
}

std::vector<EdgeId> sample_route(const RoadGraph& graph, const std::vector<NodeId>& starts,
                                 int max_edges, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick_start(0, starts.size() - 1);
  const NodeId start = starts[pick_start(rng)];
  const auto& first = graph.outgoing_edges(start);
  std::uniform_int_distribution<std::size_t> pick_first(0, first.size() - 1);
  std::vector<EdgeId> route{first[pick_first(rng)]};
  while (static_cast<int>(route.size()) < max_edges) {
    const Edge& cur = graph.edge(route.back());
    if (is_dead_end(graph, cur.to_node)) break;
    const auto next = successor_edges(graph, cur, false);
    if (next.empty()) break;
    std::uniform_int_distribution<std::size_t> pick(0, next.size() - 1);
    route.push_back(next[pick(rng)]);
  }
  return route;
}

bool uses_crosswalk(const RoadGraph& graph, const std::vector<EdgeId>& route) {
  return std::any_of(route.begin(), route.end(),
                     [&](EdgeId e) { return graph.edge(e).kind == EdgeKind::kCrosswalk; });
}

// Unicycle with a constant input and a constant additive drift, RK4.
Vec4 advance(const Vec4& x, const Vec2& u, const Vec4& drift, double dt) {
  if (dt <= 0.0) return x;
  const int n = std::max(1, static_cast<int>(std::ceil(dt / 0.025)));
  const double h = dt / n;
  auto f = [&](const Vec4& s) -> Vec4 { return unicycle_rhs(s, u) + drift; };
  Vec4 s = x;
  for (int i = 0; i < n; ++i) {
    const Vec4 k1 = f(s);
    const Vec4 k2 = f(s + 0.5 * h * k1);
    const Vec4 k3 = f(s + 0.5 * h * k2);
    const Vec4 k4 = f(s + h * k3);
    s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return s;
}

Mat4 psd_sqrt(const Mat4& W) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (W + W.transpose()));
  const Vec4 d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

// The reference schedule (active edge and time-indexed progress) is driven by
// the noise-free closed loop, exactly as the predictor drives it from its
// mean; the noisy walker tracks that schedule. Heading resets at a switch
// shift the walker by the same amount as the nominal state, so its heading
// deviation is carried over like the predicted covariance.
Trajectory simulate(const RoadGraph& graph, const ControllerCache& cache,
                    const std::vector<EdgeId>& route, const SynthOptions& opt, const Mat4& noise_l,
                    std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double t_s = opt.t_s;
  const double dt_out = 1.0 / opt.sample_rate;

  std::size_t leg = 0;
  const Edge* edge = &graph.edge(route[0]);
  Vec4 nominal(edge->start.x(), edge->start.y(), edge->v_ref, edge->heading);
  Vec4 x = nominal;
  double progress = 0.0;

  Trajectory traj;
  traj.samples.push_back({0.0, x[0], x[1]});
  double t = 0.0;
  double next_out = dt_out;
  double route_len = 0.0;
  for (EdgeId e : route) route_len += graph.edge(e).length;
  double min_speed = std::numeric_limits<double>::infinity();
  for (EdgeId e : route) min_speed = std::min(min_speed, graph.edge(e).v_ref);
  const int max_steps = static_cast<int>(2.0 * route_len / (min_speed * t_s)) + 100;

  auto control = [](const EdgeController& ctrl, const ReferenceState& ref, const Vec4& s) {
    Vec4 err = s - ref.state();
    err[3] = normalize_angle(err[3]);
    return Vec2(ref.input() - ctrl.K * err);
  };

  for (int step = 0; step < max_steps; ++step) {
    const EdgeController& ctrl = cache.get(*edge);
    const ReferenceState ref = reference_on_line(*edge, progress);
    const Vec2 u_nom = control(ctrl, ref, nominal);
    const Vec2 u = control(ctrl, ref, x);
    Vec4 z;
    for (int i = 0; i < 4; ++i) z[i] = normal(rng);
    const Vec4 drift = opt.noise_scale * (noise_l * z) / t_s;

    const double t_end = t + t_s;
    while (next_out <= t_end + 1e-12) {
      x = advance(x, u, drift, next_out - t);
      t = next_out;
      traj.samples.push_back({t, x[0], x[1]});
      next_out = dt_out * static_cast<double>(traj.samples.size());
    }
    x = advance(x, u, drift, t_end - t);
    t = t_end;
    nominal = advance(nominal, u_nom, Vec4::Zero(), t_s);
    progress += edge->v_ref * t_s;

    const PedestrianState s = PedestrianState::from_vec(nominal);
    const double remaining = remaining_distance(s, *edge);
    if (leg + 1 == route.size()) {
      if (remaining <= 0.0) break;
    } else if (remaining <= edge->switch_distance) {
      edge = &graph.edge(route[++leg]);
      progress = progress_along(*edge, s.position());
      if (opt.heading_reset_at_switch) {
        x[3] = edge->heading + normalize_angle(x[3] - nominal[3]);
        nominal[3] = edge->heading;
      }
    }
  }
  return traj;
}

}  // namespace

std::vector<Trajectory> synth_dataset(const RoadGraph& graph, const SynthOptions& options) {
  if (options.crossing < 0 || options.sidewalk < 0 || !(options.noise_scale >= 0.0) ||
      !(options.sample_rate > 0.0) || !(options.t_s > 0.0) || options.max_route_edges < 1) {
    throw Error(ErrorCode::kInvalidParams, "invalid synthetic dataset options");
  }
  std::vector<Trajectory> out;
  if (options.crossing + options.sidewalk == 0) return out;
  if (graph.empty()) throw Error(ErrorCode::kInvalidParams, "graph has no edges");

  std::vector<NodeId> starts;
  for (const Node& n : graph.nodes()) {
    if (!graph.outgoing_edges(n.id).empty() && is_dead_end(graph, n.id)) starts.push_back(n.id);
  }
  if (starts.empty()) {
    for (const Node& n : graph.nodes()) {
      if (!graph.outgoing_edges(n.id).empty()) starts.push_back(n.id);
    }
  }

  ControllerCache cache(options.weights, options.t_s);
  const Mat4 noise_l = psd_sqrt(options.W);
  const int total = options.crossing + options.sidewalk;
  constexpr int kMaxAttempts = 10000;
  for (int i = 0; i < total; ++i) {
    const bool want_crossing = i < options.crossing;
    std::seed_seq seq{options.seed, static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(seq);
    std::vector<EdgeId> route;
    int attempt = 0;
    for (; attempt < kMaxAttempts; ++attempt) {
      route = sample_route(graph, starts, options.max_route_edges, rng);
      if (uses_crosswalk(graph, route) == want_crossing) break;
    }
    if (attempt == kMaxAttempts) {
      throw Error(ErrorCode::kInvalidParams,
                  std::string("graph has no ") + (want_crossing ? "crossing" : "sidewalk-only") +
                      " routes between dead ends");
    }
    Trajectory traj = simulate(graph, cache, route, options, noise_l, rng);
    char id[32];
    std::snprintf(id, sizeof id, "syn%04d", i);
    traj.id = id;
    traj.label = want_crossing ? TrajectoryLabel::kCrossing : TrajectoryLabel::kSidewalk;
    out.push_back(std::move(traj));
  }
  return out;
}

}  // namespace pedpred
