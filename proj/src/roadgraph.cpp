#include "pedpred/roadgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_set>

#include "pedpred/error.hpp"

namespace pedpred {

double normalize_angle(double angle) {
  double a = std::remainder(angle, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

EdgeKind edge_kind_from_string(const std::string& s) {
  if (s == "sidewalk") return EdgeKind::kSidewalk;
  if (s == "crosswalk") return EdgeKind::kCrosswalk;
  throw Error(ErrorCode::kMalformedDocument, "unknown edge kind '" + s + "'");
}

std::string to_string(EdgeKind kind) {
  return kind == EdgeKind::kSidewalk ? "sidewalk" : "crosswalk";
}

RoadGraph RoadGraph::from_parts(std::vector<Node> nodes, std::vector<Edge> edges,
                                const BuildOptions& options) {
  RoadGraph g;
  std::sort(nodes.begin(), nodes.end(),
            [](const Node& a, const Node& b) { return a.id < b.id; });
  std::sort(edges.begin(), edges.end(),
            [](const Edge& a, const Edge& b) { return a.id < b.id; });

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].position.allFinite()) {
      throw Error(ErrorCode::kMalformedDocument,
                  "node " + std::to_string(nodes[i].id) + " has non-finite position");
    }
    if (!g.node_index_.emplace(nodes[i].id, i).second) {
      throw Error(ErrorCode::kDuplicateId, "node id " + std::to_string(nodes[i].id));
    }
  }
  g.nodes_ = std::move(nodes);

  for (std::size_t i = 0; i < edges.size(); ++i) {
    Edge& e = edges[i];
    const std::string tag = "edge " + std::to_string(e.id);
    if (!g.edge_index_.emplace(e.id, i).second) {
      throw Error(ErrorCode::kDuplicateId, tag);
    }
    if (!g.has_node(e.from_node) || !g.has_node(e.to_node)) {
      throw Error(ErrorCode::kDanglingEndpoint,
                  tag + " references node " +
                      std::to_string(g.has_node(e.from_node) ? e.to_node : e.from_node));
    }
    if (e.from_node == e.to_node) {
      throw Error(ErrorCode::kInvalidEdge, tag + " is a self loop");
    }
    if (!(e.v_ref > 0.0) || !std::isfinite(e.v_ref)) {
      throw Error(ErrorCode::kNonPositiveReferenceSpeed, tag);
    }
    e.start = g.node(e.from_node).position;
    e.end = g.node(e.to_node).position;
    const Vec2 delta = e.end - e.start;
    e.length = delta.norm();
    if (e.length <= 0.0) {
      throw Error(ErrorCode::kInvalidEdge, tag + " has zero length");
    }
    if (!(e.switch_distance >= 0.0) || e.switch_distance >= e.length) {
      throw Error(ErrorCode::kInvalidEdge,
                  tag + " switch distance must lie in [0, length)");
    }
    e.direction = delta / e.length;
    e.heading = std::atan2(delta.y(), delta.x());
    g.adjacency_[e.from_node].push_back(e.id);
  }
  g.edges_ = std::move(edges);
  for (const Node& n : g.nodes_) g.adjacency_.try_emplace(n.id);

  // Weak connectivity over nodes.
  if (!g.nodes_.empty()) {
    std::unordered_map<NodeId, std::vector<NodeId>> undirected;
    for (const Edge& e : g.edges_) {
      undirected[e.from_node].push_back(e.to_node);
      undirected[e.to_node].push_back(e.from_node);
    }
    std::unordered_set<NodeId> seen{g.nodes_.front().id};
    std::queue<NodeId> open;
    open.push(g.nodes_.front().id);
    while (!open.empty()) {
      const NodeId n = open.front();
      open.pop();
      for (NodeId m : undirected[n]) {
        if (seen.insert(m).second) open.push(m);
      }
    }
    if (seen.size() != g.nodes_.size()) {
      const std::string msg = std::to_string(g.nodes_.size() - seen.size()) +
                              " node(s) unreachable from node " +
                              std::to_string(g.nodes_.front().id);
      if (options.disconnected_is_error) {
        throw Error(ErrorCode::kDisconnectedGraph, msg);
      }
      g.warnings_.push_back("disconnected graph: " + msg);
    }
  }
  return g;
}

const Node& RoadGraph::node(NodeId id) const {
  auto it = node_index_.find(id);
  if (it == node_index_.end()) {
    throw Error(ErrorCode::kUnknownNode, std::to_string(id));
  }
  return nodes_[it->second];
}

const Edge& RoadGraph::edge(EdgeId id) const {
  auto it = edge_index_.find(id);
  if (it == edge_index_.end()) {
    throw Error(ErrorCode::kUnknownEdge, std::to_string(id));
  }
  return edges_[it->second];
}

const std::vector<EdgeId>& RoadGraph::outgoing_edges(NodeId node) const {
  auto it = adjacency_.find(node);
  if (it == adjacency_.end()) {
    throw Error(ErrorCode::kUnknownNode, std::to_string(node));
  }
  return it->second;
}

std::optional<EdgeId> RoadGraph::reverse_of(EdgeId id) const {
  const Edge& e = edge(id);
  for (EdgeId out : outgoing_edges(e.to_node)) {
    if (edge(out).to_node == e.from_node) return out;
  }
  return std::nullopt;
}

Projection project_onto_edge(const Edge& edge, const Vec2& position) {
  const Vec2 rel = position - edge.start;
  const double along = rel.dot(edge.direction);
  const double s = std::clamp(along, 0.0, edge.length);
  const Vec2 foot = edge.start + s * edge.direction;
  const double cross = edge.direction.x() * rel.y() - edge.direction.y() * rel.x();
  return Projection{edge.id, s, cross, (position - foot).norm()};
}

Projection RoadGraph::project(const Vec2& position) const {
  if (edges_.empty()) {
    throw Error(ErrorCode::kInvalidParams, "projection onto an empty graph");
  }
  Projection best = project_onto_edge(edges_.front(), position);
  for (std::size_t i = 1; i < edges_.size(); ++i) {
    Projection p = project_onto_edge(edges_[i], position);
    if (p.distance < best.distance) best = p;  // strict: lowest id wins ties
  }
  return best;
}

std::vector<Projection> RoadGraph::nearest_candidates(const Vec2& position,
                                                      double tolerance) const {
  const Projection best = project(position);
  std::vector<Projection> out;
  for (const Edge& e : edges_) {
    Projection p = project_onto_edge(e, position);
    if (p.distance <= best.distance + tolerance) out.push_back(p);
  }
  return out;
}

RoadGraph build_graph(const nlohmann::json& doc, const BuildOptions& options) {
  try {
    if (!doc.is_object()) {
      throw Error(ErrorCode::kMalformedDocument, "map document must be an object");
    }
    if (doc.contains("format") && doc.at("format").get<int>() != 1) {
      throw Error(ErrorCode::kMalformedDocument,
                  "unsupported map format " + doc.at("format").dump());
    }
    std::vector<Node> nodes;
    for (const auto& n : doc.at("nodes")) {
      nodes.push_back(Node{n.at("id").get<NodeId>(),
                           Vec2(n.at("x").get<double>(), n.at("y").get<double>())});
    }
    std::vector<Edge> edges;
    for (const auto& e : doc.at("edges")) {
      Edge edge;
      edge.id = e.at("id").get<EdgeId>();
      edge.from_node = e.at("from").get<NodeId>();
      edge.to_node = e.at("to").get<NodeId>();
      edge.kind = edge_kind_from_string(e.value("kind", std::string("sidewalk")));
      edge.v_ref = e.value("v_ref", 1.0);
      edge.switch_distance = e.value("d", options.default_switch_distance);
      if (e.contains("width")) edge.width = e.at("width").get<double>();
      edges.push_back(edge);
    }
    return RoadGraph::from_parts(std::move(nodes), std::move(edges), options);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kMalformedDocument, ex.what());
  }
}

ReferenceState reference_on_line(const Edge& edge, double s) {
  const Vec2 p = edge.start + s * edge.direction;
  return ReferenceState{p.x(), p.y(), edge.v_ref, edge.heading, 0.0, 0.0};
}

ReferenceState reference_state(const Edge& edge, double s) {
  if (!(s >= 0.0) || s > edge.length) {
    throw Error(ErrorCode::kOutOfRange,
                "s=" + std::to_string(s) + " outside [0, " +
                    std::to_string(edge.length) + "] on edge " + std::to_string(edge.id));
  }
  return reference_on_line(edge, s);
}

double remaining_distance(const PedestrianState& state, const Edge& edge) {
  return (edge.end.x() - state.x) * std::cos(edge.heading) +
         (edge.end.y() - state.y) * std::sin(edge.heading);
}

double progress_along(const Edge& edge, const Vec2& position) {
  return (position - edge.start).dot(edge.direction);
}

}  // namespace pedpred
