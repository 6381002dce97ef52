#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedpred/types.hpp"

namespace pedpred {

using NodeId = std::int64_t;
using EdgeId = std::int64_t;

inline constexpr double kDefaultSwitchDistance = 0.5;  // m

enum class EdgeKind { kSidewalk, kCrosswalk };

struct Node {
  NodeId id = 0;
  Vec2 position = Vec2::Zero();
};

/// Straight walkable strip between two nodes. Geometry fields are filled in
/// by the graph builder.
struct Edge {
  EdgeId id = 0;
  NodeId from_node = 0;
  NodeId to_node = 0;
  EdgeKind kind = EdgeKind::kSidewalk;
  double v_ref = 1.0;                              // m/s
  double switch_distance = kDefaultSwitchDistance;  // m
  std::optional<double> width;                      // m, rasterization only

  Vec2 start = Vec2::Zero();
  Vec2 end = Vec2::Zero();
  Vec2 direction = Vec2::UnitX();  // unit vector start -> end
  double length = 0.0;
  double heading = 0.0;  // rad, in (-pi, pi]
};

/// Center-line reference r = [r^x r^u] at some arc length along an edge.
struct ReferenceState {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double theta = 0.0;
  double accel = 0.0;
  double turn_rate = 0.0;

  Vec4 state() const { return {x, y, v, theta}; }
  Vec2 input() const { return {accel, turn_rate}; }
};

struct Projection {
  EdgeId edge = 0;
  double s = 0.0;        // arc length of the foot point, clamped to the segment
  double lateral = 0.0;  // signed distance, positive to the left of travel
  double distance = 0.0;  // unsigned distance to the segment
};

struct BuildOptions {
  // A disconnected graph is reported through RoadGraph::warnings() unless this
  // is set, in which case build fails with kDisconnectedGraph.
  bool disconnected_is_error = false;
  // Switch distance for edges that do not set their own `d`.
  double default_switch_distance = kDefaultSwitchDistance;
};

/// Immutable directed graph of walkable edges.
class RoadGraph {
 public:
  RoadGraph() = default;

  static RoadGraph from_parts(std::vector<Node> nodes, std::vector<Edge> edges,
                              const BuildOptions& options = {});

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  bool empty() const { return edges_.empty(); }

  const Node& node(NodeId id) const;
  const Edge& edge(EdgeId id) const;
  bool has_node(NodeId id) const { return node_index_.contains(id); }

  /// Edges leaving `node`, ordered by edge id. Throws kUnknownNode.
  const std::vector<EdgeId>& outgoing_edges(NodeId node) const;

  /// Nearest edge by perpendicular distance to its segment; ties go to the
  /// lowest edge id.
  Projection project(const Vec2& position) const;

  /// All edges whose segment distance is within `tolerance` of the minimum,
  /// ordered by edge id.
  std::vector<Projection> nearest_candidates(const Vec2& position,
                                             double tolerance) const;

  /// Reverse of `edge` (same endpoints swapped), if present.
  std::optional<EdgeId> reverse_of(EdgeId edge) const;

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<NodeId, std::size_t> node_index_;
  std::unordered_map<EdgeId, std::size_t> edge_index_;
  std::unordered_map<NodeId, std::vector<EdgeId>> adjacency_;
  std::vector<std::string> warnings_;
};

/// Validates and materializes the `nodes`/`edges` sections of a map document.
RoadGraph build_graph(const nlohmann::json& map_document,
                      const BuildOptions& options = {});

/// Point `s` meters along the edge. Throws kOutOfRange outside [0, length].
ReferenceState reference_state(const Edge& edge, double s);

/// Same as reference_state but extrapolates along the edge line for any s.
ReferenceState reference_on_line(const Edge& edge, double s);

/// Along-track distance from the state to the edge's final node; positive
/// before the node, negative past it.
double remaining_distance(const PedestrianState& state, const Edge& edge);

/// Along-track coordinate of a point relative to the edge start.
double progress_along(const Edge& edge, const Vec2& position);

Projection project_onto_edge(const Edge& edge, const Vec2& position);

inline std::vector<EdgeId> outgoing_edges(const RoadGraph& graph, NodeId node) {
  return graph.outgoing_edges(node);
}

inline Projection project_to_graph(const RoadGraph& graph, const Vec2& position) {
  return graph.project(position);
}

EdgeKind edge_kind_from_string(const std::string& s);
std::string to_string(EdgeKind kind);

}  // namespace pedpred
