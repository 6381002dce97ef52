#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "pedpred/map_document.hpp"
#include "pedpred/types.hpp"

namespace pedpred {

/// Row-major semantic raster; cell (ix, iy) covers
/// [origin + ix*size, origin + (ix+1)*size) x [...].
struct SemanticGrid {
  Vec2 origin = Vec2::Zero();
  double cell_size = 0.2;
  int width = 0;
  int height = 0;
  std::vector<CellClass> cells;
  std::vector<int> goals;  // cell indices, parallel to goal_ids
  std::vector<std::int64_t> goal_ids;

  int size() const { return width * height; }
  int index(int ix, int iy) const { return iy * width + ix; }
  int ix(int cell) const { return cell % width; }
  int iy(int cell) const { return cell / width; }
  bool contains(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width && iy < height; }
  Vec2 center(int cell) const;
  std::optional<int> cell_at(const Vec2& p) const;
  bool traversable(int cell) const { return cells[cell] != CellClass::kObstacle; }
  /// Pedestrian areas (sidewalk, crosswalk); goals must lie on these.
  bool walkable(int cell) const {
    return cells[cell] == CellClass::kSidewalk || cells[cell] == CellClass::kCrosswalk;
  }
  /// Index of the goal with this id in `goals`.
  std::size_t goal_slot(std::int64_t goal_id) const;

  /// Uniform grid of one class (tests and synthetic maps).
  static SemanticGrid uniform(int width, int height, CellClass cls, double cell_size = 0.2,
                              Vec2 origin = Vec2::Zero());
  void add_goal(std::int64_t id, int cell);
};

struct RewardConfig {
  double road = -3.0;
  double sidewalk = -1.0;
  double crosswalk = -1.0;
  double goal = 0.0;
  double gamma = 0.99;

  double for_class(CellClass c) const;
  void validate() const;
};

/// Labels each cell by the highest-priority class covering its center
/// (crosswalk > sidewalk > road > obstacle). Sources: explicit regions, and
/// a capsule of the configured width around every edge. Throws
/// kGoalOffWalkable when a goal lands outside pedestrian areas.
SemanticGrid rasterize(const MapDocument& map);

/// 24 moves: the 5x5 neighbourhood without its centre, ordered by angle and
/// then length. Each move pays (class reward of the target) x (length in cells).
struct GridAction {
  int dx = 0;
  int dy = 0;
  double length = 1.0;
};
const std::array<GridAction, 24>& grid_actions();

/// Successor of `cell` under action `a`, or nullopt when it leaves the grid,
/// hits an obstacle or jumps across one.
std::optional<int> successor(const SemanticGrid& grid, int cell, int action);

struct ValueFunction {
  std::int64_t goal_id = 0;
  int goal_cell = 0;
  std::vector<double> values;  // -inf where excluded (obstacle / cut off from goal)
  int sweeps = 0;
  double residual = 0.0;
};

struct ValueIterationOptions {
  double tol = 1e-6;
  int max_iter = 100000;
};

/// Start value for value iteration: a lower bound on every achievable
/// return, min class reward x longest move / (1 - gamma).
double value_lower_bound(const RewardConfig& rewards);

/// Cells from which the goal can be reached; everything else is excluded.
std::vector<char> reachable_from_goal(const SemanticGrid& grid, int goal_cell);

/// Initial value array: 0 at the goal, lower bound at reachable cells, -inf
/// elsewhere.
std::vector<double> initial_values(const SemanticGrid& grid, const RewardConfig& rewards,
                                   int goal_cell);

/// One in-place Bellman backup pass (Gauss-Seidel). Returns max |change|.
double bellman_sweep(const SemanticGrid& grid, const RewardConfig& rewards, int goal_cell,
                     std::vector<double>& values, bool reverse = false);

/// max_s |(T V)(s) - V(s)| over non-excluded cells.
double bellman_residual(const SemanticGrid& grid, const RewardConfig& rewards, int goal_cell,
                        const std::vector<double>& values);

/// Throws kGoalOffWalkable, kNoConvergence.
ValueFunction value_iteration(const SemanticGrid& grid, const RewardConfig& rewards,
                              std::int64_t goal_id, const ValueIterationOptions& options = {});

/// Boltzmann policy over one-step backups, probabilities parallel to
/// grid_actions(). Throws kAllActionsBlocked, kInvalidParams (alpha <= 0).
std::array<double, 24> softmax_policy(const SemanticGrid& grid, const RewardConfig& rewards,
                                      const ValueFunction& vf, double alpha, int cell);

struct SamplingOptions {
  int horizon = 200;  // steps
  int samples = 100;
  std::uint64_t seed = 0;
  double t_s = 0.1;
  double speed = 1.0;  // m/s along the sampled cell path
};

/// positions[j][k] is sample j at step k (k = 0 is the start).
struct Rollouts {
  std::vector<std::vector<Vec2>> positions;
};

struct SampledPrediction {
  Rollouts rollouts;
  std::vector<Vec2> mean;  // per step
  std::vector<Mat2> cov;   // per step, unbiased sample covariance (0 for n = 1)
};

/// Monte-Carlo rollouts of the softmax policy from a continuous start
/// position. Samples walk at `speed` along the polyline through the chosen
/// cell centres; goals are absorbing. Sample j draws from its own generator
/// seeded with (seed, j).
Rollouts sample_rollouts(const SemanticGrid& grid, const RewardConfig& rewards,
                         const ValueFunction& vf, double alpha, const Vec2& start,
                         const SamplingOptions& options);

SampledPrediction summarize(Rollouts rollouts);

SampledPrediction sample_prediction(const SemanticGrid& grid, const RewardConfig& rewards,
                                    const ValueFunction& vf, double alpha, const Vec2& start,
                                    const SamplingOptions& options);

/// Nearest cell (by centre distance) from which the goal is reachable.
int snap_to_reachable(const SemanticGrid& grid, const ValueFunction& vf, const Vec2& p);

/// Value functions solved offline once per (map, rewards, gamma, goal) and
/// persisted as binary files under `directory` (none: memory only).
class ValueFunctionStore {
 public:
  ValueFunctionStore(const SemanticGrid& grid, RewardConfig rewards,
                     std::optional<std::filesystem::path> directory = std::nullopt,
                     ValueIterationOptions options = {});

  const ValueFunction& get(std::int64_t goal_id);
  std::uint64_t key(std::int64_t goal_id) const;
  std::size_t solved() const { return solved_; }
  std::size_t loaded() const { return loaded_; }

 private:
  const SemanticGrid& grid_;
  RewardConfig rewards_;
  std::optional<std::filesystem::path> directory_;
  ValueIterationOptions options_;
  std::uint64_t grid_hash_ = 0;
  std::vector<std::optional<ValueFunction>> entries_;
  std::size_t solved_ = 0;
  std::size_t loaded_ = 0;
};

void save_value_function(const ValueFunction& vf, std::uint64_t key,
                         const std::filesystem::path& file);
std::optional<ValueFunction> load_value_function(std::uint64_t key,
                                                 const std::filesystem::path& file);

}  // namespace pedpred
