#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <queue>
#include <random>

#include "pedpred/error.hpp"
#include "pedpred/rl_baseline.hpp"

using namespace pedpred;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const std::string kFig3 = std::string(PEDPRED_DATA_DIR) + "/maps/fig3_intersection.json";

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no pedpred::Error thrown";
  return ErrorCode::kIo;
}

// One cell wide corridor of sidewalk inside obstacles, goal at the east end.
SemanticGrid corridor(int length) {
  SemanticGrid g = SemanticGrid::uniform(length, 3, CellClass::kObstacle);
  for (int x = 0; x < length; ++x) g.cells[g.index(x, 1)] = CellClass::kSidewalk;
  g.add_goal(1, g.index(length - 1, 1));
  return g;
}

// Shortest-path costs to the goal (reverse Dijkstra), move cost = -reward x length.
std::vector<double> dijkstra_costs(const SemanticGrid& g, const RewardConfig& r, int goal) {
  std::vector<double> dist(g.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  dist[goal] = 0.0;
  open.push({0.0, goal});
  while (!open.empty()) {
    const auto [d, c] = open.top();
    open.pop();
    if (d > dist[c]) continue;
    // Predecessors: p with a move p -> c (moves are symmetric).
    for (int a = 0; a < 24; ++a) {
      const auto p = successor(g, c, a);
      if (!p) continue;
      const double w = -r.for_class(g.cells[c]) * grid_actions()[a].length;
      if (d + w < dist[*p]) {
        dist[*p] = d + w;
        open.push({dist[*p], *p});
      }
    }
  }
  return dist;
}

SemanticGrid random_grid(int w, int h, std::uint64_t seed) {
  SemanticGrid g = SemanticGrid::uniform(w, h, CellClass::kSidewalk);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cls(0, 9);
  for (int c = 0; c < g.size(); ++c) {
    const int v = cls(rng);
    g.cells[c] = v < 2 ? CellClass::kObstacle : v < 5 ? CellClass::kRoad : CellClass::kSidewalk;
  }
  const int goal = g.index(w / 2, h / 2);
  g.cells[goal] = CellClass::kSidewalk;
  g.add_goal(7, goal);
  return g;
}

double trace_at(const SampledPrediction& p, int k) { return p.cov[k].trace(); }

}  // namespace

TEST(Actions, TwentyFourMovesByAngle) {
  const auto& acts = grid_actions();
  EXPECT_EQ(acts[0].dx, 1);
  EXPECT_EQ(acts[0].dy, 0);
  EXPECT_EQ(acts[1].dx, 2);
  EXPECT_EQ(acts[1].dy, 0);
  int longest = 0;
  for (const GridAction& a : acts) {
    EXPECT_NEAR(a.length, std::hypot(a.dx, a.dy), 1e-15);
    EXPECT_FALSE(a.dx == 0 && a.dy == 0);
    longest += a.length > 2.5;
  }
  EXPECT_EQ(longest, 4);
}

TEST(ValueIteration, CorridorHandValues) {
  const SemanticGrid g = corridor(6);
  RewardConfig r;
  const ValueFunction vf = value_iteration(g, r, 1);
  const int goal = g.index(5, 1);
  EXPECT_DOUBLE_EQ(vf.values[goal], 0.0);
  EXPECT_NEAR(vf.values[g.index(4, 1)], -1.0, 1e-9);
  EXPECT_NEAR(vf.values[g.index(3, 1)], -1.99, 1e-9);
  EXPECT_NEAR(vf.values[g.index(2, 1)], -2.9701, 1e-9);
  EXPECT_NEAR(vf.values[g.index(1, 1)], -3.940399, 1e-9);
  EXPECT_EQ(vf.values[g.index(0, 0)], kNegInf);
  EXPECT_LT(bellman_residual(g, r, goal, vf.values), 1e-6);
}

TEST(ValueIteration, MonotoneFromLowerBound) {
  const SemanticGrid g = random_grid(30, 25, 3);
  RewardConfig r;
  const int goal = g.goals[0];
  std::vector<double> v = initial_values(g, r, goal);
  const auto reach = reachable_from_goal(g, goal);
  for (int sweep = 0; sweep < 40; ++sweep) {
    const std::vector<double> before = v;
    bellman_sweep(g, r, goal, v, sweep % 2 == 1);
    for (int c = 0; c < g.size(); ++c) {
      if (!reach[c]) {
        EXPECT_EQ(v[c], kNegInf);
        continue;
      }
      EXPECT_GE(v[c], before[c] - 1e-12);
    }
  }
  const ValueFunction vf = value_iteration(g, r, 7);
  EXPECT_LT(vf.residual, 1e-6);
  EXPECT_LT(bellman_residual(g, r, goal, vf.values), 1e-6);
}

TEST(ValueIteration, UndiscountedLimitMatchesDijkstra) {
  for (std::uint64_t seed : {1u, 2u}) {
    const SemanticGrid g = random_grid(40, 35, seed);
    RewardConfig r;
    r.gamma = 1.0 - 1e-9;
    const ValueFunction vf = value_iteration(g, r, 7);
    const auto dist = dijkstra_costs(g, r, g.goals[0]);
    for (int c = 0; c < g.size(); ++c) {
      if (std::isinf(dist[c])) {
        EXPECT_EQ(vf.values[c], kNegInf);
      } else {
        EXPECT_NEAR(vf.values[c], -dist[c], 1e-5 * std::max(1.0, dist[c])) << c;
      }
    }
    // Near-greedy policy puts its mass on a shortest-path successor.
    for (int c = 0; c < g.size(); c += 37) {
      if (std::isinf(dist[c]) || c == g.goals[0]) continue;
      const auto p = softmax_policy(g, r, vf, 1e6, c);
      const int a = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
      const int s = *successor(g, c, a);
      const double step = -r.for_class(g.cells[s]) * grid_actions()[a].length;
      EXPECT_NEAR(step + dist[s], dist[c], 1e-5 * std::max(1.0, dist[c]));
    }
  }
}

TEST(ValueIteration, GoalMustBeWalkable) {
  SemanticGrid g = SemanticGrid::uniform(5, 5, CellClass::kRoad);
  EXPECT_EQ(code_of([&] { g.add_goal(3, g.index(2, 2)); }), ErrorCode::kGoalOffWalkable);
  // A goal cell that later loses its pedestrian class is rejected by the solver too.
  g.cells[g.index(2, 2)] = CellClass::kSidewalk;
  g.add_goal(3, g.index(2, 2));
  g.cells[g.index(2, 2)] = CellClass::kRoad;
  EXPECT_EQ(code_of([&] { value_iteration(g, RewardConfig{}, 3); }), ErrorCode::kGoalOffWalkable);
}

TEST(Policy, SoftmaxSymmetricAndNormalized) {
  SemanticGrid g = SemanticGrid::uniform(21, 21, CellClass::kSidewalk);
  g.add_goal(1, g.index(18, 10));
  RewardConfig r;
  const ValueFunction vf = value_iteration(g, r, 1);
  const auto p = softmax_policy(g, r, vf, 5.0, g.index(4, 10));
  double total = 0;
  for (double x : p) total += x;
  EXPECT_NEAR(total, 1.0, 1e-12);
  const auto& acts = grid_actions();
  for (int a = 0; a < 24; ++a) {
    for (int b = 0; b < 24; ++b) {
      if (acts[b].dx == acts[a].dx && acts[b].dy == -acts[a].dy) {
        EXPECT_NEAR(p[a], p[b], 1e-12);
      }
    }
  }
  const auto sharp = softmax_policy(g, r, vf, 1000.0, g.index(4, 10));
  EXPECT_GT(*std::max_element(sharp.begin(), sharp.end()), 0.99);
  EXPECT_EQ(code_of([&] { softmax_policy(g, r, vf, 0.0, 0); }), ErrorCode::kInvalidParams);
}

TEST(Rollouts, SameSeedSameSamples) {
  SemanticGrid g = SemanticGrid::uniform(40, 40, CellClass::kSidewalk);
  g.add_goal(1, g.index(35, 35));
  RewardConfig r;
  const ValueFunction vf = value_iteration(g, r, 1);
  SamplingOptions o;
  o.samples = 20;
  o.horizon = 60;
  o.seed = 42;
  const Rollouts a = sample_rollouts(g, r, vf, 20.0, Vec2(1.0, 1.0), o);
  const Rollouts b = sample_rollouts(g, r, vf, 20.0, Vec2(1.0, 1.0), o);
  EXPECT_EQ(a.positions, b.positions);
  o.seed = 43;
  const Rollouts c = sample_rollouts(g, r, vf, 20.0, Vec2(1.0, 1.0), o);
  EXPECT_NE(a.positions, c.positions);
  // Each step moves at most speed * t_s.
  for (const auto& traj : a.positions) {
    ASSERT_EQ(traj.size(), 61u);
    for (std::size_t k = 1; k < traj.size(); ++k) {
      EXPECT_LE((traj[k] - traj[k - 1]).norm(), o.speed * o.t_s + 1e-12);
    }
  }
}

TEST(Rollouts, LowerAlphaSpreadsMore) {
  SemanticGrid g = SemanticGrid::uniform(60, 40, CellClass::kSidewalk);
  g.add_goal(1, g.index(55, 20));
  RewardConfig r;
  const ValueFunction vf = value_iteration(g, r, 1);
  SamplingOptions o;
  o.samples = 1000;
  o.horizon = 50;
  o.seed = 9;
  const Vec2 start = g.center(g.index(5, 20));
  const SampledPrediction soft = sample_prediction(g, r, vf, 20.0, start, o);
  const SampledPrediction hard = sample_prediction(g, r, vf, 1000.0, start, o);
  EXPECT_GT(trace_at(soft, 50), trace_at(hard, 50));
  EXPECT_NEAR(trace_at(soft, 0), 0.0, 1e-15);
}

TEST(Summarize, UnbiasedCovariance) {
  Rollouts r;
  r.positions = {{Vec2(0, 0), Vec2(1, 0)}, {Vec2(0, 0), Vec2(-1, 2)}, {Vec2(0, 0), Vec2(3, 1)}};
  const SampledPrediction s = summarize(r);
  EXPECT_TRUE(s.mean[1].isApprox(Vec2(1.0, 1.0)));
  // Deviations (0,-1), (-2,1), (2,0): sums xx 8, xy -2, yy 2 over n - 1 = 2.
  EXPECT_NEAR(s.cov[1](0, 0), 4.0, 1e-15);
  EXPECT_NEAR(s.cov[1](0, 1), -1.0, 1e-15);
  EXPECT_NEAR(s.cov[1](1, 1), 1.0, 1e-15);
}

TEST(Rasterize, SidewalkBandIsTenCellsWide) {
  nlohmann::json doc = {
      {"format", 1},
      {"nodes", {{{"id", 1}, {"x", 0}, {"y", 0}}, {{"id", 2}, {"x", 10}, {"y", 0}}}},
      {"edges", {{{"id", 1}, {"from", 1}, {"to", 2}, {"kind", "sidewalk"}}}},
      {"goals", {{{"id", 5}, {"x", 10}, {"y", 0}}}},
      {"raster", {{"cell_size", 0.2}, {"margin", 2.0}, {"sidewalk_width", 2.0}}},
  };
  const SemanticGrid g = rasterize(parse_map(doc));
  const auto mid = g.cell_at(Vec2(5.0, 0.05));
  ASSERT_TRUE(mid);
  const int x = g.ix(*mid);
  int band = 0;
  for (int y = 0; y < g.height; ++y) band += g.cells[g.index(x, y)] == CellClass::kSidewalk;
  EXPECT_EQ(band, 10);
  EXPECT_EQ(g.goals.size(), 1u);

  doc["goals"] = {{{"id", 5}, {"x", 5}, {"y", 1.9}}};
  EXPECT_EQ(code_of([&] { rasterize(parse_map(doc)); }), ErrorCode::kGoalOffWalkable);
}

TEST(Store, CachesToDisk) {
  const auto dir = std::filesystem::temp_directory_path() / "pedpred_vf_test";
  std::filesystem::remove_all(dir);
  const SemanticGrid g = random_grid(25, 25, 5);
  RewardConfig r;
  {
    ValueFunctionStore s(g, r, dir);
    s.get(7);
    EXPECT_EQ(s.solved(), 1u);
    EXPECT_EQ(s.loaded(), 0u);
  }
  ValueFunctionStore s(g, r, dir);
  const ValueFunction& vf = s.get(7);
  EXPECT_EQ(s.solved(), 0u);
  EXPECT_EQ(s.loaded(), 1u);
  EXPECT_EQ(vf.values, value_iteration(g, r, 7).values);

  // Different rewards miss the cache.
  RewardConfig other = r;
  other.road = -5.0;
  ValueFunctionStore s2(g, other, dir);
  s2.get(7);
  EXPECT_EQ(s2.solved(), 1u);
  EXPECT_NE(s.key(7), s2.key(7));
  std::filesystem::remove_all(dir);
}

TEST(Fig3, RolloutsHeadForGoal) {
  const MapDocument map = load_map(kFig3);
  const SemanticGrid g = rasterize(map);
  RewardConfig r;
  const ValueFunction vf = value_iteration(g, r, 100);
  SamplingOptions o;
  o.samples = 100;
  o.horizon = 200;
  o.seed = 1;
  const Vec2 start(-3.5, -10.0), goal(10.0, 3.5);
  const SampledPrediction p = sample_prediction(g, r, vf, 100.0, start, o);
  EXPECT_LT((p.mean.back() - goal).norm(), (start - goal).norm() - 10.0);
  // Roads are avoided: the mean path never enters deep road interior.
  for (const auto& traj : p.rollouts.positions) {
    for (const Vec2& q : traj) {
      const auto c = g.cell_at(q);
      ASSERT_TRUE(c);
      EXPECT_TRUE(g.traversable(*c));
    }
  }
}
