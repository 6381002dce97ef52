#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "pedpred/error.hpp"
#include "pedpred/map_document.hpp"
#include "pedpred/predictor.hpp"

using namespace pedpred;

namespace {

const std::string kFig3 = std::string(PEDPRED_DATA_DIR) + "/maps/fig3_intersection.json";

PredictorParams params_with(int horizon) {
  PredictorParams p;
  p.horizon = horizon;
  return p;
}

RoadGraph corridor(double length = 100.0) {
  return RoadGraph::from_parts({{1, {0, 0}}, {2, {length, 0}}}, {Edge{1, 1, 2}});
}

// T junction: 1 -> 2 east, then 2 -> 3 north or 2 -> 4 south.
RoadGraph tee() {
  return RoadGraph::from_parts({{1, {0, 0}}, {2, {10, 0}}, {3, {10, 20}}, {4, {10, -20}}},
                               {Edge{1, 1, 2}, Edge{2, 2, 3}, Edge{3, 2, 4}, Edge{4, 2, 1}});
}

// Stationary covariance of x+ = A x + w by Kronecker inversion.
Mat4 lyapunov_oracle(const Mat4& A, const Mat4& W) {
  using M16 = Eigen::Matrix<double, 16, 16>;
  M16 kron;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) kron.block<4, 4>(4 * i, 4 * j) = A(i, j) * A;
  const Eigen::Matrix<double, 16, 1> w = Eigen::Map<const Eigen::Matrix<double, 16, 1>>(W.data());
  const Eigen::Matrix<double, 16, 1> p = (M16::Identity() - kron).lu().solve(w);
  return Eigen::Map<const Mat4>(p.data());
}

}  // namespace

TEST(InitBranches, ProjectsOntoFig3SouthArm) {
  const MapDocument map = load_map(kFig3);
  const auto roots = init_branches(map.graph, PedestrianState{-3.5, -10, 1, kPi / 2});
  ASSERT_EQ(roots.size(), 1u);
  EXPECT_EQ(roots[0].edge, 1);
  EXPECT_NEAR(roots[0].ref_progress, 10.0, 1e-12);

  // Heading picks the direction among the overlapping pair.
  const auto south = init_branches(map.graph, PedestrianState{-3.5, -10, 1, -kPi / 2});
  ASSERT_EQ(south.size(), 1u);
  EXPECT_EQ(south[0].edge, 2);
}

TEST(InitBranches, WithinSwitchDistanceSpawnsSuccessors) {
  const RoadGraph g = tee();
  const auto roots = init_branches(g, PedestrianState{9.7, 0, 1, 0});
  ASSERT_EQ(roots.size(), 2u);
  EXPECT_EQ(roots[0].edge, 2);
  EXPECT_EQ(roots[1].edge, 3);
  EXPECT_EQ(roots[0].id, 0u);
  EXPECT_EQ(roots[1].id, 1u);
  EXPECT_DOUBLE_EQ(roots[0].last().mean.theta, kPi / 2);
  const auto with_uturn = init_branches(g, PedestrianState{9.7, 0, 1, 0}, Mat4::Zero(), true);
  EXPECT_EQ(with_uturn.size(), 3u);
}

TEST(StepBelief, ZeroCovarianceGivesW) {
  const PredictorParams p = params_with(1);
  const PredictionTree t = predict(corridor(), PedestrianState{0, 0.3, 1, 0.1}, Mat4::Zero(), p);
  ASSERT_EQ(t.branches.size(), 1u);
  ASSERT_EQ(t.branches[0].beliefs.size(), 2u);
  EXPECT_LT((t.branches[0].beliefs[1].belief.cov - p.W).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(StepBelief, CovarianceConvergesToLyapunovSolution) {
  const PredictorParams p = params_with(600);
  const RoadGraph g = corridor(1000.0);
  const PredictionTree t = predict(g, PedestrianState{0, 0, 1, 0}, Mat4::Zero(), p);
  ASSERT_EQ(t.branches.size(), 1u);
  ControllerCache cache(p.weights, p.t_s);
  const Mat4 oracle = lyapunov_oracle(cache.get(g.edge(1)).A_K, p.W);
  const auto& beliefs = t.branches[0].beliefs;
  EXPECT_LT((beliefs.back().belief.cov - oracle).cwiseAbs().maxCoeff(), 1e-8);
  // From P0 = 0 the sequence increases in the Loewner order.
  for (std::size_t k = 1; k < beliefs.size(); ++k) {
    const Mat4 diff = beliefs[k].belief.cov - beliefs[k - 1].belief.cov;
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Mat4>(diff).eigenvalues().minCoeff(), -1e-12) << k;
  }
}

TEST(StepBelief, MeanMatchesDeviationRecursion) {
  const PredictorParams p = params_with(100);
  const RoadGraph g = corridor(1000.0);
  const PedestrianState x0{2.0, 0.8, 1.3, 0.2};
  const PredictionTree t = predict(g, x0, Mat4::Zero(), p);
  ControllerCache cache(p.weights, p.t_s);
  const Mat4 AK = cache.get(g.edge(1)).A_K;
  Vec4 e = x0.vec() - Vec4(2.0, 0.0, 1.0, 0.0);
  for (int k = 1; k <= 100; ++k) {
    e = AK * e;
    const Vec4 expect = Vec4(2.0 + 0.1 * k, 0.0, 1.0, 0.0) + e;
    const Vec4 got = t.branches[0].beliefs[k].belief.mean.vec();
    EXPECT_LT((got - expect).cwiseAbs().maxCoeff(), 1e-10) << k;
  }
}

TEST(StepBelief, AlignedLateralOffsetDecays) {
  const PredictionTree t =
      predict(corridor(1000.0), PedestrianState{2.0, 0.8, 1.0, 0.0}, Mat4::Zero(), params_with(300));
  // Second-order loop: may overshoot slightly but never grows past the start.
  for (const BeliefStep& s : t.branches[0].beliefs) {
    EXPECT_LE(std::abs(s.belief.mean.y), 0.8 + 1e-12) << s.step;
  }
  EXPECT_LT(std::abs(t.branches[0].beliefs[50].belief.mean.y), 0.4);
  EXPECT_LT(std::abs(t.branches[0].last().mean.y), 0.08);
}

TEST(Predict, HorizonZeroKeepsRootBeliefsOnly) {
  const PredictionTree t = predict(tee(), PedestrianState{1, 0, 1, 0}, Mat4::Zero(), params_with(0));
  ASSERT_EQ(t.branches.size(), 1u);
  EXPECT_EQ(t.branches[0].beliefs.size(), 1u);
  EXPECT_THROW(predict(tee(), PedestrianState{}, Mat4::Zero(), params_with(-1)), Error);
}

TEST(Predict, SingleStep) {
  const PredictionTree t = predict(tee(), PedestrianState{1, 0, 1, 0}, Mat4::Zero(), params_with(1));
  const auto paths = enumerate_paths(t);
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_EQ(paths[0].beliefs.size(), 2u);
  EXPECT_NEAR(paths[0].beliefs[1].mean.x, 1.1, 1e-12);
}

TEST(Predict, CornerSpawnsTwoChildren) {
  const PredictionTree t = predict(tee(), PedestrianState{0, 0, 1, 0}, Mat4::Zero(), params_with(200));
  ASSERT_EQ(t.branches.size(), 3u);
  const Branch& root = t.branches[0];
  EXPECT_EQ(root.end, BranchEnd::kSwitched);
  ASSERT_EQ(root.children.size(), 2u);
  // Noise-free mean on the reference: remaining 10 - 0.1 k reaches d = 0.5.
  EXPECT_NEAR(root.last_step(), 95, 1);
  std::set<EdgeId> child_edges;
  for (BranchId c : root.children) {
    const Branch& b = t.branch(c);
    child_edges.insert(b.edge);
    EXPECT_EQ(b.spawn_step, root.last_step());
    EXPECT_EQ(b.beliefs.front().step, root.last_step());
    EXPECT_EQ(b.beliefs.back().step, 200);
    // Hand-off keeps the covariance.
    EXPECT_TRUE(b.beliefs.front().belief.cov.isApprox(root.last().cov));
  }
  EXPECT_EQ(child_edges, (std::set<EdgeId>{2, 3}));
  EXPECT_FALSE(t.truncated);
  EXPECT_EQ(t.leaves(), (std::vector<BranchId>{1, 2}));
}

TEST(Predict, BranchBudgetTruncates) {
  // Fan of five spokes, each leading to a further fan of five.
  std::vector<Node> nodes{{1, {0, 0}}, {2, {5, 0}}};
  std::vector<Edge> edges{Edge{1, 1, 2}};
  EdgeId eid = 2;
  NodeId nid = 3;
  for (int i = 0; i < 5; ++i) {
    const double a = -1.0 + 0.5 * i;
    const NodeId hub = nid++;
    const Vec2 hp = Vec2(5, 0) + 5 * Vec2(std::cos(a), std::sin(a));
    nodes.push_back({hub, hp});
    edges.push_back(Edge{eid++, 2, hub});
    for (int j = 0; j < 5; ++j) {
      const double b = a - 1.0 + 0.5 * j;
      nodes.push_back({nid, hp + 5 * Vec2(std::cos(b), std::sin(b))});
      edges.push_back(Edge{eid++, hub, nid++});
    }
  }
  const RoadGraph g = RoadGraph::from_parts(nodes, edges);
  PredictorParams p = params_with(150);
  const PredictionTree full = predict(g, PedestrianState{0, 0, 1, 0}, Mat4::Zero(), p);
  EXPECT_EQ(full.branches.size(), 31u);
  EXPECT_FALSE(full.truncated);

  p.max_branches = 10;
  const PredictionTree cut = predict(g, PedestrianState{0, 0, 1, 0}, Mat4::Zero(), p);
  EXPECT_EQ(cut.branches.size(), 10u);
  EXPECT_TRUE(cut.truncated);
  EXPECT_EQ(cut.branches[0].children.size(), 5u);
  bool pruned = false;
  for (const Branch& b : cut.branches) pruned |= b.end == BranchEnd::kPruned;
  EXPECT_TRUE(pruned);
}

TEST(Predict, Fig3IntersectionFansOut) {
  const MapDocument map = load_map(kFig3);
  const PredictionTree t =
      predict(map.graph, PedestrianState{-3.5, -10, 1, kPi / 2}, Mat4::Zero(), params_with(200));
  const auto paths = enumerate_paths(t);
  EXPECT_GE(paths.size(), 3u);
  for (const PredictedPath& path : paths) {
    ASSERT_EQ(path.beliefs.size(), 201u);
    // Each belief stays close to the edge it is tracking.
    for (BranchId id : path.lineage) {
      const Branch& b = t.branch(id);
      const Edge& e = map.graph.edge(b.edge);
      for (const BeliefStep& s : b.beliefs) {
        EXPECT_LT(std::abs(project_onto_edge(e, s.belief.mean.position()).lateral), 1.0);
      }
    }
  }
}

TEST(Predict, Deterministic) {
  const MapDocument map = load_map(kFig3);
  const PedestrianState x0{-3.5, -10, 1, kPi / 2};
  const auto a = to_json(predict(map.graph, x0, Mat4::Zero(), params_with(200)));
  const auto b = to_json(predict(map.graph, x0, Mat4::Zero(), params_with(200)));
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Predict, JsonRoundTrip) {
  const MapDocument map = load_map(kFig3);
  const PredictionTree t =
      predict(map.graph, PedestrianState{-3.5, -10, 1, kPi / 2}, Mat4::Zero(), params_with(120));
  const auto doc = to_json(t);
  const PredictionTree back = tree_from_json(nlohmann::json::parse(doc.dump()));
  EXPECT_EQ(to_json(back), doc);
  EXPECT_THROW(tree_from_json(nlohmann::json::object()), Error);
}

TEST(Ellipse, ChiSquareScaling) {
  EXPECT_NEAR(chi2_2dof_quantile(0.99), 9.2103, 1e-4);
  EXPECT_NEAR(chi2_2dof_quantile(0.95), 5.9915, 1e-4);
  EXPECT_THROW(chi2_2dof_quantile(1.0), Error);

  Mat2 cov;
  cov << 4, 0, 0, 1;
  const ConfidenceEllipse e = confidence_ellipse(cov, 0.99);
  EXPECT_NEAR(e.semi_major, std::sqrt(4 * 9.21034037), 1e-6);
  EXPECT_NEAR(e.semi_major / e.semi_minor, 2.0, 1e-12);
  EXPECT_NEAR(e.orientation, 0.0, 1e-12);

  Mat2 tall;
  tall << 1, 0, 0, 4;
  EXPECT_NEAR(std::abs(confidence_ellipse(tall, 0.99).orientation), kPi / 2, 1e-12);

  const double c = std::cos(0.4), s = std::sin(0.4);
  Mat2 R;
  R << c, -s, s, c;
  const ConfidenceEllipse r = confidence_ellipse(R * cov * R.transpose(), 0.99);
  EXPECT_NEAR(r.orientation, 0.4, 1e-12);
  EXPECT_NEAR(r.semi_minor, e.semi_minor, 1e-12);
}
