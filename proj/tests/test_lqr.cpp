#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "pedpred/error.hpp"
#include "pedpred/lqr.hpp"

using namespace pedpred;
using Eigen::MatrixXd;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no pedpred::Error thrown";
  return ErrorCode::kIo;
}

MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }

DiscreteModel model_at(double theta, double v, double t_s = 0.1) {
  return discretize(jacobians(ReferenceState{0, 0, v, theta, 0, 0}), t_s);
}

// DARE residual written with a general inverse, independent of the solver's
// closed-form inner inverse.
double dare_residual(const MatrixXd& A, const MatrixXd& B, const LqrWeights& w,
                     const MatrixXd& P) {
  const MatrixXd G = A.transpose() * P * B + w.S;
  const MatrixXd rhs = w.Q + A.transpose() * P * A -
                       G * (w.R + B.transpose() * P * B).inverse() * G.transpose();
  return (rhs - P).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Dare, ScalarGoldenRatio) {
  LqrWeights w;
  w.Q = scalar(1);
  w.R = scalar(1);
  w.S = scalar(0);
  const LqrSolution s = solve_dare(scalar(1), scalar(1), w);
  const double phi = (1 + std::sqrt(5.0)) / 2;
  EXPECT_NEAR(s.P(0, 0), phi, 1e-9);
  EXPECT_NEAR(s.K(0, 0), phi / (1 + phi), 1e-9);
  EXPECT_NEAR(s.A_K(0, 0), 1 / (1 + phi), 1e-9);
  EXPECT_LT(s.spectral_radius, 1.0);
}

TEST(Dare, ZeroDynamicsGiveQ) {
  const LqrWeights w = LqrWeights::scaled_identity(0.3, 2.0);
  const LqrSolution s = solve_dare(MatrixXd::Zero(4, 4), model_at(0, 1).B, w);
  EXPECT_LT((s.P - w.Q).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(s.K.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Dare, StabilizesAcrossWeightLadder) {
  for (double qr : {10.0, 1.0, 0.1, 0.02}) {
    for (double v : {0.5, 1.0, 1.5}) {
      for (double th : {0.0, kPi / 4, kPi / 2}) {
        const DiscreteModel m = model_at(th, v);
        const LqrWeights w = LqrWeights::scaled_identity(qr, 1.0);
        const LqrSolution s = solve_dare(m.A, m.B, w);
        EXPECT_LT(spectral_radius(m.A - m.B * s.K), 1.0) << qr << " " << v << " " << th;
        EXPECT_LT(dare_residual(m.A, m.B, w, s.P), 1e-8);
        // P symmetric positive definite.
        EXPECT_LT((s.P - s.P.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_GT(Eigen::SelfAdjointEigenSolver<MatrixXd>(s.P).eigenvalues().minCoeff(), 0.0);
      }
    }
  }
}

TEST(Dare, GainInvariantUnderJointScaling) {
  const DiscreteModel m = model_at(0.7, 1.2);
  const LqrSolution a = solve_dare(m.A, m.B, LqrWeights::scaled_identity(0.02, 1.0));
  const LqrSolution b = solve_dare(m.A, m.B, LqrWeights::scaled_identity(0.2, 10.0));
  EXPECT_LT((a.K - b.K).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((10.0 * a.P - b.P).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Dare, FixedPointIsIdempotent) {
  const DiscreteModel m = model_at(-2.0, 0.8);
  const LqrWeights w = LqrWeights::scaled_identity(0.02, 1.0);
  const LqrSolution s = solve_dare(m.A, m.B, w);
  EXPECT_LT((riccati_step(m.A, m.B, w, s.P) - s.P).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(s.residual, 1e-10);
  EXPECT_GT(s.iterations, 0);
}

TEST(Dare, CrossTermMatchesOracle) {
  const DiscreteModel m = model_at(0.3, 1.0);
  LqrWeights w = LqrWeights::scaled_identity(1.0, 1.0);
  w.S = MatrixXd::Zero(4, 2);
  w.S(2, 0) = 0.2;
  w.S(3, 1) = -0.1;
  const LqrSolution s = solve_dare(m.A, m.B, w);
  EXPECT_LT(dare_residual(m.A, m.B, w, s.P), 1e-8);
  const MatrixXd K = (w.R + m.B.transpose() * s.P * m.B).inverse() *
                     (m.B.transpose() * s.P * m.A + w.S.transpose());
  EXPECT_LT((K - s.K).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Dare, Errors) {
  const DiscreteModel m = model_at(0, 1);
  EXPECT_EQ(code_of([&] { solve_dare(m.A, m.B, LqrWeights::scaled_identity(-1, 1)); }),
            ErrorCode::kBadWeights);
  EXPECT_EQ(code_of([&] { solve_dare(m.A, m.B, LqrWeights::scaled_identity(1, 0)); }),
            ErrorCode::kBadWeights);
  LqrWeights asym = LqrWeights::scaled_identity(1, 1);
  asym.Q(0, 1) = 0.5;
  EXPECT_EQ(code_of([&] { solve_dare(m.A, m.B, asym); }), ErrorCode::kBadWeights);
  EXPECT_EQ(code_of([&] { solve_dare(m.A, MatrixXd::Zero(3, 2), LqrWeights{}); }),
            ErrorCode::kBadWeights);

  // Unstable mode with no actuation.
  LqrWeights w;
  w.Q = scalar(1);
  w.R = scalar(1);
  w.S = scalar(0);
  EXPECT_EQ(code_of([&] { solve_dare(scalar(2), scalar(0), w); }), ErrorCode::kNotStabilizable);
  EXPECT_EQ(code_of([&] { solve_dare(m.A, m.B, LqrWeights::scaled_identity(0.02, 1), {1e-10, 2}); }),
            ErrorCode::kNoConvergence);
}

TEST(TrackingInput, FeedbackSign) {
  Mat24 K = Mat24::Zero();
  K(0, 2) = 2.0;
  K(1, 3) = 0.5;
  const ReferenceState ref{0, 0, 1.0, 0.0, 0.1, 0.0};
  const ControlInput u = tracking_input(K, PedestrianState{0, 0, 1.5, 0.2}, ref);
  EXPECT_NEAR(u.a, 0.1 - 2.0 * 0.5, 1e-15);
  EXPECT_NEAR(u.omega, -0.1, 1e-15);
  const ControlInput at_ref = tracking_input(K, PedestrianState{0, 0, 1.0, 0.0}, ref);
  EXPECT_DOUBLE_EQ(at_ref.a, 0.1);
  EXPECT_DOUBLE_EQ(at_ref.omega, 0.0);
}

TEST(ControllerCache, SharesByHeadingAndSpeed) {
  const RoadGraph g = RoadGraph::from_parts(
      {{1, {0, 0}}, {2, {10, 0}}, {3, {20, 0}}, {4, {20, 10}}},
      {Edge{1, 1, 2}, Edge{2, 2, 3}, Edge{3, 3, 4}, Edge{4, 2, 1}});
  ControllerCache cache(LqrWeights::scaled_identity(0.02, 1.0), 0.1);
  cache.warm(g);
  EXPECT_EQ(cache.size(), 3u);  // east (twice), north, west
  const EdgeController& a = cache.get(g.edge(1));
  const EdgeController& b = cache.get(g.edge(2));
  EXPECT_EQ(&a, &b);
  const DiscreteModel m = edge_model(g.edge(3), 0.1);
  const LqrSolution direct = solve_dare(m.A, m.B, LqrWeights::scaled_identity(0.02, 1.0));
  EXPECT_LT((cache.get(g.edge(3)).K - direct.K).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(spectral_radius(cache.get(g.edge(3)).A_K), 1.0);
  EXPECT_THROW(ControllerCache(LqrWeights{}, 0.0), Error);
}
