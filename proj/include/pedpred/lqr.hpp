#pragma once

#include <map>
#include <memory>
#include <shared_mutex>
#include <tuple>

#include <Eigen/Core>

#include "pedpred/dynamics.hpp"
#include "pedpred/roadgraph.hpp"
#include "pedpred/types.hpp"

namespace pedpred {

/// Stage cost [Q S; S' R] on (state deviation, input deviation).
struct LqrWeights {
  Eigen::MatrixXd Q = Mat4::Identity();
  Eigen::MatrixXd R = Mat2::Identity();
  Eigen::MatrixXd S = Mat42::Zero();

  /// Q = q I4, R = r I2, S = 0.
  static LqrWeights scaled_identity(double q, double r);
};

struct LqrSolution {
  Eigen::MatrixXd P;    // Riccati fixed point
  Eigen::MatrixXd K;    // u = r^u - K (x - r^x)
  Eigen::MatrixXd A_K;  // A - B K
  int iterations = 0;
  double residual = 0.0;
  double spectral_radius = 0.0;
};

struct DareOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};

/// Infinite-horizon discrete LQR by fixed-point iteration of the Riccati
/// recursion starting at P = Q. Works for any state/input dimension; the
/// inner (R + B'PB) inverse is closed form for one or two inputs.
///
/// Throws kBadWeights, kSingularInnerMatrix, kNoConvergence, kNotStabilizable.
LqrSolution solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                       const LqrWeights& weights, const DareOptions& options = {});

/// One Riccati step P -> Q + A'PA - (A'PB + S)(R + B'PB)^-1 (B'PA + S').
Eigen::MatrixXd riccati_step(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             const LqrWeights& weights, const Eigen::MatrixXd& P);

double spectral_radius(const Eigen::MatrixXd& M);

/// u = r^u - K (x - r^x).
ControlInput tracking_input(const Eigen::MatrixXd& K, const PedestrianState& state,
                            const ReferenceState& ref);

/// Discrete model and closed-loop gain for one edge.
struct EdgeController {
  DiscreteModel model;
  LqrSolution lqr;
  Mat4 A_K = Mat4::Identity();
  Mat24 K = Mat24::Zero();
};

/// Controllers keyed by (edge heading, v_ref); weights and t_s are fixed per
/// cache. Lookups are safe from concurrent readers; insertion takes a unique
/// lock.
class ControllerCache {
 public:
  ControllerCache(LqrWeights weights, double t_s, DareOptions options = {});

  const EdgeController& get(const Edge& edge) const;

  /// Solves every edge of the graph up front.
  void warm(const RoadGraph& graph) const;

  const LqrWeights& weights() const { return weights_; }
  double t_s() const { return t_s_; }
  std::size_t size() const;

 private:
  using Key = std::tuple<double, double>;

  LqrWeights weights_;
  double t_s_;
  DareOptions options_;
  mutable std::shared_mutex mutex_;
  mutable std::map<Key, std::unique_ptr<EdgeController>> entries_;
};

}  // namespace pedpred
