#include "pedpred/lqr.hpp"

#include <cmath>
#include <mutex>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "pedpred/error.hpp"

namespace pedpred {

namespace {

constexpr double kSingularRelTol = 1e-14;
constexpr double kDivergenceBound = 1e12;

bool is_symmetric(const Eigen::MatrixXd& M, double tol = 1e-10) {
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, M.cwiseAbs().maxCoeff());
}

bool is_psd(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  return es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff());
}

// Inverse of the small symmetric input-space matrix R + B'PB.
Eigen::MatrixXd inner_inverse(const Eigen::MatrixXd& M) {
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if (M.rows() == 1) {
    if (std::abs(M(0, 0)) < kSingularRelTol * scale) {
      throw Error(ErrorCode::kSingularInnerMatrix, "R + B'PB is singular");
    }
    return Eigen::MatrixXd::Constant(1, 1, 1.0 / M(0, 0));
  }
  if (M.rows() == 2) {
    const double det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
    if (std::abs(det) < kSingularRelTol * scale * scale) {
      throw Error(ErrorCode::kSingularInnerMatrix, "R + B'PB is singular");
    }
    Eigen::MatrixXd inv(2, 2);
    inv << M(1, 1), -M(0, 1), -M(1, 0), M(0, 0);
    return inv / det;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  if (ldlt.info() != Eigen::Success) {
    throw Error(ErrorCode::kSingularInnerMatrix, "R + B'PB is singular");
  }
  return ldlt.solve(Eigen::MatrixXd::Identity(M.rows(), M.cols()));
}

void validate(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
              const LqrWeights& w) {
  const auto n = A.rows();
  const auto m = B.cols();
  if (A.cols() != n || B.rows() != n || w.Q.rows() != n || w.Q.cols() != n ||
      w.R.rows() != m || w.R.cols() != m || w.S.rows() != n || w.S.cols() != m) {
    throw Error(ErrorCode::kBadWeights, "dimension mismatch");
  }
  if (!is_symmetric(w.Q) || !is_psd(w.Q)) {
    throw Error(ErrorCode::kBadWeights, "Q must be symmetric positive semidefinite");
  }
  if (!is_symmetric(w.R) || Eigen::LLT<Eigen::MatrixXd>(w.R).info() != Eigen::Success) {
    throw Error(ErrorCode::kBadWeights, "R must be symmetric positive definite");
  }
  Eigen::MatrixXd H(n + m, n + m);
  H << w.Q, w.S, w.S.transpose(), w.R;
  if (!is_psd(H)) {
    throw Error(ErrorCode::kBadWeights, "[Q S; S' R] must be positive semidefinite");
  }
}

Eigen::MatrixXd gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const LqrWeights& w, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd PB = P * B;
  return inner_inverse(w.R + B.transpose() * PB) *
         (PB.transpose() * A + w.S.transpose());
}

}  // namespace

LqrWeights LqrWeights::scaled_identity(double q, double r) {
  LqrWeights w;
  w.Q = q * Mat4::Identity();
  w.R = r * Mat2::Identity();
  w.S = Mat42::Zero();
  return w;
}

double spectral_radius(const Eigen::MatrixXd& M) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd riccati_step(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             const LqrWeights& w, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd PB = P * B;
  const Eigen::MatrixXd cross = A.transpose() * PB + w.S;
  const Eigen::MatrixXd next =
      w.Q + A.transpose() * P * A -
      cross * inner_inverse(w.R + B.transpose() * PB) * cross.transpose();
  return 0.5 * (next + next.transpose());
}

LqrSolution solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                       const LqrWeights& weights, const DareOptions& options) {
  if (!(options.tol > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "tolerance must be positive");
  }
  validate(A, B, weights);

  LqrSolution sol;
  Eigen::MatrixXd P = weights.Q;
  for (int it = 1; it <= options.max_iter; ++it) {
    Eigen::MatrixXd next = riccati_step(A, B, weights, P);
    const double change = (next - P).cwiseAbs().maxCoeff();
    P = std::move(next);
    if (!P.allFinite() || P.cwiseAbs().maxCoeff() > kDivergenceBound) {
      throw Error(ErrorCode::kNotStabilizable,
                  "Riccati iteration diverged after " + std::to_string(it) + " steps");
    }
    if (change < options.tol) {
      const double residual = (riccati_step(A, B, weights, P) - P).cwiseAbs().maxCoeff();
      if (residual < options.tol) {
        sol.iterations = it;
        sol.residual = residual;
        break;
      }
    }
    if (it == options.max_iter) {
      throw Error(ErrorCode::kNoConvergence,
                  "Riccati iteration did not converge in " +
                      std::to_string(options.max_iter) + " steps (last change " +
                      std::to_string(change) + ")");
    }
  }

  sol.P = P;
  sol.K = gain(A, B, weights, P);
  sol.A_K = A - B * sol.K;
  sol.spectral_radius = spectral_radius(sol.A_K);
  if (!(sol.spectral_radius < 1.0)) {
    throw Error(ErrorCode::kNotStabilizable,
                "closed loop spectral radius " + std::to_string(sol.spectral_radius));
  }
  return sol;
}

ControlInput tracking_input(const Eigen::MatrixXd& K, const PedestrianState& state,
                            const ReferenceState& ref) {
  const Eigen::VectorXd e = state.vec() - ref.state();
  const Eigen::VectorXd u = ref.input() - K * e;
  return ControlInput{u[0], u[1]};
}

ControllerCache::ControllerCache(LqrWeights weights, double t_s, DareOptions options)
    : weights_(std::move(weights)), t_s_(t_s), options_(options) {
  if (!(t_s_ > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "sampling time must be positive");
  }
}

const EdgeController& ControllerCache::get(const Edge& edge) const {
  const Key key{edge.heading, edge.v_ref};
  {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) return *it->second;
  }
  auto ctrl = std::make_unique<EdgeController>();
  ctrl->model = edge_model(edge, t_s_);
  ctrl->lqr = solve_dare(ctrl->model.A, ctrl->model.B, weights_, options_);
  ctrl->A_K = ctrl->lqr.A_K;
  ctrl->K = ctrl->lqr.K;
  std::unique_lock lock(mutex_);
  auto [it, inserted] = entries_.try_emplace(key, std::move(ctrl));
  return *it->second;
}

void ControllerCache::warm(const RoadGraph& graph) const {
  for (const Edge& e : graph.edges()) get(e);
}

std::size_t ControllerCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace pedpred
