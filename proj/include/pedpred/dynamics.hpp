#pragma once

#include "pedpred/roadgraph.hpp"
#include "pedpred/types.hpp"

namespace pedpred {

/// Affine discrete-time model x+ = A x + B u + c, linearized around a
/// constant-heading edge reference.
struct DiscreteModel {
  Mat4 A = Mat4::Identity();
  Mat42 B = Mat42::Zero();
  Vec4 c = Vec4::Zero();
  double t_s = 0.1;
};

struct ContinuousJacobians {
  Mat4 A = Mat4::Zero();
  Mat42 B = Mat42::Zero();
};

/// Noise-free unicycle right-hand side [v cos th, v sin th, a, omega].
Vec4 unicycle_rhs(const PedestrianState& state, const ControlInput& input);
Vec4 unicycle_rhs(const Vec4& state, const Vec2& input);

/// Partial derivatives of the unicycle field at the reference.
ContinuousJacobians jacobians(const ReferenceState& ref);

/// Exact zero-order-hold discretization. The unicycle Jacobian is nilpotent
/// of order two (A_c^2 = 0), so the matrix exponential series truncates.
/// Returns a model with c = 0; see affine_term.
DiscreteModel discretize(const ContinuousJacobians& jac, double t_s);

/// c = r_{k+1} - A r_k - B r^u for consecutive samples of the edge reference.
Vec4 affine_term(const Edge& edge, const Mat4& A, const Mat42& B, double t_s);

/// Full per-edge model (A, B, c).
DiscreteModel edge_model(const Edge& edge, double t_s);

/// One step of the nonlinear unicycle under a constant input, integrated with
/// classical RK4 over `dt` using `substeps` substeps.
Vec4 integrate_unicycle(const Vec4& state, const Vec2& input, double dt,
                        int substeps = 4);

}  // namespace pedpred
