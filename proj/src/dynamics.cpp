#include "pedpred/dynamics.hpp"

#include <cmath>

#include "pedpred/error.hpp"

namespace pedpred {

Vec4 unicycle_rhs(const Vec4& s, const Vec2& u) {
  return {s[2] * std::cos(s[3]), s[2] * std::sin(s[3]), u[0], u[1]};
}

Vec4 unicycle_rhs(const PedestrianState& state, const ControlInput& input) {
  return unicycle_rhs(state.vec(), input.vec());
}

ContinuousJacobians jacobians(const ReferenceState& ref) {
  ContinuousJacobians j;
  const double c = std::cos(ref.theta);
  const double s = std::sin(ref.theta);
  j.A(0, 2) = c;
  j.A(0, 3) = -ref.v * s;
  j.A(1, 2) = s;
  j.A(1, 3) = ref.v * c;
  j.B(2, 0) = 1.0;
  j.B(3, 1) = 1.0;
  return j;
}

DiscreteModel discretize(const ContinuousJacobians& jac, double t_s) {
  if (!(t_s > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "sampling time must be positive");
  }
  DiscreteModel m;
  m.t_s = t_s;
  m.A = Mat4::Identity() + t_s * jac.A;
  m.B = t_s * jac.B + (0.5 * t_s * t_s) * (jac.A * jac.B);
  return m;
}

Vec4 affine_term(const Edge& edge, const Mat4& A, const Mat42& B, double t_s) {
  const ReferenceState r0 = reference_on_line(edge, 0.0);
  const ReferenceState r1 = reference_on_line(edge, edge.v_ref * t_s);
  return r1.state() - A * r0.state() - B * r0.input();
}

DiscreteModel edge_model(const Edge& edge, double t_s) {
  DiscreteModel m = discretize(jacobians(reference_on_line(edge, 0.0)), t_s);
  m.c = affine_term(edge, m.A, m.B, t_s);
  return m;
}

Vec4 integrate_unicycle(const Vec4& state, const Vec2& input, double dt,
                        int substeps) {
  const double h = dt / substeps;
  Vec4 x = state;
  for (int i = 0; i < substeps; ++i) {
    const Vec4 k1 = unicycle_rhs(x, input);
    const Vec4 k2 = unicycle_rhs(x + 0.5 * h * k1, input);
    const Vec4 k3 = unicycle_rhs(x + 0.5 * h * k2, input);
    const Vec4 k4 = unicycle_rhs(x + h * k3, input);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

}  // namespace pedpred
