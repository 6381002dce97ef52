#pragma once

#include <Eigen/Core>
#include <numbers>

namespace pedpred {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using Mat42 = Eigen::Matrix<double, 4, 2>;
using Mat24 = Eigen::Matrix<double, 2, 4>;

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle to (-pi, pi].
double normalize_angle(double angle);

/// Unicycle state: position [m], speed [m/s], heading [rad].
struct PedestrianState {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double theta = 0.0;

  Vec4 vec() const { return {x, y, v, theta}; }
  Vec2 position() const { return {x, y}; }
  static PedestrianState from_vec(const Vec4& s) { return {s[0], s[1], s[2], s[3]}; }
};

/// Acceleration [m/s^2] and turn rate [rad/s].
struct ControlInput {
  double a = 0.0;
  double omega = 0.0;

  Vec2 vec() const { return {a, omega}; }
};

}  // namespace pedpred
