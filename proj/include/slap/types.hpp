#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

namespace slap {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Planar pose (x m, y m, heading rad).
using State = Vec3;

/// Control vector. Unicycle uses (v, omega, 0); omnidirectional uses (vx, vy, omega).
using Control = Vec3;

using Tick = std::int64_t;

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

/// Absolute value of the smallest rotation taking a onto b.
inline double angle_distance(double a, double b) { return std::abs(wrap_angle(a - b)); }

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

struct NodeId {
  int value = -1;
  constexpr auto operator<=>(const NodeId&) const = default;
  constexpr bool valid() const { return value >= 0; }
};

struct EdgeId {
  int value = -1;
  constexpr auto operator<=>(const EdgeId&) const = default;
  constexpr bool valid() const { return value >= 0; }
};

inline constexpr NodeId kNoNode{};
inline constexpr EdgeId kNoEdge{};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition or type invariant was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A node cannot host a stationary filter (DARE does not converge).
class UnobservableNode : public Error {
 public:
  using Error::Error;
};

/// Innovation covariance is singular.
class DegenerateNoise : public Error {
 public:
  using Error::Error;
};

class ConstructionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PlanningError : public Error {
 public:
  using Error::Error;
};

}  // namespace slap

template <>
struct std::hash<slap::NodeId> {
  std::size_t operator()(slap::NodeId id) const noexcept { return std::hash<int>{}(id.value); }
};
