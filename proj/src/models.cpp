#include "slap/models.hpp"

#include <algorithm>

namespace slap {

std::string to_string(MotionModelKind kind) {
  return kind == MotionModelKind::unicycle ? "unicycle" : "omni";
}

MotionModelKind motion_model_kind_from_string(const std::string& s) {
  if (s == "unicycle") return MotionModelKind::unicycle;
  if (s == "omni") return MotionModelKind::omni;
  throw ConfigError("unknown motion model '" + s + "'");
}

State propagate_unicycle(const State& x, const UnicycleControl& u, const Vec2& w, double dt) {
  const double step = u.v * dt + w.x() * std::sqrt(dt);
  const double th = x.z();
  return State(x.x() + step * std::cos(th), x.y() + step * std::sin(th),
               wrap_angle(th + u.omega * dt + w.y() * std::sqrt(dt)));
}

State propagate_omni(const State& x, const Vec3& u, const Vec3& w, double dt) {
  State next = x + u * dt + w * std::sqrt(dt);
  next.z() = wrap_angle(next.z());
  return next;
}

Mat2 process_noise_cov(const UnicycleControl& u, const MotionNoiseParams& p) {
  const double sv = p.eta * std::abs(u.v) + p.sigma_b_v;
  const double sw = p.eta * std::abs(u.omega) + p.sigma_b_omega;
  return Vec2(sv * sv, sw * sw).asDiagonal();
}

Mat3 omni_process_noise_cov(const Vec3& u, const MotionNoiseParams& p) {
  const double sx = p.eta * std::abs(u.x()) + p.sigma_b_v;
  const double sy = p.eta * std::abs(u.y()) + p.sigma_b_v;
  const double sw = p.eta * std::abs(u.z()) + p.sigma_b_omega;
  return Vec3(sx * sx, sy * sy, sw * sw).asDiagonal();
}

MotionJacobians unicycle_jacobians(const State& x, const UnicycleControl& u, const Vec2& w, double dt) {
  const double c = std::cos(x.z());
  const double s = std::sin(x.z());
  const double step = u.v * dt + w.x() * std::sqrt(dt);
  const double sq = std::sqrt(dt);
  MotionJacobians j;
  j.A(0, 2) = -step * s;
  j.A(1, 2) = step * c;
  j.B(0, 0) = dt * c;
  j.B(1, 0) = dt * s;
  j.B(2, 1) = dt;
  j.G(0, 0) = sq * c;
  j.G(1, 0) = sq * s;
  j.G(2, 1) = sq;
  return j;
}

MotionJacobians omni_jacobians(double dt) {
  MotionJacobians j;
  j.B = dt * Mat3::Identity();
  j.G = std::sqrt(dt) * Mat3::Identity();
  return j;
}

State MotionModel::propagate(const State& x, const Control& u, const Vec3& w, double dt) const {
  if (kind_ == MotionModelKind::unicycle) {
    return propagate_unicycle(x, {u.x(), u.y()}, w.head<2>(), dt);
  }
  return propagate_omni(x, u, w, dt);
}

MotionJacobians MotionModel::jacobians(const State& x, const Control& u, double dt, const Vec3& w) const {
  if (kind_ == MotionModelKind::unicycle) return unicycle_jacobians(x, {u.x(), u.y()}, w.head<2>(), dt);
  return omni_jacobians(dt);
}

Mat3 MotionModel::noise_cov(const Control& u) const {
  if (kind_ == MotionModelKind::unicycle) {
    Mat3 q = Mat3::Zero();
    q.topLeftCorner<2, 2>() = process_noise_cov({u.x(), u.y()}, noise_);
    return q;
  }
  return omni_process_noise_cov(u, noise_);
}

Control MotionModel::saturate(const Control& u) const {
  Control out = u;
  if (kind_ == MotionModelKind::unicycle) {
    out.x() = std::clamp(u.x(), -limits_.v_max, limits_.v_max);
    out.y() = std::clamp(u.y(), -limits_.omega_max, limits_.omega_max);
    out.z() = 0.0;
    return out;
  }
  const double speed = u.head<2>().norm();
  if (speed > limits_.v_max) out.head<2>() *= limits_.v_max / speed;
  out.z() = std::clamp(u.z(), -limits_.omega_max, limits_.omega_max);
  return out;
}

Vec3 MotionModel::scale_noise(const Control& u, const Vec3& standard_normals) const {
  // Covariances are diagonal, so the square root is element-wise.
  return noise_cov(u).diagonal().cwiseSqrt().cwiseProduct(standard_normals);
}

double incident_angle(const Vec2& robot_position, const Landmark& landmark) {
  const Vec2 ray = robot_position - landmark.position;
  const double phi = wrap_angle(std::atan2(ray.y(), ray.x()) - landmark.wall_normal);
  return std::clamp(phi, -kPi / 2.0, kPi / 2.0);
}

Mat2 observation_noise_cov(double range, double phi, const ObsNoiseParams& p) {
  const double sr = p.eta_r_d * range + p.eta_r_phi * std::abs(phi) + p.sigma_b_r;
  const double st = p.eta_th_d * range + p.eta_th_phi * std::abs(phi) + p.sigma_b_th;
  return Vec2(sr * sr, st * st).asDiagonal();
}

std::optional<RangeBearing> measure(const State& x, const Landmark& landmark) {
  const Vec2 d = landmark.position - x.head<2>();
  const double r = d.norm();
  if (r < 1e-9) return std::nullopt;
  return RangeBearing{landmark.id, r, wrap_angle(std::atan2(d.y(), d.x()) - x.z())};
}

std::vector<ObservedLandmark> observe(const State& x, std::span<const Landmark> landmarks,
                                      const SensorConfig& sensor, const LineOfSight* los) {
  std::vector<ObservedLandmark> out;
  out.reserve(landmarks.size());
  for (const Landmark& lm : landmarks) {
    const auto z = measure(x, lm);
    if (!z) continue;
    if (z->range > sensor.max_range || z->range < sensor.min_range) continue;
    if (std::abs(z->bearing) > sensor.fov_half_angle) continue;
    if (los != nullptr && los->blocked(x.head<2>(), lm.position)) continue;
    const double phi = incident_angle(x.head<2>(), lm);
    out.push_back({*z, observation_noise_cov(z->range, phi, sensor.noise), phi});
  }
  return out;
}

Eigen::Matrix<double, 2, 3> obs_jacobian(const State& x, const Landmark& landmark) {
  const Vec2 d = landmark.position - x.head<2>();
  const double r2 = d.squaredNorm();
  const double r = std::sqrt(r2);
  Eigen::Matrix<double, 2, 3> h;
  h << -d.x() / r, -d.y() / r, 0.0,
       d.y() / r2, -d.x() / r2, -1.0;
  return h;
}

}  // namespace slap
