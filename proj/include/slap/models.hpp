#pragma once

#include "slap/types.hpp"

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slap {

// ---------------------------------------------------------------------------
// Motion
// ---------------------------------------------------------------------------

enum class MotionModelKind { unicycle, omni };

std::string to_string(MotionModelKind kind);
MotionModelKind motion_model_kind_from_string(const std::string& s);

struct UnicycleControl {
  double v = 0.0;      // m/s
  double omega = 0.0;  // rad/s

  Control as_control() const { return Control(v, omega, 0.0); }
};

/// Process noise grows linearly with the commanded signal on top of a fixed floor.
struct MotionNoiseParams {
  double eta = 0.03;
  double sigma_b_v = 0.01;      // m/s
  double sigma_b_omega = 0.001; // rad
};

struct ControlLimits {
  double v_max = 0.3;      // m/s
  double omega_max = 1.0;  // rad/s
};

/// Unicycle step: position advances along the heading by (V dt + n_v sqrt(dt)).
State propagate_unicycle(const State& x, const UnicycleControl& u, const Vec2& w, double dt);

/// Omnidirectional step: x + u dt + w sqrt(dt).
State propagate_omni(const State& x, const Vec3& u, const Vec3& w, double dt);

/// diag((eta |V| + sigma_b_v)^2, (eta |omega| + sigma_b_omega)^2)
Mat2 process_noise_cov(const UnicycleControl& u, const MotionNoiseParams& p);

/// Per-axis analogue for the omnidirectional model; translation axes use sigma_b_v.
Mat3 omni_process_noise_cov(const Vec3& u, const MotionNoiseParams& p);

/// Jacobians of the motion model. B and G are padded to three columns; the
/// unicycle's third control/noise column is zero.
struct MotionJacobians {
  Mat3 A = Mat3::Identity();
  Mat3 B = Mat3::Zero();
  Mat3 G = Mat3::Zero();
};

MotionJacobians unicycle_jacobians(const State& x, const UnicycleControl& u, const Vec2& w, double dt);
MotionJacobians omni_jacobians(double dt);

class MotionModel {
 public:
  MotionModel() = default;
  MotionModel(MotionModelKind kind, MotionNoiseParams noise, ControlLimits limits)
      : kind_(kind), noise_(noise), limits_(limits) {}

  MotionModelKind kind() const { return kind_; }
  const MotionNoiseParams& noise() const { return noise_; }
  const ControlLimits& limits() const { return limits_; }

  State propagate(const State& x, const Control& u, const Vec3& w, double dt) const;
  MotionJacobians jacobians(const State& x, const Control& u, double dt,
                            const Vec3& w = Vec3::Zero()) const;
  /// Noise covariance in the (padded) three-dimensional noise space.
  Mat3 noise_cov(const Control& u) const;
  Control saturate(const Control& u) const;
  /// Noise sample scaled by the covariance at u, given standard normals.
  Vec3 scale_noise(const Control& u, const Vec3& standard_normals) const;

 private:
  MotionModelKind kind_ = MotionModelKind::omni;
  MotionNoiseParams noise_;
  ControlLimits limits_;
};

// ---------------------------------------------------------------------------
// Sensing
// ---------------------------------------------------------------------------

struct Landmark {
  int id = 0;
  Vec2 position = Vec2::Zero();
  double wall_normal = 0.0;  // rad, outward normal of the mounting wall
};

struct ObsNoiseParams {
  double eta_r_d = 0.1;
  double eta_r_phi = 0.01;
  double sigma_b_r = 0.05;  // m
  double eta_th_d = 0.001;
  double eta_th_phi = 0.01;
  double sigma_b_th = deg_to_rad(2.0);  // rad
};

struct RangeBearing {
  int landmark_id = 0;
  double range = 0.0;
  double bearing = 0.0;
};

struct SensorConfig {
  double fov_half_angle = kPi;  // rad, cone around the heading
  double max_range = std::numeric_limits<double>::infinity();
  double min_range = 0.5;  // m, tags closer than this are not read
  ObsNoiseParams noise;
};

/// Occlusion query supplied by the world module.
class LineOfSight {
 public:
  virtual ~LineOfSight() = default;
  virtual bool blocked(const Vec2& from, const Vec2& to) const = 0;
};

struct ObservedLandmark {
  RangeBearing z;
  Mat2 noise_cov = Mat2::Zero();
  double incident_angle = 0.0;
};

/// Angle between the landmark-to-robot ray and the wall normal, clamped to [-pi/2, pi/2].
double incident_angle(const Vec2& robot_position, const Landmark& landmark);

Mat2 observation_noise_cov(double range, double incident_angle, const ObsNoiseParams& p);

/// Noiseless range and bearing; nullopt when the pose coincides with the landmark.
std::optional<RangeBearing> measure(const State& x, const Landmark& landmark);

/// Noiseless readings of every landmark inside the field of view and not occluded.
std::vector<ObservedLandmark> observe(const State& x, std::span<const Landmark> landmarks,
                                      const SensorConfig& sensor, const LineOfSight* los);

/// d(range, bearing)/d(x, y, theta).
Eigen::Matrix<double, 2, 3> obs_jacobian(const State& x, const Landmark& landmark);

}  // namespace slap
