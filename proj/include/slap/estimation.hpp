#pragma once

#include "slap/belief.hpp"
#include "slap/models.hpp"

#include <span>
#include <vector>

namespace slap {

/// Linear(ized) system x' = A x + G w, z = H x + M v with w ~ N(0, Q), v ~ N(0, R).
struct LinearizedSystem {
  Eigen::MatrixXd A, G, Q;
  Eigen::MatrixXd H, M, R;
};

struct Measurement {
  RangeBearing z;
  Mat2 noise_cov = Mat2::Zero();  // used only to draw the sample; the filter recomputes R
};

struct Innovation {
  int landmark_id = 0;
  double range = 0.0;    // m
  double bearing = 0.0;  // rad, wrapped
};

struct EkfUpdate {
  GaussianBelief belief;
  std::vector<Innovation> innovations;
};

GaussianBelief ekf_predict(const GaussianBelief& b, const Control& u, const MotionModel& model, double dt);

/// Joint update with every measurement. Landmarks are looked up by id in `landmarks`.
EkfUpdate ekf_update(const GaussianBelief& b, std::span<const Measurement> z,
                     std::span<const Landmark> landmarks, const ObsNoiseParams& noise);

/// Posterior covariance P - P H^T (H P H^T + R)^-1 H P, symmetrized.
Eigen::MatrixXd kalman_posterior(const Eigen::MatrixXd& P, const Eigen::MatrixXd& H, const Eigen::MatrixXd& R);

/// One application of the prior Riccati map.
Eigen::MatrixXd riccati_map(const LinearizedSystem& sys, const Eigen::MatrixXd& P);

struct DareOptions {
  double tol = 1e-12;
  int max_iterations = 10000;
  double residual_tol = 1e-8;
};

struct DareSolution {
  Eigen::MatrixXd P;  // prior covariance
  double residual = 0.0;
  int iterations = 0;
};

/// Fixed-point iteration of the filter Riccati equation. Throws UnobservableNode
/// when the iteration does not settle within the residual tolerance.
DareSolution dare_solve(const LinearizedSystem& sys, const DareOptions& options = {});

struct StationaryBeliefParams {
  State node_point = State::Zero();
  Mat3 P_s_minus = Mat3::Zero();
  Mat3 P_s_plus = Mat3::Zero();
  double residual = 0.0;
};

/// Linearizes the models at the node with zero control and solves for the stationary covariance.
LinearizedSystem linearize_at(const State& point, const MotionModel& model, std::span<const Landmark> visible,
                              const ObsNoiseParams& noise, double dt);

StationaryBeliefParams stationary_kf(const State& node_point, std::span<const Landmark> landmarks,
                                     const SensorConfig& sensor, const LineOfSight* los,
                                     const MotionModel& model, double dt, const DareOptions& options = {});

}  // namespace slap
