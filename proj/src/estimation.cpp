#include "slap/estimation.hpp"

#include <Eigen/Cholesky>

namespace slap {

namespace {

const Landmark* find_landmark(std::span<const Landmark> landmarks, int id) {
  if (id >= 0 && static_cast<std::size_t>(id) < landmarks.size() && landmarks[id].id == id) {
    return &landmarks[id];
  }
  for (const Landmark& lm : landmarks) {
    if (lm.id == id) return &lm;
  }
  return nullptr;
}

struct Row {
  Eigen::Matrix<double, 2, 3> H;
  Vec2 nu;
  Mat2 R;
};

}  // namespace

GaussianBelief ekf_predict(const GaussianBelief& b, const Control& u, const MotionModel& model, double dt) {
  const MotionJacobians j = model.jacobians(b.mean, u, dt);
  GaussianBelief out;
  out.mean = model.propagate(b.mean, u, Vec3::Zero(), dt);
  out.covariance = symmetrize(j.A * b.covariance * j.A.transpose() + j.G * model.noise_cov(u) * j.G.transpose());
  out.tick = b.tick + 1;
  return out;
}

EkfUpdate ekf_update(const GaussianBelief& b, std::span<const Measurement> z,
                     std::span<const Landmark> landmarks, const ObsNoiseParams& noise) {
  EkfUpdate result;
  result.belief = b;
  if (z.empty()) return result;

  std::vector<Row> rows;
  rows.reserve(z.size());
  result.innovations.reserve(z.size());
  bool r_invertible = true;
  for (const Measurement& m : z) {
    const Landmark* lm = find_landmark(landmarks, m.z.landmark_id);
    if (lm == nullptr) throw ContractViolation("measurement of unknown landmark " + std::to_string(m.z.landmark_id));
    const auto pred = measure(b.mean, *lm);
    if (!pred) continue;
    Row row;
    row.H = obs_jacobian(b.mean, *lm);
    row.nu = Vec2(m.z.range - pred->range, wrap_angle(m.z.bearing - pred->bearing));
    row.R = observation_noise_cov(pred->range, incident_angle(b.mean.head<2>(), *lm), noise);
    r_invertible = r_invertible && row.R(0, 0) > 0.0 && row.R(1, 1) > 0.0;
    result.innovations.push_back({lm->id, row.nu.x(), row.nu.y()});
    rows.push_back(row);
  }
  if (rows.empty()) return result;

  const Mat3& P = b.covariance;
  Eigen::LLT<Mat3> p_llt(P);
  if (r_invertible && p_llt.info() == Eigen::Success) {
    // Information form; algebraically identical to the stacked update but stays 3x3.
    Mat3 info = p_llt.solve(Mat3::Identity());
    Vec3 grad = Vec3::Zero();
    for (const Row& r : rows) {
      const Mat2 r_inv = r.R.inverse();
      info.noalias() += r.H.transpose() * r_inv * r.H;
      grad.noalias() += r.H.transpose() * r_inv * r.nu;
    }
    Eigen::LLT<Mat3> post(info);
    if (post.info() != Eigen::Success) throw DegenerateNoise("posterior information matrix is singular");
    const Mat3 P_post = symmetrize(post.solve(Mat3::Identity()));
    result.belief.mean = b.mean + P_post * grad;
    result.belief.covariance = P_post;
  } else {
    const int m = static_cast<int>(rows.size());
    Eigen::MatrixXd H(2 * m, 3);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    Eigen::VectorXd nu(2 * m);
    for (int i = 0; i < m; ++i) {
      H.middleRows<2>(2 * i) = rows[i].H;
      R.block<2, 2>(2 * i, 2 * i) = rows[i].R;
      nu.segment<2>(2 * i) = rows[i].nu;
    }
    const Eigen::MatrixXd S = H * P * H.transpose() + R;
    Eigen::LLT<Eigen::MatrixXd> s_llt(S);
    if (s_llt.info() != Eigen::Success) throw DegenerateNoise("innovation covariance is singular");
    const Eigen::MatrixXd K = s_llt.solve(H * P).transpose();
    result.belief.mean = b.mean + K * nu;
    result.belief.covariance = symmetrize(P - K * H * P);
  }
  result.belief.mean.z() = wrap_angle(result.belief.mean.z());
  return result;
}

Eigen::MatrixXd kalman_posterior(const Eigen::MatrixXd& P, const Eigen::MatrixXd& H, const Eigen::MatrixXd& R) {
  const Eigen::MatrixXd S = H * P * H.transpose() + R;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array().abs() < 1e-300).any()) {
    throw DegenerateNoise("innovation covariance is singular");
  }
  const Eigen::MatrixXd post = P - P * H.transpose() * ldlt.solve(H * P);
  return 0.5 * (post + post.transpose());
}

Eigen::MatrixXd riccati_map(const LinearizedSystem& sys, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd R = sys.M * sys.R * sys.M.transpose();
  const Eigen::MatrixXd next =
      sys.A * kalman_posterior(P, sys.H, R) * sys.A.transpose() + sys.G * sys.Q * sys.G.transpose();
  return 0.5 * (next + next.transpose());
}

DareSolution dare_solve(const LinearizedSystem& sys, const DareOptions& options) {
  const Eigen::Index n = sys.A.rows();
  if (sys.A.cols() != n || sys.G.rows() != n || sys.H.cols() != n || sys.Q.rows() != sys.G.cols() ||
      sys.M.rows() != sys.H.rows() || sys.R.rows() != sys.M.cols()) {
    throw ContractViolation("inconsistent linearized system dimensions");
  }
  DareSolution sol;
  Eigen::MatrixXd P = sys.G * sys.Q * sys.G.transpose();
  for (int it = 1; it <= options.max_iterations; ++it) {
    Eigen::MatrixXd next = riccati_map(sys, P);
    if (!next.allFinite()) throw UnobservableNode("Riccati iteration diverged");
    const double change = (next - P).norm();
    P = std::move(next);
    sol.iterations = it;
    if (change <= options.tol * std::max(1.0, P.norm())) break;
  }
  sol.residual = (riccati_map(sys, P) - P).norm();
  if (!(sol.residual < options.residual_tol)) {
    throw UnobservableNode("Riccati iteration did not converge (residual " + std::to_string(sol.residual) + ")");
  }
  sol.P = P;
  return sol;
}

LinearizedSystem linearize_at(const State& point, const MotionModel& model, std::span<const Landmark> visible,
                              const ObsNoiseParams& noise, double dt) {
  const MotionJacobians j = model.jacobians(point, Control::Zero(), dt);
  LinearizedSystem sys;
  const int m = static_cast<int>(visible.size());
  if (model.kind() == MotionModelKind::unicycle) {
    sys.A = j.A;
    sys.G = j.G.leftCols<2>();
    sys.Q = model.noise_cov(Control::Zero()).topLeftCorner<2, 2>();
  } else {
    sys.A = j.A;
    sys.G = j.G;
    sys.Q = model.noise_cov(Control::Zero());
  }
  sys.H.resize(2 * m, 3);
  sys.R = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  for (int i = 0; i < m; ++i) {
    sys.H.middleRows<2>(2 * i) = obs_jacobian(point, visible[i]);
    const double r = (visible[i].position - point.head<2>()).norm();
    sys.R.block<2, 2>(2 * i, 2 * i) = observation_noise_cov(r, incident_angle(point.head<2>(), visible[i]), noise);
  }
  sys.M = Eigen::MatrixXd::Identity(2 * m, 2 * m);
  return sys;
}

StationaryBeliefParams stationary_kf(const State& node_point, std::span<const Landmark> landmarks,
                                     const SensorConfig& sensor, const LineOfSight* los,
                                     const MotionModel& model, double dt, const DareOptions& options) {
  std::vector<Landmark> visible;
  for (const ObservedLandmark& o : observe(node_point, landmarks, sensor, los)) {
    for (const Landmark& lm : landmarks) {
      if (lm.id == o.z.landmark_id) visible.push_back(lm);
    }
  }
  if (visible.empty()) throw UnobservableNode("no landmark visible from node");
  const LinearizedSystem sys = linearize_at(node_point, model, visible, sensor.noise, dt);
  const DareSolution sol = dare_solve(sys, options);
  StationaryBeliefParams out;
  out.node_point = node_point;
  out.node_point.z() = wrap_angle(node_point.z());
  out.P_s_minus = symmetrize(sol.P);
  out.P_s_plus = symmetrize(kalman_posterior(sol.P, sys.H, sys.M * sys.R * sys.M.transpose()));
  out.residual = sol.residual;
  return out;
}

}  // namespace slap
