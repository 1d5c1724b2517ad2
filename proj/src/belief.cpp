#include "slap/belief.hpp"

#include <Eigen/Eigenvalues>

namespace slap {

GaussianBelief GaussianBelief::make(const State& mean, const Mat3& covariance, Tick tick) {
  if (!mean.allFinite() || !covariance.allFinite()) {
    throw ContractViolation("belief has non-finite entries");
  }
  if (!is_symmetric(covariance)) throw ContractViolation("belief covariance is not symmetric");
  if (!is_psd(covariance)) throw ContractViolation("belief covariance is not positive semidefinite");
  GaussianBelief b;
  b.mean = mean;
  b.mean.z() = wrap_angle(mean.z());
  b.covariance = covariance;
  b.tick = tick;
  return b;
}

bool is_symmetric(const Mat3& m, double tol) {
  return ((m - m.transpose()).cwiseAbs().array() <= tol).all();
}

bool is_psd(const Mat3& m, double tol) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol;
}

BeliefDistance belief_distance(const GaussianBelief& a, const GaussianBelief& b) {
  BeliefDistance d;
  d.mean.position = (a.mean.head<2>() - b.mean.head<2>()).norm();
  d.mean.angle = angle_distance(a.mean.z(), b.mean.z());
  d.covariance = (a.covariance - b.covariance).norm();
  return d;
}

BeliefRegion::BeliefRegion(GaussianBelief center, RegionRadii radii)
    : center_(std::move(center)), radii_(radii) {
  if (!(radii_.position > 0.0 && radii_.angle > 0.0 && radii_.covariance > 0.0)) {
    throw ContractViolation("belief region radii must be strictly positive");
  }
}

bool is_in_region(const GaussianBelief& b, const BeliefRegion& r) {
  const BeliefDistance d = belief_distance(b, r.center());
  return d.mean.position <= r.radii().position && d.mean.angle <= r.radii().angle &&
         d.covariance <= r.radii().covariance;
}

}  // namespace slap
