#pragma once

#include "slap/types.hpp"

namespace slap {

inline constexpr double kSymmetryTol = 1e-9;
inline constexpr double kPsdTol = 1e-9;

/// Gaussian belief over the planar pose: the planner's unit of state.
struct GaussianBelief {
  State mean = State::Zero();
  Mat3 covariance = Mat3::Zero();
  Tick tick = 0;

  /// Builds a belief, wrapping the heading and checking the covariance invariants.
  static GaussianBelief make(const State& mean, const Mat3& covariance, Tick tick = 0);
};

bool is_symmetric(const Mat3& m, double tol = kSymmetryTol);
bool is_psd(const Mat3& m, double tol = kPsdTol);

/// Symmetric part (P + P^T) / 2.
inline Mat3 symmetrize(const Mat3& m) { return 0.5 * (m + m.transpose()); }

struct MeanDistance {
  double position = 0.0;  // m
  double angle = 0.0;     // rad
};

struct BeliefDistance {
  MeanDistance mean;
  double covariance = 0.0;  // Frobenius norm of the covariance difference
};

BeliefDistance belief_distance(const GaussianBelief& a, const GaussianBelief& b);

struct RegionRadii {
  double position = 0.3;
  double angle = 0.3;
  double covariance = 0.0;
};

/// Acceptance ball around a node belief, tested component-wise.
class BeliefRegion {
 public:
  BeliefRegion(GaussianBelief center, RegionRadii radii);

  const GaussianBelief& center() const { return center_; }
  const RegionRadii& radii() const { return radii_; }

 private:
  GaussianBelief center_;
  RegionRadii radii_;
};

bool is_in_region(const GaussianBelief& b, const BeliefRegion& r);

}  // namespace slap
