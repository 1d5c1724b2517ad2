#include "slap/control.hpp"
#include "slap/estimation.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <random>

using namespace slap;

namespace {

const double kGolden = (1.0 + std::sqrt(5.0)) / 2.0;

LinearizedSystem scalar(double a, double c, double q, double r) {
  LinearizedSystem s;
  s.A = Eigen::MatrixXd::Constant(1, 1, a);
  s.G = Eigen::MatrixXd::Identity(1, 1);
  s.Q = Eigen::MatrixXd::Constant(1, 1, q);
  s.H = Eigen::MatrixXd::Constant(1, 1, c);
  s.M = Eigen::MatrixXd::Identity(1, 1);
  s.R = Eigen::MatrixXd::Constant(1, 1, r);
  return s;
}

double min_eig(const Mat3& m) {
  return Eigen::SelfAdjointEigenSolver<Mat3>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace

TEST(Dare, ScalarGoldenRatio) {
  const DareSolution s = dare_solve(scalar(1, 1, 1, 1));
  EXPECT_NEAR(s.P(0, 0), kGolden, 1e-9);
  EXPECT_LT(s.residual, 1e-8);
}

TEST(Dare, NoProcessNoiseStableDynamics) {
  const DareSolution s = dare_solve(scalar(0.5, 1, 0, 1));
  EXPECT_NEAR(s.P(0, 0), 0.0, 1e-9);
}

TEST(Dare, UnobservableUnstableThrows) {
  EXPECT_THROW(dare_solve(scalar(1.5, 0, 1, 1)), UnobservableNode);
}

TEST(Dare, InconsistentDimensionsThrow) {
  LinearizedSystem s = scalar(1, 1, 1, 1);
  s.H = Eigen::MatrixXd::Ones(1, 2);
  EXPECT_THROW(dare_solve(s), ContractViolation);
}

TEST(KalmanPosterior, GoldenRatioUpdate) {
  const Eigen::MatrixXd post = kalman_posterior(Eigen::MatrixXd::Constant(1, 1, kGolden),
                                                Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1));
  EXPECT_NEAR(post(0, 0), kGolden - 1.0, 1e-12);
}

TEST(KalmanPosterior, SingularInnovationThrows) {
  EXPECT_THROW(kalman_posterior(Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1)),
               DegenerateNoise);
}

TEST(Ekf, PredictWithoutNoiseKeepsCovariance) {
  const MotionModel m(MotionModelKind::omni, MotionNoiseParams{0, 0, 0}, ControlLimits{});
  const Mat3 P = Mat3(Vec3(0.3, 0.2, 0.1).asDiagonal());
  const auto b = GaussianBelief::make(State(1, 2, 0.3), P);
  const GaussianBelief out = ekf_predict(b, Control::Zero(), m, 0.1);
  EXPECT_TRUE(out.covariance.isApprox(P, 1e-15));
  EXPECT_TRUE(out.mean.isApprox(b.mean));
}

TEST(Ekf, ExactMeasurementKeepsMean) {
  const std::vector<Landmark> lms{{0, Vec2(2, 0), kPi}, {1, Vec2(0, 3), -kPi / 2}};
  const auto b = GaussianBelief::make(State(0.1, 0.2, 0.3), 0.1 * Mat3::Identity());
  std::vector<Measurement> z;
  for (const Landmark& lm : lms) z.push_back({*measure(b.mean, lm), Mat2::Identity()});
  const EkfUpdate up = ekf_update(b, z, lms, ObsNoiseParams{});
  EXPECT_LT((up.belief.mean - b.mean).norm(), 1e-12);
  EXPECT_LT(up.belief.covariance.trace(), b.covariance.trace());
  ASSERT_EQ(up.innovations.size(), 2u);
  EXPECT_NEAR(up.innovations[0].range, 0.0, 1e-12);
}

TEST(Ekf, InnovationsReportOffsets) {
  const std::vector<Landmark> lms{{0, Vec2(2, 0), kPi}};
  const auto b = GaussianBelief::make(State::Zero(), 0.1 * Mat3::Identity());
  RangeBearing z = *measure(b.mean, lms[0]);
  z.range += 0.5;
  z.bearing += 0.1;
  const std::vector<Measurement> ms{{z, Mat2::Identity()}};
  const EkfUpdate up = ekf_update(b, ms, lms, ObsNoiseParams{});
  ASSERT_EQ(up.innovations.size(), 1u);
  EXPECT_NEAR(up.innovations[0].range, 0.5, 1e-12);
  EXPECT_NEAR(up.innovations[0].bearing, 0.1, 1e-12);
}

TEST(Ekf, UnknownLandmarkIsContractViolation) {
  const std::vector<Landmark> lms{{0, Vec2(2, 0), kPi}};
  const std::vector<Measurement> ms{{RangeBearing{7, 1.0, 0.0}, Mat2::Identity()}};
  EXPECT_THROW(ekf_update(GaussianBelief::make(State::Zero(), Mat3::Identity()), ms, lms, ObsNoiseParams{}),
               ContractViolation);
}

class StationaryTest : public ::testing::Test {
 protected:
  test::OpenWorld w = test::open_world(10.0, 2.5);
  ObstacleMap map = ObstacleMap::truth(w.world);
};

TEST_F(StationaryTest, TwoLandmarkResidual) {
  const std::vector<Landmark> two{{0, Vec2(6, 5), kPi}, {1, Vec2(5, 7), -kPi / 2}};
  const auto st = stationary_kf(State(5, 5, 0), two, w.setup.sensor, nullptr, w.setup.model, w.setup.dt);
  EXPECT_LT(st.residual, 1e-8);
  EXPECT_GE(min_eig(st.P_s_plus), -1e-9);
  EXPECT_LE(st.P_s_plus.trace(), st.P_s_minus.trace());
}

TEST_F(StationaryTest, ManyLandmarksBeatTwoDistant) {
  const auto rich = stationary_kf(State(5, 5, 0), w.world.landmarks, w.setup.sensor, &map, w.setup.model, w.setup.dt);
  const std::vector<Landmark> two{{0, Vec2(7.8, 7.8), -3 * kPi / 4}, {1, Vec2(7.8, 2.2), 3 * kPi / 4}};
  const auto poor = stationary_kf(State(5, 5, 0), two, w.setup.sensor, nullptr, w.setup.model, w.setup.dt);
  EXPECT_LT(rich.P_s_plus.trace(), poor.P_s_plus.trace());
}

TEST_F(StationaryTest, DoublingSensingNoiseNeverHelps) {
  SensorConfig loud = w.setup.sensor;
  // Scaling every std by sqrt(2) doubles R.
  const double k = std::sqrt(2.0);
  loud.noise.eta_r_d *= k;
  loud.noise.eta_r_phi *= k;
  loud.noise.sigma_b_r *= k;
  loud.noise.eta_th_d *= k;
  loud.noise.eta_th_phi *= k;
  loud.noise.sigma_b_th *= k;
  for (const State& p : {State(5, 5, 0), State(1, 1, 1), State(8.5, 2, -2)}) {
    const auto a = stationary_kf(p, w.world.landmarks, w.setup.sensor, &map, w.setup.model, w.setup.dt);
    const auto b = stationary_kf(p, w.world.landmarks, loud, &map, w.setup.model, w.setup.dt);
    EXPECT_GE(b.P_s_plus.trace(), a.P_s_plus.trace() - 1e-15);
  }
}

TEST_F(StationaryTest, NoVisibleLandmarkIsUnobservable) {
  SensorConfig blind = w.setup.sensor;
  blind.max_range = 0.1;
  EXPECT_THROW(stationary_kf(State(5, 5, 0), w.world.landmarks, blind, &map, w.setup.model, w.setup.dt),
               UnobservableNode);
}

TEST_F(StationaryTest, ClosedLoopFilterConvergesToStationaryCovariance) {
  for (MotionModelKind kind : {MotionModelKind::omni, MotionModelKind::unicycle}) {
    const MotionModel model(kind, MotionNoiseParams{}, ControlLimits{});
    const State node(4.0, 6.0, 0.4);
    const auto st = stationary_kf(node, w.world.landmarks, w.setup.sensor, &map, model, w.setup.dt);
    GaussianBelief b = GaussianBelief::make(node, Mat3::Identity());
    std::vector<Measurement> z;
    for (const ObservedLandmark& o : observe(node, w.world.landmarks, w.setup.sensor, &map)) {
      z.push_back({o.z, o.noise_cov});
    }
    for (int k = 0; k < 500; ++k) {
      b = ekf_update(ekf_predict(b, Control::Zero(), model, w.setup.dt), z, w.world.landmarks, w.setup.sensor.noise)
              .belief;
    }
    EXPECT_LT((b.covariance - st.P_s_plus).norm(), 1e-3) << to_string(kind);
  }
}

TEST(Psd, ThousandPipelineOutputs) {
  test::OpenWorld w = test::open_world(10.0, 2.5);
  const ObstacleMap map = ObstacleMap::truth(w.world);
  SimContext ctx;
  ctx.setup = &w.setup;
  ctx.world = &w.world;
  ctx.map = &map;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> pos(0.5, 9.5), ang(-kPi, kPi), vel(-0.5, 0.5), mag(1e-4, 2.0);
  std::normal_distribution<double> n01;
  int checked = 0;
  while (checked < 1000) {
    Mat3 L;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) L(r, c) = n01(rng) * mag(rng);
    GaussianBelief b = GaussianBelief::make(State(pos(rng), pos(rng), ang(rng)), symmetrize(L * L.transpose()));
    State x = sample_state(b, rng);
    x.head<2>() = x.head<2>().cwiseMax(0.5).cwiseMin(9.5);
    const Control u(vel(rng), vel(rng), vel(rng));
    const GaussianBelief pred = ekf_predict(b, u, w.setup.model, w.setup.dt);
    EXPECT_TRUE(is_symmetric(pred.covariance));
    EXPECT_GE(min_eig(pred.covariance), -1e-9);
    ++checked;
    advance(ctx, x, b, u, rng);
    EXPECT_TRUE(is_symmetric(b.covariance));
    EXPECT_GE(min_eig(b.covariance), -1e-9);
    ++checked;
    if (checked % 50 == 0) {
      const auto st = stationary_kf(State(pos(rng), pos(rng), ang(rng)), w.world.landmarks, w.setup.sensor, &map,
                                    w.setup.model, w.setup.dt);
      EXPECT_GE(min_eig(st.P_s_plus), -1e-9);
      EXPECT_GE(min_eig(st.P_s_minus), -1e-9);
      EXPECT_NO_THROW(GaussianBelief::make(st.node_point, st.P_s_plus));
      ++checked;
    }
  }
}
