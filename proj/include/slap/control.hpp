#pragma once

#include "slap/belief.hpp"
#include "slap/estimation.hpp"
#include "slap/models.hpp"
#include "slap/random.hpp"
#include "slap/world.hpp"

#include <span>
#include <vector>

namespace slap {

/// Weights of the per-step cost: uncertainty, control effort, elapsed time.
struct CostWeights {
  double zeta_p = 10.0;
  double zeta_u = 1.0;
  double zeta_t = 1.0;
};

/// zeta_p tr(P) + zeta_u |u| + zeta_t
double one_step_cost(const GaussianBelief& b, const Control& u, const CostWeights& w);

struct NominalTrajectory {
  std::vector<State> states;      // states.size() == controls.size() + 1 unless empty
  std::vector<Control> controls;

  std::size_t size() const { return controls.size(); }
  bool empty() const { return controls.empty(); }
};

/// Open-loop path between two poses at full speed. Omni moves straight while
/// turning; the unicycle turns in place, drives, then turns to the goal heading.
NominalTrajectory plan_nominal(const State& start, const State& goal, const MotionModel& model, double dt);

struct LqrWeights {
  Mat3 Wx = Mat3::Identity();
  Mat3 Wu = Mat3::Identity();
};

struct TrackingGains {
  std::vector<Mat3> K;  // one per control step
  std::vector<Mat3> S;  // cost-to-go matrices, K.size() + 1 entries
};

/// Finite-horizon LQR along the nominal trajectory.
TrackingGains compute_tracking_gains(const NominalTrajectory& traj, const MotionModel& model, double dt,
                                     const LqrWeights& weights);

/// u_nom(k) + K(k) (mean - x_nom(k)), saturated.
Control tracking_control(const GaussianBelief& b, const NominalTrajectory& traj, const TrackingGains& gains,
                         std::size_t k, const MotionModel& model);

/// First min(l, n) controls of a fresh nominal from the current mean to the target.
std::vector<Control> olfc_step(const GaussianBelief& b, const State& target, int l, const MotionModel& model,
                               double dt);

struct ControllerParams {
  int olfc_l = 5;
  int max_steps_factor = 5;
  int max_steps_floor = 200;
  LqrWeights lqr;
};

/// Slide (tracking LQG along a nominal) followed by the funnel of the target node.
struct LocalController {
  EdgeId edge = kNoEdge;
  NodeId from = kNoNode;
  NodeId target = kNoNode;
  State target_point = State::Zero();
  NominalTrajectory slide;
  TrackingGains gains;
  int olfc_l = 5;
  int max_steps = 200;
};

LocalController make_controller(const State& start, NodeId from, NodeId target, const State& target_point,
                                const MotionModel& model, double dt, const ControllerParams& params);

/// The node's own stabilizer: empty slide, funnel only.
LocalController make_stabilizer(NodeId node, const State& point, const ControllerParams& params);

/// Execution position inside a controller.
struct ControllerCursor {
  std::size_t step = 0;  // slide step about to run
  int elapsed = 0;       // total steps issued
  std::vector<Control> block;
  std::size_t block_pos = 0;

  bool in_funnel(const LocalController& c) const { return step >= c.slide.size(); }
};

Control next_control(ControllerCursor& cursor, const LocalController& c, const GaussianBelief& b,
                     const MotionModel& model, double dt);

struct SimSetup {
  MotionModel model;
  SensorConfig sensor;
  double dt = 0.1;
  CostWeights weights;
  ControllerParams control;
};

/// What a simulated step needs to know about the world.
struct SimContext {
  const SimSetup* setup = nullptr;
  const WorldModel* world = nullptr;   // landmarks
  const ObstacleMap* map = nullptr;    // collisions and occlusion
  std::span<const BeliefRegion> regions;  // indexed by node id
  bool inject_noise = true;
  std::uint64_t* collision_counter = nullptr;
};

struct StepResult {
  bool collided = false;
  std::vector<Innovation> innovations;
  std::size_t measurements = 0;
};

/// Noisy measurements of the visible landmarks at the true pose.
std::vector<Measurement> sample_measurements(const SimContext& ctx, const State& x_true, Rng& rng);

/// Truth propagation, collision check, sensing and filter update for one tick.
StepResult advance(const SimContext& ctx, State& x_true, GaussianBelief& b, const Control& u, Rng& rng);

/// Region hit by the belief; the preferred node is tested first, then ids in order.
NodeId absorbing_node(const GaussianBelief& b, std::span<const BeliefRegion> regions, NodeId preferred);

enum class EdgeOutcomeKind { absorbed, collision, truncated };

struct EdgeOutcome {
  EdgeOutcomeKind kind = EdgeOutcomeKind::truncated;
  NodeId node = kNoNode;
  double cost = 0.0;
  int steps = 0;
  GaussianBelief final_belief;
  State final_true = State::Zero();
  std::vector<State> trace;
};

/// Runs the controller from the cursor until absorption in any region, collision or truncation.
EdgeOutcome execute_edge(const SimContext& ctx, const GaussianBelief& b0, const State& x0,
                         const LocalController& c, ControllerCursor cursor, Rng& rng, bool record_trace = false);

/// Draws a true pose from the belief.
State sample_state(const GaussianBelief& b, Rng& rng);

}  // namespace slap
