#include "slap/control.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>

namespace slap {

namespace {

constexpr double kArrivalTol = 1e-9;

double step_toward(double remaining, double max_step) {
  return std::min(max_step, remaining);
}

void push(NominalTrajectory& t, const MotionModel& model, const Control& u, double dt) {
  t.controls.push_back(u);
  t.states.push_back(model.propagate(t.states.back(), u, Vec3::Zero(), dt));
}

void plan_rotation(NominalTrajectory& t, const MotionModel& model, double heading, double dt) {
  const double w_step = model.limits().omega_max * dt;
  for (int guard = 0; guard < 1000000; ++guard) {
    const double rem = wrap_angle(heading - t.states.back().z());
    if (std::abs(rem) <= kArrivalTol) return;
    const double s = std::copysign(step_toward(std::abs(rem), w_step), rem);
    push(t, model, Control(0.0, s / dt, 0.0), dt);
  }
}

}  // namespace

double one_step_cost(const GaussianBelief& b, const Control& u, const CostWeights& w) {
  return w.zeta_p * b.covariance.trace() + w.zeta_u * u.norm() + w.zeta_t;
}

NominalTrajectory plan_nominal(const State& start, const State& goal, const MotionModel& model, double dt) {
  if (!(dt > 0.0)) throw ContractViolation("dt must be positive");
  NominalTrajectory t;
  t.states.push_back(start);
  const double v_step = model.limits().v_max * dt;
  const double w_step = model.limits().omega_max * dt;

  if (model.kind() == MotionModelKind::omni) {
    for (int guard = 0; guard < 1000000; ++guard) {
      const State& x = t.states.back();
      const Vec2 d = goal.head<2>() - x.head<2>();
      const double dist = d.norm();
      const double rem = wrap_angle(goal.z() - x.z());
      if (dist <= kArrivalTol && std::abs(rem) <= kArrivalTol) break;
      Control u = Control::Zero();
      if (dist > kArrivalTol) u.head<2>() = d / dist * step_toward(dist, v_step) / dt;
      if (std::abs(rem) > kArrivalTol) u.z() = std::copysign(step_toward(std::abs(rem), w_step), rem) / dt;
      push(t, model, u, dt);
    }
  } else {
    const Vec2 d0 = goal.head<2>() - start.head<2>();
    if (d0.norm() > kArrivalTol) {
      plan_rotation(t, model, std::atan2(d0.y(), d0.x()), dt);
      for (int guard = 0; guard < 1000000; ++guard) {
        const State& x = t.states.back();
        const Vec2 d = goal.head<2>() - x.head<2>();
        // Distance left along the current heading.
        const double along = d.dot(Vec2(std::cos(x.z()), std::sin(x.z())));
        if (along <= kArrivalTol) break;
        push(t, model, Control(step_toward(along, v_step) / dt, 0.0, 0.0), dt);
      }
    }
    plan_rotation(t, model, goal.z(), dt);
  }
  if (t.controls.empty()) t.states.clear();
  return t;
}

TrackingGains compute_tracking_gains(const NominalTrajectory& traj, const MotionModel& model, double dt,
                                     const LqrWeights& weights) {
  TrackingGains g;
  const std::size_t n = traj.size();
  g.K.resize(n);
  g.S.resize(n + 1);
  g.S[n] = weights.Wx;
  for (std::size_t k = n; k-- > 0;) {
    const MotionJacobians j = model.jacobians(traj.states[k], traj.controls[k], dt);
    const Mat3& S = g.S[k + 1];
    const Mat3 BtS = j.B.transpose() * S;
    g.K[k] = -(weights.Wu + BtS * j.B).ldlt().solve(BtS * j.A);
    g.S[k] = symmetrize(weights.Wx + j.A.transpose() * S * j.A + j.A.transpose() * S * j.B * g.K[k]);
  }
  return g;
}

Control tracking_control(const GaussianBelief& b, const NominalTrajectory& traj, const TrackingGains& gains,
                         std::size_t k, const MotionModel& model) {
  if (k >= traj.size()) throw ContractViolation("tracking step outside the trajectory");
  Vec3 e = b.mean - traj.states[k];
  e.z() = wrap_angle(e.z());
  return model.saturate(traj.controls[k] + gains.K[k] * e);
}

std::vector<Control> olfc_step(const GaussianBelief& b, const State& target, int l, const MotionModel& model,
                               double dt) {
  const NominalTrajectory t = plan_nominal(b.mean, target, model, dt);
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(l, 0)), t.size());
  return {t.controls.begin(), t.controls.begin() + static_cast<std::ptrdiff_t>(n)};
}

LocalController make_controller(const State& start, NodeId from, NodeId target, const State& target_point,
                                const MotionModel& model, double dt, const ControllerParams& params) {
  LocalController c;
  c.from = from;
  c.target = target;
  c.target_point = target_point;
  c.slide = plan_nominal(start, target_point, model, dt);
  c.gains = compute_tracking_gains(c.slide, model, dt, params.lqr);
  c.olfc_l = params.olfc_l;
  c.max_steps = std::max(params.max_steps_factor * static_cast<int>(c.slide.size()), params.max_steps_floor);
  return c;
}

LocalController make_stabilizer(NodeId node, const State& point, const ControllerParams& params) {
  LocalController c;
  c.from = node;
  c.target = node;
  c.target_point = point;
  c.olfc_l = params.olfc_l;
  c.max_steps = params.max_steps_floor;
  return c;
}

Control next_control(ControllerCursor& cursor, const LocalController& c, const GaussianBelief& b,
                     const MotionModel& model, double dt) {
  ++cursor.elapsed;
  if (cursor.step < c.slide.size()) {
    return tracking_control(b, c.slide, c.gains, cursor.step++, model);
  }
  if (cursor.block_pos >= cursor.block.size()) {
    cursor.block = olfc_step(b, c.target_point, c.olfc_l, model, dt);
    cursor.block_pos = 0;
    if (cursor.block.empty()) return Control::Zero();
  }
  return cursor.block[cursor.block_pos++];
}

State sample_state(const GaussianBelief& b, Rng& rng) {
  std::normal_distribution<double> n01;
  const Vec3 n(n01(rng), n01(rng), n01(rng));
  Eigen::LLT<Mat3> llt(b.covariance);
  Mat3 L;
  if (llt.info() == Eigen::Success) {
    L = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Mat3> es(b.covariance);
    L = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  State x = b.mean + L * n;
  x.z() = wrap_angle(x.z());
  return x;
}

std::vector<Measurement> sample_measurements(const SimContext& ctx, const State& x_true, Rng& rng) {
  std::normal_distribution<double> n01;
  const auto seen = observe(x_true, ctx.world->landmarks, ctx.setup->sensor, ctx.map);
  std::vector<Measurement> z;
  z.reserve(seen.size());
  for (const ObservedLandmark& o : seen) {
    Measurement m{o.z, o.noise_cov};
    const double nr = n01(rng);
    const double nb = n01(rng);
    if (ctx.inject_noise) {
      m.z.range += std::sqrt(o.noise_cov(0, 0)) * nr;
      m.z.bearing = wrap_angle(m.z.bearing + std::sqrt(o.noise_cov(1, 1)) * nb);
    }
    z.push_back(m);
  }
  return z;
}

StepResult advance(const SimContext& ctx, State& x_true, GaussianBelief& b, const Control& u, Rng& rng) {
  const SimSetup& s = *ctx.setup;
  std::normal_distribution<double> n01;
  const Vec3 normals(n01(rng), n01(rng), n01(rng));
  const Vec3 w = ctx.inject_noise ? s.model.scale_noise(u, normals) : Vec3::Zero();
  x_true = s.model.propagate(x_true, u, w, s.dt);

  StepResult r;
  r.collided = ctx.map->collides(x_true, ctx.collision_counter);
  const std::vector<Measurement> z = sample_measurements(ctx, x_true, rng);
  r.measurements = z.size();
  const GaussianBelief prior = ekf_predict(b, u, s.model, s.dt);
  EkfUpdate up = ekf_update(prior, z, ctx.world->landmarks, s.sensor.noise);
  b = std::move(up.belief);
  r.innovations = std::move(up.innovations);
  return r;
}

NodeId absorbing_node(const GaussianBelief& b, std::span<const BeliefRegion> regions, NodeId preferred) {
  if (preferred.valid() && static_cast<std::size_t>(preferred.value) < regions.size() &&
      is_in_region(b, regions[preferred.value])) {
    return preferred;
  }
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const BeliefRegion& r = regions[i];
    const Vec2 d = b.mean.head<2>() - r.center().mean.head<2>();
    if (std::abs(d.x()) > r.radii().position || std::abs(d.y()) > r.radii().position) continue;
    if (is_in_region(b, r)) return NodeId{static_cast<int>(i)};
  }
  return kNoNode;
}

EdgeOutcome execute_edge(const SimContext& ctx, const GaussianBelief& b0, const State& x0,
                         const LocalController& c, ControllerCursor cursor, Rng& rng, bool record_trace) {
  const SimSetup& s = *ctx.setup;
  EdgeOutcome out;
  GaussianBelief b = b0;
  State x = x0;
  if (record_trace) out.trace.push_back(x);
  while (cursor.elapsed < c.max_steps) {
    const Control u = next_control(cursor, c, b, s.model, s.dt);
    out.cost += one_step_cost(b, u, s.weights);
    ++out.steps;
    const StepResult r = advance(ctx, x, b, u, rng);
    if (record_trace) out.trace.push_back(x);
    if (r.collided) {
      out.kind = EdgeOutcomeKind::collision;
      break;
    }
    if (cursor.in_funnel(c)) {
      const NodeId hit = absorbing_node(b, ctx.regions, c.target);
      if (hit.valid()) {
        out.kind = EdgeOutcomeKind::absorbed;
        out.node = hit;
        break;
      }
    }
  }
  out.final_belief = b;
  out.final_true = x;
  return out;
}

}  // namespace slap
