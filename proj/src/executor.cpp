#include "slap/executor.hpp"

#include <algorithm>
#include <limits>

namespace slap {

using nlohmann::json;

std::string to_string(PolicyKind k) { return k == PolicyKind::firm ? "firm" : "rollout"; }

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "firm") return PolicyKind::firm;
  if (s == "rollout") return PolicyKind::rollout;
  throw ConfigError("unknown policy '" + s + "'");
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::set_goal: return "set_goal";
    case EventKind::toggle_door: return "toggle_door";
    case EventKind::kidnap: return "kidnap";
    case EventKind::spawn_transient: return "spawn_transient";
    case EventKind::remove_transient: return "remove_transient";
  }
  return "unknown";
}

EventKind event_kind_from_string(const std::string& s) {
  if (s == "set_goal") return EventKind::set_goal;
  if (s == "toggle_door") return EventKind::toggle_door;
  if (s == "kidnap") return EventKind::kidnap;
  if (s == "spawn_transient") return EventKind::spawn_transient;
  if (s == "remove_transient") return EventKind::remove_transient;
  throw ConfigError("unknown event kind '" + s + "'");
}

std::string to_string(RunOutcome o) {
  switch (o) {
    case RunOutcome::running: return "running";
    case RunOutcome::success: return "success";
    case RunOutcome::collision: return "collision";
    case RunOutcome::timeout: return "timeout";
  }
  return "unknown";
}

InnovationMonitor::InnovationMonitor(double beta, double r_max, double theta_max)
    : beta_(beta), r_max_(r_max), theta_max_(theta_max) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ContractViolation("smoothing coefficient must lie in (0, 1]");
  if (!(r_max > 0.0 && theta_max > 0.0)) throw ContractViolation("innovation thresholds must be positive");
}

bool InnovationMonitor::update(std::span<const Innovation> innovations) {
  if (innovations.empty()) return lost_;
  double r = 0.0;
  double th = 0.0;
  for (const Innovation& i : innovations) {
    r = std::max(r, std::abs(i.range));
    th = std::max(th, std::abs(wrap_angle(i.bearing)));
  }
  r_bar_ = (1.0 - beta_) * r_bar_ + beta_ * r;
  theta_bar_ = (1.0 - beta_) * theta_bar_ + beta_ * th;
  lost_ = !(r_bar_ < r_max_ && theta_bar_ < theta_max_);
  return lost_;
}

void InnovationMonitor::reset() {
  r_bar_ = 0.0;
  theta_bar_ = 0.0;
  lost_ = false;
}

bool detect_kidnap(InnovationMonitor& monitor, std::span<const Innovation> innovations) {
  return monitor.update(innovations);
}

SlapExecutor::SlapExecutor(FirmGraph graph, Scenario scenario, ExecutorConfig config)
    : graph_(std::move(graph)), scenario_(std::move(scenario)), config_(config),
      monitor_(config.ema_beta, config.r_max, config.theta_max) {
  if (scenario_.goals.empty()) throw ConfigError("scenario has no goals");
  std::stable_sort(scenario_.events.begin(), scenario_.events.end(),
                   [](const RunEvent& a, const RunEvent& b) { return a.tick < b.tick; });
  truth_ = graph_.world;
  belief_map_ = BeliefMap::initial(truth_);
  rebuild_maps();
  record_.seed = config_.seed;
  record_.policy = config_.policy;

  x_true_ = scenario_.start;
  x_true_.z() = wrap_angle(x_true_.z());
  NodeId start_node = kNoNode;
  try {
    const InsertResult r = insert_node_online(graph_, x_true_, graph_.config.connect_radius, graph_.config.n_mc_online,
                                              believed_map_, derive_seed(config_.seed, {key(Stream::insertion), 0}));
    start_node = r.node;
    if (r.inserted) ++record_.nodes_inserted;
  } catch (const ConstructionError& e) {
    log("start_not_a_node", {{"reason", e.what()}});
  }
  if (start_node.valid() && (graph_.node(start_node).point.head<2>() - x_true_.head<2>()).norm() < 1e-6) {
    belief_ = graph_.node(start_node).belief();
  } else {
    belief_ = GaussianBelief::make(x_true_, Mat3::Identity() * 0.01);
    start_node = kNoNode;
  }
  belief_.tick = 0;

  goals_.assign(scenario_.goals.begin(), scenario_.goals.end());
  if (!set_goal(goals_.front())) throw ConfigError("first goal cannot be added to the graph");
  decide(start_node, "start");
}

void SlapExecutor::enqueue(RunEvent event) {
  std::lock_guard<std::mutex> lock(queue_mutex_);
  queue_.push_back(std::move(event));
}

std::optional<std::string> SlapExecutor::validate(const RunEvent& e) const {
  switch (e.kind) {
    case EventKind::set_goal:
    case EventKind::kidnap: {
      if (!e.pose.allFinite()) return "pose is not finite";
      if (!truth_.bounds.contains(e.pose.head<2>())) return "pose outside the world bounds";
      const ObstacleMap& m = e.kind == EventKind::set_goal ? believed_map_ : truth_map_;
      if (m.collides(e.pose)) return "pose is in collision";
      return std::nullopt;
    }
    case EventKind::toggle_door:
      if (truth_.find_door(e.id) == nullptr) return "unknown door " + std::to_string(e.id);
      return std::nullopt;
    case EventKind::spawn_transient:
      if (!e.polygon) return "transient obstacle without polygon";
      for (const TransientObstacle& t : truth_.transients) {
        if (t.id == e.id) return "transient id already present";
      }
      return std::nullopt;
    case EventKind::remove_transient:
      for (const TransientObstacle& t : truth_.transients) {
        if (t.id == e.id) return std::nullopt;
      }
      return "unknown transient " + std::to_string(e.id);
  }
  return "unknown event";
}

void SlapExecutor::log(const std::string& kind, json detail) {
  json j = {{"t", tick_}, {"kind", kind}};
  if (!detail.is_null()) j["detail"] = std::move(detail);
  record_.events.push_back(std::move(j));
}

void SlapExecutor::rebuild_maps() {
  truth_map_ = ObstacleMap::truth(truth_);
  believed_map_ = ObstacleMap::believed(truth_, belief_map_);
}

SimContext SlapExecutor::context(const ObstacleMap& map) {
  SimContext ctx;
  ctx.setup = &graph_.setup;
  ctx.world = &truth_;
  ctx.map = &map;
  ctx.regions = graph_.regions;
  return ctx;
}

void SlapExecutor::solve() {
  policy_ = solve_policy(graph_, goal_node_);
  ++record_.dp_solves;
}

bool SlapExecutor::set_goal(const State& goal) {
  try {
    const InsertResult r =
        insert_node_online(graph_, goal, graph_.config.connect_radius, graph_.config.n_mc_online, believed_map_,
                           derive_seed(config_.seed, {key(Stream::insertion), key(tick_), 1}));
    goal_node_ = r.node;
    if (r.inserted) ++record_.nodes_inserted;
  } catch (const ConstructionError& e) {
    log("goal_rejected", {{"reason", e.what()}});
    return false;
  }
  solve();
  log("goal", {{"node", goal_node_.value}, {"x", goal.x()}, {"y", goal.y()}});
  return true;
}

void SlapExecutor::start_controller(LocalController c, ControllerCursor cursor) {
  controller_ = std::move(c);
  cursor_ = std::move(cursor);
  mode_ = Mode::edge;
}

void SlapExecutor::stabilize_nearest() {
  std::vector<std::pair<double, int>> order;
  for (const FirmNode& n : graph_.nodes) order.emplace_back((n.point.head<2>() - belief_.mean.head<2>()).norm(), n.id.value);
  std::sort(order.begin(), order.end());
  for (const auto& [d, id] : order) {
    if (believed_map_.segment_free(belief_.mean.head<2>(), graph_.nodes[id].point.head<2>())) {
      start_controller(graph_.nodes[id].stabilizer);
      log("stabilize", {{"node", id}});
      return;
    }
  }
  mode_ = Mode::hold;
  log("stuck", {{"reason", "no node reachable along a free segment"}});
}

void SlapExecutor::run_rollout(const LocalController* base, const ControllerCursor& cursor,
                               std::span<const NodeId> extra) {
  RolloutDecision d = rollout_step(belief_, graph_, policy_, believed_map_, base, cursor, config_.rollout,
                                   config_.seed, tick_, extra);
  last_rollout_ = tick_;
  record_.online_checks_per_rollout.push_back(d.diagnostics.collision_checks);
  last_rollout_diag_ = d.diagnostics;
  record_.rollouts.push_back(d.diagnostics);
  if (d.diagnostics.chosen < 0) {
    stabilize_nearest();
    return;
  }
  if (d.diagnostics.switched || base != &controller_) start_controller(std::move(d.controller), std::move(d.cursor));
}

void SlapExecutor::decide(NodeId absorbed, const char* reason) {
  lazy_feedback_evaluation();
  if (config_.policy == PolicyKind::firm) {
    if (!absorbed.valid()) {
      stabilize_nearest();
      return;
    }
    const EdgeId e = policy_.next(absorbed);
    if (!e.valid()) {
      mode_ = Mode::hold;
      log("stuck", {{"node", absorbed.value}, {"reason", reason}});
      return;
    }
    start_controller(graph_.edge(e).controller);
    return;
  }
  if (absorbed.valid()) {
    const EdgeId e = policy_.next(absorbed);
    if (e.valid()) {
      const LocalController base = graph_.edge(e).controller;
      run_rollout(&base, ControllerCursor{}, {});
    } else {
      run_rollout(nullptr, ControllerCursor{}, {});
    }
    return;
  }
  if (mode_ == Mode::edge && controller_.target.valid()) {
    run_rollout(&controller_, cursor_, {});
  } else {
    run_rollout(nullptr, ControllerCursor{}, {});
  }
}

// One bounded pass over the current edge and the feedback chain; true if it re-solved.
bool SlapExecutor::lazy_pass() {
  std::vector<EdgeId> walk;
  NodeId node = kNoNode;
  if (mode_ == Mode::edge && controller_.edge.valid()) {
    walk.push_back(controller_.edge);
    node = graph_.edge(controller_.edge).to;
  } else if (mode_ == Mode::edge && controller_.target.valid()) {
    node = controller_.target;
  } else {
    node = graph_.nearest_node(belief_.mean.head<2>());
  }
  std::vector<bool> seen(graph_.size(), false);
  while (node.valid() && node != goal_node_ && !seen[static_cast<std::size_t>(node.value)]) {
    seen[static_cast<std::size_t>(node.value)] = true;
    const EdgeId e = policy_.next(node);
    if (!e.valid()) break;
    walk.push_back(e);
    node = graph_.edge(e).to;
  }
  int evaluated = 0;
  int ctr = 0;
  for (EdgeId id : walk) {
    if (evaluated >= config_.lazy_edges) break;
    FirmEdge& e = graph_.edge(id);
    if (e.validated_map_version == belief_map_.version) continue;
    const std::uint64_t stream = derive_seed(
        config_.seed, {key(Stream::lazy), key(std::int64_t{id.value}), static_cast<std::uint64_t>(belief_map_.version)});
    EdgeStats fresh = evaluate_graph_edge(graph_, e, believed_map_, graph_.config.n_mc_online, stream);
    ++evaluated;
    e.validated_map_version = belief_map_.version;
    const double delta = std::abs(fresh.failure_prob - e.stats.failure_prob);
    if (delta > config_.lazy_alpha) {
      log("edge_update", {{"edge", id.value}, {"old_fail", e.stats.failure_prob}, {"new_fail", fresh.failure_prob}});
      e.stats = std::move(fresh);
      ++e.stats_version;
      ++ctr;
    }
  }
  if (evaluated == 0) return false;
  ++record_.lazy_invocations;
  record_.lazy_edges_evaluated += evaluated;
  record_.lazy_max_edges_per_invocation = std::max(record_.lazy_max_edges_per_invocation, evaluated);
  record_.lazy_updates += ctr;
  log("lazy", {{"evaluated", evaluated}, {"updated", ctr}});
  if (ctr == 0) return false;
  solve();
  ++record_.lazy_resolves;
  log("resolve", {{"reason", "lazy"}});
  return true;
}

void SlapExecutor::lazy_feedback_evaluation() {
  // A re-solve can route through edges not yet checked against this map; repeat until the chain is clean.
  bool resolved = false;
  for (std::size_t round = 0; round <= graph_.edges.size() && lazy_pass(); ++round) resolved = true;
  if (!resolved) return;
  if (mode_ != Mode::edge || !controller_.target.valid()) return;
  const bool blocked =
      !believed_map_.segment_free(belief_.mean.head<2>(), graph_.node(controller_.target).point.head<2>());
  if (config_.policy == PolicyKind::firm) {
    if (blocked) stabilize_nearest();
  } else {
    run_rollout(&controller_, cursor_, {});
  }
}

void SlapExecutor::kidnap_logic(std::span<const Innovation> innovations) {
  const bool was_lost = monitor_.lost();
  const bool lost = detect_kidnap(monitor_, innovations);
  if (lost && !was_lost) {
    ++record_.kidnaps_detected;
    recovering_ = true;
    mode_ = Mode::hold;
    log("lost", {{"r_bar", monitor_.r_bar()}, {"theta_bar", monitor_.theta_bar()}});
  }
  if (lost) {
    belief_.covariance = Mat3(config_.sigma_big.asDiagonal());
    return;
  }
  if (recovering_ && belief_.covariance.trace() <= config_.recovery_trace_bound) finish_recovery();
}

void SlapExecutor::finish_recovery() {
  recovering_ = false;
  const NodeId nearest = graph_.nearest_node(belief_.mean.head<2>());
  const double delta =
      nearest.valid() ? (graph_.node(nearest).point.head<2>() - belief_.mean.head<2>()).norm() : 1e9;
  std::vector<NodeId> extra;
  if (delta > config_.delta_min) {
    try {
      const InsertResult r =
          insert_node_online(graph_, belief_.mean, graph_.config.connect_radius, graph_.config.n_mc_online,
                             believed_map_, derive_seed(config_.seed, {key(Stream::insertion), key(tick_), 2}));
      if (r.inserted) ++record_.nodes_inserted;
      extra.push_back(r.node);
      solve();
      log("recovery_node", {{"node", r.node.value}, {"delta", delta}});
    } catch (const ConstructionError& e) {
      log("recovery_node_failed", {{"reason", e.what()}});
    }
  }
  log("relocalized", {{"delta", delta}});
  mode_ = Mode::edge;
  controller_ = LocalController{};
  cursor_ = ControllerCursor{};
  if (config_.policy == PolicyKind::firm) {
    if (!extra.empty()) {
      start_controller(graph_.node(extra.front()).stabilizer);
    } else {
      stabilize_nearest();
    }
    return;
  }
  run_rollout(nullptr, ControllerCursor{}, extra);
}

void SlapExecutor::apply_event(const RunEvent& e) {
  if (auto reason = validate(e)) {
    log("event_rejected", {{"event", to_string(e.kind)}, {"reason", *reason}});
    return;
  }
  switch (e.kind) {
    case EventKind::set_goal: {
      log("event", {{"event", "set_goal"}, {"x", e.pose.x()}, {"y", e.pose.y()}, {"theta", e.pose.z()}});
      if (goals_.empty()) goals_.push_back(e.pose);
      else goals_.front() = e.pose;
      if (set_goal(e.pose) && mode_ == Mode::edge) {
        decide(absorbing_node(belief_, graph_.regions, kNoNode), "goal");
      } else if (!recovering_ && mode_ == Mode::hold) {
        decide(kNoNode, "goal");
      }
      break;
    }
    case EventKind::toggle_door: {
      Door* d = truth_.find_door(e.id);
      d->closed = !d->closed;
      log("event", {{"event", "toggle_door"}, {"id", e.id}, {"closed", d->closed}});
      rebuild_maps();
      break;
    }
    case EventKind::kidnap:
      log("event", {{"event", "kidnap"}, {"x", e.pose.x()}, {"y", e.pose.y()}, {"theta", e.pose.z()}});
      x_true_ = e.pose;
      x_true_.z() = wrap_angle(x_true_.z());
      break;
    case EventKind::spawn_transient:
      truth_.transients.push_back({e.id, *e.polygon, tick_});
      log("event", {{"event", "spawn_transient"}, {"id", e.id}});
      rebuild_maps();
      break;
    case EventKind::remove_transient:
      std::erase_if(truth_.transients, [&](const TransientObstacle& t) { return t.id == e.id; });
      log("event", {{"event", "remove_transient"}, {"id", e.id}});
      rebuild_maps();
      break;
  }
}

bool SlapExecutor::step() {
  if (finished()) return false;

  while (next_event_ < scenario_.events.size() && scenario_.events[next_event_].tick <= tick_) {
    apply_event(scenario_.events[next_event_++]);
  }
  std::deque<RunEvent> pending;
  {
    std::lock_guard<std::mutex> lock(queue_mutex_);
    pending.swap(queue_);
  }
  for (const RunEvent& e : pending) apply_event(e);

  const SimSetup& s = graph_.setup;
  Control u = Control::Zero();
  if (mode_ == Mode::edge) u = next_control(cursor_, controller_, belief_, s.model, s.dt);
  cost_ += one_step_cost(belief_, u, s.weights);

  Rng rng = make_rng(config_.seed, {key(Stream::truth), key(tick_)});
  const SimContext ctx = context(truth_map_);
  const StepResult r = advance(ctx, x_true_, belief_, u, rng);
  ++tick_;
  belief_.tick = tick_;

  auto push_row = [&] {
    record_.ticks = tick_;
    record_.total_cost = cost_;
    if (!config_.record_rows) return;
    TickRow row;
    row.t = tick_;
    row.true_pose = x_true_;
    row.mean = belief_.mean;
    row.cov_trace = belief_.covariance.trace();
    row.active_edge = mode_ == Mode::edge ? controller_.edge.value : -1;
    row.target = mode_ == Mode::edge ? controller_.target.value : -1;
    row.cost = cost_;
    row.z_lost = monitor_.lost();
    row.stabilizations = record_.stabilizations;
    record_.rows.push_back(row);
  };

  if (r.collided) {
    record_.outcome = RunOutcome::collision;
    log("collision", {{"x", x_true_.x()}, {"y", x_true_.y()}});
    push_row();
    return false;
  }

  kidnap_logic(r.innovations);

  const std::uint64_t version_before = belief_map_.version;
  const auto changes = sense_environment(x_true_, truth_, belief_map_);
  refresh_observations(belief_map_, x_true_, truth_, tick_);
  if (!changes.empty()) {
    apply_map_changes(belief_map_, truth_, changes, tick_);
    for (const MapChange& c : changes) {
      log("map_change", {{"id", c.id},
                         {"kind", c.kind == MapChange::Kind::door ? "door"
                                  : c.kind == MapChange::Kind::transient_added ? "transient_added"
                                                                               : "transient_removed"},
                         {"closed", c.closed}});
    }
  }
  belief_map_ = apply_forgetting(belief_map_, tick_, s.dt);
  if (belief_map_.version != version_before) {
    rebuild_maps();
    lazy_feedback_evaluation();
  }

  if (mode_ == Mode::edge && cursor_.in_funnel(controller_)) {
    const NodeId hit = absorbing_node(belief_, graph_.regions, controller_.target);
    if (hit.valid()) {
      ++record_.stabilizations;
      log("absorbed", {{"node", hit.value}});
      if (hit == goal_node_) {
        record_.goal_ticks.push_back(tick_);
        log("goal_reached", {{"node", hit.value}});
        goals_.pop_front();
        if (goals_.empty()) {
          if (!config_.idle_when_done) {
            record_.outcome = RunOutcome::success;
            push_row();
            return false;
          }
          mode_ = Mode::hold;
        } else if (set_goal(goals_.front())) {
          decide(hit, "absorbed");
        }
      } else {
        decide(hit, "absorbed");
      }
    }
  } else if (mode_ == Mode::edge && cursor_.elapsed >= controller_.max_steps) {
    log("truncated", {{"target", controller_.target.value}});
    decide(kNoNode, "truncated");
  }
  if (config_.policy == PolicyKind::rollout && mode_ == Mode::edge &&
      tick_ - last_rollout_ >= config_.rollout_period_ticks) {
    lazy_feedback_evaluation();
    if (mode_ == Mode::edge) run_rollout(&controller_, cursor_, {});
  }

  push_row();
  if (tick_ >= scenario_.max_ticks) {
    record_.outcome = RunOutcome::timeout;
    log("timeout", nullptr);
    return false;
  }
  return true;
}

RunRecord SlapExecutor::run() {
  while (step()) {
  }
  return record_;
}

RunRecord SlapExecutor::take_record() { return std::move(record_); }

ExecutorView SlapExecutor::view() const {
  ExecutorView v;
  v.tick = tick_;
  v.sim_time = static_cast<double>(tick_) * graph_.setup.dt;
  v.true_pose = x_true_;
  v.belief = belief_;
  v.active_edge = mode_ == Mode::edge ? controller_.edge.value : -1;
  v.target = mode_ == Mode::edge ? controller_.target.value : -1;
  v.z_lost = monitor_.lost();
  v.cost = cost_;
  v.stabilizations = record_.stabilizations;
  v.outcome = record_.outcome;
  for (const Door& d : belief_map_.doors) v.doors.emplace_back(d.id, d.closed);
  v.last_rollout = last_rollout_diag_;
  v.goal_node = goal_node_.value;
  v.dp_solves = record_.dp_solves;
  return v;
}

RunRecord run_scenario(const FirmGraph& graph, const Scenario& scenario, const ExecutorConfig& config) {
  SlapExecutor ex(graph, scenario, config);
  return ex.run();
}

}  // namespace slap
