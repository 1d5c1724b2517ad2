#pragma once

#include "slap/firm_graph.hpp"
#include "slap/rollout.hpp"

#include <nlohmann/json.hpp>

#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace slap {

enum class PolicyKind { firm, rollout };

std::string to_string(PolicyKind k);
PolicyKind policy_kind_from_string(const std::string& s);

/// Low-pass filtered innovation magnitudes and the lost flag.
class InnovationMonitor {
 public:
  InnovationMonitor() = default;
  InnovationMonitor(double beta, double r_max, double theta_max);

  /// Feeds one tick of innovations; an empty set holds the previous state.
  bool update(std::span<const Innovation> innovations);
  void reset();

  double r_bar() const { return r_bar_; }
  double theta_bar() const { return theta_bar_; }
  bool lost() const { return lost_; }
  double beta() const { return beta_; }
  double r_max() const { return r_max_; }
  double theta_max() const { return theta_max_; }

 private:
  double beta_ = 0.2;
  double r_max_ = 1.0;
  double theta_max_ = deg_to_rad(50.0);
  double r_bar_ = 0.0;
  double theta_bar_ = 0.0;
  bool lost_ = false;
};

bool detect_kidnap(InnovationMonitor& monitor, std::span<const Innovation> innovations);

enum class EventKind { set_goal, toggle_door, kidnap, spawn_transient, remove_transient };

std::string to_string(EventKind k);
EventKind event_kind_from_string(const std::string& s);

struct RunEvent {
  Tick tick = 0;
  EventKind kind = EventKind::set_goal;
  State pose = State::Zero();   // set_goal, kidnap
  int id = 0;                   // toggle_door, spawn/remove_transient
  std::optional<Polygon> polygon;  // spawn_transient
};

struct Scenario {
  int version = 1;
  State start = State::Zero();
  std::vector<State> goals;
  std::vector<RunEvent> events;  // ticks nondecreasing
  Tick max_ticks = 20000;
};

struct ExecutorConfig {
  PolicyKind policy = PolicyKind::rollout;
  std::uint64_t seed = 1;
  int rollout_period_ticks = 20;
  RolloutParams rollout;
  double ema_beta = 0.2;
  double r_max = 1.0;
  double theta_max = deg_to_rad(50.0);
  Vec3 sigma_big{25.0, 25.0, kPi * kPi};
  double recovery_trace_bound = 1.0;
  double delta_min = 1.0;
  int lazy_edges = 2;
  double lazy_alpha = 0.1;
  bool record_rows = true;
  /// Live sessions idle after the last goal instead of ending the run.
  bool idle_when_done = false;
};

enum class RunOutcome { running, success, collision, timeout };
std::string to_string(RunOutcome o);

struct TickRow {
  Tick t = 0;
  State true_pose = State::Zero();
  State mean = State::Zero();
  double cov_trace = 0.0;
  int active_edge = -1;
  int target = -1;
  double cost = 0.0;
  bool z_lost = false;
  int stabilizations = 0;
};

struct RunRecord {
  std::uint64_t seed = 0;
  PolicyKind policy = PolicyKind::rollout;
  RunOutcome outcome = RunOutcome::running;
  Tick ticks = 0;
  double total_cost = 0.0;
  int stabilizations = 0;
  std::vector<Tick> goal_ticks;
  std::vector<TickRow> rows;
  std::vector<nlohmann::json> events;
  std::vector<RolloutDiagnostics> rollouts;
  std::vector<std::uint64_t> online_checks_per_rollout;
  int dp_solves = 0;
  int lazy_invocations = 0;
  int lazy_edges_evaluated = 0;
  int lazy_max_edges_per_invocation = 0;
  int lazy_updates = 0;
  int lazy_resolves = 0;
  int nodes_inserted = 0;
  int kidnaps_detected = 0;
};

/// Snapshot of the live state for observers.
struct ExecutorView {
  Tick tick = 0;
  double sim_time = 0.0;
  State true_pose = State::Zero();
  GaussianBelief belief;
  int active_edge = -1;
  int target = -1;
  bool z_lost = false;
  double cost = 0.0;
  int stabilizations = 0;
  RunOutcome outcome = RunOutcome::running;
  std::vector<std::pair<int, bool>> doors;  // (id, believed closed)
  std::optional<RolloutDiagnostics> last_rollout;
  int goal_node = -1;
  int dp_solves = 0;
};

/// The single logical control loop: simulation ticks, filtering, replanning and events.
class SlapExecutor {
 public:
  SlapExecutor(FirmGraph graph, Scenario scenario, ExecutorConfig config);

  /// Thread-safe; applied at the next tick boundary.
  void enqueue(RunEvent event);
  /// Reason for rejecting an operator event, if any.
  std::optional<std::string> validate(const RunEvent& event) const;

  /// Advances one tick. Returns false once the run has ended.
  bool step();
  RunRecord run();

  bool finished() const { return record_.outcome != RunOutcome::running; }
  Tick tick() const { return tick_; }
  const RunRecord& record() const { return record_; }
  RunRecord take_record();
  ExecutorView view() const;
  const FirmGraph& graph() const { return graph_; }
  const FirmPolicy& policy() const { return policy_; }
  const BeliefMap& belief_map() const { return belief_map_; }
  const WorldModel& truth() const { return truth_; }

 private:
  enum class Mode { edge, hold };

  void apply_event(const RunEvent& e);
  void log(const std::string& kind, nlohmann::json detail);
  void rebuild_maps();
  bool set_goal(const State& goal);
  void solve();
  void decide(NodeId absorbed, const char* reason);
  void start_controller(LocalController c, ControllerCursor cursor = {});
  void stabilize_nearest();
  void run_rollout(const LocalController* base, const ControllerCursor& cursor, std::span<const NodeId> extra);
  bool lazy_pass();
  void lazy_feedback_evaluation();
  void kidnap_logic(std::span<const Innovation> innovations);
  void finish_recovery();
  SimContext context(const ObstacleMap& map);

  FirmGraph graph_;
  Scenario scenario_;
  ExecutorConfig config_;
  WorldModel truth_;
  BeliefMap belief_map_;
  ObstacleMap truth_map_;
  ObstacleMap believed_map_;
  FirmPolicy policy_;
  std::deque<State> goals_;
  NodeId goal_node_ = kNoNode;

  State x_true_ = State::Zero();
  GaussianBelief belief_;
  Tick tick_ = 0;
  double cost_ = 0.0;
  Mode mode_ = Mode::edge;
  LocalController controller_;
  ControllerCursor cursor_;
  Tick last_rollout_ = 0;
  InnovationMonitor monitor_;
  bool recovering_ = false;
  std::size_t next_event_ = 0;
  std::optional<RolloutDiagnostics> last_rollout_diag_;

  mutable std::mutex queue_mutex_;
  std::deque<RunEvent> queue_;

  RunRecord record_;
};

/// Convenience wrapper: builds an executor and runs it to the end.
RunRecord run_scenario(const FirmGraph& graph, const Scenario& scenario, const ExecutorConfig& config);

}  // namespace slap
