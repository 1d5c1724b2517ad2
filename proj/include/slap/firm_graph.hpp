#pragma once

#include "slap/control.hpp"

#include <map>
#include <optional>
#include <vector>

namespace slap {

struct GraphConfig {
  int k = 5;
  int n_mc = 100;
  int n_mc_online = 30;
  double connect_radius = 4.0;  // online insertion and rollout neighborhood, m
  RegionRadii radii{0.3, 0.3, 0.0};
  double cov_radius_factor = 0.5;  // covariance radius as a fraction of |P_s+|_F
  double j_fail = 10000.0;
  std::uint64_t seed = 1;
  int max_sample_attempts = 200000;
};

struct FirmNode {
  NodeId id;
  State point = State::Zero();
  StationaryBeliefParams stationary;
  BeliefRegion region;
  LocalController stabilizer;

  GaussianBelief belief() const { return region.center(); }
};

struct EdgeStats {
  EdgeId edge;
  double expected_cost = 0.0;
  std::map<int, double> transition_probs;  // node id -> probability
  double failure_prob = 0.0;
  int sample_count = 0;
  double mean_steps = 0.0;
  std::uint64_t collision_checks = 0;

  double total_probability() const;
};

struct FirmEdge {
  EdgeId id;
  NodeId from;
  NodeId to;
  LocalController controller;
  EdgeStats stats;
  int stats_version = 0;                // bumped whenever stats are replaced
  std::uint64_t validated_map_version = 0;  // map version the stats were last checked against
};

enum class SamplingStrategy { uniform, grid };

class FirmGraph {
 public:
  WorldModel world;
  SimSetup setup;
  GraphConfig config;
  std::vector<FirmNode> nodes;
  std::vector<FirmEdge> edges;
  std::vector<std::vector<EdgeId>> out_edges;
  std::vector<BeliefRegion> regions;  // regions[i] == nodes[i].region
  std::uint64_t offline_collision_checks = 0;
  std::uint64_t mc_samples_used = 0;

  const FirmNode& node(NodeId id) const { return nodes.at(static_cast<std::size_t>(id.value)); }
  const FirmEdge& edge(EdgeId id) const { return edges.at(static_cast<std::size_t>(id.value)); }
  FirmEdge& edge(EdgeId id) { return edges.at(static_cast<std::size_t>(id.value)); }
  std::size_t size() const { return nodes.size(); }

  /// Nearest node by planar distance; ties to the lowest id.
  NodeId nearest_node(const Vec2& p) const;
  std::optional<EdgeId> find_edge(NodeId from, NodeId to) const;
  double max_dare_residual() const;

  NodeId add_node(const State& point, const StationaryBeliefParams& stationary);
  EdgeId add_edge(NodeId from, NodeId to);
};

/// Node sampling: collision-free w.r.t. the initial belief map and with a converging stationary filter.
/// Required points are placed first and must be valid.
std::vector<State> sample_nodes(const WorldModel& world, const SimSetup& setup, int n, SamplingStrategy strategy,
                                std::uint64_t seed, const std::vector<State>& required = {});

/// Factor pair rows x cols == n closest to square (rows <= cols).
std::pair<int, int> grid_shape(int n);

/// Nodes, k-nearest straight edges in both directions, Monte-Carlo edge statistics.
FirmGraph build_graph(const WorldModel& world, const SimSetup& setup, const GraphConfig& config,
                      const std::vector<State>& points);

/// Monte-Carlo statistics of a controller started from `start`, against `map`.
EdgeStats estimate_edge_stats(const FirmGraph& g, const LocalController& c, const ControllerCursor& cursor,
                              const GaussianBelief& start, const ObstacleMap& map, int samples,
                              std::uint64_t stream_seed, bool inject_noise = true);

/// Offline statistics of an edge of the graph (keyed by its endpoints).
EdgeStats evaluate_graph_edge(const FirmGraph& g, const FirmEdge& e, const ObstacleMap& map, int samples,
                              std::uint64_t stream_seed);

// ---------------------------------------------------------------------------
// Dynamic programming
// ---------------------------------------------------------------------------

struct DpEdge {
  int id = 0;
  int from = 0;
  double cost = 0.0;
  std::vector<std::pair<int, double>> next;  // (node, probability)
  double p_fail = 0.0;
};

struct DpProblem {
  int n = 0;
  std::vector<DpEdge> edges;  // sorted by id
};

DpProblem dp_problem(const FirmGraph& g);

struct FirmPolicy {
  NodeId goal;
  double j_fail = 10000.0;
  std::vector<double> cost_to_go;
  std::vector<double> success_prob;
  std::vector<EdgeId> feedback;  // kNoEdge: goal, or the give-up value is best
  int sweeps = 0;

  double J(NodeId n) const { return cost_to_go.at(static_cast<std::size_t>(n.value)); }
  double success(NodeId n) const { return success_prob.at(static_cast<std::size_t>(n.value)); }
  EdgeId next(NodeId n) const { return feedback.at(static_cast<std::size_t>(n.value)); }
};

struct DpOptions {
  double tol = 1e-9;
  long max_sweeps = 1000000;
};

/// Value iteration with the give-up value J_fail as a cap, polished by exact policy evaluation.
FirmPolicy solve_dp(const DpProblem& p, int goal, double j_fail, const DpOptions& options = {});
FirmPolicy solve_dp(const FirmGraph& g, NodeId goal, double j_fail);

/// Absorbing-chain success probability under the policy's feedback.
std::vector<double> success_probabilities(const DpProblem& p, const FirmPolicy& policy);

/// solve_dp followed by success_probabilities.
FirmPolicy solve_policy(const FirmGraph& g, NodeId goal);

/// Q-value of an edge under the given cost-to-go.
double edge_value(const DpEdge& e, const std::vector<double>& J, double j_fail);

struct InsertResult {
  NodeId node;
  bool inserted = false;
  std::vector<EdgeId> new_edges;
};

/// Adds a node at the point (or returns the duplicate within 1e-6), connects it both ways to
/// nodes within the radius and evaluates the new edges with the online sample budget.
InsertResult insert_node_online(FirmGraph& g, const State& point, double radius, int n_mc,
                                const ObstacleMap& map, std::uint64_t seed);

/// Geometric shortest path over graph edges, ignoring uncertainty.
std::vector<NodeId> shortest_path_baseline(const FirmGraph& g, NodeId start, NodeId goal);

/// Most-likely path: follow the feedback from the start node.
std::vector<NodeId> most_likely_path(const FirmGraph& g, const FirmPolicy& policy, NodeId start);

}  // namespace slap
