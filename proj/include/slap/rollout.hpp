#pragma once

#include "slap/firm_graph.hpp"

#include <span>
#include <vector>

namespace slap {

enum class Neighborhood { euclidean, chebyshev };

struct RolloutParams {
  double radius = 4.0;  // m; for the Chebyshev neighborhood this is the square's half-width
  Neighborhood neighborhood = Neighborhood::euclidean;
  int n_mc = 30;
};

struct RolloutCandidate {
  NodeId target = kNoNode;
  bool continuation = false;
  LocalController controller;
  ControllerCursor cursor;
  EdgeStats stats;
  double value = 0.0;             // C + sum P J + P_fail J_fail
  double expected_success = 0.0;  // sum P success
};

struct CandidateSummary {
  NodeId target;
  bool continuation = false;
  double value = 0.0;
  double success = 0.0;
  double failure = 0.0;
};

struct RolloutDiagnostics {
  Tick tick = 0;
  std::vector<CandidateSummary> candidates;
  int chosen = -1;
  double current_value = 0.0;
  double current_success = 0.0;
  double chosen_value = 0.0;
  double chosen_success = 0.0;
  bool has_current = false;
  bool switched = false;
  bool stuck = false;
  std::uint64_t collision_checks = 0;
};

struct RolloutDecision {
  LocalController controller;
  ControllerCursor cursor;
  RolloutDiagnostics diagnostics;
};

/// Value and expected success of candidate statistics under the policy.
void score_candidate(RolloutCandidate& c, const FirmPolicy& policy);

/// Candidate nodes around the belief mean reachable along a free straight segment.
std::vector<NodeId> candidate_nodes(const GaussianBelief& b, const FirmGraph& g, const ObstacleMap& map,
                                    const RolloutParams& params);

/// Guard-first selection: keep candidates at least as likely to succeed as the current edge,
/// take the cheapest, switch only when strictly cheaper. Returns the chosen index.
int select_candidate(std::span<const RolloutCandidate> candidates, int current_index);

/// One rollout decision from the belief. `current` may be null (no active edge).
RolloutDecision rollout_step(const GaussianBelief& b, const FirmGraph& g, const FirmPolicy& policy,
                             const ObstacleMap& map, const LocalController* current,
                             const ControllerCursor& cursor, const RolloutParams& params, std::uint64_t seed,
                             Tick tick, std::span<const NodeId> extra_nodes = {});

/// Minimum candidate value (cost-to-go of the virtual node).
double rollout_value(std::span<const RolloutCandidate> candidates);
double rollout_value(std::span<const CandidateSummary> candidates);

}  // namespace slap
