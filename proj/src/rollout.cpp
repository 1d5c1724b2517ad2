#include "slap/rollout.hpp"

#include <tbb/parallel_for.h>

#include <algorithm>
#include <limits>

namespace slap {

void score_candidate(RolloutCandidate& c, const FirmPolicy& policy) {
  c.value = c.stats.expected_cost + c.stats.failure_prob * policy.j_fail;
  c.expected_success = 0.0;
  for (const auto& [node, p] : c.stats.transition_probs) {
    c.value += p * policy.cost_to_go.at(static_cast<std::size_t>(node));
    c.expected_success += p * policy.success_prob.at(static_cast<std::size_t>(node));
  }
}

std::vector<NodeId> candidate_nodes(const GaussianBelief& b, const FirmGraph& g, const ObstacleMap& map,
                                    const RolloutParams& params) {
  std::vector<NodeId> out;
  const Vec2 p = b.mean.head<2>();
  for (const FirmNode& n : g.nodes) {
    const Vec2 d = n.point.head<2>() - p;
    const bool inside = params.neighborhood == Neighborhood::euclidean
                            ? d.norm() <= params.radius
                            : std::max(std::abs(d.x()), std::abs(d.y())) < params.radius;
    if (!inside) continue;
    // The node whose region already holds the belief is not a move.
    if (is_in_region(b, n.region)) continue;
    if (!map.segment_free(p, n.point.head<2>())) continue;
    out.push_back(n.id);
  }
  return out;
}

int select_candidate(std::span<const RolloutCandidate> candidates, int current_index) {
  if (candidates.empty()) return -1;
  const double s_cur = current_index >= 0 ? candidates[current_index].expected_success : 0.0;
  const double v_cur =
      current_index >= 0 ? candidates[current_index].value : std::numeric_limits<double>::infinity();
  int best = -1;
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    if (candidates[i].expected_success < s_cur) continue;
    if (best < 0 || candidates[i].value < candidates[best].value) best = i;
  }
  if (current_index >= 0 && (best < 0 || !(candidates[best].value < v_cur))) return current_index;
  return best;
}

RolloutDecision rollout_step(const GaussianBelief& b, const FirmGraph& g, const FirmPolicy& policy,
                             const ObstacleMap& map, const LocalController* current,
                             const ControllerCursor& cursor, const RolloutParams& params, std::uint64_t seed,
                             Tick tick, std::span<const NodeId> extra_nodes) {
  std::vector<RolloutCandidate> cands;
  int current_index = -1;
  if (current != nullptr && current->target.valid()) {
    RolloutCandidate c;
    c.target = current->target;
    c.continuation = true;
    c.controller = *current;
    c.cursor = cursor;
    cands.push_back(std::move(c));
    current_index = 0;
  }
  std::vector<NodeId> targets = candidate_nodes(b, g, map, params);
  for (NodeId extra : extra_nodes) {
    if (std::find(targets.begin(), targets.end(), extra) == targets.end() && !is_in_region(b, g.node(extra).region)) {
      targets.push_back(extra);
    }
  }
  for (NodeId t : targets) {
    RolloutCandidate c;
    c.target = t;
    c.controller = make_controller(b.mean, kNoNode, t, g.node(t).point, g.setup.model, g.setup.dt, g.setup.control);
    cands.push_back(std::move(c));
  }

  tbb::parallel_for(std::size_t{0}, cands.size(), [&](std::size_t i) {
    RolloutCandidate& c = cands[i];
    const std::uint64_t stream =
        derive_seed(seed, {key(Stream::rollout), key(tick), key(std::int64_t{c.target.value}),
                           static_cast<std::uint64_t>(c.continuation)});
    c.stats = estimate_edge_stats(g, c.controller, c.cursor, b, map, params.n_mc, stream);
    score_candidate(c, policy);
  });

  RolloutDecision d;
  RolloutDiagnostics& diag = d.diagnostics;
  diag.tick = tick;
  for (const RolloutCandidate& c : cands) {
    diag.candidates.push_back({c.target, c.continuation, c.value, c.expected_success, c.stats.failure_prob});
    diag.collision_checks += c.stats.collision_checks;
  }
  const int chosen = select_candidate(cands, current_index);
  diag.chosen = chosen;
  diag.has_current = current_index >= 0;
  if (current_index >= 0) {
    diag.current_value = cands[current_index].value;
    diag.current_success = cands[current_index].expected_success;
  }
  if (chosen < 0) {
    diag.stuck = true;
    return d;
  }
  const RolloutCandidate& c = cands[static_cast<std::size_t>(chosen)];
  diag.chosen_value = c.value;
  diag.chosen_success = c.expected_success;
  diag.switched = chosen != current_index;
  diag.stuck = c.stats.failure_prob >= 1.0;
  d.controller = c.controller;
  d.cursor = c.cursor;
  return d;
}

double rollout_value(std::span<const RolloutCandidate> candidates) {
  if (candidates.empty()) throw ContractViolation("rollout value needs at least one candidate");
  double v = std::numeric_limits<double>::infinity();
  for (const RolloutCandidate& c : candidates) v = std::min(v, c.value);
  return v;
}

double rollout_value(std::span<const CandidateSummary> candidates) {
  if (candidates.empty()) throw ContractViolation("rollout value needs at least one candidate");
  double v = std::numeric_limits<double>::infinity();
  for (const CandidateSummary& c : candidates) v = std::min(v, c.value);
  return v;
}

}  // namespace slap
