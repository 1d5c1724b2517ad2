#pragma once

#include "slap/control.hpp"
#include "slap/executor.hpp"
#include "slap/world.hpp"

#include <map>
#include <string>
#include <vector>

namespace slap {

struct NamedRegion {
  std::string name;
  Polygon polygon;
};

/// World, models and fixture annotations as stored in an environment file.
struct Environment {
  std::string name;
  WorldModel world;
  SimSetup setup;
  std::map<std::string, State> waypoints;
  std::vector<NamedRegion> passages;
  double rollout_radius = 4.0;
};

/// 21 m office: a wall band with two narrow passages (P1, P2, each with a door), clutter,
/// asymmetric landmarks and the task points A to E.
Environment office_21x21();

/// Two passages through a wall: a landmark-dense long "front" passage and a short sparse "back" one.
Environment two_doors();

/// Empty square with a landmark lattice for grid-sampled complexity runs.
Environment grid_world(double v_max = 1.0);

/// Sequential A -> B -> C -> D -> E task on the office fixture.
Scenario four_goal_task(const Environment& office, Tick max_ticks = 12000);

/// Start to goal across the two-doors wall.
Scenario two_doors_task(const Environment& env, Tick max_ticks = 6000);

/// Points every fixture graph must contain (waypoints and passage nodes).
std::vector<State> required_points(const Environment& env);

/// Index of the passage whose region contains p, or -1.
int passage_at(const Environment& env, const Vec2& p);

/// Passages visited by a trajectory, in order, without repeats of consecutive entries.
std::vector<std::string> passages_crossed(const Environment& env, const std::vector<State>& trajectory);

}  // namespace slap
