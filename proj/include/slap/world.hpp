#pragma once

#include "slap/models.hpp"
#include "slap/types.hpp"

#include <atomic>
#include <optional>
#include <vector>

namespace slap {

struct Bounds {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 21.0;
  double y_max = 21.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  bool contains(const Vec2& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
  }
};

/// Simple convex polygon.
class Polygon {
 public:
  Polygon() = default;
  explicit Polygon(std::vector<Vec2> vertices);

  static Polygon rectangle(double x0, double y0, double x1, double y1);

  const std::vector<Vec2>& vertices() const { return vertices_; }
  bool contains(const Vec2& p) const;
  /// Euclidean distance from p to the polygon (0 inside).
  double distance(const Vec2& p) const;
  /// Distance between the segment [a, b] and the polygon (0 when they meet).
  double segment_distance(const Vec2& a, const Vec2& b) const;
  bool intersects_segment(const Vec2& a, const Vec2& b) const;
  Vec2 centroid() const;

 private:
  std::vector<Vec2> vertices_;
  Vec2 lo_ = Vec2::Zero();
  Vec2 hi_ = Vec2::Zero();
};

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);
double segment_segment_distance(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

struct Door {
  int id = 0;
  Polygon polygon;
  bool closed = false;
  std::optional<Tick> last_observed_closed;
  double forgetting_s = 600.0;
};

struct TransientObstacle {
  int id = 0;
  Polygon polygon;
  Tick inserted = 0;
};

/// Ground-truth environment.
struct WorldModel {
  Bounds bounds;
  std::vector<Polygon> static_obstacles;
  std::vector<Door> doors;
  std::vector<Landmark> landmarks;
  std::vector<TransientObstacle> transients;
  double robot_radius = 1.0;
  double door_sensing_range = 2.0;
  double transient_forgetting_s = 600.0;

  const Door* find_door(int id) const;
  Door* find_door(int id);
};

/// The planner's copy of the changeable parts of the map.
struct BeliefMap {
  std::vector<Door> doors;
  std::vector<TransientObstacle> transients;
  double transient_forgetting_s = 600.0;
  /// Bumped whenever the believed obstacle set changes.
  std::uint64_t version = 0;

  /// Planner prior: every door believed open, no transient obstacles.
  static BeliefMap initial(const WorldModel& world);

  const Door* find_door(int id) const;
  bool same_obstacles(const BeliefMap& other) const;
};

/// Flattened obstacle set with the robot disc for collision and visibility queries.
class ObstacleMap : public LineOfSight {
 public:
  ObstacleMap() = default;
  ObstacleMap(Bounds bounds, std::vector<Polygon> polygons, double robot_radius);

  static ObstacleMap truth(const WorldModel& world);
  static ObstacleMap believed(const WorldModel& world, const BeliefMap& map);

  /// Robot disc at the pose overlaps an obstacle or leaves the bounds.
  /// Every call bumps the process-wide counter and, when given, a local one.
  bool collides(const State& x, std::uint64_t* counter = nullptr) const;
  /// Minimum clearance of the disc center to obstacles and bounds minus the radius.
  double clearance(const Vec2& p) const;
  /// Disc swept along the straight segment stays collision-free.
  bool segment_free(const Vec2& a, const Vec2& b) const;
  bool blocked(const Vec2& from, const Vec2& to) const override;

  const Bounds& bounds() const { return bounds_; }
  double robot_radius() const { return robot_radius_; }
  const std::vector<Polygon>& polygons() const { return polygons_; }

 private:
  Bounds bounds_;
  std::vector<Polygon> polygons_;
  double robot_radius_ = 1.0;
};

std::uint64_t collision_check_total();

struct MapChange {
  enum class Kind { door, transient_added, transient_removed };
  Kind kind = Kind::door;
  int id = 0;
  bool closed = false;  // door state observed
};

/// Doors and transient obstacles within sensing range that disagree with the belief map.
std::vector<MapChange> sense_environment(const State& true_state, const WorldModel& world,
                                         const BeliefMap& map);

/// Applies sensed changes; doors observed closed also refresh their observation tick.
void apply_map_changes(BeliefMap& map, const WorldModel& world, std::span<const MapChange> changes,
                       Tick now);

/// Refreshes observation ticks of believed-closed doors that are still seen closed.
void refresh_observations(BeliefMap& map, const State& true_state, const WorldModel& world, Tick now);

/// Doors closed longer than their forgetting time revert to open; old transients are dropped.
BeliefMap apply_forgetting(const BeliefMap& map, Tick now, double dt);

}  // namespace slap
