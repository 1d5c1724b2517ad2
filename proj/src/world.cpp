#include "slap/world.hpp"

#include <algorithm>
#include <limits>

namespace slap {

namespace {

std::atomic<std::uint64_t> g_collision_checks{0};

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  auto on_segment = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return std::min(p.x(), q.x()) - 1e-12 <= r.x() && r.x() <= std::max(p.x(), q.x()) + 1e-12 &&
           std::min(p.y(), q.y()) - 1e-12 <= r.y() && r.y() <= std::max(p.y(), q.y()) + 1e-12;
  };
  if (d1 == 0 && on_segment(a, b, c)) return true;
  if (d2 == 0 && on_segment(a, b, d)) return true;
  if (d3 == 0 && on_segment(c, d, a)) return true;
  if (d4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

}  // namespace

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double segment_segment_distance(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  if (segments_intersect(a, b, c, d)) return 0.0;
  return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d),
                   point_segment_distance(c, a, b), point_segment_distance(d, a, b)});
}

Polygon::Polygon(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3) throw ContractViolation("polygon needs at least three vertices");
  lo_ = hi_ = vertices_.front();
  for (const Vec2& v : vertices_) {
    lo_ = lo_.cwiseMin(v);
    hi_ = hi_.cwiseMax(v);
  }
  // Convexity: all turns share a sign.
  int sign = 0;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double c = cross(vertices_[(i + 1) % n] - vertices_[i], vertices_[(i + 2) % n] - vertices_[(i + 1) % n]);
    if (std::abs(c) < 1e-12) continue;
    const int s = c > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) throw ContractViolation("polygon is not convex");
  }
  if (sign == 0) throw ContractViolation("polygon is degenerate");
}

Polygon Polygon::rectangle(double x0, double y0, double x1, double y1) {
  return Polygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

bool Polygon::contains(const Vec2& p) const {
  if ((p.array() < lo_.array()).any() || (p.array() > hi_.array()).any()) return false;
  const std::size_t n = vertices_.size();
  int sign = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = cross(vertices_[(i + 1) % n] - vertices_[i], p - vertices_[i]);
    if (c == 0.0) continue;
    const int s = c > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

double Polygon::distance(const Vec2& p) const {
  if (contains(p)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    best = std::min(best, point_segment_distance(p, vertices_[i], vertices_[(i + 1) % n]));
  }
  return best;
}

double Polygon::segment_distance(const Vec2& a, const Vec2& b) const {
  if (contains(a) || contains(b)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    best = std::min(best, segment_segment_distance(a, b, vertices_[i], vertices_[(i + 1) % n]));
    if (best == 0.0) break;
  }
  return best;
}

bool Polygon::intersects_segment(const Vec2& a, const Vec2& b) const {
  const Vec2 slo = a.cwiseMin(b);
  const Vec2 shi = a.cwiseMax(b);
  if ((shi.array() < lo_.array()).any() || (slo.array() > hi_.array()).any()) return false;
  if (contains(a) || contains(b)) return true;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (segments_intersect(a, b, vertices_[i], vertices_[(i + 1) % n])) return true;
  }
  return false;
}

Vec2 Polygon::centroid() const {
  Vec2 c = Vec2::Zero();
  for (const Vec2& v : vertices_) c += v;
  return c / static_cast<double>(vertices_.size());
}

const Door* WorldModel::find_door(int id) const {
  for (const Door& d : doors) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

Door* WorldModel::find_door(int id) {
  for (Door& d : doors) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

BeliefMap BeliefMap::initial(const WorldModel& world) {
  BeliefMap m;
  m.doors = world.doors;
  for (Door& d : m.doors) {
    d.closed = false;
    d.last_observed_closed.reset();
  }
  m.transient_forgetting_s = world.transient_forgetting_s;
  return m;
}

const Door* BeliefMap::find_door(int id) const {
  for (const Door& d : doors) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

bool BeliefMap::same_obstacles(const BeliefMap& other) const {
  if (doors.size() != other.doors.size() || transients.size() != other.transients.size()) return false;
  for (std::size_t i = 0; i < doors.size(); ++i) {
    if (doors[i].id != other.doors[i].id || doors[i].closed != other.doors[i].closed) return false;
  }
  for (std::size_t i = 0; i < transients.size(); ++i) {
    if (transients[i].id != other.transients[i].id) return false;
  }
  return true;
}

ObstacleMap::ObstacleMap(Bounds bounds, std::vector<Polygon> polygons, double robot_radius)
    : bounds_(bounds), polygons_(std::move(polygons)), robot_radius_(robot_radius) {}

ObstacleMap ObstacleMap::truth(const WorldModel& world) {
  std::vector<Polygon> polys = world.static_obstacles;
  for (const Door& d : world.doors) {
    if (d.closed) polys.push_back(d.polygon);
  }
  for (const TransientObstacle& t : world.transients) polys.push_back(t.polygon);
  return ObstacleMap(world.bounds, std::move(polys), world.robot_radius);
}

ObstacleMap ObstacleMap::believed(const WorldModel& world, const BeliefMap& map) {
  std::vector<Polygon> polys = world.static_obstacles;
  for (const Door& d : map.doors) {
    if (d.closed) polys.push_back(d.polygon);
  }
  for (const TransientObstacle& t : map.transients) polys.push_back(t.polygon);
  return ObstacleMap(world.bounds, std::move(polys), world.robot_radius);
}

bool ObstacleMap::collides(const State& x, std::uint64_t* counter) const {
  g_collision_checks.fetch_add(1, std::memory_order_relaxed);
  if (counter != nullptr) ++*counter;
  const Vec2 p = x.head<2>();
  const double r = robot_radius_;
  if (p.x() - r < bounds_.x_min || p.x() + r > bounds_.x_max || p.y() - r < bounds_.y_min ||
      p.y() + r > bounds_.y_max) {
    return true;
  }
  for (const Polygon& poly : polygons_) {
    if (poly.distance(p) <= r) return true;
  }
  return false;
}

double ObstacleMap::clearance(const Vec2& p) const {
  double best = std::min({p.x() - bounds_.x_min, bounds_.x_max - p.x(), p.y() - bounds_.y_min,
                          bounds_.y_max - p.y()});
  for (const Polygon& poly : polygons_) best = std::min(best, poly.distance(p));
  return best - robot_radius_;
}

bool ObstacleMap::segment_free(const Vec2& a, const Vec2& b) const {
  const double r = robot_radius_;
  // Bounds shrunk by the radius form a convex box, so endpoints suffice.
  for (const Vec2& p : {a, b}) {
    if (p.x() - r < bounds_.x_min || p.x() + r > bounds_.x_max || p.y() - r < bounds_.y_min ||
        p.y() + r > bounds_.y_max) {
      return false;
    }
  }
  for (const Polygon& poly : polygons_) {
    if (poly.segment_distance(a, b) <= r) return false;
  }
  return true;
}

bool ObstacleMap::blocked(const Vec2& from, const Vec2& to) const {
  for (const Polygon& poly : polygons_) {
    if (poly.intersects_segment(from, to)) return true;
  }
  return false;
}

std::uint64_t collision_check_total() { return g_collision_checks.load(std::memory_order_relaxed); }

std::vector<MapChange> sense_environment(const State& true_state, const WorldModel& world,
                                         const BeliefMap& map) {
  std::vector<MapChange> changes;
  const Vec2 p = true_state.head<2>();
  for (const Door& d : world.doors) {
    if (d.polygon.distance(p) > world.door_sensing_range) continue;
    const Door* believed = map.find_door(d.id);
    if (believed == nullptr || believed->closed != d.closed) {
      changes.push_back({MapChange::Kind::door, d.id, d.closed});
    }
  }
  for (const TransientObstacle& t : world.transients) {
    if (t.polygon.distance(p) > world.door_sensing_range) continue;
    const bool known = std::any_of(map.transients.begin(), map.transients.end(),
                                   [&](const TransientObstacle& b) { return b.id == t.id; });
    if (!known) changes.push_back({MapChange::Kind::transient_added, t.id, true});
  }
  for (const TransientObstacle& b : map.transients) {
    if (b.polygon.distance(p) > world.door_sensing_range) continue;
    const bool present = std::any_of(world.transients.begin(), world.transients.end(),
                                     [&](const TransientObstacle& t) { return t.id == b.id; });
    if (!present) changes.push_back({MapChange::Kind::transient_removed, b.id, false});
  }
  return changes;
}

void apply_map_changes(BeliefMap& map, const WorldModel& world, std::span<const MapChange> changes,
                       Tick now) {
  for (const MapChange& c : changes) {
    switch (c.kind) {
      case MapChange::Kind::door: {
        for (Door& d : map.doors) {
          if (d.id != c.id) continue;
          d.closed = c.closed;
          if (c.closed) d.last_observed_closed = now;
          else d.last_observed_closed.reset();
        }
        break;
      }
      case MapChange::Kind::transient_added: {
        for (const TransientObstacle& t : world.transients) {
          if (t.id == c.id) map.transients.push_back({t.id, t.polygon, now});
        }
        break;
      }
      case MapChange::Kind::transient_removed: {
        std::erase_if(map.transients, [&](const TransientObstacle& t) { return t.id == c.id; });
        break;
      }
    }
  }
  if (!changes.empty()) ++map.version;
}

void refresh_observations(BeliefMap& map, const State& true_state, const WorldModel& world, Tick now) {
  const Vec2 p = true_state.head<2>();
  for (Door& d : map.doors) {
    if (!d.closed) continue;
    const Door* truth = world.find_door(d.id);
    if (truth != nullptr && truth->closed && truth->polygon.distance(p) <= world.door_sensing_range) {
      d.last_observed_closed = now;
    }
  }
}

BeliefMap apply_forgetting(const BeliefMap& map, Tick now, double dt) {
  BeliefMap out = map;
  bool changed = false;
  for (Door& d : out.doors) {
    if (d.closed && d.last_observed_closed &&
        static_cast<double>(now - *d.last_observed_closed) * dt > d.forgetting_s) {
      d.closed = false;
      d.last_observed_closed.reset();
      changed = true;
    }
  }
  const auto before = out.transients.size();
  std::erase_if(out.transients, [&](const TransientObstacle& t) {
    return static_cast<double>(now - t.inserted) * dt > out.transient_forgetting_s;
  });
  changed = changed || out.transients.size() != before;
  if (changed) ++out.version;
  return out;
}

}  // namespace slap
