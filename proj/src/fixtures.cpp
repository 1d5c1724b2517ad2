#include "slap/fixtures.hpp"

namespace slap {

namespace {

constexpr double kOff = 0.05;  // landmarks sit just off their wall

void add_landmark(WorldModel& w, double x, double y, double normal) {
  w.landmarks.push_back({static_cast<int>(w.landmarks.size()), Vec2(x, y), normal});
}

const double kUp = kPi / 2.0;
const double kDown = -kPi / 2.0;
const double kLeft = kPi;
const double kRight = 0.0;

}  // namespace

Environment office_21x21() {
  Environment env;
  env.name = "office_21x21";
  WorldModel& w = env.world;
  w.bounds = {0.0, 0.0, 21.0, 21.0};
  w.robot_radius = 1.0;

  // Wall band with passages P1 (x 3.0..6.25) and P2 (x 14.5..17.75); C-space width 1.25 m.
  const double y0 = 9.5, y1 = 11.5;
  w.static_obstacles.push_back(Polygon::rectangle(0.0, y0, 3.0, y1));
  w.static_obstacles.push_back(Polygon::rectangle(6.25, y0, 14.5, y1));
  w.static_obstacles.push_back(Polygon::rectangle(17.75, y0, 21.0, y1));
  // Clutter.
  w.static_obstacles.push_back(Polygon::rectangle(8.5, 3.0, 11.5, 6.0));
  w.static_obstacles.push_back(Polygon::rectangle(8.0, 14.5, 11.0, 17.0));
  w.static_obstacles.push_back(Polygon::rectangle(15.0, 4.0, 16.5, 5.5));

  w.doors.push_back({1, Polygon::rectangle(3.0, 10.3, 6.25, 10.7), false, std::nullopt, 600.0});
  w.doors.push_back({2, Polygon::rectangle(14.5, 10.3, 17.75, 10.7), false, std::nullopt, 600.0});

  // Outer walls: denser on the left and bottom.
  for (double x : {2.0, 5.0, 7.0, 13.0, 16.0, 19.0}) add_landmark(w, x, kOff, kUp);
  for (double x : {4.0, 12.0, 18.0}) add_landmark(w, x, 21.0 - kOff, kDown);
  for (double y : {2.5, 6.0, 15.0, 18.5}) add_landmark(w, kOff, y, kRight);
  for (double y : {7.0, 15.5}) add_landmark(w, 21.0 - kOff, y, kLeft);
  // Wall band faces.
  for (double x : {1.5, 8.0, 12.5, 19.5}) add_landmark(w, x, y0 - kOff, kDown);
  for (double x : {1.5, 9.0, 13.0, 19.5}) add_landmark(w, x, y1 + kOff, kUp);
  // Passage side faces, clear of the door slabs.
  add_landmark(w, 3.0 + kOff, 9.9, kRight);
  add_landmark(w, 6.25 - kOff, 11.1, kLeft);
  add_landmark(w, 14.5 + kOff, 9.9, kRight);
  add_landmark(w, 17.75 - kOff, 11.1, kLeft);
  // Clutter faces.
  add_landmark(w, 10.0, 6.0 + kOff, kUp);
  add_landmark(w, 8.5 - kOff, 4.5, kLeft);
  add_landmark(w, 9.5, 14.5 - kOff, kDown);
  add_landmark(w, 11.0 + kOff, 16.0, kRight);
  add_landmark(w, 16.5 + kOff, 4.75, kRight);

  env.setup.model = MotionModel(MotionModelKind::omni, MotionNoiseParams{}, ControlLimits{0.5, 1.0});
  env.setup.sensor.max_range = 5.0;
  env.setup.sensor.noise.eta_r_d = 0.05;
  env.setup.dt = 0.1;

  env.waypoints = {
      {"A", State(2.5, 2.5, 0.0)},    {"B", State(18.5, 18.5, 0.0)},   {"C", State(18.5, 2.5, 0.0)},
      {"D", State(2.5, 18.5, 0.0)},   {"E", State(13.0, 1.8, 0.0)},    {"P1_in", State(4.625, 7.5, kUp)},
      {"P1_mid", State(4.625, 10.5, kUp)}, {"P1_out", State(4.625, 13.5, kUp)}, {"P2_in", State(16.125, 7.5, kUp)},
      {"P2_mid", State(16.125, 10.5, kUp)}, {"P2_out", State(16.125, 13.5, kUp)},
  };
  env.passages = {{"P1", Polygon::rectangle(3.0, y0, 6.25, y1)}, {"P2", Polygon::rectangle(14.5, y0, 17.75, y1)}};
  env.rollout_radius = 4.0;
  return env;
}

Environment two_doors() {
  Environment env;
  env.name = "two_doors";
  WorldModel& w = env.world;
  w.bounds = {0.0, 0.0, 21.0, 21.0};
  w.robot_radius = 1.0;

  // Vertical wall with a short, tighter, unlit back passage (y 9.25..11.75) and a longer front one (y 16.375..19.625).
  const double x0 = 9.0, x1 = 12.0;
  w.static_obstacles.push_back(Polygon::rectangle(x0, 0.0, x1, 9.25));
  w.static_obstacles.push_back(Polygon::rectangle(x0, 11.75, x1, 16.375));
  w.static_obstacles.push_back(Polygon::rectangle(x0, 19.625, x1, 21.0));

  w.doors.push_back({1, Polygon::rectangle(10.3, 16.375, 10.7, 19.625), false, std::nullopt, 600.0});
  w.doors.push_back({2, Polygon::rectangle(10.3, 9.25, 10.7, 11.75), false, std::nullopt, 600.0});

  // Front passage: landmarks on both side faces and on the wall faces around it.
  for (double x : {9.9, 11.1}) add_landmark(w, x, 16.375 + kOff, kUp);
  for (double x : {9.9, 11.1}) add_landmark(w, x, 19.625 - kOff, kDown);
  for (double y : {14.5, 20.3}) add_landmark(w, x0 - kOff, y, kLeft);
  for (double y : {14.5, 20.3}) add_landmark(w, x1 + kOff, y, kRight);
  for (double y : {5.5}) add_landmark(w, x0 - kOff, y, kLeft);
  for (double y : {5.5}) add_landmark(w, x1 + kOff, y, kRight);
  for (double x : {6.5, 14.5}) add_landmark(w, x, 21.0 - kOff, kDown);
  // Open areas.
  for (double y : {2.5, 7.0, 12.0, 17.0}) add_landmark(w, kOff, y, kRight);
  for (double y : {2.5, 7.0, 12.0, 17.0}) add_landmark(w, 21.0 - kOff, y, kLeft);
  for (double x : {2.5, 6.0, 15.0, 18.5}) add_landmark(w, x, kOff, kUp);
  for (double x : {2.5, 18.5}) add_landmark(w, x, 21.0 - kOff, kDown);
  for (double y : {2.5}) add_landmark(w, x0 - kOff, y, kLeft);
  for (double y : {2.5}) add_landmark(w, x1 + kOff, y, kRight);

  env.setup.model = MotionModel(MotionModelKind::omni, MotionNoiseParams{0.05, 0.08, 0.002}, ControlLimits{0.5, 1.0});
  env.setup.sensor.max_range = 7.0;
  env.setup.sensor.noise.eta_r_d = 0.05;
  env.setup.dt = 0.1;

  env.waypoints = {
      {"S", State(3.0, 10.5, 0.0)},         {"G", State(18.0, 10.5, 0.0)},
      {"back_in", State(8.5, 10.5, 0.0)},   {"back_out", State(12.5, 10.5, 0.0)},
      {"front_in", State(7.5, 18.0, 0.0)},  {"front_mid", State(10.5, 18.0, 0.0)},
      {"front_out", State(13.5, 18.0, 0.0)},
  };
  env.passages = {{"front", Polygon::rectangle(x0, 16.375, x1, 19.625)},
                  {"back", Polygon::rectangle(x0, 9.25, x1, 11.75)}};
  env.rollout_radius = 4.0;
  return env;
}

Environment grid_world(double v_max) {
  Environment env;
  env.name = "grid";
  WorldModel& w = env.world;
  w.bounds = {0.0, 0.0, 21.0, 21.0};
  w.robot_radius = 0.5;
  for (int i = 0; i <= 7; ++i) {
    for (int j = 0; j <= 7; ++j) add_landmark(w, 3.0 * i == 0 ? kOff : std::min(3.0 * i, 21.0 - kOff),
                                              3.0 * j == 0 ? kOff : std::min(3.0 * j, 21.0 - kOff), 0.0);
  }
  env.setup.model = MotionModel(MotionModelKind::omni, MotionNoiseParams{}, ControlLimits{v_max, 1.0});
  env.setup.sensor.max_range = 6.0;
  env.setup.sensor.noise.eta_r_d = 0.05;
  env.setup.dt = 0.1;
  env.rollout_radius = 3.0;
  return env;
}

Scenario four_goal_task(const Environment& office, Tick max_ticks) {
  Scenario s;
  s.start = office.waypoints.at("A");
  for (const char* g : {"B", "C", "D", "E"}) s.goals.push_back(office.waypoints.at(g));
  s.max_ticks = max_ticks;
  return s;
}

Scenario two_doors_task(const Environment& env, Tick max_ticks) {
  Scenario s;
  s.start = env.waypoints.at("S");
  s.goals.push_back(env.waypoints.at("G"));
  s.max_ticks = max_ticks;
  return s;
}

std::vector<State> required_points(const Environment& env) {
  std::vector<State> out;
  for (const auto& [name, p] : env.waypoints) out.push_back(p);
  return out;
}

int passage_at(const Environment& env, const Vec2& p) {
  for (std::size_t i = 0; i < env.passages.size(); ++i) {
    if (env.passages[i].polygon.contains(p)) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> passages_crossed(const Environment& env, const std::vector<State>& trajectory) {
  std::vector<std::string> out;
  int last = -1;
  for (const State& x : trajectory) {
    const int p = passage_at(env, x.head<2>());
    if (p >= 0 && p != last) out.push_back(env.passages[static_cast<std::size_t>(p)].name);
    if (p >= 0) last = p;
  }
  return out;
}

}  // namespace slap
