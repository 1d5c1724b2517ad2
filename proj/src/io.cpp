#include "slap/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace slap {

namespace {

template <typename T>
T req(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad field '") + key + "': " + e.what());
  }
}

template <typename T>
T opt(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad field '") + key + "': " + e.what());
  }
}

void check_header(const json& j, const char* type) {
  if (!j.is_object()) throw ConfigError(std::string(type) + ": expected an object");
  const std::string t = opt<std::string>(j, "type", type);
  if (t != type) throw ConfigError("expected type '" + std::string(type) + "', got '" + t + "'");
  const int v = req<int>(j, "version");
  if (v != kSchemaVersion) throw ConfigError("unsupported " + std::string(type) + " version " + std::to_string(v));
}

json state_json(const State& x) { return json::array({x.x(), x.y(), x.z()}); }

State state_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("pose must be [x, y, theta]");
  return State(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json mat_json(const Mat3& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

Mat3 mat_from(const json& j) {
  if (!j.is_array() || j.size() != 9) throw ConfigError("matrix must have 9 entries");
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = j[static_cast<std::size_t>(3 * r + c)].get<double>();
  return m;
}

}  // namespace

json to_json(const Polygon& p) {
  json a = json::array();
  for (const Vec2& v : p.vertices()) a.push_back({v.x(), v.y()});
  return a;
}

Polygon polygon_from_json(const json& j) {
  if (!j.is_array() || j.size() < 3) throw ConfigError("polygon needs at least three vertices");
  std::vector<Vec2> v;
  for (const json& p : j) {
    if (!p.is_array() || p.size() != 2) throw ConfigError("vertex must be [x, y]");
    v.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  try {
    return Polygon(std::move(v));
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
}

json to_json(const Environment& env) {
  const WorldModel& w = env.world;
  json j;
  j["type"] = "environment";
  j["version"] = kSchemaVersion;
  j["name"] = env.name;
  j["bounds"] = {{"x_min", w.bounds.x_min}, {"y_min", w.bounds.y_min}, {"x_max", w.bounds.x_max}, {"y_max", w.bounds.y_max}};
  j["robot_radius"] = w.robot_radius;
  j["door_sensing_range"] = w.door_sensing_range;
  j["transient_forgetting_s"] = w.transient_forgetting_s;
  j["obstacles"] = json::array();
  for (const Polygon& p : w.static_obstacles) j["obstacles"].push_back(to_json(p));
  j["doors"] = json::array();
  for (const Door& d : w.doors) {
    j["doors"].push_back({{"id", d.id},
                          {"polygon", to_json(d.polygon)},
                          {"initial_state", d.closed ? "closed" : "open"},
                          {"forgetting_s", d.forgetting_s}});
  }
  j["landmarks"] = json::array();
  for (const Landmark& l : w.landmarks) {
    j["landmarks"].push_back(
        {{"id", l.id}, {"x", l.position.x()}, {"y", l.position.y()}, {"wall_normal_deg", rad_to_deg(l.wall_normal)}});
  }
  const MotionModel& m = env.setup.model;
  j["motion"] = {{"model", to_string(m.kind())},
                 {"eta", m.noise().eta},
                 {"sigma_b_v", m.noise().sigma_b_v},
                 {"sigma_b_omega", m.noise().sigma_b_omega},
                 {"v_max", m.limits().v_max},
                 {"omega_max", m.limits().omega_max}};
  const SensorConfig& s = env.setup.sensor;
  j["sensor"] = {{"fov_half_angle_deg", rad_to_deg(s.fov_half_angle)},
                 {"max_range", std::isfinite(s.max_range) ? json(s.max_range) : json(nullptr)},
                 {"min_range", s.min_range},
                 {"eta_r_d", s.noise.eta_r_d},
                 {"eta_r_phi", s.noise.eta_r_phi},
                 {"sigma_b_r", s.noise.sigma_b_r},
                 {"eta_th_d", s.noise.eta_th_d},
                 {"eta_th_phi", s.noise.eta_th_phi},
                 {"sigma_b_th_deg", rad_to_deg(s.noise.sigma_b_th)}};
  j["dt"] = env.setup.dt;
  j["cost"] = {{"zeta_p", env.setup.weights.zeta_p},
               {"zeta_u", env.setup.weights.zeta_u},
               {"zeta_t", env.setup.weights.zeta_t}};
  j["controller"] = {{"olfc_l", env.setup.control.olfc_l},
                     {"max_steps_factor", env.setup.control.max_steps_factor},
                     {"max_steps_floor", env.setup.control.max_steps_floor}};
  j["waypoints"] = json::object();
  for (const auto& [name, p] : env.waypoints) j["waypoints"][name] = state_json(p);
  j["passages"] = json::array();
  for (const NamedRegion& r : env.passages) j["passages"].push_back({{"name", r.name}, {"polygon", to_json(r.polygon)}});
  j["rollout_radius"] = env.rollout_radius;
  return j;
}

Environment environment_from_json(const json& j) {
  check_header(j, "environment");
  Environment env;
  WorldModel& w = env.world;
  env.name = opt<std::string>(j, "name", "");
  const json b = req<json>(j, "bounds");
  w.bounds = {req<double>(b, "x_min"), req<double>(b, "y_min"), req<double>(b, "x_max"), req<double>(b, "y_max")};
  if (!(w.bounds.x_max > w.bounds.x_min && w.bounds.y_max > w.bounds.y_min)) throw ConfigError("empty bounds");
  w.robot_radius = opt(j, "robot_radius", 1.0);
  if (!(w.robot_radius > 0.0)) throw ConfigError("robot_radius must be positive");
  w.door_sensing_range = opt(j, "door_sensing_range", 2.0);
  w.transient_forgetting_s = opt(j, "transient_forgetting_s", 600.0);
  for (const json& p : opt<json>(j, "obstacles", json::array())) w.static_obstacles.push_back(polygon_from_json(p));
  for (const json& d : opt<json>(j, "doors", json::array())) {
    Door door;
    door.id = req<int>(d, "id");
    door.polygon = polygon_from_json(req<json>(d, "polygon"));
    const std::string st = opt<std::string>(d, "initial_state", "open");
    if (st != "open" && st != "closed") throw ConfigError("door initial_state must be open or closed");
    door.closed = st == "closed";
    door.forgetting_s = opt(d, "forgetting_s", 600.0);
    if (w.find_door(door.id) != nullptr) throw ConfigError("duplicate door id " + std::to_string(door.id));
    w.doors.push_back(std::move(door));
  }
  for (const json& l : opt<json>(j, "landmarks", json::array())) {
    Landmark lm;
    lm.id = req<int>(l, "id");
    lm.position = Vec2(req<double>(l, "x"), req<double>(l, "y"));
    lm.wall_normal = deg_to_rad(opt(l, "wall_normal_deg", 0.0));
    w.landmarks.push_back(lm);
  }
  for (std::size_t i = 0; i < w.landmarks.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (w.landmarks[i].id == w.landmarks[k].id) throw ConfigError("duplicate landmark id");
    }
  }

  const json m = opt<json>(j, "motion", json::object());
  MotionModelKind kind = MotionModelKind::omni;
  try {
    kind = motion_model_kind_from_string(opt<std::string>(m, "model", "omni"));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const MotionNoiseParams mdef;
  const ControlLimits ldef;
  env.setup.model = MotionModel(kind,
                                MotionNoiseParams{opt(m, "eta", mdef.eta), opt(m, "sigma_b_v", mdef.sigma_b_v),
                                                  opt(m, "sigma_b_omega", mdef.sigma_b_omega)},
                                ControlLimits{opt(m, "v_max", ldef.v_max), opt(m, "omega_max", ldef.omega_max)});
  if (!(env.setup.model.limits().v_max > 0.0 && env.setup.model.limits().omega_max > 0.0)) {
    throw ConfigError("control limits must be positive");
  }
  const json s = opt<json>(j, "sensor", json::object());
  SensorConfig& sc = env.setup.sensor;
  sc.fov_half_angle = deg_to_rad(opt(s, "fov_half_angle_deg", rad_to_deg(sc.fov_half_angle)));
  sc.max_range = opt(s, "max_range", std::numeric_limits<double>::infinity());
  sc.min_range = opt(s, "min_range", sc.min_range);
  if (!(sc.min_range >= 0.0 && sc.min_range < sc.max_range)) throw ConfigError("sensor min_range must be in [0, max_range)");
  sc.noise.eta_r_d = opt(s, "eta_r_d", sc.noise.eta_r_d);
  sc.noise.eta_r_phi = opt(s, "eta_r_phi", sc.noise.eta_r_phi);
  sc.noise.sigma_b_r = opt(s, "sigma_b_r", sc.noise.sigma_b_r);
  sc.noise.eta_th_d = opt(s, "eta_th_d", sc.noise.eta_th_d);
  sc.noise.eta_th_phi = opt(s, "eta_th_phi", sc.noise.eta_th_phi);
  sc.noise.sigma_b_th = deg_to_rad(opt(s, "sigma_b_th_deg", rad_to_deg(sc.noise.sigma_b_th)));
  env.setup.dt = opt(j, "dt", 0.1);
  if (!(env.setup.dt > 0.0)) throw ConfigError("dt must be positive");
  const json c = opt<json>(j, "cost", json::object());
  env.setup.weights = {opt(c, "zeta_p", 10.0), opt(c, "zeta_u", 1.0), opt(c, "zeta_t", 1.0)};
  const json ctl = opt<json>(j, "controller", json::object());
  env.setup.control.olfc_l = opt(ctl, "olfc_l", 5);
  env.setup.control.max_steps_factor = opt(ctl, "max_steps_factor", 5);
  env.setup.control.max_steps_floor = opt(ctl, "max_steps_floor", 200);
  if (env.setup.control.olfc_l < 1) throw ConfigError("olfc_l must be at least 1");

  const json waypoints = opt<json>(j, "waypoints", json::object());
  for (const auto& [name, p] : waypoints.items()) env.waypoints[name] = state_from(p);
  for (const json& r : opt<json>(j, "passages", json::array())) {
    env.passages.push_back({req<std::string>(r, "name"), polygon_from_json(req<json>(r, "polygon"))});
  }
  env.rollout_radius = opt(j, "rollout_radius", 4.0);
  return env;
}

json to_json(const GraphConfig& c) {
  return {{"k", c.k},
          {"n_mc", c.n_mc},
          {"n_mc_online", c.n_mc_online},
          {"connect_radius", c.connect_radius},
          {"radius_position", c.radii.position},
          {"radius_angle", c.radii.angle},
          {"cov_radius_factor", c.cov_radius_factor},
          {"j_fail", c.j_fail},
          {"seed", c.seed}};
}

GraphConfig graph_config_from_json(const json& j) {
  GraphConfig c;
  c.k = opt(j, "k", c.k);
  c.n_mc = opt(j, "n_mc", c.n_mc);
  c.n_mc_online = opt(j, "n_mc_online", c.n_mc_online);
  c.connect_radius = opt(j, "connect_radius", c.connect_radius);
  c.radii.position = opt(j, "radius_position", c.radii.position);
  c.radii.angle = opt(j, "radius_angle", c.radii.angle);
  c.cov_radius_factor = opt(j, "cov_radius_factor", c.cov_radius_factor);
  c.j_fail = opt(j, "j_fail", c.j_fail);
  c.seed = opt<std::uint64_t>(j, "seed", c.seed);
  if (c.k < 1 || c.n_mc < 1 || c.n_mc_online < 1) throw ConfigError("k and sample counts must be positive");
  if (!(c.radii.position > 0.0 && c.radii.angle > 0.0 && c.cov_radius_factor > 0.0)) {
    throw ConfigError("region radii must be positive");
  }
  if (!(c.j_fail > 0.0)) throw ConfigError("j_fail must be positive");
  return c;
}

json to_json(const FirmGraph& g, const Environment& env) {
  json j;
  j["type"] = "graph";
  j["version"] = kSchemaVersion;
  Environment e = env;
  e.world = g.world;
  e.setup = g.setup;
  j["environment"] = to_json(e);
  j["config"] = to_json(g.config);
  j["offline_collision_checks"] = g.offline_collision_checks;
  j["mc_samples_used"] = g.mc_samples_used;
  j["nodes"] = json::array();
  for (const FirmNode& n : g.nodes) {
    j["nodes"].push_back({{"id", n.id.value},
                          {"pose", state_json(n.point)},
                          {"P_minus", mat_json(n.stationary.P_s_minus)},
                          {"P_plus", mat_json(n.stationary.P_s_plus)},
                          {"residual", n.stationary.residual}});
  }
  j["edges"] = json::array();
  for (const FirmEdge& ed : g.edges) {
    json tp = json::object();
    for (const auto& [node, p] : ed.stats.transition_probs) tp[std::to_string(node)] = p;
    j["edges"].push_back({{"id", ed.id.value},
                          {"from", ed.from.value},
                          {"to", ed.to.value},
                          {"expected_cost", ed.stats.expected_cost},
                          {"failure_prob", ed.stats.failure_prob},
                          {"transitions", tp},
                          {"samples", ed.stats.sample_count},
                          {"mean_steps", ed.stats.mean_steps},
                          {"collision_checks", ed.stats.collision_checks}});
  }
  return j;
}

GraphFile graph_from_json(const json& j) {
  check_header(j, "graph");
  GraphFile out;
  out.env = environment_from_json(req<json>(j, "environment"));
  FirmGraph& g = out.graph;
  g.world = out.env.world;
  g.setup = out.env.setup;
  g.config = graph_config_from_json(req<json>(j, "config"));
  g.offline_collision_checks = opt<std::uint64_t>(j, "offline_collision_checks", 0);
  g.mc_samples_used = opt<std::uint64_t>(j, "mc_samples_used", 0);
  const json nodes = req<json>(j, "nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const json& n = nodes[i];
    if (req<int>(n, "id") != static_cast<int>(i)) throw ConfigError("node ids must be 0..N-1 in order");
    StationaryBeliefParams st;
    st.node_point = state_from(req<json>(n, "pose"));
    st.P_s_minus = mat_from(req<json>(n, "P_minus"));
    st.P_s_plus = mat_from(req<json>(n, "P_plus"));
    st.residual = opt(n, "residual", 0.0);
    if (!is_psd(st.P_s_plus)) throw ConfigError("node " + std::to_string(i) + " covariance is not PSD");
    g.add_node(st.node_point, st);
  }
  const json edges = req<json>(j, "edges");
  const int n_nodes = static_cast<int>(g.nodes.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const json& e = edges[i];
    if (req<int>(e, "id") != static_cast<int>(i)) throw ConfigError("edge ids must be 0..E-1 in order");
    const int from = req<int>(e, "from");
    const int to = req<int>(e, "to");
    if (from < 0 || from >= n_nodes || to < 0 || to >= n_nodes || from == to) {
      throw ConfigError("edge " + std::to_string(i) + " has bad endpoints");
    }
    const EdgeId id = g.add_edge(NodeId{from}, NodeId{to});
    EdgeStats& s = g.edge(id).stats;
    s.expected_cost = req<double>(e, "expected_cost");
    s.failure_prob = req<double>(e, "failure_prob");
    const json transitions = req<json>(e, "transitions");
    for (const auto& [k, p] : transitions.items()) {
      const int node = std::stoi(k);
      if (node < 0 || node >= n_nodes) throw ConfigError("transition to unknown node");
      s.transition_probs[node] = p.get<double>();
    }
    s.sample_count = opt(e, "samples", 0);
    s.mean_steps = opt(e, "mean_steps", 0.0);
    s.collision_checks = opt<std::uint64_t>(e, "collision_checks", 0);
    if (std::abs(s.total_probability() - 1.0) > 1e-6) throw ConfigError("edge probabilities must sum to one");
  }
  return out;
}

json to_json(const Scenario& s, double dt) {
  json j;
  j["type"] = "scenario";
  j["version"] = kSchemaVersion;
  j["start"] = state_json(s.start);
  j["goals"] = json::array();
  for (const State& g : s.goals) j["goals"].push_back(state_json(g));
  j["max_ticks"] = s.max_ticks;
  j["events"] = json::array();
  for (const RunEvent& e : s.events) {
    json payload = json::object();
    switch (e.kind) {
      case EventKind::set_goal:
      case EventKind::kidnap:
        payload = {{"x", e.pose.x()}, {"y", e.pose.y()}, {"theta", e.pose.z()}};
        break;
      case EventKind::toggle_door:
      case EventKind::remove_transient:
        payload = {{"id", e.id}};
        break;
      case EventKind::spawn_transient:
        payload = {{"id", e.id}, {"polygon", e.polygon ? to_json(*e.polygon) : json(nullptr)}};
        break;
    }
    j["events"].push_back({{"t_s", static_cast<double>(e.tick) * dt}, {"kind", to_string(e.kind)}, {"payload", payload}});
  }
  return j;
}

Scenario scenario_from_json(const json& j, double dt) {
  check_header(j, "scenario");
  Scenario s;
  s.start = state_from(req<json>(j, "start"));
  for (const json& g : opt<json>(j, "goals", json::array())) s.goals.push_back(state_from(g));
  s.max_ticks = opt<Tick>(j, "max_ticks", s.max_ticks);
  if (s.max_ticks <= 0) throw ConfigError("max_ticks must be positive");
  Tick last = 0;
  for (const json& e : opt<json>(j, "events", json::array())) {
    RunEvent ev;
    const double t = req<double>(e, "t_s");
    if (!(t >= 0.0)) throw ConfigError("event time must be nonnegative");
    ev.tick = static_cast<Tick>(std::llround(t / dt));
    if (ev.tick < last) throw ConfigError("events must be ordered by time");
    last = ev.tick;
    try {
      ev.kind = event_kind_from_string(req<std::string>(e, "kind"));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& err) {
      throw ConfigError(err.what());
    }
    const json p = opt<json>(e, "payload", json::object());
    switch (ev.kind) {
      case EventKind::set_goal:
      case EventKind::kidnap:
        ev.pose = State(req<double>(p, "x"), req<double>(p, "y"), opt(p, "theta", 0.0));
        break;
      case EventKind::toggle_door:
      case EventKind::remove_transient:
        ev.id = req<int>(p, "id");
        break;
      case EventKind::spawn_transient:
        ev.id = req<int>(p, "id");
        ev.polygon = polygon_from_json(req<json>(p, "polygon"));
        break;
    }
    s.events.push_back(std::move(ev));
  }
  return s;
}

json to_json(const RolloutDiagnostics& d) {
  json c = json::array();
  for (const CandidateSummary& s : d.candidates) {
    c.push_back({{"target", s.target.value},
                 {"continuation", s.continuation},
                 {"value", s.value},
                 {"success", s.success},
                 {"failure", s.failure}});
  }
  return {{"tick", d.tick},
          {"candidates", c},
          {"chosen", d.chosen},
          {"has_current", d.has_current},
          {"current_value", d.current_value},
          {"current_success", d.current_success},
          {"chosen_value", d.chosen_value},
          {"chosen_success", d.chosen_success},
          {"switched", d.switched},
          {"stuck", d.stuck},
          {"collision_checks", d.collision_checks}};
}

RolloutDiagnostics rollout_diagnostics_from_json(const json& j) {
  RolloutDiagnostics d;
  d.tick = req<Tick>(j, "tick");
  for (const json& c : req<json>(j, "candidates")) {
    d.candidates.push_back({NodeId{req<int>(c, "target")}, req<bool>(c, "continuation"), req<double>(c, "value"),
                            req<double>(c, "success"), req<double>(c, "failure")});
  }
  d.chosen = req<int>(j, "chosen");
  d.has_current = req<bool>(j, "has_current");
  d.current_value = req<double>(j, "current_value");
  d.current_success = req<double>(j, "current_success");
  d.chosen_value = req<double>(j, "chosen_value");
  d.chosen_success = req<double>(j, "chosen_success");
  d.switched = req<bool>(j, "switched");
  d.stuck = req<bool>(j, "stuck");
  d.collision_checks = req<std::uint64_t>(j, "collision_checks");
  return d;
}

json to_json(const TickRow& r) {
  return {{"type", "tick"},
          {"t", r.t},
          {"true_pose", state_json(r.true_pose)},
          {"mean", state_json(r.mean)},
          {"cov_trace", r.cov_trace},
          {"edge", r.active_edge},
          {"target", r.target},
          {"cost", r.cost},
          {"z_lost", r.z_lost},
          {"stabilizations", r.stabilizations}};
}

json run_summary(const RunRecord& r) {
  return {{"type", "summary"},
          {"outcome", to_string(r.outcome)},
          {"ticks", r.ticks},
          {"total_cost", r.total_cost},
          {"stabilizations", r.stabilizations},
          {"goal_ticks", r.goal_ticks},
          {"rollouts", r.rollouts.size()},
          {"dp_solves", r.dp_solves},
          {"lazy_invocations", r.lazy_invocations},
          {"lazy_edges_evaluated", r.lazy_edges_evaluated},
          {"lazy_updates", r.lazy_updates},
          {"lazy_resolves", r.lazy_resolves},
          {"nodes_inserted", r.nodes_inserted},
          {"kidnaps_detected", r.kidnaps_detected}};
}

void write_run_jsonl(std::ostream& out, const RunRecord& r) {
  out << json{{"type", "header"}, {"version", kSchemaVersion}, {"seed", r.seed}, {"policy", to_string(r.policy)}}.dump()
      << '\n';
  for (const TickRow& row : r.rows) out << to_json(row).dump() << '\n';
  for (const json& e : r.events) {
    json line = e;
    line["type"] = "event";
    out << line.dump() << '\n';
  }
  for (std::size_t i = 0; i < r.rollouts.size(); ++i) {
    json line = to_json(r.rollouts[i]);
    line["type"] = "rollout";
    if (i < r.online_checks_per_rollout.size()) line["online_checks"] = r.online_checks_per_rollout[i];
    out << line.dump() << '\n';
  }
  out << run_summary(r).dump() << '\n';
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace slap
