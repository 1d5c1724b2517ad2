#include "slap/firm_graph.hpp"

#include <tbb/parallel_for.h>

#include <Eigen/LU>

#include <algorithm>
#include <limits>
#include <queue>
#include <set>

namespace slap {

double EdgeStats::total_probability() const {
  double s = failure_prob;
  for (const auto& [node, p] : transition_probs) s += p;
  return s;
}

NodeId FirmGraph::nearest_node(const Vec2& p) const {
  NodeId best = kNoNode;
  double best_d = std::numeric_limits<double>::infinity();
  for (const FirmNode& n : nodes) {
    const double d = (n.point.head<2>() - p).norm();
    if (d < best_d) {
      best_d = d;
      best = n.id;
    }
  }
  return best;
}

std::optional<EdgeId> FirmGraph::find_edge(NodeId from, NodeId to) const {
  if (!from.valid() || static_cast<std::size_t>(from.value) >= out_edges.size()) return std::nullopt;
  for (EdgeId e : out_edges[from.value]) {
    if (edge(e).to == to) return e;
  }
  return std::nullopt;
}

double FirmGraph::max_dare_residual() const {
  double r = 0.0;
  for (const FirmNode& n : nodes) r = std::max(r, n.stationary.residual);
  return r;
}

NodeId FirmGraph::add_node(const State& point, const StationaryBeliefParams& stationary) {
  const NodeId id{static_cast<int>(nodes.size())};
  RegionRadii radii = config.radii;
  radii.covariance = config.cov_radius_factor * stationary.P_s_plus.norm();
  BeliefRegion region(GaussianBelief::make(stationary.node_point, stationary.P_s_plus), radii);
  nodes.push_back(FirmNode{id, stationary.node_point, stationary, region,
                           make_stabilizer(id, stationary.node_point, setup.control)});
  regions.push_back(region);
  out_edges.emplace_back();
  (void)point;
  return id;
}

EdgeId FirmGraph::add_edge(NodeId from, NodeId to) {
  const EdgeId id{static_cast<int>(edges.size())};
  FirmEdge e;
  e.id = id;
  e.from = from;
  e.to = to;
  e.controller = make_controller(node(from).point, from, to, node(to).point, setup.model, setup.dt, setup.control);
  e.controller.edge = id;
  e.stats.edge = id;
  edges.push_back(std::move(e));
  out_edges[from.value].push_back(id);
  return id;
}

std::pair<int, int> grid_shape(int n) {
  int rows = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
  while (rows > 1 && n % rows != 0) --rows;
  return {rows, n / rows};
}

namespace {

bool valid_node_point(const State& p, const WorldModel& world, const SimSetup& setup, const ObstacleMap& map) {
  if (map.collides(p)) return false;
  try {
    stationary_kf(p, world.landmarks, setup.sensor, &map, setup.model, setup.dt);
    return true;
  } catch (const UnobservableNode&) {
    return false;
  } catch (const DegenerateNoise&) {
    return false;
  }
}

}  // namespace

std::vector<State> sample_nodes(const WorldModel& world, const SimSetup& setup, int n, SamplingStrategy strategy,
                                std::uint64_t seed, const std::vector<State>& required) {
  if (n < 2) throw ContractViolation("at least two nodes are required");
  const ObstacleMap map = ObstacleMap::believed(world, BeliefMap::initial(world));
  std::vector<State> out;
  for (const State& r : required) {
    if (!valid_node_point(r, world, setup, map)) {
      throw ConstructionError("required node point (" + std::to_string(r.x()) + ", " + std::to_string(r.y()) +
                              ") is in collision or unobservable");
    }
    out.push_back(r);
  }
  const Bounds& b = world.bounds;
  if (strategy == SamplingStrategy::grid) {
    const auto [rows, cols] = grid_shape(n);
    const bool wide = b.width() >= b.height();
    const int nx = wide ? cols : rows;
    const int ny = wide ? rows : cols;
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const State p(b.x_min + (ix + 0.5) * b.width() / nx, b.y_min + (iy + 0.5) * b.height() / ny, 0.0);
        if (!valid_node_point(p, world, setup, map)) {
          throw ConstructionError("grid cell center (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) +
                                  ") is not a valid node");
        }
        out.push_back(p);
      }
    }
    return out;
  }
  Rng rng = make_rng(seed, {key(Stream::sampling)});
  std::uniform_real_distribution<double> ux(b.x_min, b.x_max);
  std::uniform_real_distribution<double> uy(b.y_min, b.y_max);
  std::uniform_real_distribution<double> uth(-kPi, kPi);
  const std::size_t target = required.size() + static_cast<std::size_t>(n);
  int attempts = 0;
  while (out.size() < target) {
    if (++attempts > 200000) throw ConstructionError("could not place the requested number of nodes");
    const double x = ux(rng);
    const double y = uy(rng);
    const State p(x, y, uth(rng));
    if (valid_node_point(p, world, setup, map)) out.push_back(p);
  }
  return out;
}

EdgeStats estimate_edge_stats(const FirmGraph& g, const LocalController& c, const ControllerCursor& cursor,
                              const GaussianBelief& start, const ObstacleMap& map, int samples,
                              std::uint64_t stream_seed, bool inject_noise) {
  if (samples < 1) throw ContractViolation("at least one Monte-Carlo sample is required");
  EdgeStats s;
  s.edge = c.edge;
  SimContext ctx;
  ctx.setup = &g.setup;
  ctx.world = &g.world;
  ctx.map = &map;
  ctx.regions = g.regions;
  ctx.inject_noise = inject_noise;
  ctx.collision_counter = &s.collision_checks;
  std::map<int, int> hits;
  int failures = 0;
  double cost = 0.0;
  double steps = 0.0;
  for (int i = 0; i < samples; ++i) {
    Rng rng(derive_seed(stream_seed, {static_cast<std::uint64_t>(i)}));
    const State x0 = inject_noise ? sample_state(start, rng) : start.mean;
    const EdgeOutcome o = execute_edge(ctx, start, x0, c, cursor, rng);
    cost += o.cost;
    steps += o.steps;
    if (o.kind == EdgeOutcomeKind::absorbed) ++hits[o.node.value];
    else ++failures;
  }
  const double n = samples;
  s.sample_count = samples;
  s.expected_cost = cost / n;
  s.mean_steps = steps / n;
  s.failure_prob = failures / n;
  for (const auto& [node, count] : hits) s.transition_probs[node] = count / n;
  return s;
}

EdgeStats evaluate_graph_edge(const FirmGraph& g, const FirmEdge& e, const ObstacleMap& map, int samples,
                              std::uint64_t stream_seed) {
  EdgeStats s = estimate_edge_stats(g, e.controller, ControllerCursor{}, g.node(e.from).belief(), map, samples,
                                    stream_seed);
  s.edge = e.id;
  return s;
}

FirmGraph build_graph(const WorldModel& world, const SimSetup& setup, const GraphConfig& config,
                      const std::vector<State>& points) {
  if (config.k < 1) throw ContractViolation("k must be at least 1");
  if (config.n_mc < 1) throw ContractViolation("n_mc must be at least 1");
  FirmGraph g;
  g.world = world;
  g.setup = setup;
  g.config = config;
  const ObstacleMap map = ObstacleMap::believed(world, BeliefMap::initial(world));

  std::vector<StationaryBeliefParams> stationary(points.size());
  tbb::parallel_for(std::size_t{0}, points.size(), [&](std::size_t i) {
    stationary[i] = stationary_kf(points[i], world.landmarks, setup.sensor, &map, setup.model, setup.dt);
  });
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if ((points[i] - points[j]).norm() < 1e-6) throw ConstructionError("duplicate node points");
    }
    g.add_node(points[i], stationary[i]);
  }

  std::set<std::pair<int, int>> pairs;
  const int n = static_cast<int>(g.nodes.size());
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> by_dist;
    for (int j = 0; j < n; ++j) {
      if (j != i) by_dist.emplace_back((g.nodes[i].point.head<2>() - g.nodes[j].point.head<2>()).norm(), j);
    }
    std::sort(by_dist.begin(), by_dist.end());
    int connected = 0;
    for (const auto& [d, j] : by_dist) {
      if (connected >= config.k) break;
      if (!map.segment_free(g.nodes[i].point.head<2>(), g.nodes[j].point.head<2>())) continue;
      pairs.insert({i, j});
      pairs.insert({j, i});
      ++connected;
    }
  }
  for (const auto& [a, b] : pairs) g.add_edge(NodeId{a}, NodeId{b});

  tbb::parallel_for(std::size_t{0}, g.edges.size(), [&](std::size_t i) {
    FirmEdge& e = g.edges[i];
    const std::uint64_t stream = derive_seed(
        config.seed, {key(Stream::offline_edge), key(std::int64_t{e.from.value}), key(std::int64_t{e.to.value})});
    e.stats = evaluate_graph_edge(g, e, map, config.n_mc, stream);
  });
  for (const FirmEdge& e : g.edges) {
    g.offline_collision_checks += e.stats.collision_checks;
    g.mc_samples_used += static_cast<std::uint64_t>(e.stats.sample_count);
  }
  return g;
}

DpProblem dp_problem(const FirmGraph& g) {
  DpProblem p;
  p.n = static_cast<int>(g.nodes.size());
  p.edges.reserve(g.edges.size());
  for (const FirmEdge& e : g.edges) {
    DpEdge d;
    d.id = e.id.value;
    d.from = e.from.value;
    d.cost = e.stats.expected_cost;
    d.p_fail = e.stats.failure_prob;
    for (const auto& [node, prob] : e.stats.transition_probs) d.next.emplace_back(node, prob);
    p.edges.push_back(std::move(d));
  }
  return p;
}

double edge_value(const DpEdge& e, const std::vector<double>& J, double j_fail) {
  double v = e.cost + e.p_fail * j_fail;
  for (const auto& [node, prob] : e.next) v += prob * J[static_cast<std::size_t>(node)];
  return v;
}

namespace {

std::vector<std::vector<const DpEdge*>> outgoing(const DpProblem& p) {
  std::vector<std::vector<const DpEdge*>> out(static_cast<std::size_t>(p.n));
  for (const DpEdge& e : p.edges) out.at(static_cast<std::size_t>(e.from)).push_back(&e);
  for (auto& v : out) std::sort(v.begin(), v.end(), [](const DpEdge* a, const DpEdge* b) { return a->id < b->id; });
  return out;
}

bool strictly_less(double a, double b) { return a < b - 1e-12 * std::max(1.0, std::abs(b)); }

std::vector<int> greedy(const std::vector<std::vector<const DpEdge*>>& out, const std::vector<double>& J, int goal,
                        double j_fail) {
  std::vector<int> pol(out.size(), -1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (static_cast<int>(i) == goal) continue;
    double best = j_fail;
    for (const DpEdge* e : out[i]) {
      const double q = edge_value(*e, J, j_fail);
      if (strictly_less(q, best)) {
        best = q;
        pol[i] = e->id;
      }
    }
  }
  return pol;
}

}  // namespace

FirmPolicy solve_dp(const DpProblem& p, int goal, double j_fail, const DpOptions& options) {
  if (goal < 0 || goal >= p.n) throw ContractViolation("goal is not a node of the graph");
  const auto out = outgoing(p);
  const std::size_t n = static_cast<std::size_t>(p.n);
  std::vector<double> J(n, j_fail);
  J[static_cast<std::size_t>(goal)] = 0.0;

  FirmPolicy pol;
  pol.goal = NodeId{goal};
  pol.j_fail = j_fail;
  bool converged = false;
  std::vector<double> next(n);
  for (long sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<int>(i) == goal) {
        next[i] = 0.0;
        continue;
      }
      double best = j_fail;
      for (const DpEdge* e : out[i]) best = std::min(best, edge_value(*e, J, j_fail));
      next[i] = best;
      diff = std::max(diff, std::abs(best - J[i]));
    }
    J.swap(next);
    pol.sweeps = static_cast<int>(sweep);
    if (diff < options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw PlanningError("value iteration did not converge");

  // Exact evaluation of the greedy policy removes the residual value-iteration error.
  std::vector<const DpEdge*> by_id;
  for (const DpEdge& e : p.edges) {
    if (static_cast<std::size_t>(e.id) >= by_id.size()) by_id.resize(static_cast<std::size_t>(e.id) + 1, nullptr);
    by_id[static_cast<std::size_t>(e.id)] = &e;
  }
  std::vector<int> choice = greedy(out, J, goal, j_fail);
  for (int iter = 0; iter < 50; ++iter) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(p.n, p.n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p.n);
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<int>(i) == goal) continue;
      if (choice[i] < 0) {
        b[static_cast<Eigen::Index>(i)] = j_fail;
        continue;
      }
      const DpEdge& e = *by_id[static_cast<std::size_t>(choice[i])];
      b[static_cast<Eigen::Index>(i)] = e.cost + e.p_fail * j_fail;
      for (const auto& [node, prob] : e.next) {
        if (node != goal) A(static_cast<Eigen::Index>(i), node) -= prob;
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) break;
    const Eigen::VectorXd x = lu.solve(b);
    bool sane = x.allFinite();
    for (Eigen::Index i = 0; sane && i < x.size(); ++i) sane = x[i] >= -1e-9 && x[i] <= j_fail + 1e-6;
    if (!sane) break;
    for (std::size_t i = 0; i < n; ++i) J[i] = std::clamp(x[static_cast<Eigen::Index>(i)], 0.0, j_fail);
    std::vector<int> again = greedy(out, J, goal, j_fail);
    if (again == choice) break;
    choice = std::move(again);
  }

  pol.cost_to_go = J;
  pol.feedback.assign(n, kNoEdge);
  for (std::size_t i = 0; i < n; ++i) {
    if (choice[i] >= 0) pol.feedback[i] = EdgeId{choice[i]};
  }
  pol.success_prob.assign(n, 0.0);
  return pol;
}

FirmPolicy solve_dp(const FirmGraph& g, NodeId goal, double j_fail) {
  return solve_dp(dp_problem(g), goal.value, j_fail);
}

std::vector<double> success_probabilities(const DpProblem& p, const FirmPolicy& policy) {
  const int goal = policy.goal.value;
  std::vector<const DpEdge*> by_id;
  for (const DpEdge& e : p.edges) {
    if (static_cast<std::size_t>(e.id) >= by_id.size()) by_id.resize(static_cast<std::size_t>(e.id) + 1, nullptr);
    by_id[static_cast<std::size_t>(e.id)] = &e;
  }
  std::vector<int> index(static_cast<std::size_t>(p.n), -1);
  std::vector<int> transient;
  for (int i = 0; i < p.n; ++i) {
    if (i != goal && policy.feedback.at(static_cast<std::size_t>(i)).valid()) {
      index[static_cast<std::size_t>(i)] = static_cast<int>(transient.size());
      transient.push_back(i);
    }
  }
  const Eigen::Index m = static_cast<Eigen::Index>(transient.size());
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const DpEdge& e = *by_id.at(static_cast<std::size_t>(policy.feedback[static_cast<std::size_t>(transient[a])].value));
    for (const auto& [node, prob] : e.next) {
      if (node == goal) r[a] += prob;
      else if (index[static_cast<std::size_t>(node)] >= 0) T(a, index[static_cast<std::size_t>(node)]) += prob;
      // Landing on a node without feedback counts as failure.
    }
  }
  std::vector<double> s(static_cast<std::size_t>(p.n), 0.0);
  if (goal >= 0 && goal < p.n) s[static_cast<std::size_t>(goal)] = 1.0;
  if (m == 0) return s;
  const Eigen::MatrixXd IminusT = Eigen::MatrixXd::Identity(m, m) - T;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(IminusT);
  if (!lu.isInvertible()) throw PlanningError("absorbing chain is singular: probability mass never absorbs");
  const Eigen::VectorXd x = lu.solve(r);
  for (Eigen::Index a = 0; a < m; ++a) s[static_cast<std::size_t>(transient[a])] = std::clamp(x[a], 0.0, 1.0);
  return s;
}

FirmPolicy solve_policy(const FirmGraph& g, NodeId goal) {
  const DpProblem p = dp_problem(g);
  FirmPolicy pol = solve_dp(p, goal.value, g.config.j_fail);
  pol.success_prob = success_probabilities(p, pol);
  return pol;
}

InsertResult insert_node_online(FirmGraph& g, const State& point, double radius, int n_mc, const ObstacleMap& map,
                                std::uint64_t seed) {
  InsertResult res;
  State p = point;
  p.z() = wrap_angle(p.z());
  for (const FirmNode& n : g.nodes) {
    if ((n.point.head<2>() - p.head<2>()).norm() < 1e-6 && angle_distance(n.point.z(), p.z()) < 1e-6) {
      res.node = n.id;
      return res;
    }
  }
  if (map.collides(p)) throw ConstructionError("inserted node is in collision");
  StationaryBeliefParams st;
  try {
    st = stationary_kf(p, g.world.landmarks, g.setup.sensor, &map, g.setup.model, g.setup.dt);
  } catch (const UnobservableNode& e) {
    throw ConstructionError(std::string("inserted node is unobservable: ") + e.what());
  }
  const NodeId id = g.add_node(p, st);
  res.node = id;
  res.inserted = true;

  std::vector<std::pair<double, int>> near;
  for (const FirmNode& n : g.nodes) {
    if (n.id == id) continue;
    const double d = (n.point.head<2>() - p.head<2>()).norm();
    if (map.segment_free(p.head<2>(), n.point.head<2>())) near.emplace_back(d, n.id.value);
  }
  std::sort(near.begin(), near.end());
  for (std::size_t i = 0; i < near.size(); ++i) {
    // Keep at least k neighbors so a node in a sparse area is still connected.
    if (near[i].first > radius && static_cast<int>(i) >= g.config.k) break;
    res.new_edges.push_back(g.add_edge(id, NodeId{near[i].second}));
    res.new_edges.push_back(g.add_edge(NodeId{near[i].second}, id));
  }
  tbb::parallel_for(std::size_t{0}, res.new_edges.size(), [&](std::size_t i) {
    FirmEdge& e = g.edge(res.new_edges[i]);
    const std::uint64_t stream = derive_seed(
        seed, {key(Stream::online_edge), key(std::int64_t{e.from.value}), key(std::int64_t{e.to.value})});
    e.stats = evaluate_graph_edge(g, e, map, n_mc, stream);
  });
  return res;
}

std::vector<NodeId> shortest_path_baseline(const FirmGraph& g, NodeId start, NodeId goal) {
  const std::size_t n = g.nodes.size();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> prev(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[static_cast<std::size_t>(start.value)] = 0.0;
  pq.push({0.0, start.value});
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    if (u == goal.value) break;
    for (EdgeId eid : g.out_edges[static_cast<std::size_t>(u)]) {
      const FirmEdge& e = g.edge(eid);
      const double w = (g.node(e.to).point.head<2>() - g.node(e.from).point.head<2>()).norm();
      const std::size_t v = static_cast<std::size_t>(e.to.value);
      if (d + w < dist[v]) {
        dist[v] = d + w;
        prev[v] = u;
        pq.push({dist[v], e.to.value});
      }
    }
  }
  std::vector<NodeId> path;
  if (!std::isfinite(dist[static_cast<std::size_t>(goal.value)])) return path;
  for (int v = goal.value; v >= 0; v = prev[static_cast<std::size_t>(v)]) path.push_back(NodeId{v});
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<NodeId> most_likely_path(const FirmGraph& g, const FirmPolicy& policy, NodeId start) {
  std::vector<NodeId> path{start};
  std::vector<bool> seen(g.nodes.size(), false);
  NodeId cur = start;
  seen[static_cast<std::size_t>(cur.value)] = true;
  while (cur != policy.goal) {
    const EdgeId e = policy.next(cur);
    if (!e.valid()) break;
    cur = g.edge(e).to;
    if (seen[static_cast<std::size_t>(cur.value)]) break;
    seen[static_cast<std::size_t>(cur.value)] = true;
    path.push_back(cur);
  }
  return path;
}

}  // namespace slap
