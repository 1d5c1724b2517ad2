#include "slap/metrics.hpp"

#include "slap/random.hpp"

#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace slap {

ComplexityCounters collect_counters(const FirmGraph& g, const RunRecord& r) {
  ComplexityCounters c;
  c.offline_collision_checks = g.offline_collision_checks;
  c.online_collision_checks_per_rollout = r.online_checks_per_rollout;
  c.edges_built = g.edges.size();
  c.mc_samples_used = g.mc_samples_used;
  return c;
}

double complexity_bound(int n_nodes, double R, double w, int d, int n_b, double dt) {
  const double N = n_nodes;
  const double rate = n_b / dt;
  return rate * std::pow(w, -d) * std::pow(R, d + 1) * N - rate / w * R * R * std::pow(N, 1.0 / d);
}

ComplexityReport complexity_bound_check(const ComplexityCounters& c, int n_nodes, double R, double w, int d, int n_b,
                                        double dt) {
  ComplexityReport rep;
  rep.bound = complexity_bound(n_nodes, R, w, d, n_b, dt);
  const auto& m = c.online_collision_checks_per_rollout;
  rep.instants = m.size();
  if (!m.empty()) {
    rep.max_measured = *std::max_element(m.begin(), m.end());
    rep.mean_measured = static_cast<double>(std::accumulate(m.begin(), m.end(), std::uint64_t{0})) /
                        static_cast<double>(m.size());
  }
  rep.ratio = rep.bound > 0.0 ? static_cast<double>(rep.max_measured) / rep.bound : 0.0;
  rep.within_bound = static_cast<double>(rep.max_measured) <= rep.bound || rep.max_measured == 0;
  return rep;
}

MeanCI bootstrap_mean(const std::vector<double>& values, int resamples, std::uint64_t seed) {
  MeanCI out;
  out.n = static_cast<int>(values.size());
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (resamples <= 0 || values.size() == 1) {
    out.lo = out.hi = out.mean;
    return out;
  }
  Rng rng = make_rng(seed, {key(Stream::bootstrap)});
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (double& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[pick(rng)];
    m = s / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  const auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::clamp(q * (resamples - 1), 0.0, resamples - 1.0));
    return means[idx];
  };
  out.lo = at(0.025);
  out.hi = at(0.975);
  return out;
}

namespace {

// Value of a cumulative column at tick t; rows[i].t == i + 1 and finished runs hold their last row.
template <class F>
auto value_at(const RunRecord& r, Tick t, F column) -> decltype(column(r.rows.front())) {
  if (r.rows.empty() || t == 0) return {};
  const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(t), r.rows.size()) - 1;
  return column(r.rows[idx]);
}

std::vector<Tick> bucket_ticks(const std::vector<std::vector<RunRecord>>& records, Tick bucket) {
  Tick horizon = 0;
  for (const auto& per_policy : records)
    for (const RunRecord& r : per_policy) horizon = std::max(horizon, r.ticks);
  std::vector<Tick> ticks;
  for (Tick t = 0; t <= horizon; t += bucket) ticks.push_back(t);
  if (ticks.back() != horizon) ticks.push_back(horizon);
  return ticks;
}

Curve make_curve(PolicyKind policy, const std::vector<SeedResult>& runs, const std::vector<Tick>& ticks) {
  Curve c;
  c.policy = policy;
  c.ticks = ticks;
  for (std::size_t b = 0; b < ticks.size(); ++b) {
    double cost = 0.0;
    double stab = 0.0;
    for (const SeedResult& r : runs) {
      cost += r.bucket_cost[b];
      stab += r.bucket_stabilizations[b];
    }
    const double n = std::max<double>(1.0, static_cast<double>(runs.size()));
    c.mean_cost.push_back(cost / n);
    c.mean_stabilizations.push_back(stab / n);
  }
  return c;
}

}  // namespace

BatchResult batch_compare(const FirmGraph& graph, const Scenario& scenario, const BatchOptions& options) {
  if (options.runs < 1) throw ContractViolation("batch needs at least one run");
  BatchResult out;
  const std::size_t n = static_cast<std::size_t>(options.runs);
  const std::size_t np = options.policies.size();
  for (std::size_t i = 0; i < n; ++i) out.seeds.push_back(options.base_seed + i);

  std::vector<std::vector<RunRecord>> records(np, std::vector<RunRecord>(n));
  tbb::parallel_for(std::size_t{0}, n * np, [&](std::size_t job) {
    const std::size_t i = job / np;
    const std::size_t p = job % np;
    ExecutorConfig cfg = options.executor;
    cfg.policy = options.policies[p];
    cfg.seed = out.seeds[i];
    cfg.record_rows = true;
    RunRecord r = run_scenario(graph, scenario, cfg);
    // Curves only need cost and stabilization columns.
    r.rollouts.clear();
    r.online_checks_per_rollout.clear();
    r.events.clear();
    records[p][i] = std::move(r);
  });

  const std::vector<Tick> buckets = bucket_ticks(records, std::max<Tick>(1, options.bucket));
  std::vector<bool> matched(n, true);
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t i = 0; i < n; ++i) matched[i] = matched[i] && records[p][i].outcome == RunOutcome::success;
  }
  out.matched = static_cast<int>(std::count(matched.begin(), matched.end(), true));

  for (std::size_t p = 0; p < np; ++p) {
    PolicySummary s;
    s.policy = options.policies[p];
    std::vector<double> cost, ticks, stab, mcost, mticks, mstab;
    for (std::size_t i = 0; i < n; ++i) {
      const RunRecord& r = records[p][i];
      SeedResult sr{out.seeds[i], r.outcome, r.total_cost, r.ticks, r.stabilizations, {}, {}};
      for (Tick t : buckets) {
        sr.bucket_cost.push_back(value_at(r, t, [](const TickRow& row) { return row.cost; }));
        sr.bucket_stabilizations.push_back(value_at(r, t, [](const TickRow& row) { return row.stabilizations; }));
      }
      s.runs.push_back(std::move(sr));
      if (r.outcome == RunOutcome::success) {
        ++s.successes;
        cost.push_back(r.total_cost);
        ticks.push_back(static_cast<double>(r.ticks));
        stab.push_back(r.stabilizations);
      } else if (r.outcome == RunOutcome::collision) {
        ++s.collisions;
      } else {
        ++s.timeouts;
      }
      if (matched[i]) {
        mcost.push_back(r.total_cost);
        mticks.push_back(static_cast<double>(r.ticks));
        mstab.push_back(r.stabilizations);
      }
    }
    const std::uint64_t bs = derive_seed(options.base_seed, {key(Stream::bootstrap), p});
    s.total_cost = bootstrap_mean(cost, options.bootstrap_resamples, derive_seed(bs, {1}));
    s.ticks = bootstrap_mean(ticks, options.bootstrap_resamples, derive_seed(bs, {2}));
    s.stabilizations = bootstrap_mean(stab, options.bootstrap_resamples, derive_seed(bs, {3}));
    s.matched_cost = bootstrap_mean(mcost, options.bootstrap_resamples, derive_seed(bs, {4}));
    s.matched_ticks = bootstrap_mean(mticks, options.bootstrap_resamples, derive_seed(bs, {5}));
    s.matched_stabilizations = bootstrap_mean(mstab, options.bootstrap_resamples, derive_seed(bs, {6}));
    out.curves.push_back(make_curve(options.policies[p], s.runs, buckets));
    out.summaries.push_back(std::move(s));
  }
  return out;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(10);
  return out;
}

void ci_cols(std::ostream& o, const MeanCI& m) { o << ',' << m.mean << ',' << m.lo << ',' << m.hi; }

}  // namespace

void write_summary_csv(const std::filesystem::path& path, const BatchResult& r) {
  std::ofstream o = open_csv(path);
  o << "policy,runs,successes,collisions,timeouts,matched,"
       "cost_mean,cost_lo,cost_hi,ticks_mean,ticks_lo,ticks_hi,stab_mean,stab_lo,stab_hi,"
       "matched_cost_mean,matched_cost_lo,matched_cost_hi,matched_ticks_mean,matched_ticks_lo,matched_ticks_hi,"
       "matched_stab_mean,matched_stab_lo,matched_stab_hi\n";
  for (const PolicySummary& s : r.summaries) {
    o << to_string(s.policy) << ',' << s.runs.size() << ',' << s.successes << ',' << s.collisions << ','
      << s.timeouts << ',' << r.matched;
    ci_cols(o, s.total_cost);
    ci_cols(o, s.ticks);
    ci_cols(o, s.stabilizations);
    ci_cols(o, s.matched_cost);
    ci_cols(o, s.matched_ticks);
    ci_cols(o, s.matched_stabilizations);
    o << '\n';
  }
}

void write_runs_csv(const std::filesystem::path& path, const BatchResult& r) {
  std::ofstream o = open_csv(path);
  o << "policy,seed,outcome,total_cost,ticks,stabilizations\n";
  for (const PolicySummary& s : r.summaries) {
    for (const SeedResult& x : s.runs) {
      o << to_string(s.policy) << ',' << x.seed << ',' << to_string(x.outcome) << ',' << x.total_cost << ','
        << x.ticks << ',' << x.stabilizations << '\n';
    }
  }
}

void write_buckets_csv(const std::filesystem::path& path, const BatchResult& r) {
  std::ofstream o = open_csv(path);
  o << "policy,seed,tick,cost,stabilizations\n";
  for (std::size_t p = 0; p < r.summaries.size(); ++p) {
    const std::vector<Tick>& ticks = r.curves[p].ticks;
    for (const SeedResult& x : r.summaries[p].runs) {
      for (std::size_t b = 0; b < ticks.size(); ++b) {
        o << to_string(r.summaries[p].policy) << ',' << x.seed << ',' << ticks[b] << ',' << x.bucket_cost[b] << ','
          << x.bucket_stabilizations[b] << '\n';
      }
    }
  }
}

std::vector<std::filesystem::path> write_curve_csvs(const std::filesystem::path& dir, const BatchResult& r) {
  std::vector<std::filesystem::path> paths;
  for (const Curve& c : r.curves) {
    const auto path = dir / ("curve_" + to_string(c.policy) + ".csv");
    std::ofstream o = open_csv(path);
    o << "tick,mean_cost,mean_stabilizations\n";
    for (std::size_t i = 0; i < c.ticks.size(); ++i) {
      o << c.ticks[i] << ',' << c.mean_cost[i] << ',' << c.mean_stabilizations[i] << '\n';
    }
    paths.push_back(path);
  }
  return paths;
}

}  // namespace slap
