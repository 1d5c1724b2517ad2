#pragma once

#include "slap/executor.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace slap {

struct ComplexityCounters {
  std::uint64_t offline_collision_checks = 0;
  std::vector<std::uint64_t> online_collision_checks_per_rollout;
  std::uint64_t edges_built = 0;
  std::uint64_t mc_samples_used = 0;
};

ComplexityCounters collect_counters(const FirmGraph& g, const RunRecord& r);

/// n_b/dt * w^-d * R^(d+1) * N  -  n_b/dt * w^-1 * R^2 * N^(1/d)
double complexity_bound(int n_nodes, double R, double w, int d, int n_b, double dt);

struct ComplexityReport {
  double bound = 0.0;
  std::uint64_t instants = 0;
  std::uint64_t max_measured = 0;
  double mean_measured = 0.0;
  double ratio = 0.0;  // max_measured / bound
  bool within_bound = true;
};

ComplexityReport complexity_bound_check(const ComplexityCounters& c, int n_nodes, double R, double w, int d, int n_b,
                                        double dt);

struct SeedResult {
  std::uint64_t seed = 0;
  RunOutcome outcome = RunOutcome::running;
  double total_cost = 0.0;
  Tick ticks = 0;
  int stabilizations = 0;
  // Cumulative cost and stabilizations at the batch's bucket ticks (aligned with Curve::ticks).
  std::vector<double> bucket_cost;
  std::vector<int> bucket_stabilizations;
};

struct MeanCI {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int n = 0;
};

/// Mean with a percentile bootstrap interval (resampling values).
MeanCI bootstrap_mean(const std::vector<double>& values, int resamples, std::uint64_t seed);

struct PolicySummary {
  PolicyKind policy = PolicyKind::firm;
  std::vector<SeedResult> runs;
  int successes = 0;
  int collisions = 0;
  int timeouts = 0;
  // Over successful runs.
  MeanCI total_cost;
  MeanCI ticks;
  MeanCI stabilizations;
  // Over seeds where every compared policy succeeded.
  MeanCI matched_cost;
  MeanCI matched_ticks;
  MeanCI matched_stabilizations;
};

/// Mean cumulative cost and stabilizations per tick bucket; finished runs hold their final value.
struct Curve {
  PolicyKind policy = PolicyKind::firm;
  std::vector<Tick> ticks;
  std::vector<double> mean_cost;
  std::vector<double> mean_stabilizations;
};

struct BatchOptions {
  int runs = 50;
  std::uint64_t base_seed = 1;
  Tick bucket = 50;
  int bootstrap_resamples = 1000;
  ExecutorConfig executor;  // policy and seed are overwritten per run
  std::vector<PolicyKind> policies{PolicyKind::firm, PolicyKind::rollout};
};

struct BatchResult {
  std::vector<std::uint64_t> seeds;
  std::vector<PolicySummary> summaries;  // one per policy, in BatchOptions::policies order
  std::vector<Curve> curves;
  int matched = 0;
};

/// Runs every policy on the same seeds (seed_i = base_seed + i) in parallel across seeds.
BatchResult batch_compare(const FirmGraph& graph, const Scenario& scenario, const BatchOptions& options);

void write_summary_csv(const std::filesystem::path& path, const BatchResult& r);
void write_runs_csv(const std::filesystem::path& path, const BatchResult& r);
/// One row per (policy, seed, tick bucket).
void write_buckets_csv(const std::filesystem::path& path, const BatchResult& r);
/// One file per policy: curve_<policy>.csv. Returns the paths written.
std::vector<std::filesystem::path> write_curve_csvs(const std::filesystem::path& dir, const BatchResult& r);

}  // namespace slap
