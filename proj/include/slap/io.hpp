#pragma once

#include "slap/executor.hpp"
#include "slap/fixtures.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <ostream>
#include <string>

namespace slap {

inline constexpr int kSchemaVersion = 1;

using nlohmann::json;

json to_json(const Polygon& p);
Polygon polygon_from_json(const json& j);

json to_json(const Environment& env);
Environment environment_from_json(const json& j);

json to_json(const GraphConfig& c);
GraphConfig graph_config_from_json(const json& j);

/// Environment, construction parameters, nodes with their stationary covariances and edge statistics.
/// Controllers are rebuilt from node poses on load.
json to_json(const FirmGraph& g, const Environment& env);

struct GraphFile {
  Environment env;
  FirmGraph graph;
};
GraphFile graph_from_json(const json& j);

/// Events are timed in seconds in the file and converted with round(t_s / dt).
json to_json(const Scenario& s, double dt);
Scenario scenario_from_json(const json& j, double dt);

json to_json(const RolloutDiagnostics& d);
RolloutDiagnostics rollout_diagnostics_from_json(const json& j);
json to_json(const TickRow& r);
json run_summary(const RunRecord& r);

/// Header line, one line per tick, events, rollout diagnostics, summary last.
void write_run_jsonl(std::ostream& out, const RunRecord& r);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace slap
