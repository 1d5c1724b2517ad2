#include "slap/bridge.hpp"
#include "slap/io.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <thread>

using namespace slap;

namespace {
std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Live belief-space planning session over WebSocket"};
  std::string graph_path, scenario_path, policy = "rollout", address = "127.0.0.1";
  std::uint64_t seed = 1;
  unsigned short port = 8765;
  double speed = 1.0;
  int frame_period = 1;
  app.add_option("graph", graph_path, "Graph file")->required()->check(CLI::ExistingFile);
  app.add_option("scenario", scenario_path, "Scenario file (start and initial goals)")->required()->check(CLI::ExistingFile);
  app.add_option("--policy", policy)->check(CLI::IsMember({"firm", "rollout"}));
  app.add_option("--seed", seed);
  app.add_option("--address", address, "Bind address");
  app.add_option("--port", port, "Bind port (0 picks one)");
  app.add_option("--speed", speed, "Initial sim speed multiplier")->check(CLI::PositiveNumber);
  app.add_option("--frame-period", frame_period, "Ticks between frames")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    GraphFile gf = graph_from_json(read_json_file(graph_path));
    const Scenario s = scenario_from_json(read_json_file(scenario_path), gf.graph.setup.dt);
    ExecutorConfig c;
    c.policy = policy_kind_from_string(policy);
    c.seed = seed;
    c.rollout.radius = gf.env.rollout_radius;
    c.rollout.n_mc = gf.graph.config.n_mc_online;
    SessionConfig sc;
    sc.frame_period_ticks = frame_period;
    LiveSession session(std::move(gf.graph), s, c, sc);
    Command sp;
    sp.id = "startup";
    sp.kind = CommandKind::set_speed;
    sp.multiplier = speed;
    session.submit(sp);
    BridgeServer server(session, address, port);
    std::cout << "listening on ws://" << address << ':' << server.port() << std::endl;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    session.start();
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    session.stop();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
