#pragma once

#include "slap/executor.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace slap {

inline constexpr int kProtocolVersion = 1;

// ---------------------------------------------------------------------------
// Message catalog
// ---------------------------------------------------------------------------

struct DoorState {
  int id = 0;
  bool closed = false;
  bool operator==(const DoorState&) const = default;
};

struct StateFrame {
  Tick tick = 0;
  double sim_time = 0.0;
  State true_pose = State::Zero();
  State mean = State::Zero();
  Mat3 covariance = Mat3::Zero();
  int active_edge = -1;
  int target = -1;
  int goal_node = -1;
  std::optional<RolloutDiagnostics> rollout;
  std::vector<DoorState> doors;
  bool z_lost = false;
  double cost = 0.0;
  int stabilizations = 0;
  int dp_solves = 0;
  RunOutcome outcome = RunOutcome::running;
  bool paused = false;
  double speed = 1.0;
};

StateFrame make_frame(const ExecutorView& v, bool paused, double speed);

enum class CommandKind { set_goal, toggle_door, kidnap, pause, resume, set_speed };
std::string to_string(CommandKind k);

struct Command {
  std::string id;
  CommandKind kind = CommandKind::pause;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  int door_id = 0;
  double multiplier = 1.0;
};

struct Ack {
  std::string id;
  bool accepted = false;
  std::string reason;
};

struct ProtocolError {
  std::string reason;
  std::optional<std::string> id;
};

nlohmann::json to_json(const StateFrame& f);
StateFrame state_frame_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Command& c);
nlohmann::json to_json(const Ack& a);
Ack ack_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProtocolError& e);
ProtocolError protocol_error_from_json(const nlohmann::json& j);

/// Parses one inbound text message. Anything that is not a well-formed command yields an error.
std::variant<Command, ProtocolError> parse_command(const std::string& text);

// ---------------------------------------------------------------------------
// Live session
// ---------------------------------------------------------------------------

struct SessionConfig {
  /// Frames are published every this many ticks (1 tick = 0.1 s of sim time gives 10 Hz).
  int frame_period_ticks = 1;
  /// Pace ticks to wall-clock time (scaled by the speed multiplier); false runs flat out.
  bool realtime = true;
  double max_speed = 50.0;
};

/// Owns the executor and its thread; serializes every mutation through the executor queue.
class LiveSession {
 public:
  using FrameSink = std::function<void(const std::string&)>;

  LiveSession(FirmGraph graph, Scenario scenario, ExecutorConfig config, SessionConfig session = {});
  ~LiveSession();

  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  void start();
  void stop();

  /// Validates and applies or enqueues a command.
  Ack submit(const Command& c);
  /// Text in, ack or error text out.
  std::string handle_message(const std::string& text);

  /// Sinks receive serialized frames from the session thread.
  int subscribe(FrameSink sink);
  void unsubscribe(int token);

  std::optional<StateFrame> latest_frame() const;
  bool paused() const { return paused_; }
  double speed() const { return speed_; }
  RunOutcome outcome() const;
  Bounds bounds() const { return bounds_; }

 private:
  void loop();
  void publish(bool force);

  std::unique_ptr<SlapExecutor> executor_;
  SessionConfig config_;
  Bounds bounds_;
  mutable std::mutex exec_mutex_;  // executor state vs. command validation
  std::mutex wait_mutex_;
  std::condition_variable wake_;
  std::atomic<bool> running_{false};
  std::atomic<bool> paused_{false};
  std::atomic<double> speed_{1.0};
  std::thread thread_;

  mutable std::mutex frame_mutex_;
  std::optional<StateFrame> latest_;
  Tick last_published_ = -1;
  std::mutex sink_mutex_;
  std::vector<std::pair<int, FrameSink>> sinks_;
  int next_token_ = 0;
};

// ---------------------------------------------------------------------------
// WebSocket transport
// ---------------------------------------------------------------------------

/// Serves a session over WebSocket text messages. Port 0 picks a free port.
class BridgeServer {
 public:
  BridgeServer(LiveSession& session, const std::string& address, unsigned short port);
  ~BridgeServer();

  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;

  unsigned short port() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace slap
