#include "slap/bridge.hpp"

#include "slap/io.hpp"

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <cmath>
#include <deque>
#include <future>

namespace slap {

namespace {

json pose_json(const State& x) { return json::array({x.x(), x.y(), x.z()}); }

State pose_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("pose must have three entries");
  return State(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

void check_envelope(const json& j, const char* type) {
  if (!j.is_object()) throw ConfigError("message must be an object");
  if (!j.contains("type") || j["type"] != type) throw ConfigError(std::string("expected message type ") + type);
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != kProtocolVersion) {
    throw ConfigError("unsupported protocol version");
  }
}

RunOutcome outcome_from_string(const std::string& s) {
  for (RunOutcome o : {RunOutcome::running, RunOutcome::success, RunOutcome::collision, RunOutcome::timeout}) {
    if (to_string(o) == s) return o;
  }
  throw ConfigError("unknown outcome " + s);
}

}  // namespace

StateFrame make_frame(const ExecutorView& v, bool paused, double speed) {
  StateFrame f;
  f.tick = v.tick;
  f.sim_time = v.sim_time;
  f.true_pose = v.true_pose;
  f.mean = v.belief.mean;
  f.covariance = v.belief.covariance;
  f.active_edge = v.active_edge;
  f.target = v.target;
  f.goal_node = v.goal_node;
  f.rollout = v.last_rollout;
  for (const auto& [id, closed] : v.doors) f.doors.push_back({id, closed});
  f.z_lost = v.z_lost;
  f.cost = v.cost;
  f.stabilizations = v.stabilizations;
  f.dp_solves = v.dp_solves;
  f.outcome = v.outcome;
  f.paused = paused;
  f.speed = speed;
  return f;
}

std::string to_string(CommandKind k) {
  switch (k) {
    case CommandKind::set_goal: return "set_goal";
    case CommandKind::toggle_door: return "toggle_door";
    case CommandKind::kidnap: return "kidnap";
    case CommandKind::pause: return "pause";
    case CommandKind::resume: return "resume";
    case CommandKind::set_speed: return "set_speed";
  }
  return "unknown";
}

json to_json(const StateFrame& f) {
  json cov = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cov.push_back(f.covariance(r, c));
  json doors = json::array();
  for (const DoorState& d : f.doors) doors.push_back({{"id", d.id}, {"closed", d.closed}});
  return {{"type", "state_frame"},
          {"version", kProtocolVersion},
          {"tick", f.tick},
          {"sim_time", f.sim_time},
          {"true_pose", pose_json(f.true_pose)},
          {"mean", pose_json(f.mean)},
          {"covariance", cov},
          {"active_edge", f.active_edge},
          {"target", f.target},
          {"goal_node", f.goal_node},
          {"rollout", f.rollout ? to_json(*f.rollout) : json(nullptr)},
          {"doors", doors},
          {"z_lost", f.z_lost},
          {"cost", f.cost},
          {"stabilizations", f.stabilizations},
          {"dp_solves", f.dp_solves},
          {"outcome", to_string(f.outcome)},
          {"paused", f.paused},
          {"speed", f.speed}};
}

StateFrame state_frame_from_json(const json& j) {
  check_envelope(j, "state_frame");
  try {
    StateFrame f;
    f.tick = j.at("tick").get<Tick>();
    f.sim_time = j.at("sim_time").get<double>();
    f.true_pose = pose_from(j.at("true_pose"));
    f.mean = pose_from(j.at("mean"));
    const json& cov = j.at("covariance");
    if (!cov.is_array() || cov.size() != 9) throw ConfigError("covariance must have nine entries");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) f.covariance(r, c) = cov[static_cast<std::size_t>(3 * r + c)].get<double>();
    f.active_edge = j.at("active_edge").get<int>();
    f.target = j.at("target").get<int>();
    f.goal_node = j.at("goal_node").get<int>();
    if (!j.at("rollout").is_null()) f.rollout = rollout_diagnostics_from_json(j.at("rollout"));
    for (const json& d : j.at("doors")) f.doors.push_back({d.at("id").get<int>(), d.at("closed").get<bool>()});
    f.z_lost = j.at("z_lost").get<bool>();
    f.cost = j.at("cost").get<double>();
    f.stabilizations = j.at("stabilizations").get<int>();
    f.dp_solves = j.at("dp_solves").get<int>();
    f.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    f.paused = j.at("paused").get<bool>();
    f.speed = j.at("speed").get<double>();
    return f;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad state frame: ") + e.what());
  }
}

json to_json(const Command& c) {
  json payload = json::object();
  switch (c.kind) {
    case CommandKind::set_goal: payload = {{"x", c.x}, {"y", c.y}}; break;
    case CommandKind::kidnap: payload = {{"x", c.x}, {"y", c.y}, {"theta", c.theta}}; break;
    case CommandKind::toggle_door: payload = {{"id", c.door_id}}; break;
    case CommandKind::set_speed: payload = {{"multiplier", c.multiplier}}; break;
    case CommandKind::pause:
    case CommandKind::resume: break;
  }
  return {{"type", "command"}, {"version", kProtocolVersion}, {"id", c.id}, {"kind", to_string(c.kind)},
          {"payload", payload}};
}

json to_json(const Ack& a) {
  return {{"type", "ack"},
          {"version", kProtocolVersion},
          {"id", a.id},
          {"status", a.accepted ? "accepted" : "rejected"},
          {"reason", a.reason}};
}

Ack ack_from_json(const json& j) {
  check_envelope(j, "ack");
  try {
    const std::string status = j.at("status").get<std::string>();
    if (status != "accepted" && status != "rejected") throw ConfigError("bad ack status " + status);
    return {j.at("id").get<std::string>(), status == "accepted", j.value("reason", std::string{})};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad ack: ") + e.what());
  }
}

json to_json(const ProtocolError& e) {
  json j = {{"type", "error"}, {"version", kProtocolVersion}, {"reason", e.reason}};
  j["id"] = e.id ? json(*e.id) : json(nullptr);
  return j;
}

ProtocolError protocol_error_from_json(const json& j) {
  check_envelope(j, "error");
  try {
    ProtocolError e;
    e.reason = j.at("reason").get<std::string>();
    if (j.contains("id") && !j["id"].is_null()) e.id = j["id"].get<std::string>();
    return e;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("bad error message: ") + ex.what());
  }
}

std::variant<Command, ProtocolError> parse_command(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    return ProtocolError{"malformed message: not valid JSON", std::nullopt};
  }
  std::optional<std::string> id;
  if (j.is_object() && j.contains("id") && j["id"].is_string()) id = j["id"].get<std::string>();
  const auto fail = [&](const std::string& why) { return ProtocolError{why, id}; };
  if (!j.is_object()) return fail("malformed message: expected an object");
  if (!j.contains("type") || !j["type"].is_string()) return fail("malformed message: missing type");
  if (j["type"] != "command") return fail("unsupported message type " + j["type"].get<std::string>());
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != kProtocolVersion) {
    return fail("unsupported protocol version");
  }
  if (!id || id->empty()) return fail("command needs a non-empty string id");
  if (!j.contains("kind") || !j["kind"].is_string()) return fail("command needs a kind");
  const std::string kind = j["kind"].get<std::string>();
  const json payload = j.value("payload", json::object());
  if (!payload.is_object()) return fail("payload must be an object");

  const auto number = [&](const char* k, double& out) {
    if (!payload.contains(k) || !payload[k].is_number()) return false;
    out = payload[k].get<double>();
    return std::isfinite(out);
  };
  Command c;
  c.id = *id;
  if (kind == "set_goal") {
    c.kind = CommandKind::set_goal;
    if (!number("x", c.x) || !number("y", c.y)) return fail("set_goal needs numeric x and y");
    if (payload.contains("theta") && !number("theta", c.theta)) return fail("theta must be numeric");
  } else if (kind == "kidnap") {
    c.kind = CommandKind::kidnap;
    if (!number("x", c.x) || !number("y", c.y)) return fail("kidnap needs numeric x and y");
    if (payload.contains("theta") && !number("theta", c.theta)) return fail("theta must be numeric");
  } else if (kind == "toggle_door") {
    c.kind = CommandKind::toggle_door;
    if (!payload.contains("id") || !payload["id"].is_number_integer()) return fail("toggle_door needs an integer id");
    c.door_id = payload["id"].get<int>();
  } else if (kind == "set_speed") {
    c.kind = CommandKind::set_speed;
    if (!number("multiplier", c.multiplier)) return fail("set_speed needs a numeric multiplier");
  } else if (kind == "pause") {
    c.kind = CommandKind::pause;
  } else if (kind == "resume") {
    c.kind = CommandKind::resume;
  } else {
    return fail("unknown command kind " + kind);
  }
  return c;
}

// ---------------------------------------------------------------------------

LiveSession::LiveSession(FirmGraph graph, Scenario scenario, ExecutorConfig config, SessionConfig session)
    : config_(session), bounds_(graph.world.bounds) {
  config.idle_when_done = true;
  executor_ = std::make_unique<SlapExecutor>(std::move(graph), std::move(scenario), config);
  publish(true);
}

LiveSession::~LiveSession() { stop(); }

void LiveSession::start() {
  if (running_.exchange(true)) return;
  thread_ = std::thread([this] { loop(); });
}

void LiveSession::stop() {
  running_ = false;
  wake_.notify_all();
  if (thread_.joinable()) thread_.join();
}

RunOutcome LiveSession::outcome() const {
  std::lock_guard<std::mutex> lock(exec_mutex_);
  return executor_->record().outcome;
}

std::optional<StateFrame> LiveSession::latest_frame() const {
  std::lock_guard<std::mutex> lock(frame_mutex_);
  return latest_;
}

int LiveSession::subscribe(FrameSink sink) {
  std::lock_guard<std::mutex> lock(sink_mutex_);
  sinks_.emplace_back(next_token_, std::move(sink));
  return next_token_++;
}

void LiveSession::unsubscribe(int token) {
  std::lock_guard<std::mutex> lock(sink_mutex_);
  std::erase_if(sinks_, [&](const auto& s) { return s.first == token; });
}

void LiveSession::publish(bool force) {
  StateFrame f;
  {
    std::lock_guard<std::mutex> lock(exec_mutex_);
    f = make_frame(executor_->view(), paused_, speed_);
  }
  {
    std::lock_guard<std::mutex> lock(frame_mutex_);
    if (f.tick <= last_published_ && !force) return;
    if (f.tick <= last_published_) {
      latest_ = f;
      return;
    }
    last_published_ = f.tick;
    latest_ = f;
  }
  const std::string text = to_json(f).dump();
  std::lock_guard<std::mutex> lock(sink_mutex_);
  for (const auto& [token, sink] : sinks_) sink(text);
}

void LiveSession::loop() {
  using clock = std::chrono::steady_clock;
  auto next = clock::now();
  const double dt = [&] {
    std::lock_guard<std::mutex> lock(exec_mutex_);
    return executor_->graph().setup.dt;
  }();
  while (running_) {
    bool finished = false;
    {
      std::lock_guard<std::mutex> lock(exec_mutex_);
      finished = executor_->finished();
    }
    if (paused_ || finished) {
      std::unique_lock<std::mutex> lock(wait_mutex_);
      wake_.wait_for(lock, std::chrono::milliseconds(50));
      next = clock::now();
      continue;
    }
    Tick tick = 0;
    {
      std::lock_guard<std::mutex> lock(exec_mutex_);
      executor_->step();
      tick = executor_->tick();
      finished = executor_->finished();
    }
    if (finished || tick % std::max(1, config_.frame_period_ticks) == 0) publish(false);
    if (config_.realtime) {
      next += std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(dt / speed_.load()));
      std::unique_lock<std::mutex> lock(wait_mutex_);
      wake_.wait_until(lock, next, [&] { return !running_; });
    }
  }
}

Ack LiveSession::submit(const Command& c) {
  Ack a{c.id, false, ""};
  switch (c.kind) {
    case CommandKind::pause:
      paused_ = true;
      a.accepted = true;
      return a;
    case CommandKind::resume:
      paused_ = false;
      wake_.notify_all();
      a.accepted = true;
      return a;
    case CommandKind::set_speed:
      if (!(c.multiplier > 0.0) || c.multiplier > config_.max_speed) {
        a.reason = "speed multiplier must be in (0, " + std::to_string(config_.max_speed) + "]";
        return a;
      }
      speed_ = c.multiplier;
      a.accepted = true;
      return a;
    default:
      break;
  }
  RunEvent e;
  switch (c.kind) {
    case CommandKind::set_goal:
      e.kind = EventKind::set_goal;
      e.pose = State(c.x, c.y, c.theta);
      break;
    case CommandKind::kidnap:
      e.kind = EventKind::kidnap;
      e.pose = State(c.x, c.y, c.theta);
      break;
    default:
      e.kind = EventKind::toggle_door;
      e.id = c.door_id;
      break;
  }
  if (e.kind != EventKind::toggle_door && !bounds_.contains(e.pose.head<2>())) {
    a.reason = "target outside the world bounds";
    return a;
  }
  std::lock_guard<std::mutex> lock(exec_mutex_);
  if (executor_->finished()) {
    a.reason = "run has ended (" + to_string(executor_->record().outcome) + ")";
    return a;
  }
  if (auto why = executor_->validate(e)) {
    a.reason = *why;
    return a;
  }
  e.tick = executor_->tick();
  executor_->enqueue(std::move(e));
  a.accepted = true;
  return a;
}

std::string LiveSession::handle_message(const std::string& text) {
  auto parsed = parse_command(text);
  if (auto* err = std::get_if<ProtocolError>(&parsed)) return to_json(*err).dump();
  return to_json(submit(std::get<Command>(parsed))).dump();
}

// ---------------------------------------------------------------------------

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, LiveSession& session) : ws_(std::move(socket)), session_(session) {}
  ~Connection() { detach(); }

  void run() {
    net::dispatch(ws_.get_executor(), beast::bind_front_handler(&Connection::on_run, shared_from_this()));
  }

  void detach() {
    const int t = token_.exchange(-1);
    if (t >= 0) session_.unsubscribe(t);
  }

  // Drops the TCP connection; pending operations complete with errors.
  void shutdown() {
    net::dispatch(ws_.get_executor(), [self = shared_from_this()] {
      self->closed_ = true;
      beast::error_code ec;
      self->ws_.next_layer().socket().shutdown(tcp::socket::shutdown_both, ec);
      self->ws_.next_layer().socket().close(ec);
    });
  }

 private:
  void on_run() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
  }

  void on_accept(beast::error_code ec) {
    if (ec) return;
    ws_.text(true);
    std::weak_ptr<Connection> weak = weak_from_this();
    token_ = session_.subscribe([weak](const std::string& frame) {
      if (auto self = weak.lock()) self->deliver_frame(frame);
    });
    if (auto f = session_.latest_frame()) pending_frame_ = to_json(*f).dump();
    maybe_write();
    do_read();
  }

  void deliver_frame(std::string frame) {
    net::post(ws_.get_executor(), [self = shared_from_this(), frame = std::move(frame)]() mutable {
      self->pending_frame_ = std::move(frame);  // latest frame wins
      self->maybe_write();
    });
  }

  void do_read() { ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      closed_ = true;
      detach();
      return;
    }
    std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    replies_.push_back(session_.handle_message(text));
    maybe_write();
    do_read();
  }

  void maybe_write() {
    if (writing_ || closed_) return;
    if (!replies_.empty()) {
      out_ = std::move(replies_.front());
      replies_.pop_front();
    } else if (pending_frame_) {
      out_ = std::move(*pending_frame_);
      pending_frame_.reset();
    } else {
      return;
    }
    writing_ = true;
    ws_.async_write(net::buffer(out_), beast::bind_front_handler(&Connection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    writing_ = false;
    if (ec) {
      closed_ = true;
      detach();
      return;
    }
    maybe_write();
  }

  websocket::stream<beast::tcp_stream> ws_;
  LiveSession& session_;
  beast::flat_buffer buffer_;
  std::deque<std::string> replies_;  // acks and errors are never dropped
  std::optional<std::string> pending_frame_;
  std::string out_;
  bool writing_ = false;
  bool closed_ = false;
  std::atomic<int> token_{-1};
};

}  // namespace

struct BridgeServer::Impl {
  LiveSession& session;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::thread thread;
  std::future<void> finished;
  std::mutex conn_mutex;
  std::vector<std::weak_ptr<Connection>> connections;
  bool stopped = false;
  unsigned short bound_port = 0;

  explicit Impl(LiveSession& s) : session(s) {}

  void do_accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto c = std::make_shared<Connection>(std::move(socket), session);
      {
        std::lock_guard<std::mutex> lock(conn_mutex);
        std::erase_if(connections, [](const auto& w) { return w.expired(); });
        connections.push_back(c);
      }
      c->run();
      do_accept();
    });
  }
};

BridgeServer::BridgeServer(LiveSession& session, const std::string& address, unsigned short port)
    : impl_(std::make_unique<Impl>(session)) {
  const tcp::endpoint ep(net::ip::make_address(address), port);
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(net::socket_base::reuse_address(true));
  impl_->acceptor.bind(ep);
  impl_->acceptor.listen(net::socket_base::max_listen_connections);
  impl_->bound_port = impl_->acceptor.local_endpoint().port();
  impl_->do_accept();
  std::promise<void> done;
  impl_->finished = done.get_future();
  impl_->thread = std::thread([this, done = std::move(done)]() mutable {
    impl_->ioc.run();
    done.set_value();
  });
}

BridgeServer::~BridgeServer() { stop(); }

unsigned short BridgeServer::port() const { return impl_->bound_port; }

void BridgeServer::stop() {
  if (impl_->stopped) return;
  impl_->stopped = true;
  std::vector<std::shared_ptr<Connection>> live;
  {
    std::lock_guard<std::mutex> lock(impl_->conn_mutex);
    for (auto& w : impl_->connections) {
      if (auto c = w.lock()) live.push_back(std::move(c));
    }
    impl_->connections.clear();
  }
  for (auto& c : live) c->detach();
  net::post(impl_->ioc, [this, live = std::move(live)] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
    for (const auto& c : live) c->shutdown();
  });
  if (impl_->finished.valid() && impl_->finished.wait_for(std::chrono::seconds(2)) != std::future_status::ready) {
    impl_->ioc.stop();
  }
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace slap
