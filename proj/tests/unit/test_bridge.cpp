#include "slap/bridge.hpp"
#include "slap/io.hpp"

#include "test_support.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>

#include <chrono>
#include <functional>
#include <thread>

using namespace slap;

namespace {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct BridgeFixture {
  test::OpenWorld world;
  FirmGraph graph;

  BridgeFixture() : world(make_world()), graph(make_graph(world)) {}

  static test::OpenWorld make_world() {
    test::OpenWorld w = test::open_world(10.0, 2.5);
    w.world.static_obstacles.push_back(Polygon::rectangle(4.0, 4.0, 4.6, 4.6));
    w.world.doors.push_back(Door{1, Polygon::rectangle(0.3, 9.0, 0.7, 9.6), false, std::nullopt, 600.0});
    return w;
  }

  static FirmGraph make_graph(const test::OpenWorld& w) {
    std::vector<State> pts;
    for (double y : {2.0, 5.0, 8.0})
      for (double x : {2.0, 5.0, 8.0}) pts.emplace_back(x, y, 0.0);
    return test::graph_on(w, pts, 20);
  }

  Scenario scenario() const {
    Scenario s;
    s.start = State(2, 2, 0);
    s.goals = {State(8, 2, 0)};
    s.max_ticks = 1000000;
    return s;
  }

  ExecutorConfig config() const {
    ExecutorConfig c;
    c.rollout.n_mc = 10;
    c.rollout.radius = 4.0;
    c.record_rows = false;
    return c;
  }
};

const BridgeFixture& fixture() {
  static const BridgeFixture f;
  return f;
}

class Client {
 public:
  explicit Client(unsigned short port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1:" + std::to_string(port), "/");
    ws_.text(true);
  }

  void send(const std::string& text) { ws_.write(net::buffer(text)); }

  json read() {
    beast::flat_buffer b;
    ws_.read(b);
    return json::parse(beast::buffers_to_string(b.data()));
  }

  // Reads until a message satisfies the predicate; returns it or null after `limit` messages.
  json read_until(const std::function<bool(const json&)>& pred, int limit = 20000) {
    for (int i = 0; i < limit; ++i) {
      json m = read();
      if (pred(m)) return m;
    }
    return nullptr;
  }

  json reply_to(const std::string& id) {
    return read_until([&](const json& m) { return m["type"] != "state_frame" && m.value("id", json()) == id; });
  }

  ~Client() {
    beast::error_code ec;
    ws_.close(websocket::close_code::normal, ec);
  }

 private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

std::string command(const std::string& id, const std::string& kind, json payload = json::object()) {
  return json{{"type", "command"}, {"version", 1}, {"id", id}, {"kind", kind}, {"payload", payload}}.dump();
}

double trace(const json& frame) {
  const json& c = frame["covariance"];
  return c[0].get<double>() + c[4].get<double>() + c[8].get<double>();
}

}  // namespace

TEST(LiveSession, PauseResumeKeepsTicksContiguous) {
  const BridgeFixture& f = fixture();
  SessionConfig sc;
  sc.realtime = false;
  LiveSession s(f.graph, f.scenario(), f.config(), sc);
  std::mutex m;
  std::vector<Tick> ticks;
  s.subscribe([&](const std::string& text) {
    std::lock_guard<std::mutex> lock(m);
    ticks.push_back(json::parse(text)["tick"].get<Tick>());
  });
  s.start();
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  EXPECT_EQ(json::parse(s.handle_message(command("p", "pause")))["status"], "accepted");
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  const Tick paused_at = s.latest_frame()->tick;
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  EXPECT_EQ(s.latest_frame()->tick, paused_at);
  EXPECT_TRUE(s.paused());
  EXPECT_EQ(json::parse(s.handle_message(command("r", "resume")))["status"], "accepted");
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  s.stop();
  std::lock_guard<std::mutex> lock(m);
  ASSERT_GT(ticks.size(), 2u);
  EXPECT_GT(ticks.back(), paused_at);
  for (std::size_t i = 1; i < ticks.size(); ++i) EXPECT_EQ(ticks[i], ticks[i - 1] + 1) << i;
}

TEST(LiveSession, CommandValidation) {
  const BridgeFixture& f = fixture();
  SessionConfig sc;
  sc.realtime = false;
  LiveSession s(f.graph, f.scenario(), f.config(), sc);
  const auto ack = [&](const std::string& text) { return json::parse(s.handle_message(text)); };
  EXPECT_EQ(ack(command("a", "set_speed", {{"multiplier", 0.0}}))["status"], "rejected");
  EXPECT_EQ(ack(command("b", "set_speed", {{"multiplier", 4.0}}))["status"], "accepted");
  EXPECT_EQ(s.speed(), 4.0);
  EXPECT_EQ(ack(command("c", "toggle_door", {{"id", 5}}))["status"], "rejected");
  EXPECT_EQ(ack(command("d", "toggle_door", {{"id", 1}}))["status"], "accepted");
  EXPECT_EQ(ack(command("e", "kidnap", {{"x", 4.3}, {"y", 4.3}, {"theta", 0}}))["status"], "rejected");
  EXPECT_EQ(ack(command("f", "set_goal", {{"x", -1.0}, {"y", 3.0}}))["status"], "rejected");
  const json err = ack("not json at all");
  EXPECT_EQ(err["type"], "error");
}

TEST(Bridge, EndToEndOverWebSocket) {
  const BridgeFixture& f = fixture();
  SessionConfig sc;
  sc.realtime = true;
  LiveSession session(f.graph, f.scenario(), f.config(), sc);
  ASSERT_EQ(session.submit(Command{"s", CommandKind::set_speed, 0, 0, 0, 0, 5.0}).accepted, true);
  BridgeServer server(session, "127.0.0.1", 0);
  ASSERT_NE(server.port(), 0);
  session.start();
  Client c(server.port());

  const json first = c.read_until([](const json& m) { return m["type"] == "state_frame"; });
  ASSERT_FALSE(first.is_null());
  const StateFrame f0 = state_frame_from_json(first);
  EXPECT_EQ(f0.doors.size(), 1u);

  // New goal: accepted, inserted and solved.
  c.send(command("g1", "set_goal", {{"x", 6.5}, {"y", 6.5}}));
  const json ack = c.reply_to("g1");
  ASSERT_FALSE(ack.is_null());
  EXPECT_EQ(ack["type"], "ack");
  EXPECT_EQ(ack["status"], "accepted");
  const json solved = c.read_until([&](const json& m) {
    return m["type"] == "state_frame" && m["goal_node"] != f0.goal_node && m["dp_solves"] > f0.dp_solves;
  });
  EXPECT_FALSE(solved.is_null());

  // Rejections carry a reason.
  c.send(command("bad1", "set_goal", {{"x", 50.0}, {"y", 50.0}}));
  const json out = c.reply_to("bad1");
  EXPECT_EQ(out["status"], "rejected");
  EXPECT_FALSE(out["reason"].get<std::string>().empty());
  c.send(command("bad2", "set_goal", {{"x", 4.3}, {"y", 4.3}}));
  const json inside = c.reply_to("bad2");
  EXPECT_EQ(inside["status"], "rejected");
  EXPECT_NE(inside["reason"].get<std::string>().find("collision"), std::string::npos);

  // Malformed input yields an error and the connection stays usable.
  c.send("{ this is not json");
  const json err = c.read_until([](const json& m) { return m["type"] == "error"; });
  ASSERT_FALSE(err.is_null());
  EXPECT_FALSE(err["reason"].get<std::string>().empty());
  c.send(R"({"type":"command","version":1,"kind":"pause"})");
  EXPECT_FALSE(c.read_until([](const json& m) { return m["type"] == "error"; }).is_null());

  // Kidnap: covariance inflates and the lost flag is raised.
  c.send(command("k1", "kidnap", {{"x", 8.0}, {"y", 8.5}, {"theta", 1.0}}));
  EXPECT_EQ(c.reply_to("k1")["status"], "accepted");
  const json lost = c.read_until([](const json& m) { return m["type"] == "state_frame" && m["z_lost"] == true; });
  ASSERT_FALSE(lost.is_null());
  EXPECT_GT(trace(lost), 10.0);

  c.send(command("p1", "pause"));
  EXPECT_EQ(c.reply_to("p1")["status"], "accepted");
  EXPECT_TRUE(session.paused());
  session.stop();
  server.stop();
}
