#include "slap/bridge.hpp"
#include "slap/io.hpp"

#include <gtest/gtest.h>

using namespace slap;

namespace {

StateFrame sample_frame() {
  StateFrame f;
  f.tick = 42;
  f.sim_time = 4.2;
  f.true_pose = State(1, 2, 0.5);
  f.mean = State(1.1, 2.1, 0.4);
  f.covariance = Mat3(Vec3(0.1, 0.2, 0.3).asDiagonal());
  f.covariance(0, 1) = f.covariance(1, 0) = 0.01;
  f.active_edge = 3;
  f.target = 7;
  f.goal_node = 9;
  RolloutDiagnostics d;
  d.tick = 40;
  d.candidates = {{NodeId{7}, true, 10.0, 0.9, 0.1}};
  d.chosen = 0;
  d.has_current = true;
  f.rollout = d;
  f.doors = {{1, false}, {2, true}};
  f.z_lost = true;
  f.cost = 123.5;
  f.stabilizations = 4;
  f.dp_solves = 2;
  f.outcome = RunOutcome::running;
  f.paused = true;
  f.speed = 2.0;
  return f;
}

ProtocolError error_of(const std::string& text) {
  auto r = parse_command(text);
  EXPECT_TRUE(std::holds_alternative<ProtocolError>(r)) << text;
  if (auto* e = std::get_if<ProtocolError>(&r)) return *e;
  return {};
}

}  // namespace

TEST(StateFrameMessage, RoundTrip) {
  const StateFrame f = sample_frame();
  const json j = to_json(f);
  EXPECT_EQ(j["type"], "state_frame");
  EXPECT_EQ(j["version"], kProtocolVersion);
  const StateFrame back = state_frame_from_json(json::parse(j.dump()));
  EXPECT_EQ(back.tick, f.tick);
  EXPECT_EQ(back.true_pose, f.true_pose);
  EXPECT_EQ(back.covariance, f.covariance);
  EXPECT_EQ(back.doors, f.doors);
  EXPECT_EQ(back.goal_node, 9);
  ASSERT_TRUE(back.rollout);
  EXPECT_EQ(back.rollout->candidates.size(), 1u);
  EXPECT_EQ(to_json(back), j);
}

TEST(StateFrameMessage, WithoutRollout) {
  StateFrame f = sample_frame();
  f.rollout.reset();
  const json j = to_json(f);
  EXPECT_TRUE(j["rollout"].is_null());
  EXPECT_FALSE(state_frame_from_json(j).rollout);
}

TEST(StateFrameMessage, Rejections) {
  json j = to_json(sample_frame());
  json v = j;
  v["version"] = 99;
  EXPECT_THROW(state_frame_from_json(v), ConfigError);
  json t = j;
  t["type"] = "ack";
  EXPECT_THROW(state_frame_from_json(t), ConfigError);
  json c = j;
  c["covariance"] = json::array({1, 2, 3});
  EXPECT_THROW(state_frame_from_json(c), ConfigError);
  json m = j;
  m.erase("tick");
  EXPECT_THROW(state_frame_from_json(m), ConfigError);
}

TEST(AckMessage, RoundTrip) {
  const Ack a{"c-1", false, "pose is in collision"};
  const Ack back = ack_from_json(json::parse(to_json(a).dump()));
  EXPECT_EQ(back.id, "c-1");
  EXPECT_FALSE(back.accepted);
  EXPECT_EQ(back.reason, a.reason);
  EXPECT_EQ(to_json(Ack{"c-2", true, ""})["status"], "accepted");
  json bad = to_json(a);
  bad["status"] = "maybe";
  EXPECT_THROW(ack_from_json(bad), ConfigError);
}

TEST(ErrorMessage, RoundTrip) {
  const ProtocolError e{"malformed", std::string("x")};
  const ProtocolError back = protocol_error_from_json(to_json(e));
  EXPECT_EQ(back.reason, "malformed");
  EXPECT_EQ(back.id, std::optional<std::string>("x"));
  EXPECT_TRUE(to_json(ProtocolError{"r", std::nullopt})["id"].is_null());
}

TEST(CommandMessage, EveryKindRoundTrips) {
  std::vector<Command> cmds(6);
  cmds[0] = {"a", CommandKind::set_goal, 3, 4, 0, 0, 1};
  cmds[1] = {"b", CommandKind::kidnap, 5, 6, 1.5, 0, 1};
  cmds[2] = {"c", CommandKind::toggle_door, 0, 0, 0, 2, 1};
  cmds[3] = {"d", CommandKind::pause, 0, 0, 0, 0, 1};
  cmds[4] = {"e", CommandKind::resume, 0, 0, 0, 0, 1};
  cmds[5] = {"f", CommandKind::set_speed, 0, 0, 0, 0, 4};
  for (const Command& c : cmds) {
    auto r = parse_command(to_json(c).dump());
    ASSERT_TRUE(std::holds_alternative<Command>(r)) << to_string(c.kind);
    const Command& back = std::get<Command>(r);
    EXPECT_EQ(back.id, c.id);
    EXPECT_EQ(back.kind, c.kind);
    EXPECT_EQ(back.x, c.x);
    EXPECT_EQ(back.y, c.y);
    EXPECT_EQ(back.theta, c.theta);
    EXPECT_EQ(back.door_id, c.door_id);
    EXPECT_EQ(back.multiplier, c.multiplier);
  }
}

TEST(CommandMessage, ParseErrors) {
  EXPECT_FALSE(error_of("{ nope").id);
  EXPECT_FALSE(error_of("[1,2]").reason.empty());
  EXPECT_FALSE(error_of(R"({"type":"command","version":1,"kind":"pause"})").reason.empty());  // no id
  EXPECT_EQ(error_of(R"({"type":"command","version":1,"id":"q","kind":"fly"})").id, std::optional<std::string>("q"));
  EXPECT_EQ(error_of(R"({"type":"command","version":2,"id":"q","kind":"pause"})").id,
            std::optional<std::string>("q"));
  error_of(R"({"type":"frame","version":1,"id":"q","kind":"pause"})");
  error_of(R"({"type":"command","version":1,"id":"q","kind":"set_goal","payload":{"x":1}})");
  error_of(R"({"type":"command","version":1,"id":"q","kind":"set_goal","payload":{"x":"1","y":2}})");
  error_of(R"({"type":"command","version":1,"id":"q","kind":"set_goal","payload":{"x":1e400,"y":2}})");
  error_of(R"({"type":"command","version":1,"id":"q","kind":"toggle_door","payload":{"id":1.5}})");
  error_of(R"({"type":"command","version":1,"id":"q","kind":"set_speed","payload":{}})");
  error_of(R"({"type":"command","version":1,"id":"","kind":"pause"})");
  error_of(R"({"type":"command","version":1,"id":"q","kind":"pause","payload":[]})");
}

TEST(MakeFrame, CopiesView) {
  ExecutorView v;
  v.tick = 5;
  v.sim_time = 0.5;
  v.belief = GaussianBelief::make(State(1, 1, 0), Mat3::Identity());
  v.doors = {{3, true}};
  v.goal_node = 2;
  v.dp_solves = 1;
  const StateFrame f = make_frame(v, true, 3.0);
  EXPECT_EQ(f.tick, 5);
  EXPECT_EQ(f.mean, State(1, 1, 0));
  EXPECT_EQ(f.covariance, Mat3::Identity());
  EXPECT_EQ(f.doors, (std::vector<DoorState>{{3, true}}));
  EXPECT_TRUE(f.paused);
  EXPECT_EQ(f.speed, 3.0);
}
