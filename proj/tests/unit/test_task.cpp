#include <doctest.h>

#include <fstream>

#include "telesim/task.hpp"

using namespace telesim;
using namespace telesim::task;

namespace {

Percept see(Vec2 gripper, Vec2 block, Vec2 receptacle, Micros captured, bool holding = false) {
  Percept p;
  p.available = true;
  p.gripper = gripper;
  p.block = block;
  p.receptacle = receptacle;
  p.holding = holding;
  p.content_capture_time = captured;
  return p;
}

}  // namespace

TEST_CASE("standard workspace") {
  const auto ws = Workspace::standard();
  CHECK(distance(ws.block, ws.gripper_home) == doctest::Approx(20.0));
  CHECK_NOTHROW(ws.validate());
  CHECK(ws.block_w == 3.7);
  CHECK(ws.block_h == 2.1);
  CHECK(ws.receptacle_w == 6.0);
  CHECK(ws.receptacle_h == 5.0);
  auto bad = ws;
  bad.block = ws.receptacle;
  CHECK_THROWS(bad.validate());
  bad = ws;
  bad.block = {63.5, 10};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("profile defaults, json and validation") {
  OperatorProfile p;
  CHECK(p.reaction_delay_ms == 250);
  CHECK(p.speed_cm_s == 8);
  CHECK(p.k_age == 1.0);
  CHECK(p.k_corr == 2.0);
  CHECK(p.pause_on_freeze);
  CHECK(p.grasp_tolerance_cm == 0.8);
  CHECK(p.tick() == 50000);
  CHECK(p.command_latency() == 255000);

  auto j = to_json(p);
  j["k_age"] = 0.5;
  CHECK(profile_from_json(j).k_age == 0.5);
  CHECK(profile_from_json(nlohmann::json::object()).speed_cm_s == 8);
  CHECK_THROWS(profile_from_json({{"k_corr", -1}}));
  CHECK_THROWS(profile_from_json({{"grasp_tolerance_cm", 0}}));
  CHECK_THROWS(profile_from_json({{"speed_cm_s", "fast"}}));
}

TEST_CASE("perception noise scale") {
  OperatorProfile p;
  CHECK(perception_sigma(p, 0.033, 0.0) == doctest::Approx(0.033));
  CHECK(perception_sigma(p, 2.0, 1.0) >= 4.0);

  DisplayedView v;
  netem::Rng rng(1);
  CHECK_FALSE(perceive(v, 0, p, rng).available);

  v.truth = WorldSnapshot{{10, 10}, {20, 20}, {5, 5}};
  v.content_capture_time = 0;
  p.k_age = p.k_corr = 0;
  const auto exact = perceive(v, 2 * kMicrosPerSecond, p, rng);
  CHECK(exact.block == Vec2{10, 10});
  CHECK(exact.gripper == Vec2{5, 5});

  p.k_age = 1.0;
  double sum2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto q = perceive(v, kMicrosPerSecond / 2, p, rng);
    sum2 += (q.block.x - 10) * (q.block.x - 10);
  }
  CHECK(std::sqrt(sum2 / n) == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("gripper at target advances to grasp") {
  OperatorProfile p;
  OperatorState s;
  const auto at = see({34, 30}, {34.2, 30}, {50, 14}, 0);
  Command c = operator_step(at, s, p, 0);
  for (int i = 1; i < p.looks; ++i) c = operator_step(at, s, p, i * p.tick());
  CHECK(s.phase == Phase::Grasp);
  CHECK(c.action == GripAction::Close);
  CHECK(c.velocity == Vec2{});
  CHECK(s.attempts == 1);
}

TEST_CASE("frozen stream pauses the operator") {
  OperatorProfile p;
  OperatorState s;
  auto frozen = see({14, 30}, {34, 30}, {50, 14}, 0);
  frozen.frozen = true;
  for (int i = 0; i < 10; ++i) {
    const auto c = operator_step(frozen, s, p, i * p.tick());
    CHECK(c.velocity == Vec2{});
    CHECK(c.action == GripAction::None);
  }
  CHECK(s.phase == Phase::Approach);
}

TEST_CASE("move covers the estimate at no more than speed") {
  OperatorProfile p;
  OperatorState s;
  const auto far = see({14, 30}, {34, 30}, {50, 14}, 0);
  Vec2 travelled;
  Micros now = 0;
  for (int i = 0; i < p.looks; ++i, now += p.tick()) travelled = travelled + operator_step(far, s, p, now).velocity * 0.05;
  REQUIRE(s.step == Step::Move);
  while (s.step == Step::Move) {
    const auto c = operator_step(far, s, p, now);
    CHECK(c.velocity.norm() <= p.speed_cm_s + 1e-9);
    travelled = travelled + c.velocity * 0.05;
    now += p.tick();
  }
  CHECK(travelled.x == doctest::Approx(20.0));
  CHECK(travelled.y == doctest::Approx(0.0));
  CHECK(s.step == Step::Wait);

  // Frames captured before the stop landed are ignored.
  const Micros landed = *s.awaiting_since;
  operator_step(see({34, 30}, {34, 30}, {50, 14}, landed), s, p, now);
  CHECK(s.step == Step::Wait);
  operator_step(see({34, 30}, {34, 30}, {50, 14}, landed + 1), s, p, now + p.tick());
  CHECK(s.step == Step::Look);
}

TEST_CASE("estimate off by more than the tolerance misses and regresses") {
  OperatorProfile p;
  OperatorState s;
  World w = World::initial(Workspace::standard());
  w.gripper.position = w.workspace.block + Vec2{1.0, 0};  // true offset 1.0 cm
  // Injected percept error: the block appears right under the gripper.
  const auto fooled = see(w.gripper.position, w.gripper.position, w.workspace.receptacle, 0);
  std::vector<TrialEvent> events;
  Command c;
  Micros now = 0;
  for (int i = 0; i < p.looks; ++i, now += p.tick()) c = operator_step(fooled, s, p, now);
  REQUIRE(c.action == GripAction::Close);
  apply_command(c, w, p, 0.05, now, events);
  CHECK_FALSE(w.gripper.holding);
  CHECK(events.back().kind == EventKind::GraspMiss);

  auto after = see(w.gripper.position, w.workspace.block, w.workspace.receptacle, *s.awaiting_since + 1);
  c = operator_step(after, s, p, now + 10 * p.tick());
  CHECK(s.phase == Phase::Approach);
  CHECK(c.action == GripAction::Open);
}

TEST_CASE("operator gives up after max attempts") {
  OperatorProfile p;
  p.max_grasp_attempts = 1;
  OperatorState s;
  s.phase = Phase::Grasp;
  s.step = Step::Wait;
  s.attempts = 1;
  s.awaiting_since = 0;
  operator_step(see({0, 0}, {5, 5}, {50, 14}, 10), s, p, 100);
  CHECK(s.gave_up);
  CHECK(operator_step(see({0, 0}, {5, 5}, {50, 14}, 20), s, p, 200).velocity == Vec2{});
}

TEST_CASE("grasp tolerance") {
  OperatorProfile p;
  std::vector<TrialEvent> ev;
  World w = World::initial(Workspace::standard());
  w.gripper.position = w.workspace.block + Vec2{0.5, 0};
  apply_command({{}, GripAction::Close}, w, p, 0, 0, ev);
  CHECK(w.gripper.holding);
  CHECK(w.gripper.grip == Grip::Closed);

  World m = World::initial(Workspace::standard());
  m.gripper.position = m.workspace.block + Vec2{0, 1.0};
  apply_command({{}, GripAction::Close}, m, p, 0, 0, ev);
  CHECK_FALSE(m.gripper.holding);
  CHECK(ev.back().kind == EventKind::GraspMiss);
}

TEST_CASE("release over the footprint places, elsewhere drops") {
  OperatorProfile p;
  for (auto [offset, placed] : {std::pair{Vec2{2.9, 2.4}, true}, std::pair{Vec2{3.1, 0}, false},
                                std::pair{Vec2{0, -2.6}, false}, std::pair{Vec2{0, 0}, true}}) {
    std::vector<TrialEvent> ev;
    World w = World::initial(Workspace::standard());
    w.gripper.position = w.workspace.block;
    apply_command({{}, GripAction::Close}, w, p, 0, 0, ev);
    w.gripper.position = w.workspace.receptacle + offset;
    w.workspace.block = w.gripper.position;
    apply_command({{}, GripAction::Open}, w, p, 0, 1, ev);
    CHECK(w.placed == placed);
    CHECK(ev.back().kind == (placed ? EventKind::Placed : EventKind::Drop));
  }
}

TEST_CASE("block never teleports") {
  OperatorProfile p;
  std::vector<TrialEvent> ev;
  World w = World::initial(Workspace::standard());
  w.gripper.position = w.workspace.block;
  apply_command({{}, GripAction::Close}, w, p, 0, 0, ev);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> v(-50, 50);
  for (int i = 0; i < 500; ++i) {
    const Vec2 before = w.workspace.block;
    apply_command({{v(rng), v(rng)}, GripAction::None}, w, p, 0.05, i, ev);
    CHECK(distance(before, w.workspace.block) <= p.speed_cm_s * 0.05 + 1e-9);
    CHECK(w.workspace.block == w.gripper.position);
  }
  World idle = World::initial(Workspace::standard());
  const Vec2 block = idle.workspace.block;
  apply_command({{8, 0}, GripAction::None}, idle, p, 0.05, 0, ev);
  CHECK(idle.workspace.block == block);
}

TEST_CASE("adjudication") {
  const Micros s = kMicrosPerSecond;
  auto clean = adjudicate({{10 * s, EventKind::GraspSuccess, {}}, {95 * s, EventKind::Placed, {}}});
  CHECK(clean.success);
  CHECK(clean.completion_time_s == doctest::Approx(95.0));
  CHECK(clean.failure_reason == FailureReason::None);

  auto dropped = adjudicate({{10 * s, EventKind::GraspSuccess, {}},
                             {20 * s, EventKind::Drop, {}},
                             {30 * s, EventKind::GraspSuccess, {}},
                             {50 * s, EventKind::Placed, {}}});
  CHECK_FALSE(dropped.success);
  CHECK(dropped.failure_reason == FailureReason::Dropped);

  auto timeout = adjudicate({{10 * s, EventKind::GraspMiss, {}}, {kTrialTimeout, EventKind::Timeout, {}}});
  CHECK_FALSE(timeout.success);
  CHECK(timeout.completion_time_s == 600.0);
  CHECK(timeout.failure_reason == FailureReason::Timeout);

  auto gave_up = adjudicate({{10 * s, EventKind::GraspMiss, {}}, {12 * s, EventKind::GaveUp, {}}});
  CHECK(gave_up.failure_reason == FailureReason::MaxAttempts);
  CHECK(gave_up.completion_time_s == doctest::Approx(12.0));

  auto offset = adjudicate({{5 * s, EventKind::GraspSuccess, {}}, {9 * s, EventKind::Placed, {}}}, 2 * s);
  CHECK(offset.completion_time_s == doctest::Approx(7.0));
}

TEST_CASE("event log lines") {
  const auto path = std::filesystem::temp_directory_path() / "telesim_events.jsonl";
  write_event_log(path, {{1000, EventKind::GraspAttempt, "0.3"}, {2000, EventKind::Placed, {}}});
  std::ifstream in(path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("t_us"));
    ++n;
  }
  CHECK(n == 2);
  std::filesystem::remove(path);
}
