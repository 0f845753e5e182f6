#include "telesim/task.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace telesim::task {

Workspace Workspace::standard() {
  Workspace ws;
  ws.gripper_home = {14.0, 30.0};
  ws.block = {34.0, 30.0};
  ws.receptacle = {50.0, 14.0};
  return ws;
}

void Workspace::validate() const {
  const auto inside = [](Vec2 c, double w, double h) {
    return c.x - w / 2 >= 0 && c.x + w / 2 <= kWorkspaceWidthCm && c.y - h / 2 >= 0 &&
           c.y + h / 2 <= kWorkspaceHeightCm;
  };
  if (!inside(block, block_w, block_h)) throw std::invalid_argument("workspace: block outside the frame");
  if (!inside(receptacle, receptacle_w, receptacle_h))
    throw std::invalid_argument("workspace: receptacle outside the frame");
  if (!inside(gripper_home, 0, 0)) throw std::invalid_argument("workspace: gripper outside the frame");
  const bool overlap = std::abs(block.x - receptacle.x) < (block_w + receptacle_w) / 2 &&
                       std::abs(block.y - receptacle.y) < (block_h + receptacle_h) / 2;
  if (overlap) throw std::invalid_argument("workspace: block starts inside the receptacle");
}

bool Workspace::over_receptacle(Vec2 p) const {
  return std::abs(p.x - receptacle.x) <= receptacle_w / 2 && std::abs(p.y - receptacle.y) <= receptacle_h / 2;
}

void OperatorProfile::validate() const {
  if (reaction_delay_ms < 0) throw std::invalid_argument("profile: reaction_delay_ms must be >= 0");
  if (!(speed_cm_s > 0)) throw std::invalid_argument("profile: speed_cm_s must be > 0");
  if (k_age < 0 || k_corr < 0) throw std::invalid_argument("profile: perception gains must be >= 0");
  if (!(grasp_tolerance_cm > 0)) throw std::invalid_argument("profile: grasp_tolerance_cm must be > 0");
  if (!(command_rate_hz > 0)) throw std::invalid_argument("profile: command_rate_hz must be > 0");
  if (looks < 1) throw std::invalid_argument("profile: looks must be >= 1");
  if (!(aim_radius_cm > 0) || !(place_radius_cm > 0))
    throw std::invalid_argument("profile: aim/place radius must be > 0");
  if (max_grasp_attempts < 1) throw std::invalid_argument("profile: max_grasp_attempts must be >= 1");
}

Micros OperatorProfile::tick() const {
  return static_cast<Micros>(1e6 / command_rate_hz + 0.5);
}

Micros OperatorProfile::command_latency() const { return from_ms(reaction_delay_ms) + kControlPathDelay; }

nlohmann::json to_json(const OperatorProfile& p) {
  return {{"reaction_delay_ms", p.reaction_delay_ms},
          {"speed_cm_s", p.speed_cm_s},
          {"k_age", p.k_age},
          {"k_corr", p.k_corr},
          {"pause_on_freeze", p.pause_on_freeze},
          {"grasp_tolerance_cm", p.grasp_tolerance_cm},
          {"command_rate_hz", p.command_rate_hz},
          {"looks", p.looks},
          {"aim_radius_cm", p.aim_radius_cm},
          {"place_radius_cm", p.place_radius_cm},
          {"max_grasp_attempts", p.max_grasp_attempts}};
}

OperatorProfile profile_from_json(const nlohmann::json& j) {
  OperatorProfile p;
  try {
    p.reaction_delay_ms = j.value("reaction_delay_ms", p.reaction_delay_ms);
    p.speed_cm_s = j.value("speed_cm_s", p.speed_cm_s);
    p.k_age = j.value("k_age", p.k_age);
    p.k_corr = j.value("k_corr", p.k_corr);
    p.pause_on_freeze = j.value("pause_on_freeze", p.pause_on_freeze);
    p.grasp_tolerance_cm = j.value("grasp_tolerance_cm", p.grasp_tolerance_cm);
    p.command_rate_hz = j.value("command_rate_hz", p.command_rate_hz);
    p.looks = j.value("looks", p.looks);
    p.aim_radius_cm = j.value("aim_radius_cm", p.aim_radius_cm);
    p.place_radius_cm = j.value("place_radius_cm", p.place_radius_cm);
    p.max_grasp_attempts = j.value("max_grasp_attempts", p.max_grasp_attempts);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("profile: ") + e.what());
  }
  p.validate();
  return p;
}

OperatorProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open operator profile " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("profile " + path.string() + ": " + e.what());
  }
  return profile_from_json(j);
}

double perception_sigma(const OperatorProfile& profile, double frame_age_s, double corruption_ratio) {
  return profile.k_age * std::max(0.0, frame_age_s) + profile.k_corr * std::clamp(corruption_ratio, 0.0, 1.0);
}

Percept perceive(const DisplayedView& view, Micros now, const OperatorProfile& profile, netem::Rng& rng) {
  Percept p;
  if (!view.truth) return p;
  p.available = true;
  p.frozen = view.frozen;
  p.holding = view.truth->holding;
  p.placed = view.truth->placed;
  p.content_capture_time = view.content_capture_time;
  const double age = static_cast<double>(now - view.content_capture_time) / 1e6;
  p.sigma_cm = perception_sigma(profile, age, view.corruption_ratio);

  const auto noisy = [&](Vec2 v) {
    if (p.sigma_cm <= 0.0) return v;
    std::normal_distribution<double> n(0.0, p.sigma_cm);
    const double dx = n(rng);
    const double dy = n(rng);
    return Vec2{v.x + dx, v.y + dy};
  };
  p.block = noisy(view.truth->block);
  p.receptacle = noisy(view.truth->receptacle);
  p.gripper = noisy(view.truth->gripper);
  return p;
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Approach: return "approach";
    case Phase::Grasp: return "grasp";
    case Phase::Carry: return "carry";
    case Phase::Release: return "release";
    case Phase::Done: return "done";
  }
  return "?";
}

namespace {

// Commands land on the first control tick at or after their latency.
Micros effect_time(Micros now, const OperatorProfile& profile) {
  const Micros tick = profile.tick();
  const Micros t = now + profile.command_latency();
  return (t + tick - 1) / tick * tick;
}

void start_looking(OperatorState& s) {
  s.step = Step::Look;
  s.samples = 0;
  s.offset_sum = {};
}

void wait_for_effect(OperatorState& s, Micros now, const OperatorProfile& profile) {
  s.step = Step::Wait;
  s.awaiting_since = effect_time(now, profile);
}

}  // namespace

Command operator_step(const Percept& percept, OperatorState& state, const OperatorProfile& profile, Micros now) {
  Command cmd;
  if (state.phase == Phase::Done || state.gave_up) return cmd;

  if (state.step == Step::Move) {
    if (state.move_ticks > 0) {
      --state.move_ticks;
      cmd.velocity = state.move_velocity;
      return cmd;
    }
    wait_for_effect(state, now, profile);  // this tick's zero velocity is the stop
    return cmd;
  }

  if (!percept.available || (percept.frozen && profile.pause_on_freeze)) return cmd;

  if (state.step == Step::Wait) {
    if (state.awaiting_since && percept.content_capture_time <= *state.awaiting_since) return cmd;
    state.awaiting_since.reset();
    start_looking(state);
    if (state.phase == Phase::Grasp) {
      if (percept.holding) {
        state.phase = Phase::Carry;
      } else if (state.attempts >= profile.max_grasp_attempts) {
        state.gave_up = true;
      } else {
        state.phase = Phase::Approach;
        cmd.action = GripAction::Open;
      }
    } else if (state.phase == Phase::Release) {
      state.phase = percept.placed ? Phase::Done : Phase::Approach;
    }
    return cmd;
  }

  // Look: sample the offset to the current target.
  if (state.phase == Phase::Approach && percept.holding) state.phase = Phase::Carry;
  if (state.phase == Phase::Carry && !percept.holding) state.phase = Phase::Approach;
  const Vec2 target = state.phase == Phase::Carry ? percept.receptacle : percept.block;
  state.offset_sum = state.offset_sum + (target - percept.gripper);
  if (++state.samples < profile.looks) return cmd;

  const Vec2 estimate = state.offset_sum * (1.0 / state.samples);
  const double radius = state.phase == Phase::Carry ? profile.place_radius_cm : profile.aim_radius_cm;
  if (estimate.norm() < radius) {
    if (state.phase == Phase::Approach) {
      state.phase = Phase::Grasp;
      cmd.action = GripAction::Close;
      ++state.attempts;
    } else {
      state.phase = Phase::Release;
      cmd.action = GripAction::Open;
    }
    wait_for_effect(state, now, profile);
    return cmd;
  }

  // Open-loop move covering the estimate in whole ticks at <= speed.
  const double tick_s = static_cast<double>(profile.tick()) / 1e6;
  const double d = estimate.norm();
  const int ticks = std::max(1, static_cast<int>(std::ceil(d / (profile.speed_cm_s * tick_s) - 1e-9)));
  state.step = Step::Move;
  state.move_velocity = estimate * (1.0 / (ticks * tick_s));
  state.move_ticks = ticks - 1;
  cmd.velocity = state.move_velocity;
  return cmd;
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::PhaseChange: return "phase";
    case EventKind::GraspAttempt: return "grasp_attempt";
    case EventKind::GraspSuccess: return "grasp_success";
    case EventKind::GraspMiss: return "grasp_miss";
    case EventKind::Drop: return "drop";
    case EventKind::Placed: return "placed";
    case EventKind::GaveUp: return "gave_up";
    case EventKind::Timeout: return "timeout";
  }
  return "?";
}

nlohmann::json to_json(const TrialEvent& e) {
  return {{"t_us", e.time}, {"event", to_string(e.kind)}, {"detail", e.detail}};
}

void write_event_log(const std::filesystem::path& path, const std::vector<TrialEvent>& events) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write event log " + path.string());
  for (const auto& e : events) out << to_json(e).dump() << '\n';
}

World World::initial(const Workspace& ws) {
  ws.validate();
  World w;
  w.workspace = ws;
  w.gripper.position = ws.gripper_home;
  return w;
}

WorldSnapshot World::snapshot() const {
  return {workspace.block, workspace.receptacle, gripper.position, gripper.grip == Grip::Closed, gripper.holding,
          placed};
}

video::SceneState World::scene() const {
  video::SceneState s;
  s.block_x = workspace.block.x;
  s.block_y = workspace.block.y;
  s.block_w = workspace.block_w;
  s.block_h = workspace.block_h;
  s.receptacle_x = workspace.receptacle.x;
  s.receptacle_y = workspace.receptacle.y;
  s.receptacle_w = workspace.receptacle_w;
  s.receptacle_h = workspace.receptacle_h;
  s.gripper_x = gripper.position.x;
  s.gripper_y = gripper.position.y;
  s.grip_closed = gripper.grip == Grip::Closed;
  return s;
}

void apply_command(const Command& cmd, World& world, const OperatorProfile& profile, double dt_s, Micros now,
                   std::vector<TrialEvent>& events) {
  auto& g = world.gripper;
  auto& ws = world.workspace;
  if (cmd.action == GripAction::Close && g.grip == Grip::Open) {
    g.grip = Grip::Closed;
    const double d = distance(g.position, ws.block);
    events.push_back({now, EventKind::GraspAttempt, std::to_string(d)});
    if (!world.placed && d < profile.grasp_tolerance_cm) {
      g.holding = true;
      ws.block = g.position;
      events.push_back({now, EventKind::GraspSuccess, {}});
    } else {
      events.push_back({now, EventKind::GraspMiss, {}});
    }
  } else if (cmd.action == GripAction::Open && g.grip == Grip::Closed) {
    g.grip = Grip::Open;
    if (g.holding) {
      g.holding = false;
      if (ws.over_receptacle(ws.block)) {
        world.placed = true;
        events.push_back({now, EventKind::Placed, {}});
      } else {
        events.push_back({now, EventKind::Drop, {}});
      }
    }
  }

  Vec2 v = cmd.velocity;
  const double s = v.norm();
  if (s > profile.speed_cm_s) v = v * (profile.speed_cm_s / s);
  Vec2 next = g.position + v * dt_s;
  next.x = std::clamp(next.x, 0.0, kWorkspaceWidthCm);
  next.y = std::clamp(next.y, 0.0, kWorkspaceHeightCm);
  g.position = next;
  if (g.holding) ws.block = g.position;
}

std::string to_string(FailureReason r) {
  switch (r) {
    case FailureReason::None: return "none";
    case FailureReason::Timeout: return "timeout";
    case FailureReason::MaxAttempts: return "max_attempts";
    case FailureReason::Dropped: return "dropped";
  }
  return "?";
}

TrialOutcome adjudicate(const std::vector<TrialEvent>& history, Micros start) {
  TrialOutcome out;
  int grasps = 0;
  int drops = 0;
  std::optional<Micros> placed;
  bool gave_up = false;
  bool timed_out = false;
  Micros last = start;
  for (const auto& e : history) {
    last = std::max(last, e.time);
    switch (e.kind) {
      case EventKind::GraspSuccess: ++grasps; break;
      case EventKind::Drop: ++drops; break;
      case EventKind::Placed:
        if (!placed) placed = e.time;
        break;
      case EventKind::GaveUp: gave_up = true; break;
      case EventKind::Timeout: timed_out = true; break;
      default: break;
    }
  }
  const Micros end = placed ? *placed : last;
  out.completion_time_s = std::min<double>(static_cast<double>(end - start) / 1e6, kTrialTimeout / 1e6);

  if (placed && *placed - start <= kTrialTimeout) {
    out.success = grasps == 1 && drops == 0;
    out.failure_reason = out.success ? FailureReason::None : FailureReason::Dropped;
  } else if (gave_up) {
    out.failure_reason = FailureReason::MaxAttempts;
  } else {
    out.failure_reason = FailureReason::Timeout;
    if (timed_out) out.completion_time_s = kTrialTimeout / 1e6;
  }
  return out;
}

}  // namespace telesim::task
