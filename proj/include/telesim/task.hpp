#pragma once

// Planar pick-and-place task and the scripted operator that acts on what
// the decoded video shows.

#include <cmath>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "telesim/netem.hpp"
#include "telesim/video.hpp"

namespace telesim::task {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  double norm() const { return std::hypot(x, y); }
  bool operator==(const Vec2&) const = default;
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

constexpr double kWorkspaceWidthCm = 64.0;
constexpr double kWorkspaceHeightCm = 48.0;
constexpr Micros kTrialTimeout = 600 * kMicrosPerSecond;
constexpr Micros kControlPathDelay = 5 * kMicrosPerMs;

struct Workspace {
  Vec2 block;
  double block_w = 3.7, block_h = 2.1, block_depth = 1.2;
  Vec2 receptacle;
  double receptacle_w = 6.0, receptacle_h = 5.0, receptacle_depth = 10.0;
  Vec2 gripper_home;

  /// Block 20 cm to the right of the gripper's home pose, receptacle up and
  /// to the right of the block.
  static Workspace standard();

  /// Throws std::invalid_argument if something lies outside the 64 x 48 cm
  /// area or the block starts overlapping the receptacle.
  void validate() const;

  bool over_receptacle(Vec2 p) const;
};

enum class Grip { Open, Closed };

struct GripperState {
  Vec2 position;
  Grip grip = Grip::Open;
  bool holding = false;
};

struct OperatorProfile {
  double reaction_delay_ms = 250.0;
  double speed_cm_s = 8.0;
  double k_age = 1.0;   // cm of noise per second of frame age
  double k_corr = 2.0;  // cm of noise per unit corruption ratio
  bool pause_on_freeze = true;
  double grasp_tolerance_cm = 0.8;
  double command_rate_hz = 20.0;
  // Move-and-wait strategy of the scripted operator: average `looks`
  // percepts, act when the estimated offset is inside the radius, otherwise
  // move open-loop by the estimate and wait for a frame showing the result.
  int looks = 2;
  double aim_radius_cm = 1.5;
  double place_radius_cm = 1.5;
  int max_grasp_attempts = 2;

  void validate() const;
  Micros tick() const;
  Micros command_latency() const;  // reaction delay + control path
};

nlohmann::json to_json(const OperatorProfile& p);
/// Missing keys keep their defaults.
OperatorProfile profile_from_json(const nlohmann::json& j);
OperatorProfile load_profile(const std::filesystem::path& path);

/// Ground truth captured alongside each video frame.
struct WorldSnapshot {
  Vec2 block;
  Vec2 receptacle;
  Vec2 gripper;
  bool grip_closed = false;
  bool holding = false;
  bool placed = false;
};

/// What the operator is looking at right now.
struct DisplayedView {
  std::optional<WorldSnapshot> truth;  // nullopt before the first frame
  Micros content_capture_time = 0;
  double corruption_ratio = 0.0;
  bool frozen = false;
};

struct Percept {
  bool available = false;
  Vec2 block, receptacle, gripper;
  bool holding = false;
  bool placed = false;
  bool frozen = false;
  Micros content_capture_time = 0;
  double sigma_cm = 0.0;
};

double perception_sigma(const OperatorProfile& profile, double frame_age_s, double corruption_ratio);

/// True positions at the displayed frame's capture time plus isotropic
/// Gaussian noise of std perception_sigma.
Percept perceive(const DisplayedView& view, Micros now, const OperatorProfile& profile, netem::Rng& rng);

enum class Phase { Approach, Grasp, Carry, Release, Done };
std::string to_string(Phase p);

enum class GripAction { None, Close, Open };

struct Command {
  Vec2 velocity;
  GripAction action = GripAction::None;
};

enum class Step { Look, Move, Wait };

struct OperatorState {
  Phase phase = Phase::Approach;
  Step step = Step::Look;
  int attempts = 0;
  bool gave_up = false;
  /// Set after a grip or stop command to the tick it takes effect on; the
  /// operator waits for a frame captured after it.
  std::optional<Micros> awaiting_since;
  int samples = 0;
  Vec2 offset_sum;
  int move_ticks = 0;
  Vec2 move_velocity;
};

/// One 20 Hz decision. Commands land on the first tick at or after
/// now + command_latency, so their effect is only checked on later frames.
Command operator_step(const Percept& percept, OperatorState& state, const OperatorProfile& profile, Micros now);

enum class EventKind { PhaseChange, GraspAttempt, GraspSuccess, GraspMiss, Drop, Placed, GaveUp, Timeout };
std::string to_string(EventKind k);

struct TrialEvent {
  Micros time = 0;
  EventKind kind = EventKind::PhaseChange;
  std::string detail;
};

nlohmann::json to_json(const TrialEvent& e);
void write_event_log(const std::filesystem::path& path, const std::vector<TrialEvent>& events);

struct World {
  Workspace workspace;
  GripperState gripper;
  bool placed = false;

  static World initial(const Workspace& ws);
  WorldSnapshot snapshot() const;
  video::SceneState scene() const;
};

/// Grip action first (grasp succeeds iff the true distance is within
/// tolerance; open over the receptacle places, elsewhere drops), then
/// kinematics for dt with speed clamped. Appends to `events`.
void apply_command(const Command& cmd, World& world, const OperatorProfile& profile, double dt_s, Micros now,
                   std::vector<TrialEvent>& events);

enum class FailureReason { None, Timeout, MaxAttempts, Dropped };
std::string to_string(FailureReason r);

struct TrialOutcome {
  double completion_time_s = 0.0;
  bool success = false;
  FailureReason failure_reason = FailureReason::None;
};

/// success = exactly one grasp and a placement before the timeout with no
/// drop in between. Completion time runs from `start` to the placement, or
/// to the final event when the trial ended otherwise, capped at 600 s.
TrialOutcome adjudicate(const std::vector<TrialEvent>& history, Micros start = 0);

}  // namespace telesim::task
