#pragma once

// Human-in-the-loop session: the same video path as a scripted trial, but
// controls come from the console over WebSocket.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "telesim/harness.hpp"

namespace telesim::harness {

struct SessionConfig {
  TierSpec tier = TierSpec::preset(netem::TierName::High);
  std::uint64_t seed = 1;
  std::string trial_id = "human-0000";
  video::SliceCodecConfig codec;
  video::RenderConfig render;
  task::OperatorProfile profile;  // speed cap and control rate only
  task::Workspace workspace = task::Workspace::standard();
  std::optional<std::filesystem::path> out_dir;
};

// ---- wire protocol ----

nlohmann::json handshake_message(const SessionConfig& config);

/// Binary frame message: u32 frame_id, u64 display_time (us), PNG bytes.
/// Integers little-endian.
struct FrameMessage {
  std::uint32_t frame_id = 0;
  std::uint64_t display_time = 0;
  Bytes png;
};
Bytes encode_frame_message(const FrameMessage& m);
/// Throws std::invalid_argument on a short buffer.
FrameMessage decode_frame_message(std::span<const std::uint8_t> bytes);

struct Control {
  enum class Kind { Move, Grip } kind = Kind::Move;
  task::Vec2 velocity;  // cm/s
  enum class Grip { Open, Close, Toggle } grip = Grip::Toggle;
};
/// Parses {"type":"move","vx":..,"vy":..} or {"type":"grip","action":
/// "open"|"close"|"toggle"}. Throws std::invalid_argument otherwise.
Control parse_control(const std::string& text);

// ---- session ----

enum class SessionState { Running, Completed, Aborted };

class LiveSession {
 public:
  explicit LiveSession(SessionConfig config, netem::ClockMode mode = netem::ClockMode::RealTime);

  struct Output {
    std::vector<FrameMessage> frames;
    std::vector<nlohmann::json> metrics;
  };

  /// Time of the next internal event; nullopt once the session ended.
  std::optional<Micros> next_event() const;
  /// Processes every event up to `now` (simulated us since the first frame).
  /// In real-time mode this waits for the wall clock.
  Output run_until(Micros now);
  /// Takes effect on the first control tick after the control-path delay.
  void on_control(const Control& control, Micros now);
  /// Console went away: the trial is dropped and nothing is written.
  void abort();

  SessionState state() const { return state_; }
  Micros now() const { return clock_.now(); }
  /// Set once completed.
  const std::optional<TrialRecord>& record() const { return record_; }
  /// Set once completed and an output directory was configured.
  const std::optional<std::filesystem::path>& record_path() const { return record_path_; }

 private:
  void finish(Micros end);
  nlohmann::json metrics_message(Micros now) const;

  SessionConfig config_;
  netem::EmulatorClock clock_;
  VideoPipeline pipe_;
  task::World world_;
  std::vector<task::TrialEvent> events_;
  struct Pending {
    Micros effect;
    Control control;
  };
  std::vector<Pending> pending_;
  task::Vec2 velocity_;
  std::uint32_t next_frame_ = 0;
  Micros next_tick_ = 0;
  Micros next_metrics_ = kMicrosPerSecond;
  SessionState state_ = SessionState::Running;
  std::optional<TrialRecord> record_;
  std::optional<std::filesystem::path> record_path_;
};

/// Files human trials are appended to inside SessionConfig::out_dir.
constexpr const char* kHumanDatasetFile = "human_trials.csv";
constexpr const char* kHumanTagFile = "human_trials.jsonl";

// ---- bridge ----

struct BridgeConfig {
  SessionConfig session;
  std::string address = "127.0.0.1";
  std::uint16_t port = 8765;  // 0 picks a free port
  /// Return after this many sessions; 0 serves forever.
  std::size_t max_sessions = 0;
};

/// Blocking WebSocket server, one live session per connection. `on_listening`
/// receives the bound port once the socket accepts connections.
void serve(const BridgeConfig& config, const std::function<void(std::uint16_t)>& on_listening = {});

}  // namespace telesim::harness
