#pragma once

// Single-link impairment emulator for the video path: bandwidth limit via a
// FIFO serialization queue, one-way base latency, one-sided uniform jitter
// and independent Bernoulli loss. Time is integer microseconds throughout.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace telesim {

using Micros = std::int64_t;

constexpr Micros kMicrosPerMs = 1000;
constexpr Micros kMicrosPerSecond = 1000000;

inline double to_ms(Micros us) { return static_cast<double>(us) / 1000.0; }
inline Micros from_ms(double ms) { return static_cast<Micros>(ms * 1000.0 + 0.5); }

}  // namespace telesim

namespace telesim::netem {

struct LinkConfig {
  double bandwidth_mbps = 0.0;
  double latency_ms = 0.0;
  double jitter_ms = 0.0;
  double loss_pct = 0.0;

  /// Throws std::invalid_argument on non-finite fields, bandwidth <= 0,
  /// negative latency/jitter or loss outside [0, 100].
  void validate() const;

  bool operator==(const LinkConfig&) const = default;
};

enum class TierName { High, Medium, Low, Custom };

std::string to_string(TierName tier);
/// Accepts "high", "medium", "low", "custom" in any case.
TierName parse_tier(std::string_view name);

/// Exact column of the tier table. Custom has no preset and throws.
LinkConfig tier_preset(TierName tier);

nlohmann::json to_json(const LinkConfig& config);
/// Reads bandwidth_mbps, latency_ms, jitter_ms, loss_pct; validates.
LinkConfig link_config_from_json(const nlohmann::json& j);
LinkConfig load_link_config(const std::filesystem::path& path);

/// size * 8 / bandwidth in microseconds, rounded half up.
Micros serialization_delay(std::size_t size_bytes, double bandwidth_mbps);

using Rng = std::mt19937_64;

/// latency + U where U is uniform on [0, jitter] (integer microseconds).
Micros sample_added_delay(const LinkConfig& config, Rng& rng);

struct PacketEvent {
  std::uint64_t packet_id = 0;
  std::size_t size = 0;
  Micros enqueue_time = 0;
  Micros departure_time = 0;
  std::optional<Micros> delivery_time;  // nullopt = dropped

  bool dropped() const { return !delivery_time.has_value(); }
};

enum class ClockMode { DiscreteEvent, RealTime };

class EmulatorClock {
 public:
  explicit EmulatorClock(ClockMode mode = ClockMode::DiscreteEvent);

  ClockMode mode() const { return mode_; }
  Micros now() const { return now_; }

  /// Moves simulation time forward to `t`. Never goes backwards. In
  /// real-time mode this blocks until the wall clock reaches `t`.
  void advance_to(Micros t);

  /// Real-time mode only: re-reads the wall clock.
  Micros sync_wall();

 private:
  ClockMode mode_;
  Micros now_ = 0;
  std::chrono::steady_clock::time_point origin_;
};

/// FIFO serialization queue feeding a jittered propagation stage.
/// Owns its RNG stream; one instance per emulated link and trial.
class Link {
 public:
  Link(LinkConfig config, std::uint64_t seed);

  const LinkConfig& config() const { return config_; }

  /// Fills departure/delivery of `packet`, or marks it dropped.
  /// Requires packet.enqueue_time <= clock.now() and enqueue times that do
  /// not decrease across calls.
  PacketEvent transmit(PacketEvent packet, const EmulatorClock& clock);

  Micros busy_until() const { return busy_until_; }
  std::uint64_t sent() const { return sent_; }
  std::uint64_t dropped() const { return dropped_; }

 private:
  LinkConfig config_;
  Rng rng_;
  std::bernoulli_distribution loss_;
  Micros busy_until_ = 0;
  Micros last_enqueue_ = 0;
  std::uint64_t sent_ = 0;
  std::uint64_t dropped_ = 0;
};

/// Pending deliveries ordered by (time, id). Ties release in id order.
template <class Payload>
class EventQueue {
 public:
  struct Entry {
    Micros time;
    std::uint64_t id;
    Payload payload;
  };

  void push(Micros time, std::uint64_t id, Payload payload) {
    heap_.push(Entry{time, id, std::move(payload)});
  }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  Micros next_time() const { return heap_.top().time; }

  /// Removes and returns every entry with time <= t, in release order.
  std::vector<Entry> pop_until(Micros t) {
    std::vector<Entry> out;
    while (!heap_.empty() && heap_.top().time <= t) {
      out.push_back(std::move(const_cast<Entry&>(heap_.top())));
      heap_.pop();
    }
    return out;
  }

 private:
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.id > b.id;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
};

struct Idle {};

/// Discrete-event mode: jumps the clock to the earliest pending time and
/// returns every entry due at that instant. Real-time mode: syncs to the
/// wall clock and returns everything due by then (possibly nothing).
/// An empty queue yields Idle in both modes.
template <class Payload>
std::variant<Idle, std::vector<typename EventQueue<Payload>::Entry>> advance(
    EmulatorClock& clock, EventQueue<Payload>& queue) {
  if (queue.empty()) return Idle{};
  if (clock.mode() == ClockMode::DiscreteEvent) {
    clock.advance_to(std::max(clock.now(), queue.next_time()));
  } else {
    clock.sync_wall();
  }
  return queue.pop_until(clock.now());
}

}  // namespace telesim::netem
