#include "telesim/netem.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace telesim::netem {

void LinkConfig::validate() const {
  const auto finite = std::isfinite(bandwidth_mbps) && std::isfinite(latency_ms) &&
                      std::isfinite(jitter_ms) && std::isfinite(loss_pct);
  if (!finite) throw std::invalid_argument("link config: non-finite field");
  if (bandwidth_mbps <= 0.0) throw std::invalid_argument("link config: bandwidth must be > 0");
  if (latency_ms < 0.0) throw std::invalid_argument("link config: latency must be >= 0");
  if (jitter_ms < 0.0) throw std::invalid_argument("link config: jitter must be >= 0");
  if (loss_pct < 0.0 || loss_pct > 100.0)
    throw std::invalid_argument("link config: loss must be within [0, 100]");
}

std::string to_string(TierName tier) {
  switch (tier) {
    case TierName::High: return "high";
    case TierName::Medium: return "medium";
    case TierName::Low: return "low";
    case TierName::Custom: return "custom";
  }
  return "custom";
}

TierName parse_tier(std::string_view name) {
  std::string lower(name);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "high") return TierName::High;
  if (lower == "medium") return TierName::Medium;
  if (lower == "low") return TierName::Low;
  if (lower == "custom") return TierName::Custom;
  throw std::invalid_argument("unknown tier: " + std::string(name));
}

LinkConfig tier_preset(TierName tier) {
  switch (tier) {
    case TierName::High: return {1000.0, 100.0, 25.0, 0.1};
    case TierName::Medium: return {100.0, 400.0, 50.0, 1.0};
    case TierName::Low: return {10.0, 1000.0, 200.0, 3.0};
    case TierName::Custom: break;
  }
  throw std::invalid_argument("custom tier has no preset; supply explicit link fields");
}

nlohmann::json to_json(const LinkConfig& c) {
  return {{"bandwidth_mbps", c.bandwidth_mbps},
          {"latency_ms", c.latency_ms},
          {"jitter_ms", c.jitter_ms},
          {"loss_pct", c.loss_pct}};
}

LinkConfig link_config_from_json(const nlohmann::json& j) {
  LinkConfig c;
  try {
    c.bandwidth_mbps = j.at("bandwidth_mbps").get<double>();
    c.latency_ms = j.at("latency_ms").get<double>();
    c.jitter_ms = j.at("jitter_ms").get<double>();
    c.loss_pct = j.at("loss_pct").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("link config: ") + e.what());
  }
  c.validate();
  return c;
}

LinkConfig load_link_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open link config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("link config " + path.string() + ": " + e.what());
  }
  return link_config_from_json(j);
}

Micros serialization_delay(std::size_t size_bytes, double bandwidth_mbps) {
  if (!(bandwidth_mbps > 0.0)) throw std::invalid_argument("bandwidth must be > 0");
  // bits / (Mbit/s) is directly microseconds.
  const double us = static_cast<double>(size_bytes) * 8.0 / bandwidth_mbps;
  return static_cast<Micros>(std::floor(us + 0.5));
}

Micros sample_added_delay(const LinkConfig& config, Rng& rng) {
  const Micros base = from_ms(config.latency_ms);
  const Micros spread = from_ms(config.jitter_ms);
  if (spread == 0) return base;
  std::uniform_int_distribution<Micros> u(0, spread);
  return base + u(rng);
}

EmulatorClock::EmulatorClock(ClockMode mode)
    : mode_(mode), origin_(std::chrono::steady_clock::now()) {}

void EmulatorClock::advance_to(Micros t) {
  if (t <= now_) return;
  if (mode_ == ClockMode::RealTime) {
    std::this_thread::sleep_until(origin_ + std::chrono::microseconds(t));
  }
  now_ = t;
}

Micros EmulatorClock::sync_wall() {
  if (mode_ == ClockMode::RealTime) {
    const auto elapsed = std::chrono::duration_cast<std::chrono::microseconds>(
                             std::chrono::steady_clock::now() - origin_)
                             .count();
    now_ = std::max(now_, static_cast<Micros>(elapsed));
  }
  return now_;
}

Link::Link(LinkConfig config, std::uint64_t seed)
    : config_(config), rng_(seed), loss_((config.validate(), config.loss_pct / 100.0)) {}

PacketEvent Link::transmit(PacketEvent packet, const EmulatorClock& clock) {
  if (packet.enqueue_time > clock.now())
    throw std::logic_error("transmit: packet enqueued in the future");
  if (packet.enqueue_time < last_enqueue_)
    throw std::logic_error("transmit: enqueue times must not decrease");
  last_enqueue_ = packet.enqueue_time;
  ++sent_;

  if (loss_(rng_)) {
    ++dropped_;
    packet.departure_time = packet.enqueue_time;
    packet.delivery_time.reset();
    return packet;
  }
  const Micros serialization = serialization_delay(packet.size, config_.bandwidth_mbps);
  packet.departure_time = std::max(packet.enqueue_time, busy_until_);
  busy_until_ = packet.departure_time + serialization;
  packet.delivery_time = packet.departure_time + serialization + sample_added_delay(config_, rng_);
  return packet;
}

}  // namespace telesim::netem
