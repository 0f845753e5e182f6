#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "telesim/live_session.hpp"
#include "telesim/png_io.hpp"

namespace telesim::harness {

nlohmann::json handshake_message(const SessionConfig& c) {
  const auto& ws = c.workspace;
  const auto rect = [](task::Vec2 p, double w, double h) {
    return nlohmann::json{{"x", p.x}, {"y", p.y}, {"w", w}, {"h", h}};
  };
  return {{"type", "hello"},
          {"tier", c.tier.name},
          {"link", netem::to_json(c.tier.link)},
          {"fps", video::kFps},
          {"frame", {{"width", c.render.width}, {"height", c.render.height}, {"px_per_cm", c.render.px_per_cm}}},
          {"geometry",
           {{"units", "cm"},
            {"workspace", {{"w", task::kWorkspaceWidthCm}, {"h", task::kWorkspaceHeightCm}}},
            {"block", rect(ws.block, ws.block_w, ws.block_h)},
            {"receptacle", rect(ws.receptacle, ws.receptacle_w, ws.receptacle_h)},
            {"gripper_home", {{"x", ws.gripper_home.x}, {"y", ws.gripper_home.y}}}}},
          {"control", {{"rate_hz", c.profile.command_rate_hz}, {"max_speed_cm_s", c.profile.speed_cm_s}}},
          {"trial_id", c.trial_id}};
}

Bytes encode_frame_message(const FrameMessage& m) {
  Bytes out(12 + m.png.size());
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(m.frame_id >> (8 * i));
  for (int i = 0; i < 8; ++i) out[4 + i] = static_cast<std::uint8_t>(m.display_time >> (8 * i));
  std::memcpy(out.data() + 12, m.png.data(), m.png.size());
  return out;
}

FrameMessage decode_frame_message(std::span<const std::uint8_t> b) {
  if (b.size() < 12) throw std::invalid_argument("frame message shorter than its header");
  FrameMessage m;
  for (int i = 0; i < 4; ++i) m.frame_id |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  for (int i = 0; i < 8; ++i) m.display_time |= static_cast<std::uint64_t>(b[4 + i]) << (8 * i);
  m.png.assign(b.begin() + 12, b.end());
  return m;
}

Control parse_control(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("control: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw std::invalid_argument("control: missing type");
  Control c;
  const auto type = j["type"].get<std::string>();
  if (type == "move") {
    if (!j.contains("vx") || !j.contains("vy") || !j["vx"].is_number() || !j["vy"].is_number())
      throw std::invalid_argument("control: move needs numeric vx and vy");
    c.kind = Control::Kind::Move;
    c.velocity = {j["vx"].get<double>(), j["vy"].get<double>()};
    return c;
  }
  if (type == "grip") {
    const auto action = j.value("action", std::string());
    c.kind = Control::Kind::Grip;
    if (action == "open") c.grip = Control::Grip::Open;
    else if (action == "close") c.grip = Control::Grip::Close;
    else if (action == "toggle") c.grip = Control::Grip::Toggle;
    else throw std::invalid_argument("control: grip action must be open, close or toggle");
    return c;
  }
  throw std::invalid_argument("control: unknown type " + type);
}

namespace {

PipelineConfig pipeline_config(const SessionConfig& c) {
  PipelineConfig pc;
  pc.link = c.tier.link;
  pc.seed = c.seed;
  pc.codec = c.codec;
  return pc;
}

}  // namespace

LiveSession::LiveSession(SessionConfig config, netem::ClockMode mode)
    : config_(std::move(config)),
      clock_(mode),
      pipe_(pipeline_config(config_), clock_),
      world_(task::World::initial(config_.workspace)) {
  config_.profile.validate();
}

std::optional<Micros> LiveSession::next_event() const {
  if (state_ != SessionState::Running) return std::nullopt;
  return std::min({video::frame_capture_time(next_frame_), pipe_.next_release().value_or(task::kTrialTimeout + 1),
                   next_tick_, next_metrics_});
}

void LiveSession::on_control(const Control& control, Micros now) {
  if (state_ != SessionState::Running) return;
  pending_.push_back({now + task::kControlPathDelay, control});
}

void LiveSession::abort() {
  if (state_ == SessionState::Running) state_ = SessionState::Aborted;
}

nlohmann::json LiveSession::metrics_message(Micros now) const {
  const auto qos = transport::summarize(pipe_.probe(), {0, std::max<Micros>(now, 1)});
  nlohmann::json j{{"type", "metrics"},
                   {"t_s", static_cast<double>(now) / 1e6},
                   {"sent", qos.sent},
                   {"received", qos.received},
                   {"plr_pct", qos.measured_plr_pct}};
  if (qos.media) {
    j["throughput_mbps"] = qos.media->mean_throughput_mbps;
    j["latency_ms"] = qos.media->mean_latency_ms;
    j["max_latency_ms"] = qos.media->max_latency_ms;
    j["jitter_ms"] = qos.media->mean_jitter_ms;
  }
  if (pipe_.quality().slots() > 0) {
    j["psnr_db"] = pipe_.quality().rolling_psnr(video::kFps);
    j["ssim"] = pipe_.quality().rolling_ssim(video::kFps);
  }
  return j;
}

LiveSession::Output LiveSession::run_until(Micros until) {
  Output out;
  const Micros tick = config_.profile.tick();
  const double tick_s = static_cast<double>(tick) / 1e6;
  while (state_ == SessionState::Running) {
    const Micros t = *next_event();
    if (t > until) break;
    if (t > task::kTrialTimeout) {
      events_.push_back({task::kTrialTimeout, task::EventKind::Timeout, {}});
      finish(task::kTrialTimeout);
      break;
    }
    clock_.advance_to(t);

    if (t == video::frame_capture_time(next_frame_)) {
      pipe_.capture(video::render_scene(world_.scene(), config_.render, next_frame_, t));
      ++next_frame_;
      continue;
    }
    if (pipe_.next_release() && t == *pipe_.next_release()) {
      for (auto& slot : pipe_.release_until(t))
        out.frames.push_back({slot.sent.frame_id, static_cast<std::uint64_t>(t), video::encode_png(slot.shown.image)});
      continue;
    }
    if (t == next_metrics_) {
      out.metrics.push_back(metrics_message(t));
      next_metrics_ += kMicrosPerSecond;
      continue;
    }

    // Control tick.
    std::stable_sort(pending_.begin(), pending_.end(),
                     [](const Pending& a, const Pending& b) { return a.effect < b.effect; });
    auto due = pending_.begin();
    for (; due != pending_.end() && due->effect <= t; ++due) {
      const auto& c = due->control;
      if (c.kind == Control::Kind::Move) {
        velocity_ = c.velocity;
        continue;
      }
      task::GripAction action = c.grip == Control::Grip::Close ? task::GripAction::Close
                                : c.grip == Control::Grip::Open ? task::GripAction::Open
                                : world_.gripper.grip == task::Grip::Open ? task::GripAction::Close
                                                                          : task::GripAction::Open;
      task::apply_command({{}, action}, world_, config_.profile, 0.0, t, events_);
    }
    pending_.erase(pending_.begin(), due);
    task::apply_command({velocity_, task::GripAction::None}, world_, config_.profile, tick_s, t, events_);
    next_tick_ += tick;
    if (world_.placed) finish(t);
  }
  return out;
}

void LiveSession::finish(Micros end) {
  state_ = SessionState::Completed;
  pipe_.drain();
  TrialConfig tc;
  tc.tier = config_.tier;
  tc.seed = config_.seed;
  tc.trial_id = config_.trial_id;
  const auto qos = transport::summarize(pipe_.probe(), {0, std::max<Micros>(end, 1)});
  std::optional<video::QualityReport> quality;
  if (pipe_.quality().slots() > 0) quality = pipe_.quality().report();
  record_ = make_record(tc, qos, quality, task::adjudicate(events_, 0));

  if (!config_.out_dir) return;
  std::filesystem::create_directories(*config_.out_dir);
  const auto path = *config_.out_dir / kHumanDatasetFile;
  std::vector<TrialRecord> rows;
  if (std::filesystem::exists(path)) rows = read_dataset(path);
  rows.push_back(*record_);
  write_dataset(rows, path);
  std::ofstream tags(*config_.out_dir / kHumanTagFile, std::ios::app);
  tags << nlohmann::json{{"trial_id", record_->trial_id}, {"tier", record_->tier}, {"operator", "human"}}.dump()
       << '\n';
  record_path_ = path;
}

}  // namespace telesim::harness
