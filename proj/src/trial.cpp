#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "telesim/harness.hpp"
#include "telesim/png_io.hpp"

namespace telesim::harness {

TierSpec TierSpec::preset(netem::TierName tier) { return {netem::to_string(tier), netem::tier_preset(tier)}; }

TierSpec TierSpec::parse(const std::string& arg) {
  for (auto t : {netem::TierName::High, netem::TierName::Medium, netem::TierName::Low}) {
    if (netem::to_string(t) == arg) return preset(t);
  }
  const std::filesystem::path path(arg);
  if (!std::filesystem::exists(path)) throw std::invalid_argument("unknown tier or missing file: " + arg);
  std::ifstream in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("custom tier " + arg + ": " + e.what());
  }
  return {j.value("name", std::string("custom")), netem::link_config_from_json(j)};
}

Micros default_playout_delay(const netem::LinkConfig& link) {
  return from_ms(link.latency_ms) + from_ms(link.jitter_ms) + kPlayoutMargin;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t trial_seed(std::uint64_t master_seed, const std::string& tier, std::uint32_t index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tier label
  for (unsigned char c : tier) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(mix64(master_seed) ^ h ^ mix64(0x5bd1e995ULL + index));
}

std::string trial_id(const std::string& tier, std::uint32_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04u", index);
  return tier + "-" + buf;
}

VideoPipeline::VideoPipeline(const PipelineConfig& config, const netem::EmulatorClock& clock)
    : clock_(clock),
      link_(config.link, mix64(config.seed ^ 0x6c696e6bULL)),
      codec_(config.codec),
      rate_(config.rate_control),
      keep_trace_(config.keep_packet_trace),
      packetizer_(config.mtu),
      jitter_buffer_(config.playout_delay.value_or(default_playout_delay(config.link))),
      displayed_(video::DecodedFrame::gray()) {
  codec_.validate();
}

void VideoPipeline::capture(video::Frame frame) {
  const Micros t = frame.capture_time;
  auto encoded = video::encode(frame, codec_);
  encoded_bytes_ += encoded.size();
  codec_ = rate_.on_frame(codec_, encoded.size(), t, link_.config().bandwidth_mbps);

  jitter_buffer_.expect(encoded.frame_id, t, encoded.slice_count);
  for (auto& p : packetizer_.packetize(encoded, t)) {
    probe_.on_send(p);
    netem::PacketEvent ev;
    ev.packet_id = next_packet_id_++;
    ev.size = p.payload_size;
    ev.enqueue_time = t;
    ev = link_.transmit(ev, clock_);
    events_.push_back(ev);
    if (keep_trace_) {
      trace_index_[ev.packet_id] = trace_.size();
      trace_.push_back({p.seq, p.frame_id, p.slice_id, p.payload_size, p.send_time, ev.delivery_time});
    }
    if (!ev.dropped()) {
      p.recv_time = *ev.delivery_time;
      in_flight_.push(*ev.delivery_time, ev.packet_id, std::move(p));
    }
  }
  sent_.push_back(std::move(frame));
}

std::optional<Micros> VideoPipeline::next_release() const {
  if (sent_.empty()) return std::nullopt;
  return sent_.front().capture_time + jitter_buffer_.playout_delay();
}

void VideoPipeline::deliver(transport::MediaPacket packet) {
  probe_.on_receive(packet);
  jitter_buffer_.insert(packet);
}

std::vector<VideoPipeline::Slot> VideoPipeline::release_until(Micros now) {
  for (auto& e : in_flight_.pop_until(now)) deliver(std::move(e.payload));

  std::vector<Slot> out;
  for (auto& r : jitter_buffer_.release_frames(now)) {
    while (!sent_.empty() && sent_.front().frame_id < r.frame_id) sent_.pop_front();
    if (sent_.empty() || sent_.front().frame_id != r.frame_id)
      throw std::logic_error("pipeline: released a frame that was never captured");

    video::SliceArrivals arrivals{r.frame_id, r.capture_time, r.release_time, r.slice_count, r.slices};
    Slot slot;
    slot.shown = video::decode(arrivals, displayed_);
    slot.sent = std::move(sent_.front());
    sent_.pop_front();
    slot.psnr_db = video::psnr(slot.sent, slot.shown.image);
    slot.ssim = video::ssim(slot.sent, slot.shown.image);
    quality_.add_scores(slot.psnr_db, slot.ssim);
    displayed_ = slot.shown;
    out.push_back(std::move(slot));
  }
  return out;
}

void VideoPipeline::drain() {
  for (auto& e : in_flight_.pop_until(std::numeric_limits<Micros>::max())) probe_.on_receive(e.payload);
}

TrialRecord make_record(const TrialConfig& config, const transport::QosSummary& qos,
                        const std::optional<video::QualityReport>& quality, const task::TrialOutcome& outcome) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  TrialRecord r;
  r.trial_id = config.trial_id;
  r.tier = config.tier.name;
  r.seed = config.seed;
  r.bandwidth_mbps = config.tier.link.bandwidth_mbps;
  r.latency_ms = config.tier.link.latency_ms;
  r.jitter_ms = config.tier.link.jitter_ms;
  r.set_plr_pct = config.tier.link.loss_pct;
  r.mean_throughput_mbps = qos.media ? qos.media->mean_throughput_mbps : nan;
  r.max_throughput_mbps = qos.media ? qos.media->max_throughput_mbps : nan;
  r.mean_latency_ms = qos.media ? qos.media->mean_latency_ms : nan;
  r.max_latency_ms = qos.media ? qos.media->max_latency_ms : nan;
  r.mean_jitter_ms = qos.media ? qos.media->mean_jitter_ms : nan;
  r.max_jitter_ms = qos.media ? qos.media->max_jitter_ms : nan;
  r.measured_plr_pct = qos.measured_plr_pct;
  r.psnr_db = quality ? quality->mean_psnr_db : nan;
  r.ssim = quality ? quality->mean_ssim : nan;
  r.completion_time_s = outcome.completion_time_s;
  r.success = outcome.success;
  return r;
}

namespace {

void dump_slot(const std::filesystem::path& dir, const VideoPipeline::Slot& slot) {
  char name[32];
  std::snprintf(name, sizeof name, "sent_%06u.png", slot.sent.frame_id);
  video::write_png(dir / name, slot.sent);
  std::snprintf(name, sizeof name, "recv_%06u.png", slot.sent.frame_id);
  video::write_png(dir / name, slot.shown.image);
}

}  // namespace

TrialResult run_trial(const TrialConfig& config) {
  config.profile.validate();
  netem::EmulatorClock clock(config.mode);

  PipelineConfig pc;
  pc.link = config.tier.link;
  pc.seed = config.seed;
  pc.codec = config.codec;
  pc.playout_delay = config.playout_delay;
  pc.rate_control = config.rate_control;
  pc.keep_packet_trace = config.keep_packet_trace;
  VideoPipeline pipe(pc, clock);

  std::optional<std::filesystem::path> dump_dir;
  if (config.frame_dump_dir) {
    dump_dir = *config.frame_dump_dir / config.trial_id;
    std::filesystem::create_directories(*dump_dir);
  }

  const auto& profile = config.profile;
  task::World world = task::World::initial(config.workspace);
  task::OperatorState op;
  netem::Rng operator_rng(mix64(config.seed ^ 0x6f70657261746f72ULL));
  std::vector<task::TrialEvent> events;
  std::map<std::uint32_t, task::WorldSnapshot> snapshots;
  task::DisplayedView view;

  struct Pending {
    Micros effect;
    task::Command cmd;
  };
  std::deque<Pending> pending;
  task::Vec2 velocity;

  const Micros tick = profile.tick();
  const double tick_s = static_cast<double>(tick) / 1e6;
  std::uint32_t next_frame = 0;
  Micros next_tick = 0;
  Micros end_time = 0;

  TrialResult result;
  double corruption_sum = 0.0;
  auto phase = op.phase;

  for (;;) {
    const Micros t_capture = video::frame_capture_time(next_frame);
    const Micros t_release = pipe.next_release().value_or(std::numeric_limits<Micros>::max());
    const Micros t = std::min({t_capture, t_release, next_tick});
    if (t > task::kTrialTimeout) {
      end_time = task::kTrialTimeout;
      events.push_back({end_time, task::EventKind::Timeout, {}});
      break;
    }
    clock.advance_to(t);

    if (t == t_capture) {
      snapshots[next_frame] = world.snapshot();
      pipe.capture(video::render_scene(world.scene(), config.render, next_frame, t));
      ++next_frame;
      ++result.frames_sent;
      continue;
    }

    if (t == t_release) {
      for (auto& slot : pipe.release_until(t)) {
        ++result.frames_displayed;
        corruption_sum += slot.shown.corruption_ratio;
        if (slot.shown.frozen) ++result.frozen_slots;
        if (slot.shown.content_frame_id) {
          const auto id = *slot.shown.content_frame_id;
          view.truth = snapshots.at(id);
          view.content_capture_time = slot.shown.content_capture_time;
          snapshots.erase(snapshots.begin(), snapshots.lower_bound(id));
        }
        view.corruption_ratio = slot.shown.corruption_ratio;
        view.frozen = slot.shown.frozen;
        if (dump_dir) dump_slot(*dump_dir, slot);
      }
      continue;
    }

    // Control tick: commands issued earlier take effect, then the world moves.
    while (!pending.empty() && pending.front().effect <= t) {
      const auto cmd = pending.front().cmd;
      pending.pop_front();
      if (cmd.action != task::GripAction::None) {
        task::apply_command({{}, cmd.action}, world, profile, 0.0, t, events);
      }
      velocity = cmd.velocity;
    }
    task::apply_command({velocity, task::GripAction::None}, world, profile, tick_s, t, events);
    if (world.placed) {
      end_time = t;
      break;
    }

    const auto percept = task::perceive(view, t, profile, operator_rng);
    const auto cmd = task::operator_step(percept, op, profile, t);
    if (op.phase != phase) {
      events.push_back({t, task::EventKind::PhaseChange, task::to_string(op.phase)});
      phase = op.phase;
    }
    if (op.gave_up) {
      end_time = t;
      events.push_back({t, task::EventKind::GaveUp, std::to_string(op.attempts)});
      break;
    }
    pending.push_back({t + profile.command_latency(), cmd});
    next_tick += tick;
  }

  pipe.drain();
  result.qos = transport::summarize(pipe.probe(), {0, end_time});
  std::optional<video::QualityReport> quality;
  if (pipe.quality().slots() > 0) quality = pipe.quality().report();
  result.outcome = task::adjudicate(events, 0);
  result.record = make_record(config, result.qos, quality, result.outcome);
  result.events = std::move(events);
  if (config.keep_packet_trace) result.trace = pipe.trace();
  result.mean_corruption =
      result.frames_displayed ? corruption_sum / static_cast<double>(result.frames_displayed) : 0.0;
  return result;
}

CaptureResult run_capture(const CaptureConfig& config) {
  netem::EmulatorClock clock(netem::ClockMode::DiscreteEvent);
  VideoPipeline pipe(config.pipeline, clock);
  auto world = task::World::initial(task::Workspace::standard());

  CaptureResult result;
  double corruption_sum = 0.0;
  std::size_t slots = 0;
  std::uint32_t next_frame = 0;
  std::uint64_t bytes_before = 0;
  for (;;) {
    const Micros t_capture = video::frame_capture_time(next_frame);
    const bool capturing = t_capture < config.duration;
    const auto release = pipe.next_release();
    if (!capturing && !release) break;
    const Micros t = capturing ? std::min(t_capture, release.value_or(t_capture)) : *release;
    clock.advance_to(t);
    if (capturing && t == t_capture) {
      // Gripper sweeps left-right across the frame at 8 cm/s.
      const double s = 8.0 * static_cast<double>(t) / 1e6;
      const double span = task::kWorkspaceWidthCm - 10.0;
      const double phase = std::fmod(s, 2 * span);
      world.gripper.position.x = 5.0 + (phase < span ? phase : 2 * span - phase);
      pipe.capture(video::render_scene(world.scene(), config.render, next_frame, t));
      result.frame_bytes[next_frame] = static_cast<std::size_t>(pipe.encoded_bytes() - bytes_before);
      bytes_before = pipe.encoded_bytes();
      ++next_frame;
      continue;
    }
    for (auto& slot : pipe.release_until(t)) {
      ++slots;
      corruption_sum += slot.shown.corruption_ratio;
      if (slot.shown.frozen) ++result.freezes;
    }
  }
  pipe.drain();
  const Micros end = std::max(config.duration, pipe.probe().last_recv_time().value_or(0));
  result.qos = transport::summarize(pipe.probe(), {0, end});
  result.packets = pipe.packet_events();
  if (pipe.quality().slots() > 0) result.quality = pipe.quality().report();
  result.mean_corruption = slots ? corruption_sum / static_cast<double>(slots) : 0.0;
  result.encoded_bitrate_mbps = static_cast<double>(pipe.encoded_bytes()) * 8.0 / static_cast<double>(config.duration);
  result.final_quantizer = pipe.codec().quantizer;
  return result;
}

}  // namespace telesim::harness
