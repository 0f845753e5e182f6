#pragma once

// Trial orchestration: wires the emulated link, media transport, codec and
// the task loop together, and turns trials into dataset rows.

#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "telesim/netem.hpp"
#include "telesim/quality.hpp"
#include "telesim/task.hpp"
#include "telesim/transport.hpp"
#include "telesim/video.hpp"

namespace telesim::harness {

/// Extra playout delay on top of the link's latency + jitter.
constexpr Micros kPlayoutMargin = 150 * kMicrosPerMs;

struct TierSpec {
  std::string name;  // "high", "medium", "low" or a custom label
  netem::LinkConfig link;

  static TierSpec preset(netem::TierName tier);
  /// "high" | "medium" | "low" | path to a custom LinkConfig JSON file.
  static TierSpec parse(const std::string& arg);
};

Micros default_playout_delay(const netem::LinkConfig& link);

/// splitmix64 finaliser.
std::uint64_t mix64(std::uint64_t x);
/// Stable per-trial seed; independent of which other tiers are run.
std::uint64_t trial_seed(std::uint64_t master_seed, const std::string& tier, std::uint32_t index);
std::string trial_id(const std::string& tier, std::uint32_t index);

struct PipelineConfig {
  netem::LinkConfig link;
  std::uint64_t seed = 0;
  video::SliceCodecConfig codec;
  std::size_t mtu = transport::kDefaultMtu;
  std::optional<Micros> playout_delay;
  bool rate_control = false;
  bool keep_packet_trace = false;
};

/// Sender, impaired link and receiver for one video stream. Frames are fed
/// in capture order; releases happen at each frame's playout deadline.
class VideoPipeline {
 public:
  explicit VideoPipeline(const PipelineConfig& config, const netem::EmulatorClock& clock);

  void capture(video::Frame frame);
  /// Next playout deadline of a captured frame, if any.
  std::optional<Micros> next_release() const;
  struct Slot {
    video::Frame sent;
    video::DecodedFrame shown;
    double psnr_db = 0;
    double ssim = 0;
  };

  /// Delivers every packet due by `now`, then releases due frames. Each
  /// released slot is scored against its sent frame.
  std::vector<Slot> release_until(Micros now);
  /// Delivers everything still in flight to the probe (not to the display).
  void drain();

  const transport::QosProbe& probe() const { return probe_; }
  const video::QualityAccumulator& quality() const { return quality_; }
  const std::vector<netem::PacketEvent>& packet_events() const { return events_; }
  const std::vector<transport::PacketTraceRow>& trace() const { return trace_; }
  const video::SliceCodecConfig& codec() const { return codec_; }
  Micros playout_delay() const { return jitter_buffer_.playout_delay(); }
  std::uint64_t encoded_bytes() const { return encoded_bytes_; }
  const video::DecodedFrame& last_displayed() const { return displayed_; }

 private:
  void deliver(transport::MediaPacket packet);

  const netem::EmulatorClock& clock_;
  netem::Link link_;
  video::SliceCodecConfig codec_;
  video::RateController rate_;
  bool keep_trace_;
  transport::Packetizer packetizer_;
  transport::JitterBuffer jitter_buffer_;
  transport::QosProbe probe_;
  netem::EventQueue<transport::MediaPacket> in_flight_;
  std::deque<video::Frame> sent_;
  video::DecodedFrame displayed_;
  video::QualityAccumulator quality_;
  std::vector<netem::PacketEvent> events_;
  std::vector<transport::PacketTraceRow> trace_;
  std::map<std::uint64_t, std::size_t> trace_index_;
  std::uint64_t next_packet_id_ = 0;
  std::uint64_t encoded_bytes_ = 0;
};

struct TrialRecord {
  std::string trial_id;
  std::string tier;
  std::uint64_t seed = 0;
  double bandwidth_mbps = 0;
  double latency_ms = 0;
  double jitter_ms = 0;
  double set_plr_pct = 0;
  double mean_throughput_mbps = 0;
  double max_throughput_mbps = 0;
  double mean_latency_ms = 0;
  double max_latency_ms = 0;
  double mean_jitter_ms = 0;
  double max_jitter_ms = 0;
  double measured_plr_pct = 0;
  double psnr_db = 0;
  double ssim = 0;
  double completion_time_s = 0;
  bool success = false;
};

struct TrialConfig {
  TierSpec tier;
  std::uint64_t seed = 0;
  std::string trial_id;
  video::SliceCodecConfig codec;
  video::RenderConfig render;
  task::OperatorProfile profile;
  task::Workspace workspace = task::Workspace::standard();
  std::optional<Micros> playout_delay;
  bool rate_control = false;
  netem::ClockMode mode = netem::ClockMode::DiscreteEvent;
  std::optional<std::filesystem::path> frame_dump_dir;
  bool keep_packet_trace = false;
};

struct TrialResult {
  TrialRecord record;
  task::TrialOutcome outcome;
  transport::QosSummary qos;
  std::vector<task::TrialEvent> events;
  std::vector<transport::PacketTraceRow> trace;
  std::size_t frames_sent = 0;
  std::size_t frames_displayed = 0;
  std::size_t frozen_slots = 0;
  double mean_corruption = 0.0;
};

/// Starts the timer at the first rendered frame, runs the 20 Hz operator
/// loop against the 30 fps video timeline and stops at adjudication.
TrialResult run_trial(const TrialConfig& config);

TrialRecord make_record(const TrialConfig& config, const transport::QosSummary& qos,
                        const std::optional<video::QualityReport>& quality, const task::TrialOutcome& outcome);

/// Streams a scripted gripper sweep through the video path for `duration`
/// (no operator), for link-conformance measurements.
struct CaptureConfig {
  PipelineConfig pipeline;
  video::RenderConfig render;
  Micros duration = 60 * kMicrosPerSecond;
};

struct CaptureResult {
  transport::QosSummary qos;
  std::vector<netem::PacketEvent> packets;
  std::map<std::uint32_t, std::size_t> frame_bytes;  // encoded size per frame
  std::optional<video::QualityReport> quality;
  double mean_corruption = 0.0;
  std::size_t freezes = 0;
  double encoded_bitrate_mbps = 0.0;
  int final_quantizer = 1;
};

CaptureResult run_capture(const CaptureConfig& config);

// ---- dataset ----

const std::vector<std::string>& dataset_columns();
std::string csv_header();
std::string to_csv_row(const TrialRecord& r);
/// Atomic: writes to a temporary sibling and renames; nothing is left
/// behind on failure. Throws std::invalid_argument for no records.
void write_dataset(const std::vector<TrialRecord>& records, const std::filesystem::path& path);
std::vector<TrialRecord> read_dataset(const std::filesystem::path& path);

// ---- campaign ----

struct RunConfig {
  std::vector<TierSpec> tiers;
  std::uint32_t trials_per_tier = 100;
  std::uint64_t master_seed = 1;
  netem::ClockMode mode = netem::ClockMode::DiscreteEvent;
  task::OperatorProfile profile;
  video::SliceCodecConfig codec;
  std::filesystem::path out_dir;
  bool dump_frames = false;
  bool rate_control = false;
  bool write_event_logs = false;

  void validate() const;
};

struct TierAggregate {
  std::string tier;
  bool present = false;
  std::size_t trials = 0;
  double mean_psnr_db = 0;
  double mean_ssim = 0;
  double mean_completion_s = 0;
  std::optional<double> mean_completion_success_s;
  double success_rate_pct = 0;
  double mean_throughput_mbps = 0;
  double mean_latency_ms = 0;
  double measured_plr_pct = 0;
};

struct TierDelta {
  std::string tier;  // relative to "high"
  double psnr_pct = 0;
  double ssim_pct = 0;
  double completion_pct = 0;
  double success_pp = 0;
};

struct AggregateReport {
  std::vector<TierAggregate> tiers;
  std::vector<TierDelta> deltas;

  const TierAggregate* find(const std::string& tier) const;
};

/// Tiers listed in `requested` that have no records are reported absent.
/// Records of tiers not listed are appended in first-seen order.
AggregateReport aggregate(const std::vector<TrialRecord>& records, const std::vector<std::string>& requested = {});

/// "+221.8 %" style relative change from `base` to `value`.
std::string format_delta_pct(double base, double value);

nlohmann::json to_json(const AggregateReport& report);
std::string to_text(const AggregateReport& report);

struct TrendResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct TrendVerdict {
  std::vector<TrendResult> trends;
  bool all_pass() const;
  std::vector<std::string> violated() const;
};

/// Requires high, medium and low to be present (std::invalid_argument
/// otherwise).
TrendVerdict trend_check(const AggregateReport& report);
nlohmann::json to_json(const TrendVerdict& verdict);

struct CampaignResult {
  std::vector<TrialRecord> records;
  AggregateReport report;
  std::size_t skipped = 0;
};

/// Runs every (tier, index) whose trial_id is not already in
/// out_dir/trials.csv. The dataset is rewritten after each completed trial
/// and aggregate.json at the end. Independent trials run concurrently.
/// `progress` (optional) is called once per finished trial.
CampaignResult run_campaign(const RunConfig& config,
                            const std::function<void(const TrialRecord&)>& progress = {});

constexpr const char* kDatasetFile = "trials.csv";
constexpr const char* kAggregateFile = "aggregate.json";

}  // namespace telesim::harness
