#pragma once

// RTP-style media transport: packetization of encoded slices, receiver-side
// QoS measurement and a fixed-delay jitter buffer.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "telesim/media.hpp"
#include "telesim/netem.hpp"

namespace telesim::transport {

constexpr std::size_t kDefaultMtu = 1200;
constexpr std::uint32_t kMediaClockHz = 90000;

struct MediaPacket {
  std::uint16_t seq = 0;
  std::uint32_t media_timestamp = 0;
  std::uint32_t frame_id = 0;
  std::uint16_t slice_id = 0;
  std::uint16_t fragment = 0;
  std::uint16_t fragment_count = 1;
  bool last_slice_flag = false;
  std::size_t payload_size = 0;
  Micros capture_time = 0;
  Micros send_time = 0;
  Micros recv_time = 0;
  // The complete slice this fragment belongs to; bytes [offset, offset+payload_size).
  std::shared_ptr<const Bytes> slice_data;
  std::size_t offset = 0;

  std::span<const std::uint8_t> payload() const {
    return {slice_data->data() + offset, payload_size};
  }
};

std::uint32_t media_timestamp_for(Micros capture_time);

/// Splits slices into MTU-sized packets. The sequence counter persists
/// across frames and wraps at 2^16.
class Packetizer {
 public:
  explicit Packetizer(std::size_t mtu = kDefaultMtu, std::uint16_t first_seq = 0);

  /// Throws std::invalid_argument for an empty frame or a slice larger than
  /// 10 x MTU.
  std::vector<MediaPacket> packetize(const EncodedFrame& frame, Micros send_time);

  std::size_t mtu() const { return mtu_; }
  std::uint64_t packets_sent() const { return packets_sent_; }

 private:
  std::size_t mtu_;
  std::uint16_t next_seq_;
  std::uint64_t packets_sent_ = 0;
};

/// Unwraps 16-bit sequence numbers into a monotone 64-bit space.
class SequenceUnwrapper {
 public:
  std::uint64_t unwrap(std::uint16_t seq);

 private:
  bool started_ = false;
  std::uint64_t highest_ = 0;
};

/// RFC 3550 interarrival jitter: J += (|D| - J) / 16, in microseconds.
class InterarrivalJitter {
 public:
  void update(Micros transit);
  double value_us() const { return jitter_; }

 private:
  bool has_prev_ = false;
  Micros prev_transit_ = 0;
  double jitter_ = 0.0;
};

struct CapturePeriod {
  Micros begin = 0;
  Micros end = 0;
};

/// Receiver-owned accumulators for the measured network metrics.
class QosProbe {
 public:
  /// Sender report for one packet put on the wire.
  void on_send(const MediaPacket& packet);
  /// Returns false (and counts nothing) for a duplicate sequence number.
  bool on_receive(const MediaPacket& packet);

  std::uint64_t sent_count() const { return sent_; }
  std::uint64_t received_count() const { return received_; }
  std::uint64_t delivered_payload_bytes() const { return payload_bytes_; }
  double jitter_ms() const { return jitter_.value_us() / 1000.0; }
  const std::vector<Micros>& latency_samples() const { return latencies_; }
  const std::map<std::int64_t, std::uint64_t>& window_bits() const { return window_bits_; }
  const std::vector<double>& jitter_samples_ms() const { return jitter_samples_; }
  std::optional<Micros> first_send_time() const { return first_send_; }
  std::optional<Micros> last_recv_time() const { return last_recv_; }

 private:
  std::uint64_t sent_ = 0;
  std::uint64_t received_ = 0;
  std::uint64_t payload_bytes_ = 0;
  SequenceUnwrapper unwrapper_;
  std::unordered_set<std::uint64_t> seen_;
  InterarrivalJitter jitter_;
  std::vector<Micros> latencies_;
  std::vector<double> jitter_samples_;
  std::map<std::int64_t, std::uint64_t> window_bits_;
  std::optional<Micros> first_send_;
  std::optional<Micros> last_recv_;
};

/// Media statistics are absent when nothing was received.
struct MediaStats {
  double mean_throughput_mbps = 0.0;
  double max_throughput_mbps = 0.0;
  double mean_latency_ms = 0.0;
  double max_latency_ms = 0.0;
  double min_latency_ms = 0.0;
  double mean_jitter_ms = 0.0;
  double max_jitter_ms = 0.0;
};

struct QosSummary {
  std::optional<MediaStats> media;
  double measured_plr_pct = 100.0;
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
};

/// Throughput uses the complete 1-second windows inside `period` (missing
/// windows count as zero). With no complete window, the whole period's
/// average is reported as both mean and max.
QosSummary summarize(const QosProbe& probe, CapturePeriod period);
/// Period defaults to [first send, last receive].
QosSummary summarize(const QosProbe& probe);

struct ReleasedFrame {
  std::uint32_t frame_id = 0;
  Micros capture_time = 0;
  Micros release_time = 0;
  std::uint16_t slice_count = 0;
  /// Slices whose every fragment arrived by the deadline, ordered by id.
  std::vector<SlicePayload> slices;
};

/// Fixed playout-delay buffer. Each expected frame is released exactly once
/// at capture_time + playout_delay with whatever complete slices arrived.
class JitterBuffer {
 public:
  explicit JitterBuffer(Micros playout_delay);

  Micros playout_delay() const { return playout_delay_; }

  /// Registers a frame slot from the receiver's knowledge of the frame clock.
  void expect(std::uint32_t frame_id, Micros capture_time, std::uint16_t slice_count);

  /// Returns false when the packet missed its frame's deadline (late) or
  /// belongs to an already released frame.
  bool insert(const MediaPacket& packet);

  /// Releases, in frame order, every frame whose deadline is <= now.
  std::vector<ReleasedFrame> release_frames(Micros now);

  std::uint64_t late_packets() const { return late_; }
  std::size_t pending() const { return frames_.size(); }

 private:
  struct SliceAssembly {
    std::uint16_t fragments_seen = 0;
    std::uint16_t fragment_count = 0;
    std::vector<bool> have;
    std::shared_ptr<const Bytes> data;
  };
  struct PendingFrame {
    Micros capture_time = 0;
    std::uint16_t slice_count = 0;
    std::map<std::uint16_t, SliceAssembly> slices;
  };

  Micros playout_delay_;
  std::map<std::uint32_t, PendingFrame> frames_;
  std::optional<std::uint32_t> last_released_;
  std::uint64_t late_ = 0;
};

struct PacketTraceRow {
  std::uint16_t seq = 0;
  std::uint32_t frame_id = 0;
  std::uint16_t slice_id = 0;
  std::size_t size_b = 0;
  Micros send_us = 0;
  std::optional<Micros> recv_us;
};

/// CSV columns: seq,frame_id,slice_id,size_b,send_us,recv_us,dropped
void write_packet_trace(const std::filesystem::path& path,
                        std::span<const PacketTraceRow> rows);

}  // namespace telesim::transport
