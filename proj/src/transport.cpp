#include "telesim/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace telesim::transport {

std::uint32_t media_timestamp_for(Micros capture_time) {
  // 90 kHz ticks; wraps like an RTP timestamp.
  const auto ticks = static_cast<std::uint64_t>(capture_time) * kMediaClockHz / 1000000u;
  return static_cast<std::uint32_t>(ticks);
}

Packetizer::Packetizer(std::size_t mtu, std::uint16_t first_seq) : mtu_(mtu), next_seq_(first_seq) {
  if (mtu_ == 0) throw std::invalid_argument("packetizer: mtu must be > 0");
}

std::vector<MediaPacket> Packetizer::packetize(const EncodedFrame& frame, Micros send_time) {
  if (frame.slices.empty()) throw std::invalid_argument("packetize: empty frame");
  for (const auto& slice : frame.slices) {
    if (slice.size() == 0) throw std::invalid_argument("packetize: empty slice");
    if (slice.size() > 10 * mtu_) throw std::invalid_argument("packetize: slice exceeds 10 x mtu");
  }

  std::vector<MediaPacket> out;
  const auto ts = media_timestamp_for(frame.capture_time);
  for (const auto& slice : frame.slices) {
    const auto count = static_cast<std::uint16_t>((slice.size() + mtu_ - 1) / mtu_);
    for (std::uint16_t frag = 0; frag < count; ++frag) {
      MediaPacket p;
      p.seq = next_seq_++;
      p.media_timestamp = ts;
      p.frame_id = frame.frame_id;
      p.slice_id = slice.slice_id;
      p.fragment = frag;
      p.fragment_count = count;
      p.offset = static_cast<std::size_t>(frag) * mtu_;
      p.payload_size = std::min(mtu_, slice.size() - p.offset);
      p.capture_time = frame.capture_time;
      p.send_time = send_time;
      p.slice_data = slice.bytes;
      out.push_back(std::move(p));
    }
  }
  out.back().last_slice_flag = true;
  packets_sent_ += out.size();
  return out;
}

std::uint64_t SequenceUnwrapper::unwrap(std::uint16_t seq) {
  if (!started_) {
    started_ = true;
    // Start one cycle in so that early reordered packets stay non-negative.
    highest_ = (std::uint64_t{1} << 16) + seq;
    return highest_;
  }
  const auto diff = static_cast<std::int16_t>(static_cast<std::uint16_t>(seq - static_cast<std::uint16_t>(highest_)));
  const auto ext = static_cast<std::uint64_t>(static_cast<std::int64_t>(highest_) + diff);
  highest_ = std::max(highest_, ext);
  return ext;
}

void InterarrivalJitter::update(Micros transit) {
  if (has_prev_) {
    const double d = std::abs(static_cast<double>(transit - prev_transit_));
    jitter_ += (d - jitter_) / 16.0;
  }
  has_prev_ = true;
  prev_transit_ = transit;
}

void QosProbe::on_send(const MediaPacket& packet) {
  ++sent_;
  if (!first_send_ || packet.send_time < *first_send_) first_send_ = packet.send_time;
}

bool QosProbe::on_receive(const MediaPacket& packet) {
  const auto ext = unwrapper_.unwrap(packet.seq);
  if (!seen_.insert(ext).second) return false;
  ++received_;
  payload_bytes_ += packet.payload_size;

  const Micros transit = packet.recv_time - packet.send_time;
  latencies_.push_back(transit);
  jitter_.update(transit);
  jitter_samples_.push_back(jitter_ms());

  const auto window = packet.recv_time / kMicrosPerSecond;
  window_bits_[window] += static_cast<std::uint64_t>(packet.payload_size) * 8u;
  if (!last_recv_ || packet.recv_time > *last_recv_) last_recv_ = packet.recv_time;
  return true;
}

QosSummary summarize(const QosProbe& probe, CapturePeriod period) {
  QosSummary s;
  s.sent = probe.sent_count();
  s.received = probe.received_count();
  if (s.sent > 0) {
    s.measured_plr_pct = 100.0 * static_cast<double>(s.sent - s.received) / static_cast<double>(s.sent);
  }
  if (s.received == 0) return s;

  MediaStats m;
  const auto& lat = probe.latency_samples();
  const auto lat_sum = std::accumulate(lat.begin(), lat.end(), std::int64_t{0});
  m.mean_latency_ms = to_ms(lat_sum) / static_cast<double>(lat.size());
  m.max_latency_ms = to_ms(*std::max_element(lat.begin(), lat.end()));
  m.min_latency_ms = to_ms(*std::min_element(lat.begin(), lat.end()));

  const auto& jit = probe.jitter_samples_ms();
  m.mean_jitter_ms = std::accumulate(jit.begin(), jit.end(), 0.0) / static_cast<double>(jit.size());
  m.max_jitter_ms = *std::max_element(jit.begin(), jit.end());

  // First window starting at or after period.begin; last one ending by period.end.
  const auto first = (period.begin + kMicrosPerSecond - 1) / kMicrosPerSecond;
  const auto last_exclusive = period.end / kMicrosPerSecond;
  if (last_exclusive > first) {
    double sum = 0.0;
    double peak = 0.0;
    const auto& bits = probe.window_bits();
    for (auto w = first; w < last_exclusive; ++w) {
      const auto it = bits.find(w);
      const double mbps = it == bits.end() ? 0.0 : static_cast<double>(it->second) / 1e6;
      sum += mbps;
      peak = std::max(peak, mbps);
    }
    m.mean_throughput_mbps = sum / static_cast<double>(last_exclusive - first);
    m.max_throughput_mbps = peak;
  } else {
    const auto span = std::max<Micros>(1, period.end - period.begin);
    std::uint64_t in_period = 0;
    for (const auto& [w, b] : probe.window_bits()) {
      (void)w;
      in_period += b;
    }
    m.mean_throughput_mbps = static_cast<double>(in_period) / static_cast<double>(span);
    m.max_throughput_mbps = m.mean_throughput_mbps;
  }
  s.media = m;
  return s;
}

QosSummary summarize(const QosProbe& probe) {
  CapturePeriod p;
  p.begin = probe.first_send_time().value_or(0);
  p.end = probe.last_recv_time().value_or(p.begin);
  return summarize(probe, p);
}

JitterBuffer::JitterBuffer(Micros playout_delay) : playout_delay_(playout_delay) {
  if (playout_delay_ < 0) throw std::invalid_argument("jitter buffer: negative playout delay");
}

void JitterBuffer::expect(std::uint32_t frame_id, Micros capture_time, std::uint16_t slice_count) {
  if (last_released_ && frame_id <= *last_released_) return;
  auto& f = frames_[frame_id];
  f.capture_time = capture_time;
  f.slice_count = slice_count;
}

bool JitterBuffer::insert(const MediaPacket& packet) {
  if (last_released_ && packet.frame_id <= *last_released_) {
    ++late_;
    return false;
  }
  if (packet.recv_time > packet.capture_time + playout_delay_) {
    ++late_;
    return false;
  }
  auto [it, fresh] = frames_.try_emplace(packet.frame_id);
  auto& frame = it->second;
  if (fresh) frame.capture_time = packet.capture_time;

  auto& slice = frame.slices[packet.slice_id];
  if (slice.have.empty()) {
    slice.fragment_count = packet.fragment_count;
    slice.have.assign(packet.fragment_count, false);
    slice.data = packet.slice_data;
  }
  if (packet.fragment < slice.have.size() && !slice.have[packet.fragment]) {
    slice.have[packet.fragment] = true;
    ++slice.fragments_seen;
  }
  return true;
}

std::vector<ReleasedFrame> JitterBuffer::release_frames(Micros now) {
  std::vector<ReleasedFrame> out;
  while (!frames_.empty()) {
    auto it = frames_.begin();
    const Micros deadline = it->second.capture_time + playout_delay_;
    if (deadline > now) break;
    ReleasedFrame r;
    r.frame_id = it->first;
    r.capture_time = it->second.capture_time;
    r.release_time = deadline;
    r.slice_count = it->second.slice_count;
    for (auto& [id, s] : it->second.slices) {
      if (s.fragments_seen == s.fragment_count) r.slices.push_back(SlicePayload{id, s.data});
    }
    last_released_ = it->first;
    frames_.erase(it);
    out.push_back(std::move(r));
  }
  return out;
}

void write_packet_trace(const std::filesystem::path& path, std::span<const PacketTraceRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write packet trace " + path.string());
  out << "seq,frame_id,slice_id,size_b,send_us,recv_us,dropped\n";
  for (const auto& r : rows) {
    out << r.seq << ',' << r.frame_id << ',' << r.slice_id << ',' << r.size_b << ',' << r.send_us << ',';
    if (r.recv_us) out << *r.recv_us;
    out << ',' << (r.recv_us ? 0 : 1) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing packet trace " + path.string());
}

}  // namespace telesim::transport
