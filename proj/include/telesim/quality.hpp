#pragma once

#include <map>
#include <span>
#include <vector>

#include "telesim/metrics.hpp"
#include "telesim/video.hpp"

namespace telesim::video {

struct QualityReport {
  double mean_psnr_db = 0.0;
  double mean_ssim = 0.0;
  std::vector<double> psnr_db;
  std::vector<double> ssim;
};

/// Pairs sent[i] with the frame displayed in slot i. Capped PSNR values are
/// part of the mean. Throws on empty or unequal-length series.
QualityReport score_trial(std::span<const Frame> sent, std::span<const DecodedFrame> received);

/// Streaming form of score_trial for long trials.
class QualityAccumulator {
 public:
  void add(const Frame& sent, const Frame& displayed);
  void add_scores(double psnr_db, double ssim_value);

  std::size_t slots() const { return psnr_.size(); }
  /// Throws std::logic_error when no slot was scored.
  QualityReport report() const;
  double rolling_psnr(std::size_t last_n) const;
  double rolling_ssim(std::size_t last_n) const;

 private:
  std::vector<double> psnr_;
  std::vector<double> ssim_;
};

/// One controller step: doubles the quantizer while the encoded rate is
/// above 0.8 x throughput, halves it when the rate is below 0.4 x that
/// target. Disabled returns the config unchanged.
SliceCodecConfig rate_control(const SliceCodecConfig& config, double measured_throughput_mbps,
                              double encoded_bitrate_mbps, bool enabled);

/// Tracks encoded bytes and applies rate_control once per second of media time.
/// Remembers the rate last seen at each quantizer and skips a downward step
/// onto one that overshot, until the measured throughput changes.
class RateController {
 public:
  explicit RateController(bool enabled) : enabled_(enabled) {}

  /// Returns the config to use for the next frame.
  SliceCodecConfig on_frame(const SliceCodecConfig& current, std::size_t encoded_bytes, Micros capture_time,
                            double measured_throughput_mbps);
  double last_bitrate_mbps() const { return last_bitrate_; }

 private:
  bool enabled_;
  Micros window_start_ = 0;
  std::size_t window_bytes_ = 0;
  double last_bitrate_ = 0.0;
  double last_throughput_ = 0.0;
  std::map<int, double> observed_;
};

}  // namespace telesim::video
