#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "telesim/quality.hpp"

namespace telesim::video {

namespace {

double mean_of(const std::vector<double>& v, std::size_t last_n) {
  if (v.empty()) return 0.0;
  const auto n = std::min(last_n, v.size());
  return std::accumulate(v.end() - static_cast<std::ptrdiff_t>(n), v.end(), 0.0) / static_cast<double>(n);
}

}  // namespace

QualityReport score_trial(std::span<const Frame> sent, std::span<const DecodedFrame> received) {
  if (sent.empty()) throw std::invalid_argument("score_trial: empty series");
  if (sent.size() != received.size()) throw std::invalid_argument("score_trial: series length mismatch");
  QualityReport r;
  r.psnr_db.resize(sent.size());
  r.ssim.resize(sent.size());
  const auto n = static_cast<long>(sent.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    r.psnr_db[i] = psnr(sent[i], received[i].image);
    r.ssim[i] = ssim(sent[i], received[i].image);
  }
  r.mean_psnr_db = mean_of(r.psnr_db, r.psnr_db.size());
  r.mean_ssim = mean_of(r.ssim, r.ssim.size());
  return r;
}

void QualityAccumulator::add(const Frame& sent, const Frame& displayed) {
  add_scores(psnr(sent, displayed), ssim(sent, displayed));
}

void QualityAccumulator::add_scores(double psnr_db, double ssim_value) {
  psnr_.push_back(psnr_db);
  ssim_.push_back(ssim_value);
}

QualityReport QualityAccumulator::report() const {
  if (psnr_.empty()) throw std::logic_error("quality: no scored slots");
  QualityReport r;
  r.psnr_db = psnr_;
  r.ssim = ssim_;
  r.mean_psnr_db = mean_of(psnr_, psnr_.size());
  r.mean_ssim = mean_of(ssim_, ssim_.size());
  return r;
}

double QualityAccumulator::rolling_psnr(std::size_t last_n) const { return mean_of(psnr_, last_n); }
double QualityAccumulator::rolling_ssim(std::size_t last_n) const { return mean_of(ssim_, last_n); }

SliceCodecConfig rate_control(const SliceCodecConfig& config, double measured_throughput_mbps,
                              double encoded_bitrate_mbps, bool enabled) {
  if (!enabled) return config;
  SliceCodecConfig next = config;
  const double target = 0.8 * measured_throughput_mbps;
  if (encoded_bitrate_mbps > target) {
    next.quantizer = std::min(32, config.quantizer * 2);
  } else if (encoded_bitrate_mbps < 0.4 * target && config.quantizer > 1) {
    next.quantizer = std::max(1, config.quantizer / 2);
  }
  return next;
}

SliceCodecConfig RateController::on_frame(const SliceCodecConfig& current, std::size_t encoded_bytes,
                                          Micros capture_time, double measured_throughput_mbps) {
  window_bytes_ += encoded_bytes;
  if (capture_time - window_start_ < kMicrosPerSecond) return current;
  const double seconds = static_cast<double>(capture_time - window_start_) / 1e6;
  last_bitrate_ = static_cast<double>(window_bytes_) * 8.0 / 1e6 / seconds;
  window_start_ = capture_time;
  window_bytes_ = 0;
  if (measured_throughput_mbps != last_throughput_) observed_.clear();
  last_throughput_ = measured_throughput_mbps;
  observed_[current.quantizer] = last_bitrate_;
  auto next = rate_control(current, measured_throughput_mbps, last_bitrate_, enabled_);
  // Do not step back down onto a quantizer already seen above the target;
  // otherwise a rate between the two thresholds makes the loop oscillate.
  if (next.quantizer < current.quantizer) {
    const auto it = observed_.find(next.quantizer);
    if (it != observed_.end() && it->second > 0.8 * measured_throughput_mbps) return current;
  }
  return next;
}

}  // namespace telesim::video
