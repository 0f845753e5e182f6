#pragma once

// Full-reference frame quality kernels. The default entry points are
// OpenMP-parallel; serial:: holds the straightforward reference versions
// used by tests and the benchmark.

#include <vector>

#include "telesim/video.hpp"

namespace telesim::video {

constexpr double kPsnrCapDb = 100.0;
constexpr int kSsimWindow = 8;
constexpr double kSsimC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kSsimC2 = (0.03 * 255.0) * (0.03 * 255.0);

/// 10 log10(255^2 / MSE) over all pixels and channels, at most 100 dB.
/// Throws std::invalid_argument on a dimension mismatch.
double psnr(const Frame& sent, const Frame& received);

/// Mean SSIM over all 8x8 windows (stride 1) of BT.601 luminance.
/// Throws std::invalid_argument on a dimension mismatch.
double ssim(const Frame& sent, const Frame& received);

/// Sum of squared channel differences.
std::int64_t squared_error(const Frame& a, const Frame& b);

double psnr_from_sse(std::int64_t sse, std::size_t samples);

namespace serial {
double psnr(const Frame& sent, const Frame& received);
double ssim(const Frame& sent, const Frame& received);
}  // namespace serial

}  // namespace telesim::video
