#include <cmath>
#include <stdexcept>
#include <vector>

#include "telesim/metrics.hpp"

// Reference kernels: single-threaded, no shortcuts.

namespace telesim::video::serial {

double psnr(const Frame& sent, const Frame& received) {
  if (sent.width != received.width || sent.height != received.height)
    throw std::invalid_argument("quality metric: frame dimensions differ");
  std::int64_t sse = 0;
  for (std::size_t i = 0; i < sent.rgb.size(); ++i) {
    const int d = static_cast<int>(sent.rgb[i]) - static_cast<int>(received.rgb[i]);
    sse += d * d;
  }
  return psnr_from_sse(sse, sent.rgb.size());
}

double ssim(const Frame& sent, const Frame& received) {
  if (sent.width != received.width || sent.height != received.height)
    throw std::invalid_argument("quality metric: frame dimensions differ");
  const int w = sent.width, h = sent.height;
  constexpr int n = kSsimWindow;
  if (w < n || h < n) throw std::invalid_argument("ssim: frame smaller than the window");

  const auto luma = [](const Frame& f) {
    std::vector<double> y(static_cast<std::size_t>(f.width) * f.height);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const auto* p = f.rgb.data() + i * 3;
      y[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
    return y;
  };
  const auto ya = luma(sent), yb = luma(received);

  // Vertical running sums over n rows, then a horizontal sliding window.
  std::vector<double> ca(static_cast<std::size_t>(w)), cb(ca), caa(ca), cbb(ca), cab(ca);
  double total = 0.0;
  for (int y = 0; y + n <= h; ++y) {
    std::fill(ca.begin(), ca.end(), 0.0);
    std::fill(cb.begin(), cb.end(), 0.0);
    std::fill(caa.begin(), caa.end(), 0.0);
    std::fill(cbb.begin(), cbb.end(), 0.0);
    std::fill(cab.begin(), cab.end(), 0.0);
    for (int r = y; r < y + n; ++r) {
      for (int x = 0; x < w; ++x) {
        const double a = ya[static_cast<std::size_t>(r) * w + x];
        const double b = yb[static_cast<std::size_t>(r) * w + x];
        ca[x] += a;
        cb[x] += b;
        caa[x] += a * a;
        cbb[x] += b * b;
        cab[x] += a * b;
      }
    }
    for (int x = 0; x + n <= w; ++x) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int k = x; k < x + n; ++k) {
        sa += ca[k];
        sb += cb[k];
        saa += caa[k];
        sbb += cbb[k];
        sab += cab[k];
      }
      const double inv = 1.0 / (n * n);
      const double ma = sa * inv, mb = sb * inv;
      const double va = saa * inv - ma * ma, vb = sbb * inv - mb * mb;
      const double cov = sab * inv - ma * mb;
      total += ((2 * ma * mb + kSsimC1) * (2 * cov + kSsimC2)) /
               ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
    }
  }
  return total / (static_cast<double>(w - n + 1) * (h - n + 1));
}

}  // namespace telesim::video::serial
