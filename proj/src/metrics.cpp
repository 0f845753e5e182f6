#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "telesim/metrics.hpp"

namespace telesim::video {

namespace {

void require_same_shape(const Frame& a, const Frame& b) {
  if (a.width != b.width || a.height != b.height || a.rgb.size() != b.rgb.size())
    throw std::invalid_argument("quality metric: frame dimensions differ");
}

bool rows_equal(const Frame& a, const Frame& b, int y) {
  return std::memcmp(a.row(y).data(), b.row(y).data(), a.row_bytes()) == 0;
}

void luminance_row(const Frame& f, int y, double* out) {
  const auto row = f.row(y);
  for (int x = 0; x < f.width; ++x) {
    const auto* p = row.data() + static_cast<std::size_t>(x) * 3;
    out[x] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
}

struct ColumnSums {
  std::vector<double> a, b, aa, bb, ab;
  explicit ColumnSums(std::size_t w) : a(w), b(w), aa(w), bb(w), ab(w) {}
};

// Sum of SSIM over the windows whose top edge is row y.
// Luminance planes hold only the rows some non-trivial window touches;
// slot[y] is row y's position in them.
struct LumaRows {
  std::vector<int> slot;
  std::vector<double> a, b;
  const double* row_a(int y, int w) const { return a.data() + static_cast<std::size_t>(slot[y]) * w; }
  const double* row_b(int y, int w) const { return b.data() + static_cast<std::size_t>(slot[y]) * w; }
};

double window_row_sum(const LumaRows& luma, int width, int y, ColumnSums& c) {
  constexpr int n = kSsimWindow;
  std::fill(c.a.begin(), c.a.end(), 0.0);
  std::fill(c.b.begin(), c.b.end(), 0.0);
  std::fill(c.aa.begin(), c.aa.end(), 0.0);
  std::fill(c.bb.begin(), c.bb.end(), 0.0);
  std::fill(c.ab.begin(), c.ab.end(), 0.0);
  for (int r = y; r < y + n; ++r) {
    const double* a = luma.row_a(r, width);
    const double* b = luma.row_b(r, width);
    for (int x = 0; x < width; ++x) {
      c.a[x] += a[x];
      c.b[x] += b[x];
      c.aa[x] += a[x] * a[x];
      c.bb[x] += b[x] * b[x];
      c.ab[x] += a[x] * b[x];
    }
  }
  constexpr double inv = 1.0 / (n * n);
  double total = 0.0;
  for (int x = 0; x + n <= width; ++x) {
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (int k = x; k < x + n; ++k) {
      sa += c.a[k];
      sb += c.b[k];
      saa += c.aa[k];
      sbb += c.bb[k];
      sab += c.ab[k];
    }
    const double ma = sa * inv, mb = sb * inv;
    const double va = saa * inv - ma * ma;
    const double vb = sbb * inv - mb * mb;
    const double cov = sab * inv - ma * mb;
    total += ((2 * ma * mb + kSsimC1) * (2 * cov + kSsimC2)) /
             ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
  }
  return total;
}

}  // namespace

std::int64_t squared_error(const Frame& a, const Frame& b) {
  require_same_shape(a, b);
  std::int64_t sse = 0;
  const int h = a.height;
#pragma omp parallel for reduction(+ : sse) schedule(static)
  for (int y = 0; y < h; ++y) {
    if (rows_equal(a, b, y)) continue;
    const auto ra = a.row(y), rb = b.row(y);
    std::int64_t row = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
      const int d = static_cast<int>(ra[i]) - static_cast<int>(rb[i]);
      row += d * d;
    }
    sse += row;
  }
  return sse;
}

double psnr_from_sse(std::int64_t sse, std::size_t samples) {
  if (sse == 0) return kPsnrCapDb;
  const double mse = static_cast<double>(sse) / static_cast<double>(samples);
  return std::min(kPsnrCapDb, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double psnr(const Frame& sent, const Frame& received) {
  return psnr_from_sse(squared_error(sent, received), sent.rgb.size());
}

double ssim(const Frame& sent, const Frame& received) {
  require_same_shape(sent, received);
  const int w = sent.width, h = sent.height;
  constexpr int n = kSsimWindow;
  if (w < n || h < n) throw std::invalid_argument("ssim: frame smaller than the window");

  // A window lying entirely on identical rows scores exactly 1.
  std::vector<int> diff_prefix(static_cast<std::size_t>(h) + 1, 0);
  for (int y = 0; y < h; ++y) diff_prefix[y + 1] = diff_prefix[y] + (rows_equal(sent, received, y) ? 0 : 1);
  if (diff_prefix[h] == 0) return 1.0;

  const int window_rows = h - n + 1;
  std::vector<char> needed(static_cast<std::size_t>(h), 0);
  for (int y = 0; y < window_rows; ++y) {
    if (diff_prefix[y + n] - diff_prefix[y] == 0) continue;
    for (int r = y; r < y + n; ++r) needed[r] = 1;
  }

  LumaRows luma;
  luma.slot.assign(static_cast<std::size_t>(h), -1);
  std::vector<int> rows;
  for (int y = 0; y < h; ++y) {
    if (!needed[y]) continue;
    luma.slot[y] = static_cast<int>(rows.size());
    rows.push_back(y);
  }
  luma.a.resize(rows.size() * static_cast<std::size_t>(w));
  luma.b.resize(luma.a.size());
  const int nrows = static_cast<int>(rows.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < nrows; ++i) {
    luminance_row(sent, rows[i], luma.a.data() + static_cast<std::size_t>(i) * w);
    luminance_row(received, rows[i], luma.b.data() + static_cast<std::size_t>(i) * w);
  }

  // Per-row partials, summed in order afterwards, keep the result
  // independent of the thread count.
  std::vector<double> partial(static_cast<std::size_t>(window_rows));
  const double ones = static_cast<double>(w - n + 1);
#pragma omp parallel
  {
    ColumnSums sums(static_cast<std::size_t>(w));
#pragma omp for schedule(dynamic, 8)
    for (int y = 0; y < window_rows; ++y) {
      partial[y] = diff_prefix[y + n] - diff_prefix[y] == 0 ? ones : window_row_sum(luma, w, y, sums);
    }
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total / (ones * window_rows);
}

}  // namespace telesim::video
