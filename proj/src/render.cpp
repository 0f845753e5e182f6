#include <algorithm>
#include <cstring>
#include <cmath>
#include <stdexcept>

#include "telesim/video.hpp"

namespace telesim::video {

Micros frame_capture_time(std::uint32_t index) {
  return (static_cast<Micros>(index) * kMicrosPerSecond + kFps / 2) / kFps;
}

Frame::Frame(int w, int h, Rgb fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw std::invalid_argument("frame: non-positive dimensions");
  const std::size_t stride = static_cast<std::size_t>(w) * 3;
  rgb.resize(stride * static_cast<std::size_t>(h));
  for (std::size_t i = 0; i < stride; i += 3) {
    rgb[i] = fill.r;
    rgb[i + 1] = fill.g;
    rgb[i + 2] = fill.b;
  }
  for (int y = 1; y < h; ++y) std::memcpy(rgb.data() + stride * static_cast<std::size_t>(y), rgb.data(), stride);
}

Rgb Frame::pixel(int x, int y) const {
  const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

void Frame::set_pixel(int x, int y, Rgb c) {
  const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
  rgb[i] = c.r;
  rgb[i + 1] = c.g;
  rgb[i + 2] = c.b;
}

namespace {

struct PixelRect {
  int x0, y0, x1, y1;  // half-open
};

PixelRect to_pixels(double cx, double cy, double w, double h, double scale) {
  return {static_cast<int>(std::lround((cx - w / 2) * scale)), static_cast<int>(std::lround((cy - h / 2) * scale)),
          static_cast<int>(std::lround((cx + w / 2) * scale)), static_cast<int>(std::lround((cy + h / 2) * scale))};
}

void fill_rect(Frame& f, PixelRect r, Rgb c) {
  const int x0 = std::clamp(r.x0, 0, f.width), x1 = std::clamp(r.x1, 0, f.width);
  const int y0 = std::clamp(r.y0, 0, f.height), y1 = std::clamp(r.y1, 0, f.height);
  if (x0 >= x1 || y0 >= y1) return;
  for (int x = x0; x < x1; ++x) f.set_pixel(x, y0, c);
  const std::size_t stride = static_cast<std::size_t>(f.width) * 3;
  const auto* src = f.rgb.data() + static_cast<std::size_t>(y0) * stride + static_cast<std::size_t>(x0) * 3;
  const auto len = static_cast<std::size_t>(x1 - x0) * 3;
  for (int y = y0 + 1; y < y1; ++y)
    std::memcpy(f.rgb.data() + static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(x0) * 3, src, len);
}

void outline_rect(Frame& f, PixelRect r, int thickness, Rgb c) {
  fill_rect(f, {r.x0, r.y0, r.x1, r.y0 + thickness}, c);
  fill_rect(f, {r.x0, r.y1 - thickness, r.x1, r.y1}, c);
  fill_rect(f, {r.x0, r.y0, r.x0 + thickness, r.y1}, c);
  fill_rect(f, {r.x1 - thickness, r.y0, r.x1, r.y1}, c);
}

std::uint32_t mix(std::uint32_t h) {
  h ^= h >> 16;
  h *= 0x7feb352dU;
  h ^= h >> 15;
  h *= 0x846ca68bU;
  h ^= h >> 16;
  return h;
}

void add_pixel_noise(Frame& f, int amplitude, std::uint32_t salt) {
  const auto span = static_cast<std::uint32_t>(2 * amplitude + 1);
  for (std::size_t i = 0; i < f.rgb.size(); ++i) {
    const int n = static_cast<int>(mix(static_cast<std::uint32_t>(i) ^ salt) % span) - amplitude;
    f.rgb[i] = static_cast<std::uint8_t>(std::clamp(f.rgb[i] + n, 0, 255));
  }
}

// Temporal row noise: one brightness offset per row per frame, as read out
// by a rolling-shutter sensor.
void add_row_noise(Frame& f, int amplitude, std::uint32_t salt) {
  const auto span = static_cast<std::uint32_t>(2 * amplitude + 1);
  const std::size_t stride = static_cast<std::size_t>(f.width) * 3;
  for (int y = 0; y < f.height; ++y) {
    const int n = static_cast<int>(mix(static_cast<std::uint32_t>(y) * 0x632be5abU ^ salt) % span) - amplitude;
    auto* row = f.rgb.data() + static_cast<std::size_t>(y) * stride;
    // Saturating add/sub, kept branch-free so it vectorises.
    if (n > 0) {
      const auto k = static_cast<std::uint8_t>(n);
      for (std::size_t i = 0; i < stride; ++i) {
        const std::uint8_t v = row[i];
        row[i] = v > 255 - k ? 255 : static_cast<std::uint8_t>(v + k);
      }
    } else if (n < 0) {
      const auto k = static_cast<std::uint8_t>(-n);
      for (std::size_t i = 0; i < stride; ++i) {
        const std::uint8_t v = row[i];
        row[i] = v < k ? 0 : static_cast<std::uint8_t>(v - k);
      }
    }
  }
}

}  // namespace

Frame render_scene(const SceneState& s, const RenderConfig& cfg, std::uint32_t frame_id, Micros capture_time) {
  Frame f(cfg.width, cfg.height, palette::kBackground);
  f.frame_id = frame_id;
  f.capture_time = capture_time;
  const double k = cfg.px_per_cm;

  outline_rect(f, to_pixels(s.receptacle_x, s.receptacle_y, s.receptacle_w, s.receptacle_h, k), 3,
               palette::kReceptacle);
  fill_rect(f, to_pixels(s.block_x, s.block_y, s.block_w, s.block_h, k), palette::kBlock);

  const Rgb gc = s.grip_closed ? palette::kGripperClosed : palette::kGripperOpen;
  const int gx = static_cast<int>(std::lround(s.gripper_x * k));
  const int gy = static_cast<int>(std::lround(s.gripper_y * k));
  constexpr int arm = 15, half = 1;
  fill_rect(f, {gx - arm, gy - half, gx + arm + 1, gy + half + 1}, gc);
  fill_rect(f, {gx - half, gy - arm, gx + half + 1, gy + arm + 1}, gc);

  const std::uint32_t salt = mix(frame_id * 0x9e3779b9U + 1U);
  if (cfg.row_noise_amplitude > 0) add_row_noise(f, cfg.row_noise_amplitude, salt);
  if (cfg.noise_amplitude > 0) add_pixel_noise(f, cfg.noise_amplitude, mix(salt));
  return f;
}

}  // namespace telesim::video
