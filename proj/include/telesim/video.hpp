#pragma once

// Frames, the top-down workspace renderer and the row-slice codec with
// previous-frame concealment.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "telesim/media.hpp"

namespace telesim::video {

constexpr int kFrameWidth = 640;
constexpr int kFrameHeight = 480;
constexpr int kFps = 30;
constexpr double kPixelsPerCm = 10.0;

/// Capture instant of frame `index` on the 30 fps grid, in microseconds.
Micros frame_capture_time(std::uint32_t index);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// Interleaved 8-bit RGB image.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
  std::uint32_t frame_id = 0;
  Micros capture_time = 0;

  Frame() = default;
  Frame(int w, int h, Rgb fill = {});

  std::size_t row_bytes() const { return static_cast<std::size_t>(width) * 3; }
  std::span<std::uint8_t> row(int y) {
    return {rgb.data() + static_cast<std::size_t>(y) * row_bytes(), row_bytes()};
  }
  std::span<const std::uint8_t> row(int y) const {
    return {rgb.data() + static_cast<std::size_t>(y) * row_bytes(), row_bytes()};
  }
  Rgb pixel(int x, int y) const;
  void set_pixel(int x, int y, Rgb c);

  bool same_pixels(const Frame& other) const {
    return width == other.width && height == other.height && rgb == other.rgb;
  }
};

/// What the camera sees, in workspace centimetres (origin top-left, y down).
struct SceneState {
  double block_x = 0, block_y = 0;
  double block_w = 3.7, block_h = 2.1;
  double receptacle_x = 0, receptacle_y = 0;
  double receptacle_w = 6.0, receptacle_h = 5.0;
  double gripper_x = 0, gripper_y = 0;
  bool grip_closed = false;
};

struct RenderConfig {
  int width = kFrameWidth;
  int height = kFrameHeight;
  double px_per_cm = kPixelsPerCm;
  /// Sensor noise, deterministic in frame_id. Row noise offsets each row by
  /// a uniform value in [-a, a] per frame; pixel noise does the same per
  /// channel value (incompressible). 0 disables either.
  int row_noise_amplitude = 6;
  int noise_amplitude = 0;
};

namespace palette {
constexpr Rgb kBackground{92, 100, 108};
constexpr Rgb kBlock{208, 56, 44};
constexpr Rgb kReceptacle{52, 84, 196};
constexpr Rgb kGripperOpen{236, 204, 40};
constexpr Rgb kGripperClosed{40, 220, 120};
}  // namespace palette

/// Deterministic: identical (state, config, frame_id) give identical pixels.
Frame render_scene(const SceneState& state, const RenderConfig& config = {},
                   std::uint32_t frame_id = 0, Micros capture_time = 0);

struct SliceCodecConfig {
  int slice_height = 16;
  int quantizer = 1;
  std::optional<double> target_bitrate_mbps;

  void validate(int frame_height = kFrameHeight) const;
  int slice_count(int frame_height = kFrameHeight) const { return frame_height / slice_height; }
};

/// Reconstruction of one channel value under quantizer q (index * q + q/2,
/// clamped), as produced by encode followed by decode.
std::uint8_t quantize_value(std::uint8_t v, int q);

/// Each slice covers `slice_height` rows and decodes on its own.
///
/// Slice layout (little endian):
///   u8 'S', u8 quantizer, u16 slice_id, u16 first_row, u16 rows, u16 width
///   then per row: u8 mode
///     mode 0 (raw): width x 3 quantization indices
///     mode 1 (rle): u16 runs, then runs x (u16 length, 3 indices)
EncodedFrame encode(const Frame& frame, const SliceCodecConfig& config);

/// Decodes one slice into `target` rows. Returns false (leaving `target`
/// untouched) for a malformed or mismatched slice.
bool decode_slice(std::span<const std::uint8_t> slice, Frame& target);

struct DecodedFrame {
  Frame image;
  /// Frame whose content is on screen; stays at the old id while frozen.
  std::optional<std::uint32_t> content_frame_id;
  Micros content_capture_time = 0;
  double corruption_ratio = 0.0;
  bool frozen = false;
  Micros display_time = 0;
  std::vector<bool> concealed;  // per slice

  /// Mid-gray placeholder shown before the first frame arrives.
  static DecodedFrame gray(int width = kFrameWidth, int height = kFrameHeight);
};

struct SliceArrivals {
  std::uint32_t frame_id = 0;
  Micros capture_time = 0;
  Micros display_time = 0;
  std::uint16_t slice_count = 0;
  std::span<const SlicePayload> slices;
};

/// Arrived slices are decoded in place; missing ones keep the previous
/// frame's rows. Nothing arrived means a frozen repeat of `previous`.
DecodedFrame decode(const SliceArrivals& arrivals, const DecodedFrame& previous);

}  // namespace telesim::video
