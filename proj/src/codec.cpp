#include <algorithm>
#include <array>
#include <cstring>
#include <stdexcept>

#include "telesim/video.hpp"

namespace telesim::video {

namespace {

constexpr std::uint8_t kSliceMagic = 'S';
constexpr std::size_t kSliceHeader = 10;
constexpr std::uint8_t kRowRaw = 0;
constexpr std::uint8_t kRowRle = 1;

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint8_t reconstruct(std::uint8_t index, int q) {
  return static_cast<std::uint8_t>(std::min(255, index * q + q / 2));
}

// Writes `len` copies of the 3-byte pixel `c` at dst.
void fill_pixels(std::uint8_t* dst, const std::uint8_t* c, std::size_t len) {
  if (len == 0) return;
  std::memcpy(dst, c, 3);
  std::size_t done = 1;
  while (done < len) {
    const std::size_t n = std::min(done, len - done);
    std::memcpy(dst + done * 3, dst, n * 3);
    done += n;
  }
}

// Row layout: mode byte, then either the raw indices or a run count
// followed by (u16 length, 3 index bytes) per run. RLE is used when smaller.
void encode_row(std::span<const std::uint8_t> row, int q, Bytes& out, Bytes& scratch) {
  const std::size_t n = row.size();
  const std::uint8_t* d = row.data();
  if (q != 1) {
    scratch.resize(n);
    for (std::size_t i = 0; i < n; ++i) scratch[i] = static_cast<std::uint8_t>(row[i] / q);
    d = scratch.data();
  }

  const std::size_t base = out.size();
  const std::size_t limit = n;  // RLE must beat the raw row size
  out.push_back(kRowRle);
  put_u16(out, 0);
  std::size_t runs = 0;
  bool rle = n > 0;
  std::size_t start = 0;
  const auto emit = [&](std::size_t end) {
    const std::size_t len = (end - start) / 3;
    put_u16(out, static_cast<std::uint16_t>(len));
    out.insert(out.end(), d + start, d + start + 3);
    ++runs;
    start = end;
  };
  for (std::size_t i = 3; i < n && rle; i += 3) {
    if (((d[i] ^ d[i - 3]) | (d[i + 1] ^ d[i - 2]) | (d[i + 2] ^ d[i - 1])) == 0) continue;
    emit(i);
    if (2 + (runs + 1) * 5 >= limit) rle = false;
  }
  if (rle) {
    emit(n);
    rle = 2 + runs * 5 < limit && runs <= 0xffff;
  }
  if (!rle) {
    out.resize(base);
    out.push_back(kRowRaw);
    out.insert(out.end(), d, d + n);
    return;
  }
  out[base + 1] = static_cast<std::uint8_t>(runs & 0xff);
  out[base + 2] = static_cast<std::uint8_t>(runs >> 8);
}

}  // namespace

void SliceCodecConfig::validate(int frame_height) const {
  if (slice_height <= 0 || frame_height % slice_height != 0)
    throw std::invalid_argument("codec: slice_height must divide the frame height");
  if (quantizer < 1 || quantizer > 32) throw std::invalid_argument("codec: quantizer must be within 1..32");
  if (target_bitrate_mbps && !(*target_bitrate_mbps > 0.0))
    throw std::invalid_argument("codec: target bitrate must be > 0");
}

std::uint8_t quantize_value(std::uint8_t v, int q) {
  return reconstruct(static_cast<std::uint8_t>(v / q), q);
}

EncodedFrame encode(const Frame& frame, const SliceCodecConfig& config) {
  config.validate(frame.height);
  const int count = config.slice_count(frame.height);
  EncodedFrame out;
  out.frame_id = frame.frame_id;
  out.capture_time = frame.capture_time;
  out.slice_count = static_cast<std::uint16_t>(count);
  out.slices.resize(static_cast<std::size_t>(count));

#pragma omp parallel for schedule(static)
  for (int s = 0; s < count; ++s) {
    auto bytes = std::make_shared<Bytes>();
    bytes->reserve(kSliceHeader + static_cast<std::size_t>(config.slice_height) * 64);
    const int first = s * config.slice_height;
    bytes->push_back(kSliceMagic);
    bytes->push_back(static_cast<std::uint8_t>(config.quantizer));
    put_u16(*bytes, static_cast<std::uint16_t>(s));
    put_u16(*bytes, static_cast<std::uint16_t>(first));
    put_u16(*bytes, static_cast<std::uint16_t>(config.slice_height));
    put_u16(*bytes, static_cast<std::uint16_t>(frame.width));
    Bytes scratch;
    for (int y = first; y < first + config.slice_height; ++y) encode_row(frame.row(y), config.quantizer, *bytes, scratch);
    out.slices[static_cast<std::size_t>(s)] = SlicePayload{static_cast<std::uint16_t>(s), std::move(bytes)};
  }
  return out;
}

bool decode_slice(std::span<const std::uint8_t> in, Frame& target) {
  if (in.size() < kSliceHeader || in[0] != kSliceMagic) return false;
  const int q = in[1];
  const int first = get_u16(&in[4]);
  const int rows = get_u16(&in[6]);
  const int width = get_u16(&in[8]);
  if (q < 1 || width != target.width || first + rows > target.height) return false;

  const std::size_t row_bytes = static_cast<std::size_t>(width) * 3;
  std::vector<std::uint8_t> decoded(row_bytes * static_cast<std::size_t>(rows));
  std::array<std::uint8_t, 256> lut{};
  for (int i = 0; i < 256; ++i) lut[static_cast<std::size_t>(i)] = reconstruct(static_cast<std::uint8_t>(i), q);

  std::size_t pos = kSliceHeader;
  for (int r = 0; r < rows; ++r) {
    if (pos >= in.size()) return false;
    std::uint8_t* dst = decoded.data() + static_cast<std::size_t>(r) * row_bytes;
    const auto mode = in[pos++];
    if (mode == kRowRaw) {
      if (pos + row_bytes > in.size()) return false;
      for (std::size_t i = 0; i < row_bytes; ++i) dst[i] = lut[in[pos + i]];
      pos += row_bytes;
    } else if (mode == kRowRle) {
      if (pos + 2 > in.size()) return false;
      const std::size_t runs = get_u16(&in[pos]);
      pos += 2;
      if (pos + runs * 5 > in.size()) return false;
      std::size_t px = 0;
      for (std::size_t k = 0; k < runs; ++k, pos += 5) {
        const std::size_t len = get_u16(&in[pos]);
        if (px + len > static_cast<std::size_t>(width)) return false;
        const std::uint8_t c[3] = {lut[in[pos + 2]], lut[in[pos + 3]], lut[in[pos + 4]]};
        fill_pixels(dst + px * 3, c, len);
        px += len;
      }
      if (px != static_cast<std::size_t>(width)) return false;
    } else {
      return false;
    }
  }
  if (pos != in.size()) return false;
  std::memcpy(target.rgb.data() + static_cast<std::size_t>(first) * row_bytes, decoded.data(), decoded.size());
  return true;
}

DecodedFrame DecodedFrame::gray(int width, int height) {
  DecodedFrame d;
  d.image = Frame(width, height, Rgb{128, 128, 128});
  d.corruption_ratio = 1.0;
  d.frozen = true;
  return d;
}

DecodedFrame decode(const SliceArrivals& a, const DecodedFrame& previous) {
  DecodedFrame out;
  out.display_time = a.display_time;
  out.concealed.assign(a.slice_count, true);

  if (a.slices.empty() || a.slice_count == 0) {
    out.image = previous.image;
    out.image.frame_id = a.frame_id;
    out.content_frame_id = previous.content_frame_id;
    out.content_capture_time = previous.content_capture_time;
    out.corruption_ratio = 1.0;
    out.frozen = true;
    return out;
  }

  out.image = previous.image;
  out.image.frame_id = a.frame_id;
  out.image.capture_time = a.capture_time;
  std::size_t decoded = 0;
  for (const auto& s : a.slices) {
    if (s.slice_id >= a.slice_count || !s.bytes) continue;
    if (!out.concealed[s.slice_id]) continue;
    if (decode_slice(*s.bytes, out.image)) {
      out.concealed[s.slice_id] = false;
      ++decoded;
    }
  }
  if (decoded == 0) {
    out.image = previous.image;
    out.content_frame_id = previous.content_frame_id;
    out.content_capture_time = previous.content_capture_time;
    out.corruption_ratio = 1.0;
    out.frozen = true;
    return out;
  }
  out.content_frame_id = a.frame_id;
  out.content_capture_time = a.capture_time;
  out.corruption_ratio = static_cast<double>(a.slice_count - decoded) / static_cast<double>(a.slice_count);
  return out;
}

}  // namespace telesim::video
