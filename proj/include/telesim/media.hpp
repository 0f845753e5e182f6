#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "telesim/netem.hpp"

namespace telesim {

using Bytes = std::vector<std::uint8_t>;

/// One independently decodable slice of an encoded frame.
struct SlicePayload {
  std::uint16_t slice_id = 0;
  std::shared_ptr<const Bytes> bytes;

  std::size_t size() const { return bytes ? bytes->size() : 0; }
};

struct EncodedFrame {
  std::uint32_t frame_id = 0;
  Micros capture_time = 0;
  std::uint16_t slice_count = 0;
  std::vector<SlicePayload> slices;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& s : slices) n += s.size();
    return n;
  }
};

}  // namespace telesim
