#pragma once

#include <filesystem>

#include "telesim/media.hpp"
#include "telesim/video.hpp"

namespace telesim::video {

Bytes encode_png(const Frame& frame);
Frame decode_png(std::span<const std::uint8_t> png);
void write_png(const std::filesystem::path& path, const Frame& frame);

}  // namespace telesim::video
