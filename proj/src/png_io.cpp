#include <png.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "telesim/png_io.hpp"

namespace telesim::video {

Bytes encode_png(const Frame& frame) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(frame.width);
  image.height = static_cast<png_uint_32>(frame.height);
  image.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, frame.rgb.data(), 0, nullptr))
    throw std::runtime_error(std::string("png encode: ") + image.message);
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, frame.rgb.data(), 0, nullptr))
    throw std::runtime_error(std::string("png encode: ") + image.message);
  out.resize(size);
  return out;
}

Frame decode_png(std::span<const std::uint8_t> png) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, png.data(), png.size()))
    throw std::runtime_error(std::string("png decode: ") + image.message);
  image.format = PNG_FORMAT_RGB;
  Frame f(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, f.rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    throw std::runtime_error(std::string("png decode: ") + image.message);
  }
  return f;
}

void write_png(const std::filesystem::path& path, const Frame& frame) {
  const auto bytes = encode_png(frame);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace telesim::video
