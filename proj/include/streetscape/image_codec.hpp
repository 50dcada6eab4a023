#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace streetscape {

/// Interleaved 8-bit raster (1 = gray, 3 = RGB channels).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  static Image filled(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * channels]; }
};

/// Returns nullopt when the bytes are not a decodable JPEG.
std::optional<Image> decode_jpeg(std::string_view bytes);

std::string encode_jpeg(const Image& image, int quality = 90);

}  // namespace streetscape
