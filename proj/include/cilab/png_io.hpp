#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cilab::pngio {

// Row-major interleaved RGB, 8 bits per channel.
struct Image8 {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;
};

void write_png(const std::string& path, const Image8& image);
Image8 read_png(const std::string& path);

}  // namespace cilab::pngio
