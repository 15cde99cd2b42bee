#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "photoncal/errors.hpp"
#include "photoncal/frame.hpp"

namespace photoncal {

/// Interleaved 8- or 16-bit image with 1 (gray) or 3 (RGB) channels, plus
/// PNG text metadata.
struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  int bit_depth = 16;
  std::vector<std::uint16_t> samples;
  std::map<std::string, std::string> text;

  ImageBuffer() = default;
  ImageBuffer(std::size_t w, std::size_t h, std::size_t c, int depth)
      : width(w), height(h), channels(c), bit_depth(depth), samples(w * h * c, 0) {}

  std::uint16_t max_sample() const { return bit_depth == 8 ? 255 : 65535; }

  void validate() const {
    if (channels != 1 && channels != 3) throw ContractError("image: channels must be 1 or 3");
    if (bit_depth != 8 && bit_depth != 16) throw ContractError("image: bit depth must be 8 or 16");
    if (samples.size() != width * height * channels) throw ContractError("image: sample count mismatch");
    if (bit_depth == 8) {
      for (auto s : samples) {
        if (s > 255) throw ContractError("image: 8-bit sample out of range");
      }
    }
  }

  bool operator==(const ImageBuffer&) const = default;
};

inline ImageBuffer to_image(const RawFrame& f) {
  ImageBuffer img(f.width, f.height, 1, 16);
  img.samples = f.data;
  return img;
}

inline RawFrame to_raw_frame(const ImageBuffer& img, BayerPattern pattern) {
  if (img.channels != 1) throw ContractError("raw frame: expected a single-channel image");
  RawFrame f;
  f.width = img.width;
  f.height = img.height;
  f.pattern = pattern;
  f.data = img.samples;
  return f;
}

}  // namespace photoncal
