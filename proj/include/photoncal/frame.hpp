#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "photoncal/errors.hpp"

namespace photoncal {

enum class Channel : std::uint8_t { red = 0, green = 1, blue = 2 };

/// Color-filter-array layouts. Numeric values are the on-disk codes used by
/// calibration files.
enum class BayerPattern : std::uint8_t { rggb = 0, bggr = 1, grbg = 2, gbrg = 3, none = 255 };

namespace detail {
// Channel of the 2x2 tile sites in row-major order: (0,0) (1,0) (0,1) (1,1).
inline constexpr std::array<std::array<Channel, 4>, 4> kTiles{{
    {Channel::red, Channel::green, Channel::green, Channel::blue},
    {Channel::blue, Channel::green, Channel::green, Channel::red},
    {Channel::green, Channel::red, Channel::blue, Channel::green},
    {Channel::green, Channel::blue, Channel::red, Channel::green},
}};
}  // namespace detail

/// Channel recorded at pixel (x, y). Must not be called with BayerPattern::none.
constexpr Channel channel_at(BayerPattern p, std::size_t x, std::size_t y) {
  return detail::kTiles[static_cast<std::size_t>(p)][(y & 1u) * 2 + (x & 1u)];
}

inline std::optional<BayerPattern> parse_pattern(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "rggb") return BayerPattern::rggb;
  if (s == "bggr") return BayerPattern::bggr;
  if (s == "grbg") return BayerPattern::grbg;
  if (s == "gbrg") return BayerPattern::gbrg;
  if (s == "none") return BayerPattern::none;
  return std::nullopt;
}

inline std::string to_string(BayerPattern p) {
  switch (p) {
    case BayerPattern::rggb: return "rggb";
    case BayerPattern::bggr: return "bggr";
    case BayerPattern::grbg: return "grbg";
    case BayerPattern::gbrg: return "gbrg";
    case BayerPattern::none: return "none";
  }
  return "?";
}

inline std::optional<BayerPattern> pattern_from_code(std::uint8_t code) {
  if (code <= 3 || code == 255) return static_cast<BayerPattern>(code);
  return std::nullopt;
}

inline std::optional<Channel> parse_channel(std::string_view text) {
  if (text == "r" || text == "R" || text == "red") return Channel::red;
  if (text == "g" || text == "G" || text == "green") return Channel::green;
  if (text == "b" || text == "B" || text == "blue") return Channel::blue;
  return std::nullopt;
}

/// Single-channel frame in row-major order. `Frame<std::uint16_t>` is a raw
/// sensor mosaic; `Frame<double>` carries mean calibration images and
/// unquantized (analog) sensor output.
template <class Sample>
struct Frame {
  std::size_t width = 0;
  std::size_t height = 0;
  BayerPattern pattern = BayerPattern::rggb;
  std::vector<Sample> data;

  Frame() = default;
  Frame(std::size_t w, std::size_t h, BayerPattern p, Sample fill = Sample{})
      : width(w), height(h), pattern(p), data(w * h, fill) {}

  std::size_t size() const { return data.size(); }
  Sample& operator()(std::size_t x, std::size_t y) { return data[y * width + x]; }
  const Sample& operator()(std::size_t x, std::size_t y) const { return data[y * width + x]; }
  std::span<const Sample> row(std::size_t y) const { return {data.data() + y * width, width}; }

  bool operator==(const Frame&) const = default;
};

using RawFrame = Frame<std::uint16_t>;
using AnalogFrame = Frame<double>;

template <class Sample>
void require_even(const Frame<Sample>& f, const char* what) {
  if (f.width % 2 != 0 || f.height % 2 != 0 || f.width == 0 || f.height == 0) {
    throw ContractError(std::string(what) + ": frame dimensions must be even and non-zero, got " +
                        std::to_string(f.width) + "x" + std::to_string(f.height));
  }
}

}  // namespace photoncal
