#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "photoncal/errors.hpp"
#include "photoncal/frame.hpp"
#include "photoncal/parallel.hpp"

namespace photoncal {

using Rgb = std::array<double, 3>;

/// Half-resolution RGB image, one pixel per 2x2 Bayer tile.
struct RgbQuarterImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Rgb> pixels;

  RgbQuarterImage() = default;
  RgbQuarterImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h, Rgb{0.0, 0.0, 0.0}) {}

  Rgb& operator()(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  const Rgb& operator()(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  bool operator==(const RgbQuarterImage&) const = default;
};

/// Non-interpolating demosaic: each tile's red and blue samples are copied,
/// its two green samples averaged. Works on raw intensities and on real-valued
/// maps (e.g. corrected photon totals) alike.
template <class Sample>
RgbQuarterImage demosaic(const Frame<Sample>& rf, unsigned workers = 1) {
  require_even(rf, "demosaic");
  if (rf.pattern == BayerPattern::none) throw ContractError("demosaic: frame has no Bayer pattern");
  RgbQuarterImage out(rf.width / 2, rf.height / 2);
  parallel_rows(out.height, workers, [&](std::size_t row_begin, std::size_t row_end) {
    for (std::size_t ty = row_begin; ty < row_end; ++ty) {
      for (std::size_t tx = 0; tx < out.width; ++tx) {
        Rgb px{0.0, 0.0, 0.0};
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t x = 2 * tx + dx;
            const std::size_t y = 2 * ty + dy;
            const auto c = static_cast<std::size_t>(channel_at(rf.pattern, x, y));
            px[c] += static_cast<double>(rf(x, y));
          }
        }
        px[1] *= 0.5;
        out(tx, ty) = px;
      }
    }
  });
  return out;
}

struct Histogram {
  std::vector<double> edges;  // bins + 1 uniform edges over [0, 4096)
  std::vector<std::uint64_t> counts;

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

inline constexpr double kHistogramRange = 4096.0;

/// Histogram of the Bayer sites of one channel (both green sites for green)
/// for which include(x, y) holds. Values outside [0, 4096) land in the first
/// or last bin.
template <class Sample, class Include>
Histogram channel_histogram_where(const Frame<Sample>& rf, Channel channel, std::size_t bins, Include&& include) {
  if (bins < 1) throw ContractError("channel_histogram: bins must be >= 1");
  if (rf.pattern == BayerPattern::none) throw ContractError("channel_histogram: frame has no Bayer pattern");
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = kHistogramRange * static_cast<double>(i) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  const double per_bin = static_cast<double>(bins) / kHistogramRange;
  for (std::size_t y = 0; y < rf.height; ++y) {
    for (std::size_t x = 0; x < rf.width; ++x) {
      if (channel_at(rf.pattern, x, y) != channel || !include(x, y)) continue;
      const double b = std::floor(static_cast<double>(rf(x, y)) * per_bin);
      const auto idx = b < 0.0 ? 0 : std::min(static_cast<std::size_t>(b), bins - 1);
      ++h.counts[idx];
    }
  }
  return h;
}

template <class Sample>
Histogram channel_histogram(const Frame<Sample>& rf, Channel channel, std::size_t bins) {
  return channel_histogram_where(rf, channel, bins, [](std::size_t, std::size_t) { return true; });
}

/// Number of local maxima holding at least `min_fraction` of the total count.
/// A plateau of equal bins counts once; it is a maximum when both bins
/// flanking it are lower (outside the range counts as 0).
inline std::size_t local_maxima(const Histogram& h, double min_fraction) {
  const double total = static_cast<double>(h.total());
  const auto& c = h.counts;
  std::size_t peaks = 0;
  for (std::size_t i = 0; i < c.size();) {
    std::size_t j = i;
    while (j + 1 < c.size() && c[j + 1] == c[i]) ++j;
    const std::uint64_t left = i > 0 ? c[i - 1] : 0;
    const std::uint64_t right = j + 1 < c.size() ? c[j + 1] : 0;
    if (c[i] > left && c[i] > right && static_cast<double>(c[i]) >= min_fraction * total) ++peaks;
    i = j + 1;
  }
  return peaks;
}

}  // namespace photoncal
