#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "photoncal/errors.hpp"
#include "photoncal/frame.hpp"
#include "photoncal/parallel.hpp"
#include "photoncal/spectral.hpp"

namespace photoncal {

enum class PixelState : std::uint8_t { valid = 0, repaired = 1, dead = 2 };

/// Per-pixel piecewise-linear map from raw intensity to photon total.
///
/// Pixel j has `n_points` breakpoints (the mean intensity it recorded under
/// each calibration filter, dark first) and `n_points - 1` linear segments.
/// Segment i maps v to slopes[i]*v + shifts[i] and passes through
/// (breakpoints[i], A[i]) and (breakpoints[i+1], A[i+1]), where A is the
/// photon-total vector of the pixel's Bayer channel.
///
/// Arrays are pixel-major: pixel j's breakpoints live at
/// [j*n_points, (j+1)*n_points), its slopes and shifts at
/// [j*(n_points-1), (j+1)*(n_points-1)).
struct CalibrationTable {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t n_points = 0;
  BayerPattern pattern = BayerPattern::none;
  std::size_t channels = 1;            // 1, or 3 when each Bayer channel has its own totals
  std::vector<double> photon_totals;   // channels x n_points
  std::vector<double> breakpoints;
  std::vector<double> slopes;
  std::vector<double> shifts;
  std::vector<PixelState> states;

  std::size_t pixels() const { return width * height; }
  std::size_t segments() const { return n_points - 1; }

  /// Row of `photon_totals` used by pixel j.
  std::size_t channel_of(std::size_t j) const {
    if (channels == 1) return 0;
    return static_cast<std::size_t>(channel_at(pattern, j % width, j / width));
  }
  std::span<const double> totals(std::size_t channel) const {
    return {photon_totals.data() + channel * n_points, n_points};
  }
  std::span<const double> knots(std::size_t j) const { return {breakpoints.data() + j * n_points, n_points}; }
  std::span<const double> slopes_of(std::size_t j) const { return {slopes.data() + j * segments(), segments()}; }
  std::span<const double> shifts_of(std::size_t j) const { return {shifts.data() + j * segments(), segments()}; }

  bool operator==(const CalibrationTable&) const = default;
};

/// Segment used for intensity v: the first segment also covers v below
/// knots[1], the last covers everything from knots[n-2] upwards.
inline std::size_t select_segment(std::span<const double> knots, double v) {
  const std::size_t n = knots.size();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (v < knots[i]) return i - 1;
  }
  return n - 2;
}

/// Raw photon estimate for pixel j (no clamping, no dead-pixel handling).
inline double evaluate(const CalibrationTable& t, std::size_t j, double v) {
  const std::size_t seg = select_segment(t.knots(j), v);
  return t.slopes_of(j)[seg] * v + t.shifts_of(j)[seg];
}

/// Per-pixel mean of P replicate frames, in double precision.
///
/// Integer samples are summed exactly. Real samples are summed in ascending
/// order per pixel so the result does not depend on replicate order.
template <class Sample>
AnalogFrame mean_frame(std::span<const Frame<Sample>> stack) {
  if (stack.empty()) throw ContractError("mean_frame: empty replicate stack");
  const auto& first = stack.front();
  for (const auto& f : stack) {
    if (f.width != first.width || f.height != first.height) {
      throw ContractError("mean_frame: replicate dimensions differ (" + std::to_string(first.width) + "x" +
                          std::to_string(first.height) + " vs " + std::to_string(f.width) + "x" +
                          std::to_string(f.height) + ")");
    }
  }
  AnalogFrame out(first.width, first.height, first.pattern, 0.0);
  const double count = static_cast<double>(stack.size());
  if constexpr (std::is_integral_v<Sample>) {
    for (const auto& f : stack) {
      for (std::size_t j = 0; j < f.size(); ++j) out.data[j] += static_cast<double>(f.data[j]);
    }
    for (double& v : out.data) v /= count;
  } else {
    std::vector<double> column(stack.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
      for (std::size_t p = 0; p < stack.size(); ++p) column[p] = static_cast<double>(stack[p].data[j]);
      std::sort(column.begin(), column.end());
      double sum = 0.0;
      for (double v : column) sum += v;
      out.data[j] = sum / count;
    }
  }
  return out;
}

struct PhotonTotals {
  std::vector<double> values;
  bool monotone = true;
  std::vector<std::string> warnings;
};

/// Photon totals A[i] one channel receives under each calibration filter
/// setting (spectra ordered dark to open). A non-monotone result is reported,
/// not rejected: it usually means the filters were supplied out of order.
inline PhotonTotals photon_totals(std::span<const Spectrum> filter_spectra, const Spectrum& qe) {
  PhotonTotals out;
  out.values.reserve(filter_spectra.size());
  for (const auto& s : filter_spectra) out.values.push_back(channel_photons(s, qe));
  for (std::size_t i = 1; i < out.values.size(); ++i) {
    if (out.values[i] < out.values[i - 1]) {
      out.monotone = false;
      std::ostringstream msg;
      msg << "photon totals decrease from setting " << i - 1 << " (" << out.values[i - 1] << ") to setting " << i
          << " (" << out.values[i] << "); check filter order";
      out.warnings.push_back(msg.str());
    }
  }
  return out;
}

struct BuildOptions {
  double max_dead_fraction = 0.05;
  std::size_t repair_radius = 8;
  unsigned workers = 1;
};

struct BuildReport {
  std::size_t valid = 0;
  std::size_t repaired = 0;
  std::size_t dead = 0;                // still dead after repair
  std::size_t dead_before_repair = 0;
};

struct BuildResult {
  CalibrationTable table;
  BuildReport report;
};

namespace detail {

inline void repair_dead_pixels(CalibrationTable& t, std::size_t radius) {
  const std::size_t stride = t.pattern == BayerPattern::none || t.channels == 1 ? 1 : 2;
  const auto n = t.n_points;
  const auto m = t.segments();
  const auto w = static_cast<std::ptrdiff_t>(t.width);
  const auto h = static_cast<std::ptrdiff_t>(t.height);
  for (std::size_t j = 0; j < t.pixels(); ++j) {
    if (t.states[j] != PixelState::dead) continue;
    const auto x = static_cast<std::ptrdiff_t>(j % t.width);
    const auto y = static_cast<std::ptrdiff_t>(j / t.width);
    bool fixed = false;
    for (std::ptrdiff_t r = 1; r <= static_cast<std::ptrdiff_t>(radius) && !fixed; ++r) {
      for (std::ptrdiff_t dy = -r; dy <= r && !fixed; ++dy) {
        const std::ptrdiff_t span = r - std::abs(dy);
        for (std::ptrdiff_t dx : {-span, span}) {
          const std::ptrdiff_t sx = x + dx * static_cast<std::ptrdiff_t>(stride);
          const std::ptrdiff_t sy = y + dy * static_cast<std::ptrdiff_t>(stride);
          if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
          const auto src = static_cast<std::size_t>(sy * w + sx);
          // Only originally valid pixels donate; repaired ones never chain.
          if (t.states[src] != PixelState::valid) continue;
          std::copy_n(t.breakpoints.begin() + src * n, n, t.breakpoints.begin() + j * n);
          std::copy_n(t.slopes.begin() + src * m, m, t.slopes.begin() + j * m);
          std::copy_n(t.shifts.begin() + src * m, m, t.shifts.begin() + j * m);
          t.states[j] = PixelState::repaired;
          fixed = true;
          break;
        }
      }
    }
  }
}

}  // namespace detail

/// Builds the calibration table from per-channel photon totals and the N mean
/// calibration frames (dark first).
///
/// `totals` holds either one vector (every pixel shares it) or three vectors
/// indexed by Channel, selected per pixel through `pattern`. A pixel whose
/// intensity fails to increase between consecutive settings, or whose slope is
/// not finite and positive, is dead; dead pixels borrow the parameters of the
/// nearest valid pixel of the same Bayer channel. More than
/// `max_dead_fraction` dead pixels raises QualityError.
inline BuildResult build_table(std::span<const std::vector<double>> totals, std::span<const AnalogFrame> means,
                               BayerPattern pattern, const BuildOptions& options = {}) {
  const std::size_t n = means.size();
  if (n < 2) throw ContractError("build_table: at least 2 calibration settings required, got " + std::to_string(n));
  if (totals.size() != 1 && totals.size() != 3) {
    throw ContractError("build_table: expected 1 or 3 photon-total vectors, got " + std::to_string(totals.size()));
  }
  if (totals.size() == 3 && pattern == BayerPattern::none) {
    throw ContractError("build_table: per-channel totals need a Bayer pattern");
  }
  for (const auto& a : totals) {
    if (a.size() != n) {
      throw ContractError("build_table: " + std::to_string(a.size()) + " photon totals for " + std::to_string(n) +
                          " mean frames");
    }
  }
  for (const auto& f : means) {
    if (f.width != means[0].width || f.height != means[0].height) {
      throw ContractError("build_table: mean frame dimensions differ");
    }
  }

  CalibrationTable t;
  t.width = means[0].width;
  t.height = means[0].height;
  t.n_points = n;
  t.pattern = pattern;
  t.channels = totals.size();
  for (const auto& a : totals) t.photon_totals.insert(t.photon_totals.end(), a.begin(), a.end());
  const std::size_t px = t.pixels();
  const std::size_t m = n - 1;
  t.breakpoints.assign(px * n, 0.0);
  t.slopes.assign(px * m, 0.0);
  t.shifts.assign(px * m, 0.0);
  t.states.assign(px, PixelState::valid);

  parallel_rows(t.height, options.workers, [&](std::size_t row_begin, std::size_t row_end) {
    for (std::size_t j = row_begin * t.width; j < row_end * t.width; ++j) {
      const auto a = t.totals(t.channel_of(j));
      double* bp = t.breakpoints.data() + j * n;
      double* k = t.slopes.data() + j * m;
      double* s = t.shifts.data() + j * m;
      for (std::size_t i = 0; i < n; ++i) bp[i] = means[i].data[j];
      bool ok = true;
      for (std::size_t i = 0; i < m; ++i) {
        const double step = bp[i + 1] - bp[i];
        if (!(step > 0.0)) {
          ok = false;
          continue;
        }
        k[i] = (a[i + 1] - a[i]) / step;
        s[i] = a[i] - k[i] * bp[i];
        if (!(k[i] > 0.0) || !std::isfinite(k[i]) || !std::isfinite(s[i])) ok = false;
      }
      if (!ok) t.states[j] = PixelState::dead;
    }
  });

  BuildReport report;
  report.dead_before_repair =
      static_cast<std::size_t>(std::count(t.states.begin(), t.states.end(), PixelState::dead));
  const double dead_fraction = static_cast<double>(report.dead_before_repair) / static_cast<double>(px);
  if (dead_fraction > options.max_dead_fraction) {
    std::ostringstream msg;
    msg << "build_table: " << report.dead_before_repair << " of " << px << " pixels (" << dead_fraction * 100.0
        << "%) have a non-increasing response; limit is " << options.max_dead_fraction * 100.0 << "%";
    throw QualityError(msg.str());
  }
  if (report.dead_before_repair > 0) detail::repair_dead_pixels(t, options.repair_radius);

  for (auto st : t.states) {
    switch (st) {
      case PixelState::valid: ++report.valid; break;
      case PixelState::repaired: ++report.repaired; break;
      case PixelState::dead: ++report.dead; break;
    }
  }
  return {std::move(t), report};
}

}  // namespace photoncal
