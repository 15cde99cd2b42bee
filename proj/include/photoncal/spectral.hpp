#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "photoncal/errors.hpp"

namespace photoncal {

/// A sampled spectrum: values at strictly increasing wavelengths (nm).
///
/// Measured spectra carry spectrometer counts per sample, quantum-efficiency
/// curves carry a relative efficiency in [0, 1]. Both are non-negative.
class Spectrum {
 public:
  Spectrum(std::vector<double> wavelengths_nm, std::vector<double> values)
      : wavelengths_(std::move(wavelengths_nm)), values_(std::move(values)) {
    if (wavelengths_.size() != values_.size()) {
      throw ContractError("spectrum: " + std::to_string(wavelengths_.size()) + " wavelengths but " +
                          std::to_string(values_.size()) + " values");
    }
    if (wavelengths_.size() < 2) throw ContractError("spectrum: at least 2 samples required");
    for (std::size_t i = 0; i < wavelengths_.size(); ++i) {
      if (!std::isfinite(wavelengths_[i]) || !std::isfinite(values_[i])) {
        throw ContractError("spectrum: non-finite sample at index " + std::to_string(i));
      }
      if (values_[i] < 0.0) {
        throw ContractError("spectrum: negative value at index " + std::to_string(i));
      }
      if (i > 0 && !(wavelengths_[i] > wavelengths_[i - 1])) {
        throw ContractError("spectrum: wavelengths not strictly increasing at index " + std::to_string(i));
      }
    }
  }

  std::span<const double> wavelengths() const { return wavelengths_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double first_nm() const { return wavelengths_.front(); }
  double last_nm() const { return wavelengths_.back(); }

  bool operator==(const Spectrum&) const = default;

 private:
  std::vector<double> wavelengths_;
  std::vector<double> values_;
};

/// Evenly spaced grid from `first` to `last` inclusive.
inline std::vector<double> uniform_grid(double first, double last, double step) {
  if (!(step > 0.0) || !(last > first)) throw ContractError("uniform_grid: need first < last and step > 0");
  const auto n = static_cast<std::size_t>(std::floor((last - first) / step + 1e-9)) + 1;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = first + step * static_cast<double>(i);
  return grid;
}

/// Values of `s` linearly interpolated at the wavelengths in `grid`. No
/// extrapolation: every grid point must lie within [s.first_nm(),
/// s.last_nm()]. Grid points that coincide with source samples reproduce the
/// source value exactly.
inline std::vector<double> interpolate(const Spectrum& s, std::span<const double> grid) {
  if (grid.empty()) throw ContractError("resample: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw ContractError("resample: grid not strictly increasing");
  }
  if (grid.front() < s.first_nm()) {
    std::ostringstream msg;
    msg << "resample: grid start " << grid.front() << " nm is below source start " << s.first_nm() << " nm";
    throw RangeError(msg.str());
  }
  if (grid.back() > s.last_nm()) {
    std::ostringstream msg;
    msg << "resample: grid end " << grid.back() << " nm is above source end " << s.last_nm() << " nm";
    throw RangeError(msg.str());
  }

  const auto wl = s.wavelengths();
  const auto v = s.values();
  std::vector<double> out(grid.size());
  std::size_t seg = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double x = grid[g];
    while (seg + 1 < wl.size() && wl[seg + 1] <= x) ++seg;
    if (wl[seg] == x) {
      out[g] = v[seg];
      continue;
    }
    const double t = (x - wl[seg]) / (wl[seg + 1] - wl[seg]);
    out[g] = v[seg] + (v[seg + 1] - v[seg]) * t;
  }
  return out;
}

/// `s` resampled onto `grid` (at least 2 points).
inline Spectrum resample(const Spectrum& s, std::span<const double> grid) {
  if (grid.size() < 2) throw ContractError("resample: grid needs at least 2 points");
  return Spectrum(std::vector<double>(grid.begin(), grid.end()), interpolate(s, grid));
}

/// Pointwise product of two spectra sampled on the same grid.
inline Spectrum weight(const Spectrum& filter, const Spectrum& qe) {
  constexpr double kGridTolerance = 1e-9;
  if (filter.size() != qe.size()) {
    throw ContractError("weight: grid sizes differ (" + std::to_string(filter.size()) + " vs " +
                        std::to_string(qe.size()) + ")");
  }
  const auto a = filter.wavelengths();
  const auto b = qe.wavelengths();
  std::vector<double> out(filter.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (std::abs(a[i] - b[i]) > kGridTolerance) {
      std::ostringstream msg;
      msg << "weight: grids differ at index " << i << " (" << a[i] << " nm vs " << b[i] << " nm)";
      throw ContractError(msg.str());
    }
    out[i] = filter.values()[i] * qe.values()[i];
  }
  return Spectrum(std::vector<double>(a.begin(), a.end()), std::move(out));
}

/// Composite trapezoidal rule over the samples, in value·nm.
inline double integrate(const Spectrum& s) {
  const auto wl = s.wavelengths();
  const auto v = s.values();
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < wl.size(); ++i) {
    total += 0.5 * (v[i] + v[i + 1]) * (wl[i + 1] - wl[i]);
  }
  return total;
}

inline Spectrum scaled(const Spectrum& s, double factor) {
  if (!(factor >= 0.0) || !std::isfinite(factor)) throw ContractError("scaled: factor must be finite and >= 0");
  std::vector<double> v(s.values().begin(), s.values().end());
  for (double& x : v) x *= factor;
  return Spectrum(std::vector<double>(s.wavelengths().begin(), s.wavelengths().end()), std::move(v));
}

/// Brings a measured spectrum and a QE curve onto one grid: the measured
/// spectrum's own samples inside the wavelength range both cover, with the QE
/// curve linearly resampled onto it.
inline std::pair<Spectrum, Spectrum> reconcile(const Spectrum& measured, const Spectrum& qe) {
  const double lo = std::max(measured.first_nm(), qe.first_nm());
  const double hi = std::min(measured.last_nm(), qe.last_nm());
  std::vector<double> grid;
  std::vector<double> values;
  const auto wl = measured.wavelengths();
  for (std::size_t i = 0; i < wl.size(); ++i) {
    if (wl[i] >= lo && wl[i] <= hi) {
      grid.push_back(wl[i]);
      values.push_back(measured.values()[i]);
    }
  }
  if (grid.size() < 2) {
    std::ostringstream msg;
    msg << "reconcile: fewer than 2 measured samples inside the shared range [" << lo << ", " << hi << "] nm";
    throw RangeError(msg.str());
  }
  Spectrum qe_on_grid = resample(qe, grid);
  return {Spectrum(std::move(grid), std::move(values)), std::move(qe_on_grid)};
}

/// Photon total one color channel receives from a measured spectrum:
/// integrate(weight(measured, qe)) after grid reconciliation.
inline double channel_photons(const Spectrum& measured, const Spectrum& qe) {
  auto [m, q] = reconcile(measured, qe);
  return integrate(weight(m, q));
}

}  // namespace photoncal
