#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "photoncal/correction.hpp"
#include "photoncal/errors.hpp"
#include "photoncal/frame.hpp"
#include "photoncal/keyvalue.hpp"
#include "photoncal/parallel.hpp"
#include "photoncal/rng.hpp"
#include "photoncal/spectral.hpp"
#include "photoncal/spectrum_csv.hpp"

namespace photoncal::sim {

// Synthetic camera chip used as ground truth for end-to-end checks.

/// Bell-shaped QE curve on a coarse datasheet-like grid (350-800 nm, 5 nm).
inline Spectrum gaussian_qe(double peak_nm, double sigma_nm, double peak_qe) {
  auto grid = uniform_grid(350.0, 800.0, 5.0);
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double z = (grid[i] - peak_nm) / sigma_nm;
    v[i] = peak_qe * std::exp(-0.5 * z * z);
  }
  return Spectrum(std::move(grid), std::move(v));
}

inline std::vector<Spectrum> default_qe_curves() {
  return {gaussian_qe(605.0, 40.0, 0.45), gaussian_qe(535.0, 42.0, 0.55), gaussian_qe(460.0, 35.0, 0.50)};
}

/// Light-box illuminant sampled like a spectrometer (400-700 nm, 0.5 nm),
/// rising linearly from 0.6*level at 400 nm to level at 700 nm.
inline Spectrum default_illuminant(double level = 1.0) {
  auto grid = uniform_grid(400.0, 700.0, 0.5);
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = level * (0.6 + 0.4 * (grid[i] - 400.0) / 300.0);
  return Spectrum(std::move(grid), std::move(v));
}

/// Dark first, then transmittances halving up to the open setting:
/// N=6 -> {0, 1/16, 1/8, 1/4, 1/2, 1}.
inline std::vector<double> default_filters(std::size_t n) {
  if (n < 2) throw ContractError("default_filters: N must be >= 2");
  std::vector<double> t(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) t[i] = std::ldexp(1.0, -static_cast<int>(n - 1 - i));
  return t;
}

enum class ResponseKind { power, piecewise };

struct ChipModel {
  std::size_t width = 512;
  std::size_t height = 640;
  BayerPattern pattern = BayerPattern::rggb;
  std::vector<Spectrum> qe = default_qe_curves();  // indexed by Channel

  // intensity = gain_j * sensed^gamma + offset, gain_j = gain * (1 + prnu * z_j)
  ResponseKind response = ResponseKind::power;
  double gain = 1.0;
  double gamma = 0.9;
  double offset = 64.0;
  double prnu = 0.0;
  std::uint64_t pattern_seed = 1;

  // For ResponseKind::piecewise: incident photon totals per channel at which
  // the response is sampled from the power law and joined linearly (end
  // segments extrapolate). Ascending per channel.
  std::array<std::vector<double>, 3> knots;

  double vignette_alpha = 0.0;  // v = 1 - alpha * (r / r_max)^2
  double noise_sd = 0.0;
};

struct Region {
  enum class Shape { rect, ellipse };
  Shape shape = Shape::rect;
  // Fractions of the frame size. rect: left, top, width, height.
  // ellipse: center x, center y, radius x, radius y.
  double a = 0, b = 0, c = 0, d = 0;
  double reflectance = 1.0;

  bool contains(double fx, double fy) const {
    if (shape == Shape::rect) return fx >= a && fx < a + c && fy >= b && fy < b + d;
    const double dx = (fx - a) / c;
    const double dy = (fy - b) / d;
    return dx * dx + dy * dy <= 1.0;
  }
};

struct SceneSpec {
  Spectrum illuminant = default_illuminant();
  double background = 1.0;     // reflectance outside every region
  std::vector<Region> regions;  // later regions paint over earlier ones
  std::vector<double> filters = default_filters(6);
  double transmittance = 1.0;  // gray filter in front of the scene for test exposures
};

inline void validate(const ChipModel& chip) {
  if (chip.width == 0 || chip.height == 0 || chip.width % 2 || chip.height % 2) {
    throw ContractError("chip: dimensions must be even and non-zero");
  }
  if (chip.qe.size() != 3) throw ContractError("chip: need 3 QE curves");
  if (!(chip.gain > 0.0) || !(chip.gamma > 0.0)) throw ContractError("chip: gain and gamma must be > 0");
  if (!(chip.vignette_alpha >= 0.0 && chip.vignette_alpha < 1.0)) throw ContractError("chip: vignette alpha must be in [0, 1)");
  if (!(chip.noise_sd >= 0.0) || !(chip.prnu >= 0.0)) throw ContractError("chip: noise_sd and prnu must be >= 0");
  if (chip.response == ResponseKind::piecewise) {
    for (const auto& k : chip.knots) {
      if (k.size() < 2) throw ContractError("chip: piecewise response needs >= 2 knots per channel");
      for (std::size_t i = 1; i < k.size(); ++i) {
        if (!(k[i] > k[i - 1])) throw ContractError("chip: piecewise knots must increase");
      }
    }
  }
}

inline void validate(const SceneSpec& scene) {
  auto in_unit = [](double t) { return t >= 0.0 && t <= 1.0; };
  if (!in_unit(scene.transmittance)) throw ContractError("scene: transmittance must be in [0, 1]");
  for (double t : scene.filters) {
    if (!in_unit(t)) throw ContractError("scene: filter transmittances must be in [0, 1]");
  }
  if (!(scene.background >= 0.0)) throw ContractError("scene: background reflectance must be >= 0");
  for (const auto& r : scene.regions) {
    if (!(r.reflectance >= 0.0)) throw ContractError("scene: region reflectance must be >= 0");
    if (r.shape == Region::Shape::rect) {
      if (r.a < 0 || r.b < 0 || r.c <= 0 || r.d <= 0 || r.a + r.c > 1.0 + 1e-12 || r.b + r.d > 1.0 + 1e-12) {
        throw ContractError("scene: rectangle outside the frame");
      }
    } else if (r.c <= 0 || r.d <= 0 || r.a - r.c < -1e-12 || r.a + r.c > 1.0 + 1e-12 || r.b - r.d < -1e-12 ||
               r.b + r.d > 1.0 + 1e-12) {
      throw ContractError("scene: ellipse outside the frame");
    }
  }
}

/// Vignetting factor at pixel (x, y): 1 at the optical center, 1 - alpha at
/// the corner pixels.
inline double vignette(const ChipModel& chip, std::size_t x, std::size_t y) {
  const double cx = 0.5 * static_cast<double>(chip.width - 1);
  const double cy = 0.5 * static_cast<double>(chip.height - 1);
  const double dx = static_cast<double>(x) - cx;
  const double dy = static_cast<double>(y) - cy;
  const double r2max = cx * cx + cy * cy;
  return 1.0 - chip.vignette_alpha * (dx * dx + dy * dy) / r2max;
}

namespace detail {
inline constexpr std::uint64_t kGainStream = 0x6761696eULL;   // "gain"
inline constexpr std::uint64_t kNoiseStream = 0x6e6f6973ULL;  // "nois"
}  // namespace detail

/// Fixed-pattern per-pixel gain multipliers, row-major.
inline std::vector<double> gain_field(const ChipModel& chip) {
  std::vector<double> g(chip.width * chip.height, chip.gain);
  if (chip.prnu == 0.0) return g;
  for (std::size_t y = 0; y < chip.height; ++y) {
    Rng rng(stream_key(chip.pattern_seed, detail::kGainStream, y));
    for (std::size_t x = 0; x < chip.width; ++x) {
      g[y * chip.width + x] = chip.gain * std::max(0.05, 1.0 + chip.prnu * rng.normal());
    }
  }
  return g;
}

/// Noise-free sensor output for `sensed` photons (already vignetted) at a
/// pixel with gain `g`, vignetting `v` and Bayer channel `c`.
inline double response(const ChipModel& chip, double sensed, double g, double v, std::size_t c) {
  auto power = [&](double p) { return g * std::pow(p, chip.gamma) + chip.offset; };
  if (chip.response == ResponseKind::power) return power(sensed);
  const auto& k = chip.knots[c];
  std::size_t seg = k.size() - 2;
  for (std::size_t i = 1; i + 1 < k.size(); ++i) {
    if (sensed < v * k[i]) {
      seg = i - 1;
      break;
    }
  }
  const double x0 = v * k[seg];
  const double x1 = v * k[seg + 1];
  const double y0 = power(x0);
  const double y1 = power(x1);
  return y0 + (y1 - y0) * (sensed - x0) / (x1 - x0);
}

struct Exposure {
  RawFrame raw;
  AnalogFrame analog;              // response + noise, before rounding and clipping
  PhotonMap truth;                 // incident photons per pixel, before vignetting
  std::vector<Spectrum> spectra;   // incident spectrum per region, background first
  std::vector<std::uint16_t> region_of;  // 0 = background, i+1 = scene.regions[i]
};

/// Incident photons per (region, channel) for a given filter transmittance.
inline std::vector<std::array<double, 3>> region_photons(const ChipModel& chip, const SceneSpec& scene,
                                                          double transmittance, std::vector<Spectrum>* spectra) {
  std::vector<std::array<double, 3>> out;
  auto add = [&](double reflectance) {
    Spectrum s = scaled(scene.illuminant, reflectance * transmittance);
    std::array<double, 3> p{};
    for (std::size_t c = 0; c < 3; ++c) p[c] = channel_photons(s, chip.qe[c]);
    out.push_back(p);
    if (spectra) spectra->push_back(std::move(s));
  };
  add(scene.background);
  for (const auto& r : scene.regions) add(r.reflectance);
  return out;
}

/// Region index of every pixel (pixel centers tested against fractional geometry).
inline std::vector<std::uint16_t> region_map(const ChipModel& chip, const SceneSpec& scene) {
  std::vector<std::uint16_t> map(chip.width * chip.height, 0);
  for (std::size_t y = 0; y < chip.height; ++y) {
    const double fy = (static_cast<double>(y) + 0.5) / static_cast<double>(chip.height);
    for (std::size_t x = 0; x < chip.width; ++x) {
      const double fx = (static_cast<double>(x) + 0.5) / static_cast<double>(chip.width);
      for (std::size_t r = scene.regions.size(); r-- > 0;) {
        if (scene.regions[r].contains(fx, fy)) {
          map[y * chip.width + x] = static_cast<std::uint16_t>(r + 1);
          break;
        }
      }
    }
  }
  return map;
}

/// Renders one exposure. `filter_index` selects a calibration filter from
/// scene.filters and replaces the scene by a uniform flat field of the
/// illuminant; without it the scene itself is rendered behind
/// scene.transmittance. Noise streams are keyed by (seed, row), so output does
/// not depend on the worker count.
inline Exposure render(const ChipModel& chip, const SceneSpec& scene, std::optional<std::size_t> filter_index,
                       std::uint64_t seed, unsigned workers = 1) {
  validate(chip);
  validate(scene);
  SceneSpec effective = scene;
  double transmittance = scene.transmittance;
  if (filter_index) {
    if (*filter_index >= scene.filters.size()) throw ContractError("render: filter index out of range");
    effective.regions.clear();
    effective.background = 1.0;
    transmittance = scene.filters[*filter_index];
  }

  Exposure e;
  const auto photons = region_photons(chip, effective, transmittance, &e.spectra);
  e.region_of = region_map(chip, effective);
  e.raw = RawFrame(chip.width, chip.height, chip.pattern);
  e.analog = AnalogFrame(chip.width, chip.height, chip.pattern);
  e.truth = PhotonMap(chip.width, chip.height);
  const auto gains = gain_field(chip);

  parallel_rows(chip.height, workers, [&](std::size_t row_begin, std::size_t row_end) {
    for (std::size_t y = row_begin; y < row_end; ++y) {
      Rng noise(stream_key(seed, detail::kNoiseStream, y));
      for (std::size_t x = 0; x < chip.width; ++x) {
        const std::size_t j = y * chip.width + x;
        const auto c = static_cast<std::size_t>(channel_at(chip.pattern, x, y));
        const double incident = photons[e.region_of[j]][c];
        const double v = vignette(chip, x, y);
        double intensity = response(chip, incident * v, gains[j], v, c);
        if (chip.noise_sd > 0.0) intensity += chip.noise_sd * noise.normal();
        e.truth.photons[j] = incident;
        e.analog.data[j] = intensity;
        e.raw.data[j] = static_cast<std::uint16_t>(std::clamp(std::round(intensity), 0.0, 4095.0));
      }
    }
  });
  return e;
}

struct CalibrationCorpus {
  std::vector<std::vector<RawFrame>> frames;     // N settings x P replicates
  std::vector<std::vector<AnalogFrame>> analog;  // same, before quantization
  std::vector<Spectrum> spectra;                 // incident spectrum per setting, dark first
};

/// Renders `parallels` replicates for each of the N calibration filters of
/// `scene` plus the exact incident spectrum of each setting.
inline CalibrationCorpus calibration_corpus(const ChipModel& chip, const SceneSpec& scene, std::size_t n,
                                            std::size_t parallels, std::uint64_t seed, unsigned workers = 1) {
  if (n < 2) throw ContractError("calibration_corpus: N must be >= 2");
  if (parallels < 1) throw ContractError("calibration_corpus: parallels must be >= 1");
  if (scene.filters.size() != n) {
    throw ContractError("calibration_corpus: scene defines " + std::to_string(scene.filters.size()) +
                        " filters, N = " + std::to_string(n));
  }
  CalibrationCorpus corpus;
  corpus.frames.resize(n);
  corpus.analog.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < parallels; ++p) {
      auto e = render(chip, scene, i, stream_key(seed, i, p), workers);
      if (p == 0) corpus.spectra.push_back(e.spectra.front());
      corpus.frames[i].push_back(std::move(e.raw));
      corpus.analog[i].push_back(std::move(e.analog));
    }
  }
  return corpus;
}

/// Per-channel photon totals of a set of calibration spectra (the knots a
/// piecewise chip needs to coincide with the filter settings).
inline std::array<std::vector<double>, 3> filter_photons(const ChipModel& chip, const std::vector<Spectrum>& spectra) {
  std::array<std::vector<double>, 3> out;
  for (std::size_t c = 0; c < 3; ++c) {
    for (const auto& s : spectra) out[c].push_back(channel_photons(s, chip.qe[c]));
  }
  return out;
}

/// Gain that maps the brightest incident photon total of the open filter
/// (reflectance 1, no vignetting, unit gain multiplier) to `target` counts.
inline double gain_for_target(const ChipModel& chip, const SceneSpec& scene, double target) {
  double peak = 0.0;
  double max_reflectance = scene.background;
  for (const auto& r : scene.regions) max_reflectance = std::max(max_reflectance, r.reflectance);
  const double open = scene.filters.empty() ? 1.0 : *std::max_element(scene.filters.begin(), scene.filters.end());
  const Spectrum s = scaled(scene.illuminant, std::max({1.0, max_reflectance}) * std::max(open, scene.transmittance));
  for (std::size_t c = 0; c < 3; ++c) peak = std::max(peak, channel_photons(s, chip.qe[c]));
  if (!(peak > 0.0) || !(target > chip.offset)) throw ContractError("gain_for_target: degenerate target");
  return (target - chip.offset) / std::pow(peak, chip.gamma);
}

// ---------------------------------------------------------------------------
// Text descriptions.

namespace detail {

inline Spectrum load_illuminant(const KeyValueFile& kv, const KeyValueFile::Entry& e) {
  const std::string& v = e.value;
  auto level_after = [&](std::size_t prefix) {
    double level = 0.0;
    if (!::photoncal::detail::parse_double(std::string_view(v).substr(prefix), level) || !(level >= 0.0)) {
      kv.fail(e, "bad illuminant level");
    }
    return level;
  };
  if (v.rfind("warm:", 0) == 0) return default_illuminant(level_after(5));
  if (v.rfind("flat:", 0) == 0) {
    const double level = level_after(5);
    return Spectrum({400.0, 700.0}, {level, level});
  }
  return read_spectrum_csv(v).spectrum;
}

}  // namespace detail

/// Chip description keys: width, height, pattern, response (power|piecewise),
/// gain (number or "auto"), gamma, offset, prnu, pattern_seed, vignette,
/// noise_sd, qe_r/qe_g/qe_b (CSV paths).
/// Returns the model and whether gain was "auto".
inline std::pair<ChipModel, bool> parse_chip(const KeyValueFile& kv) {
  ChipModel chip;
  bool auto_gain = false;
  static const std::vector<std::string> known = {"width", "height", "pattern", "response", "gain", "gamma",
                                                 "offset", "prnu", "pattern_seed", "vignette", "noise_sd",
                                                 "qe_r", "qe_g", "qe_b"};
  for (const auto& e : kv.entries()) {
    if (std::find(known.begin(), known.end(), e.key) == known.end()) kv.fail(e, "unknown key");
  }
  if (auto w = kv.number("width")) chip.width = static_cast<std::size_t>(*w);
  if (auto h = kv.number("height")) chip.height = static_cast<std::size_t>(*h);
  if (const auto* e = kv.find("pattern")) {
    auto p = parse_pattern(e->value);
    if (!p || *p == BayerPattern::none) kv.fail(*e, "expected rggb, bggr, grbg or gbrg");
    chip.pattern = *p;
  }
  if (const auto* e = kv.find("response")) {
    if (e->value == "power") {
      chip.response = ResponseKind::power;
    } else if (e->value == "piecewise") {
      chip.response = ResponseKind::piecewise;
    } else {
      kv.fail(*e, "expected power or piecewise");
    }
  }
  if (const auto* e = kv.find("gain")) {
    if (e->value == "auto") {
      auto_gain = true;
    } else {
      chip.gain = kv.number("gain").value();
    }
  }
  chip.gamma = kv.number_or("gamma", chip.gamma);
  chip.offset = kv.number_or("offset", chip.offset);
  chip.prnu = kv.number_or("prnu", chip.prnu);
  chip.pattern_seed = static_cast<std::uint64_t>(kv.number_or("pattern_seed", 1.0));
  chip.vignette_alpha = kv.number_or("vignette", chip.vignette_alpha);
  chip.noise_sd = kv.number_or("noise_sd", chip.noise_sd);
  const char* qe_keys[3] = {"qe_r", "qe_g", "qe_b"};
  for (std::size_t c = 0; c < 3; ++c) {
    if (auto path = kv.text(qe_keys[c])) chip.qe[c] = read_spectrum_csv(*path).spectrum;
  }
  return {chip, auto_gain};
}

/// Scene description keys: illuminant (warm:<level> | flat:<level> | CSV
/// path), background, rect = l,t,w,h,reflectance and ellipse =
/// cx,cy,rx,ry,reflectance (repeatable, fractions of the frame), filters =
/// comma list dark..open, transmittance.
inline SceneSpec parse_scene(const KeyValueFile& kv) {
  SceneSpec scene;
  for (const auto& e : kv.entries()) {
    if (e.key == "illuminant") {
      scene.illuminant = detail::load_illuminant(kv, e);
    } else if (e.key == "background") {
      scene.background = kv.numbers(e).at(0);
    } else if (e.key == "rect" || e.key == "ellipse") {
      const auto v = kv.numbers(e);
      if (v.size() != 5) kv.fail(e, "expected 5 numbers");
      Region r;
      r.shape = e.key == "rect" ? Region::Shape::rect : Region::Shape::ellipse;
      r.a = v[0];
      r.b = v[1];
      r.c = v[2];
      r.d = v[3];
      r.reflectance = v[4];
      scene.regions.push_back(r);
    } else if (e.key == "filters") {
      scene.filters = kv.numbers(e);
    } else if (e.key == "transmittance") {
      scene.transmittance = kv.numbers(e).at(0);
    } else {
      kv.fail(e, "unknown key");
    }
  }
  validate(scene);
  return scene;
}

// ---------------------------------------------------------------------------
// Fixtures shared by tests, the acceptance suite and `photoncal simulate`.

/// Uniform light-box field with the default six calibration filters.
inline SceneSpec flat_scene() {
  SceneSpec s;
  s.illuminant = default_illuminant(1.0);
  return s;
}

/// Light box imaged through a lens with moderate vignetting (alpha 0.3) by a
/// chip with 10% pixel gain spread. The open-filter peak sits low enough that
/// 4.5-sigma gain outliers stay below 4095.
inline std::pair<ChipModel, SceneSpec> flat_fixture() {
  ChipModel chip;
  chip.vignette_alpha = 0.3;
  chip.prnu = 0.10;
  chip.noise_sd = 2.0;
  SceneSpec scene = flat_scene();
  chip.gain = gain_for_target(chip, scene, 2800.0);
  return {chip, scene};
}

/// Trimodal scene for the segmentation checks, on a strongly vignetted chip.
/// Three concentric equal-area zones around the optical center, circular in
/// pixel space: a bright tank (1.0), a ring of dark fish (0.5) and a mirror
/// ring (0.85), inside the light-box wall (1.0). Vignetting pulls the mirror
/// ring halfway between the other two in the raw frame, so 2-means has two
/// stable splits there, while in photons the mirror stays with the tank.
struct FishFixture {
  ChipModel chip;
  SceneSpec scene;
  double mask_radius = 0;  // pixels; everything outside is background wall
};

inline FishFixture fish_fixture() {
  FishFixture f;
  f.chip.vignette_alpha = 0.64;
  f.chip.noise_sd = 2.0;
  const double w = static_cast<double>(f.chip.width);
  const double aspect = w / static_cast<double>(f.chip.height);
  const double r3 = 0.45;  // outer zone radius, fraction of the width
  const double r2 = r3 * std::sqrt(2.0 / 3.0);
  const double r1 = r3 / std::sqrt(3.0);
  f.scene.illuminant = default_illuminant(1.0);
  f.scene.background = 1.0;
  f.scene.regions = {{Region::Shape::ellipse, 0.5, 0.5, r3, r3 * aspect, 0.85},
                     {Region::Shape::ellipse, 0.5, 0.5, r2, r2 * aspect, 0.5},
                     {Region::Shape::ellipse, 0.5, 0.5, r1, r1 * aspect, 1.0}};
  f.chip.gain = gain_for_target(f.chip, f.scene, 3600.0);
  f.mask_radius = r3 * w;
  return f;
}

}  // namespace photoncal::sim
