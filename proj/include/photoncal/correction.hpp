#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "photoncal/binary_io.hpp"
#include "photoncal/calibration.hpp"
#include "photoncal/image.hpp"
#include "photoncal/parallel.hpp"

namespace photoncal {

enum class PixelFlag : std::uint8_t { ok = 0, clamped = 1, dead_source = 2 };

/// Per-pixel photon totals reconstructed from a raw frame.
struct PhotonMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> photons;
  std::vector<PixelFlag> flags;

  PhotonMap() = default;
  PhotonMap(std::size_t w, std::size_t h) : width(w), height(h), photons(w * h, 0.0), flags(w * h, PixelFlag::ok) {}

  std::size_t size() const { return photons.size(); }
  bool operator==(const PhotonMap&) const = default;
};

/// Maps every pixel of `frame` through its calibration curve. Intensities
/// below the first interior knot use the first segment, those at or above the
/// last interior knot use the last one. Negative results are clamped to 0
/// (flag `clamped`); dead table pixels produce 0 (flag `dead_source`).
template <class Sample>
PhotonMap correct(const Frame<Sample>& frame, const CalibrationTable& table, unsigned workers = 1) {
  if (frame.width != table.width || frame.height != table.height) {
    throw ContractError("correct: frame is " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                        " but calibration table is " + std::to_string(table.width) + "x" +
                        std::to_string(table.height));
  }
  PhotonMap out(frame.width, frame.height);
  const std::size_t n = table.n_points;
  const std::size_t m = table.segments();
  const std::size_t w = frame.width;

  parallel_rows(frame.height, workers, [&](std::size_t row_begin, std::size_t row_end) {
    const Sample* in = frame.data.data();
    const double* bp = table.breakpoints.data();
    const double* k = table.slopes.data();
    const double* s = table.shifts.data();
    const PixelState* st = table.states.data();
    double* photons = out.photons.data();
    PixelFlag* flags = out.flags.data();
    for (std::size_t j = row_begin * w, end = row_end * w; j < end; ++j) {
      if (st[j] == PixelState::dead) {
        photons[j] = 0.0;
        flags[j] = PixelFlag::dead_source;
        continue;
      }
      const double v = static_cast<double>(in[j]);
      const double* knots = bp + j * n;
      std::size_t seg = m - 1;
      for (std::size_t i = 1; i + 1 < n; ++i) {
        if (v < knots[i]) {
          seg = i - 1;
          break;
        }
      }
      const double p = k[j * m + seg] * v + s[j * m + seg];
      if (p < 0.0) {
        photons[j] = 0.0;
        flags[j] = PixelFlag::clamped;
      } else {
        photons[j] = p;
        flags[j] = PixelFlag::ok;
      }
    }
  });
  return out;
}

inline constexpr std::uint16_t k12BitMax = 4095;
inline constexpr const char* kScaleKey = "photoncal:scale";

struct QuantizedMap {
  ImageBuffer image;  // 16-bit gray, values <= 4095, scale recorded under kScaleKey
  double scale = 1.0;
};

/// Stores photons*scale rounded (half away from zero) and clipped to 12 bits.
/// Without an explicit scale, 4095 / max(photons over ok pixels) is used; an
/// all-zero map gets scale 1.
inline QuantizedMap quantize_12bit(const PhotonMap& map, std::optional<double> scale = std::nullopt) {
  double used = 1.0;
  if (scale) {
    if (!(*scale > 0.0) || !std::isfinite(*scale)) throw ContractError("quantize_12bit: scale must be finite and > 0");
    used = *scale;
  } else {
    double peak = 0.0;
    for (std::size_t j = 0; j < map.size(); ++j) {
      if (map.flags[j] == PixelFlag::ok) peak = std::max(peak, map.photons[j]);
    }
    if (peak > 0.0) used = static_cast<double>(k12BitMax) / peak;
  }
  QuantizedMap out{ImageBuffer(map.width, map.height, 1, 16), used};
  for (std::size_t j = 0; j < map.size(); ++j) {
    const double q = std::round(map.photons[j] * used);
    out.image.samples[j] = static_cast<std::uint16_t>(std::clamp(q, 0.0, static_cast<double>(k12BitMax)));
  }
  std::ostringstream text;
  text.precision(17);
  text << used;
  out.image.text[kScaleKey] = text.str();
  return out;
}

/// Scale recorded by quantize_12bit, or 1 when the image carries none.
inline double embedded_scale(const ImageBuffer& img) {
  auto it = img.text.find(kScaleKey);
  if (it == img.text.end()) return 1.0;
  try {
    const double v = std::stod(it->second);
    return v > 0.0 && std::isfinite(v) ? v : 1.0;
  } catch (const std::exception&) {
    return 1.0;
  }
}

/// Per-channel min-max stretch to 8 bits. A constant channel maps to 0.
inline ImageBuffer preview_8bit(const ImageBuffer& img) {
  ImageBuffer out(img.width, img.height, img.channels, 8);
  const std::size_t c = img.channels;
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::uint16_t lo = 0xFFFF;
    std::uint16_t hi = 0;
    for (std::size_t i = ch; i < img.samples.size(); i += c) {
      lo = std::min(lo, img.samples[i]);
      hi = std::max(hi, img.samples[i]);
    }
    if (hi <= lo) continue;  // constant (or empty) channel stays 0
    const double range = static_cast<double>(hi - lo);
    for (std::size_t i = ch; i < img.samples.size(); i += c) {
      out.samples[i] = static_cast<std::uint16_t>(std::round(255.0 * (img.samples[i] - lo) / range));
    }
  }
  return out;
}

// PMAP: "PMAP" | u32 width | u32 height | u32 reserved (0) | f64 photons[width*height], row-major.
// Flags are not stored.
inline constexpr char kPmapMagic[4] = {'P', 'M', 'A', 'P'};

inline std::vector<std::uint8_t> encode_pmap(const PhotonMap& map) {
  binary::Writer w;
  w.bytes().reserve(16 + map.size() * 8);
  w.put_bytes(kPmapMagic, 4);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(map.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(map.height));
  w.put<std::uint32_t>(0);
  w.put_bytes(map.photons.data(), map.photons.size() * sizeof(double));
  return std::move(w.bytes());
}

inline PhotonMap decode_pmap(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  binary::Reader r(bytes, path);
  char magic[4];
  r.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kPmapMagic, 4) != 0) r.fail(0, "bad magic, expected \"PMAP\"");
  const std::size_t w = r.get<std::uint32_t>("width");
  const std::size_t h = r.get<std::uint32_t>("height");
  r.get<std::uint32_t>("reserved");
  if (r.remaining() != w * h * 8) {
    r.fail(r.offset(), "payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                           std::to_string(w * h * 8));
  }
  PhotonMap map(w, h);
  r.get_bytes(map.photons.data(), w * h * 8, "photons");
  return map;
}

inline void write_pmap(const PhotonMap& map, const std::string& path) { binary::write_file(path, encode_pmap(map)); }
inline PhotonMap read_pmap(const std::string& path) { return decode_pmap(binary::read_file(path), path); }

}  // namespace photoncal
