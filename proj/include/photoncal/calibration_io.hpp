#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "photoncal/binary_io.hpp"
#include "photoncal/calibration.hpp"

namespace photoncal {

// PCAL layout (little-endian):
//   "PCAL" | u16 version=1 | u32 width | u32 height | u16 n_points | u8 channels | u8 pattern
//   f64 photon_totals[channels * n_points]
//   per pixel, row-major: f32 breakpoints[n] | f32 slopes[n-1] | f32 shifts[n-1]
//   u8 states[width * height]
//   u32 crc32 of every preceding byte
//
// Per-pixel parameters are stored single precision, so a save/load cycle
// rounds them to float; a second cycle is bit-exact.

inline constexpr char kPcalMagic[4] = {'P', 'C', 'A', 'L'};
inline constexpr std::uint16_t kPcalVersion = 1;

inline std::vector<std::uint8_t> encode_table(const CalibrationTable& t) {
  binary::Writer w;
  w.put_bytes(kPcalMagic, 4);
  w.put<std::uint16_t>(kPcalVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.height));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(t.n_points));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(t.channels));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(t.pattern));
  for (double a : t.photon_totals) w.put<double>(a);
  const std::size_t n = t.n_points;
  const std::size_t m = t.segments();
  w.bytes().reserve(w.bytes().size() + t.pixels() * (4 * (n + 2 * m) + 1) + 4);
  for (std::size_t j = 0; j < t.pixels(); ++j) {
    for (std::size_t i = 0; i < n; ++i) w.put<float>(static_cast<float>(t.breakpoints[j * n + i]));
    for (std::size_t i = 0; i < m; ++i) w.put<float>(static_cast<float>(t.slopes[j * m + i]));
    for (std::size_t i = 0; i < m; ++i) w.put<float>(static_cast<float>(t.shifts[j * m + i]));
  }
  for (auto s : t.states) w.put<std::uint8_t>(static_cast<std::uint8_t>(s));
  w.put<std::uint32_t>(binary::crc32_of(w.bytes().data(), w.bytes().size()));
  return std::move(w.bytes());
}

inline CalibrationTable decode_table(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  binary::Reader r(bytes, path);
  char magic[4];
  r.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kPcalMagic, 4) != 0) r.fail(0, "bad magic, expected \"PCAL\"");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kPcalVersion) r.fail(4, "unsupported version " + std::to_string(version));

  CalibrationTable t;
  t.width = r.get<std::uint32_t>("width");
  t.height = r.get<std::uint32_t>("height");
  const std::size_t n_at = r.offset();
  t.n_points = r.get<std::uint16_t>("n_points");
  if (t.n_points < 2) r.fail(n_at, "n_points must be >= 2, got " + std::to_string(t.n_points));
  const std::size_t ch_at = r.offset();
  t.channels = r.get<std::uint8_t>("channels");
  if (t.channels != 1 && t.channels != 3) r.fail(ch_at, "channels must be 1 or 3, got " + std::to_string(t.channels));
  const std::size_t pat_at = r.offset();
  const auto pattern = pattern_from_code(r.get<std::uint8_t>("pattern"));
  if (!pattern) r.fail(pat_at, "unknown Bayer pattern code");
  t.pattern = *pattern;
  if (t.channels == 3 && t.pattern == BayerPattern::none) r.fail(pat_at, "3-channel table without a Bayer pattern");

  const std::size_t n = t.n_points;
  const std::size_t m = n - 1;
  const std::size_t px = t.pixels();
  const std::size_t expected =
      r.offset() + t.channels * n * 8 + px * (4 * (n + 2 * m)) + px + 4;
  if (bytes.size() != expected) {
    r.fail(bytes.size() < expected ? bytes.size() : expected,
           "file is " + std::to_string(bytes.size()) + " bytes, header implies " + std::to_string(expected));
  }
  const std::size_t crc_at = bytes.size() - 4;
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + crc_at, 4);
  if (stored_crc != binary::crc32_of(bytes.data(), crc_at)) r.fail(crc_at, "CRC32 mismatch");

  t.photon_totals.resize(t.channels * n);
  for (double& a : t.photon_totals) a = r.get<double>("photon_totals");
  t.breakpoints.resize(px * n);
  t.slopes.resize(px * m);
  t.shifts.resize(px * m);
  for (std::size_t j = 0; j < px; ++j) {
    for (std::size_t i = 0; i < n; ++i) t.breakpoints[j * n + i] = r.get<float>("breakpoints");
    for (std::size_t i = 0; i < m; ++i) t.slopes[j * m + i] = r.get<float>("slopes");
    for (std::size_t i = 0; i < m; ++i) t.shifts[j * m + i] = r.get<float>("shifts");
  }
  t.states.resize(px);
  for (auto& s : t.states) {
    const std::size_t at = r.offset();
    const auto code = r.get<std::uint8_t>("states");
    if (code > 2) r.fail(at, "invalid pixel state " + std::to_string(code));
    s = static_cast<PixelState>(code);
  }
  return t;
}

inline void save_table(const CalibrationTable& t, const std::string& path) {
  binary::write_file(path, encode_table(t));
}

inline CalibrationTable load_table(const std::string& path) {
  return decode_table(binary::read_file(path), path);
}

}  // namespace photoncal
