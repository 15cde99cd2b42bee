#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "photoncal/errors.hpp"
#include "photoncal/spectral.hpp"

namespace photoncal {

struct SpectrumFile {
  Spectrum spectrum;
  std::size_t clamped = 0;  // negative samples raised to 0 on ingestion
};

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses `wavelength_nm,value` rows. A first row whose wavelength field is
/// not numeric is treated as a header. Blank lines are skipped. Negative
/// values (spectrometer dark noise) are clamped to 0 and counted.
inline SpectrumFile parse_spectrum_csv(std::string_view text, const std::string& path) {
  std::vector<double> wl;
  std::vector<double> values;
  std::size_t clamped = 0;
  std::size_t row = 0;
  std::size_t pos = 0;
  bool first_content = true;
  while (pos < text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    ++row;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const auto comma = line.find(',');
    if (comma == std::string_view::npos) throw FormatError::at_row(path, row, "expected 2 comma-separated columns");
    if (line.find(',', comma + 1) != std::string_view::npos) {
      throw FormatError::at_row(path, row, "expected 2 columns, found more");
    }
    double lambda = 0.0;
    double value = 0.0;
    const bool lambda_ok = detail::parse_double(line.substr(0, comma), lambda);
    if (!lambda_ok && first_content) {
      first_content = false;
      continue;  // header
    }
    first_content = false;
    if (!lambda_ok) throw FormatError::at_row(path, row, "wavelength is not a number");
    if (!detail::parse_double(line.substr(comma + 1), value)) throw FormatError::at_row(path, row, "value is not a number");
    if (!std::isfinite(lambda) || !std::isfinite(value)) throw FormatError::at_row(path, row, "non-finite number");
    if (!wl.empty() && !(lambda > wl.back())) {
      throw FormatError::at_row(path, row, "wavelength does not increase");
    }
    if (value < 0.0) {
      value = 0.0;
      ++clamped;
    }
    wl.push_back(lambda);
    values.push_back(value);
  }
  if (wl.empty()) throw FormatError::at_row(path, row, "no data rows");
  if (wl.size() < 2) throw FormatError::at_row(path, row, "need at least 2 data rows");
  return {Spectrum(std::move(wl), std::move(values)), clamped};
}

inline SpectrumFile read_spectrum_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, "open", "cannot open file for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_spectrum_csv(buf.str(), path);
}

/// Shortest round-trip decimal form, so write -> read is bit-exact.
inline std::string format_spectrum_csv(const Spectrum& s) {
  std::string out = "wavelength_nm,value\n";
  char buf[64];
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto r = std::to_chars(buf, buf + sizeof buf, s.wavelengths()[i]);
    out.append(buf, r.ptr);
    out.push_back(',');
    r = std::to_chars(buf, buf + sizeof buf, s.values()[i]);
    out.append(buf, r.ptr);
    out.push_back('\n');
  }
  return out;
}

inline void write_spectrum_csv(const Spectrum& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path, "open", "cannot open file for writing");
  out << format_spectrum_csv(s);
  if (!out) throw FormatError(path, "write", "write failed");
}

}  // namespace photoncal
