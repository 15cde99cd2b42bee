#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "photoncal/errors.hpp"

namespace photoncal {

/// `key = value` text file: one entry per line, `#` starts a comment, keys
/// may repeat. Entries keep their line numbers for error messages.
class KeyValueFile {
 public:
  struct Entry {
    std::string key;
    std::string value;
    std::size_t line;
  };

  static KeyValueFile parse(std::string_view text, std::string source = "<memory>") {
    KeyValueFile kv;
    kv.source_ = std::move(source);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t eol = text.find('\n', pos);
      std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
      pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw FormatError::at_row(kv.source_, line_no, "expected 'key = value'");
      }
      kv.entries_.push_back({std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), line_no});
    }
    return kv;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path, "open", "cannot open file for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
  }

  const std::vector<Entry>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

  /// Last value given for `key`.
  const Entry* find(std::string_view key) const {
    const Entry* hit = nullptr;
    for (const auto& e : entries_) {
      if (e.key == key) hit = &e;
    }
    return hit;
  }

  std::optional<std::string> text(std::string_view key) const {
    if (const auto* e = find(key)) return e->value;
    return std::nullopt;
  }

  std::optional<double> number(std::string_view key) const {
    const auto* e = find(key);
    if (!e) return std::nullopt;
    return to_number(*e, e->value);
  }

  double number_or(std::string_view key, double fallback) const { return number(key).value_or(fallback); }

  /// Comma-separated list of numbers.
  std::vector<double> numbers(const Entry& e) const {
    std::vector<double> out;
    std::string_view rest = e.value;
    while (true) {
      const auto comma = rest.find(',');
      out.push_back(to_number(e, trim(rest.substr(0, comma))));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return out;
  }

  [[noreturn]] void fail(const Entry& e, const std::string& what) const {
    throw FormatError::at_row(source_, e.line, e.key + ": " + what);
  }

  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  }

 private:
  double to_number(const Entry& e, std::string_view s) const {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(e, "not a number: '" + std::string(s) + "'");
    return v;
  }

  std::string source_;
  std::vector<Entry> entries_;
};

}  // namespace photoncal
