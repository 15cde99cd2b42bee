#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include <zlib.h>

#include "photoncal/errors.hpp"

namespace photoncal::binary {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Appends little-endian scalars to a byte buffer.
class Writer {
 public:
  template <class T>
  void put(T value) {
    static_assert(std::is_arithmetic_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader that reports the failing offset.
class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  template <class T>
  T get(const char* what) {
    static_assert(std::is_arithmetic_v<T>);
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return value;
  }
  void get_bytes(void* out, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(out, bytes_.data() + offset_, n);
    offset_ += n;
  }
  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }
  [[noreturn]] void fail(std::size_t at, const std::string& what) const {
    throw FormatError::at_offset(path_, at, what);
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - offset_ < n) {
      fail(offset_, std::string("truncated while reading ") + what + " (need " + std::to_string(n) +
                        " bytes, have " + std::to_string(bytes_.size() - offset_) + ")");
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string path_;
  std::size_t offset_ = 0;
};

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for multi-GB buffers.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, "open", "cannot open file for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path, "open", "cannot open file for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(path, "write", "write failed");
}

}  // namespace photoncal::binary
