#pragma once

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "photoncal/errors.hpp"
#include "photoncal/image.hpp"

namespace photoncal {

// libpng reports errors by longjmp. Every setjmp region below only touches
// trivially destructible locals; C++ objects are created outside of them.

namespace detail {

struct PngErrorState {
  char message[256] = {0};
};

inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
  if (state) std::snprintf(state->message, sizeof state->message, "%s", msg);
  png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::string color_type_name(int color_type) {
  switch (color_type) {
    case PNG_COLOR_TYPE_GRAY: return "grayscale";
    case PNG_COLOR_TYPE_RGB: return "RGB";
    case PNG_COLOR_TYPE_PALETTE: return "palette";
    case PNG_COLOR_TYPE_GRAY_ALPHA: return "grayscale+alpha";
    case PNG_COLOR_TYPE_RGB_ALPHA: return "RGBA";
  }
  return "color type " + std::to_string(color_type);
}

struct PngHeader {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
};

inline bool png_read_header(png_structp png, png_infop info, std::FILE* f, PngHeader* h) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, f);
  png_read_info(png, info);
  int interlace = 0;
  png_get_IHDR(png, info, &h->width, &h->height, &h->bit_depth, &h->color_type, &interlace, nullptr, nullptr);
  if (h->bit_depth == 16) png_set_swap(png);  // host little-endian samples
  png_read_update_info(png, info);
  return true;
}

inline bool png_read_rows(png_structp png, png_infop info, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows);
  png_read_end(png, info);
  return true;
}

inline bool png_write_all(png_structp png, png_infop info, std::FILE* f, const PngHeader* h, png_textp text,
                          int n_text, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, f);
  png_set_compression_level(png, 1);
  png_set_filter(png, 0, PNG_FILTER_SUB);
  png_set_IHDR(png, info, h->width, h->height, h->bit_depth, h->color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (n_text > 0) png_set_text(png, info, text, n_text);
  png_write_info(png, info);
  if (h->bit_depth == 16) png_set_swap(png);
  png_write_image(png, rows);
  png_write_end(png, info);
  return true;
}

}  // namespace detail

/// Reads an 8- or 16-bit grayscale or RGB PNG, including its tEXt chunks.
/// Other color types and bit depths are rejected.
inline ImageBuffer read_png(const std::string& path) {
  detail::FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw FormatError(path, "open", "cannot open file for reading");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError::at_offset(path, 0, "not a PNG file (bad signature)");
  }
  detail::PngErrorState err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_fn, detail::png_warning_fn);
  if (!png) throw FormatError(path, "init", "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};
  png_set_sig_bytes(png, 8);

  detail::PngHeader h;
  if (!info || !detail::png_read_header(png, info, f.get(), &h)) {
    throw FormatError(path, "header", std::string("libpng: ") + err.message);
  }
  std::size_t channels = 0;
  if (h.color_type == PNG_COLOR_TYPE_GRAY) channels = 1;
  if (h.color_type == PNG_COLOR_TYPE_RGB) channels = 3;
  if (channels == 0 || (h.bit_depth != 8 && h.bit_depth != 16)) {
    throw FormatError(path, "header", "unsupported PNG: " + detail::color_type_name(h.color_type) + ", " +
                                          std::to_string(h.bit_depth) + "-bit (need 8/16-bit grayscale or RGB)");
  }

  ImageBuffer img(h.width, h.height, channels, h.bit_depth);
  const std::size_t row_samples = img.width * channels;
  std::vector<std::uint8_t> bytes8;
  std::vector<png_bytep> rows(img.height);
  if (h.bit_depth == 16) {
    for (std::size_t y = 0; y < img.height; ++y) {
      rows[y] = reinterpret_cast<png_bytep>(img.samples.data() + y * row_samples);
    }
  } else {
    bytes8.resize(img.height * row_samples);
    for (std::size_t y = 0; y < img.height; ++y) rows[y] = bytes8.data() + y * row_samples;
  }
  if (!detail::png_read_rows(png, info, rows.data())) {
    throw FormatError(path, "image data", std::string("libpng: ") + err.message);
  }
  if (h.bit_depth == 8) std::copy(bytes8.begin(), bytes8.end(), img.samples.begin());

  png_textp text = nullptr;
  const int n_text = png_get_text(png, info, &text, nullptr);
  for (int i = 0; i < n_text; ++i) img.text[text[i].key] = text[i].text ? text[i].text : "";
  return img;
}

/// Writes `img` as an 8/16-bit grayscale or RGB PNG with its text entries as
/// tEXt chunks.
inline void write_png(const ImageBuffer& img, const std::string& path) {
  img.validate();
  detail::FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw FormatError(path, "open", "cannot open file for writing");
  detail::PngErrorState err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_fn, detail::png_warning_fn);
  if (!png) throw FormatError(path, "init", "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};

  detail::PngHeader h;
  h.width = static_cast<png_uint_32>(img.width);
  h.height = static_cast<png_uint_32>(img.height);
  h.bit_depth = img.bit_depth;
  h.color_type = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;

  const std::size_t row_samples = img.width * img.channels;
  std::vector<std::uint8_t> bytes8;
  std::vector<png_bytep> rows(img.height);
  if (img.bit_depth == 16) {
    // libpng copies each row before applying the byte swap, so the source stays untouched.
    auto* base = const_cast<std::uint16_t*>(img.samples.data());
    for (std::size_t y = 0; y < img.height; ++y) rows[y] = reinterpret_cast<png_bytep>(base + y * row_samples);
  } else {
    bytes8.assign(img.samples.begin(), img.samples.end());
    for (std::size_t y = 0; y < img.height; ++y) rows[y] = bytes8.data() + y * row_samples;
  }

  std::vector<std::string> keys;
  std::vector<std::string> values;
  for (const auto& [k, v] : img.text) {
    keys.push_back(k);
    values.push_back(v);
  }
  std::vector<png_text> text(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    std::memset(&text[i], 0, sizeof(png_text));
    text[i].compression = PNG_TEXT_COMPRESSION_NONE;
    text[i].key = keys[i].data();
    text[i].text = values[i].data();
    text[i].text_length = values[i].size();
  }

  if (!info || !detail::png_write_all(png, info, f.get(), &h, text.data(), static_cast<int>(text.size()), rows.data())) {
    throw FormatError(path, "encode", std::string("libpng: ") + err.message);
  }
  if (std::fflush(f.get()) != 0) throw FormatError(path, "write", "flush failed");
}

}  // namespace photoncal
