#include <gtest/gtest.h>

#include <png.h>
#include <unistd.h>
#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "photoncal/binary_io.hpp"
#include "photoncal/calibration.hpp"
#include "photoncal/calibration_io.hpp"
#include "photoncal/correction.hpp"
#include "photoncal/png.hpp"
#include "photoncal/rng.hpp"

using namespace photoncal;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("photoncal_io_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::uint8_t> bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

struct Chunk {
  std::string type;
  std::vector<std::uint8_t> data;
};

std::vector<Chunk> chunks(const std::vector<std::uint8_t>& file) {
  std::vector<Chunk> out;
  std::size_t at = 8;
  while (at + 12 <= file.size()) {
    const std::uint32_t len = be32(&file[at]);
    Chunk c;
    c.type.assign(reinterpret_cast<const char*>(&file[at + 4]), 4);
    c.data.assign(file.begin() + static_cast<std::ptrdiff_t>(at + 8), file.begin() + static_cast<std::ptrdiff_t>(at + 8 + len));
    out.push_back(std::move(c));
    at += 12 + len;
  }
  return out;
}

void write_palette_png(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, f);
  png_set_IHDR(png, info, 2, 1, 8, PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_color palette[2] = {{0, 0, 0}, {255, 255, 255}};
  png_set_PLTE(png, info, palette, 2);
  png_write_info(png, info);
  png_byte row[2] = {0, 1};
  png_write_row(png, row);
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

CalibrationTable tiny_table() {
  const std::vector<std::vector<double>> a = {{0.0, 100.0, 300.0}};
  std::vector<AnalogFrame> means(3, AnalogFrame(2, 1, BayerPattern::none));
  means[0].data = {10.0, 12.0};
  means[1].data = {20.0, 25.0};
  means[2].data = {40.0, 31.0};
  return build_table(a, means, BayerPattern::none).table;
}

std::string error_of(const std::vector<std::uint8_t>& bytes) {
  try {
    (void)decode_table(bytes, "t.pcal");
  } catch (const FormatError& e) {
    return e.what();
  }
  return "no error";
}

}  // namespace

TEST(Png, SixteenBitRoundTripWithText) {
  Rng rng(97);
  for (std::size_t channels : {1u, 3u}) {
    ImageBuffer img(17, 9, channels, 16);
    for (auto& s : img.samples) s = static_cast<std::uint16_t>(rng.below(65536));
    img.text[std::string(kScaleKey)] = "0.123456789";
    img.text["note"] = "hello";
    const auto path = scratch("rt" + std::to_string(channels) + ".png");
    write_png(img, path.string());
    EXPECT_EQ(read_png(path.string()), img);
  }
}

TEST(Png, EightBitRoundTrip) {
  ImageBuffer img(3, 2, 3, 8);
  for (std::size_t i = 0; i < img.samples.size(); ++i) img.samples[i] = static_cast<std::uint16_t>(i * 13);
  const auto path = scratch("rt8.png");
  write_png(img, path.string());
  EXPECT_EQ(read_png(path.string()), img);
}

TEST(Png, FileLayoutIsBigEndianWithTextChunk) {
  ImageBuffer img(1, 1, 1, 16);
  img.samples = {0x1234};
  img.text[std::string(kScaleKey)] = "2.5";
  const auto path = scratch("layout.png");
  write_png(img, path.string());
  const auto file = bytes_of(path);
  const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  ASSERT_EQ(0, std::memcmp(file.data(), sig, 8));
  const auto cs = chunks(file);
  ASSERT_FALSE(cs.empty());
  EXPECT_EQ(cs.front().type, "IHDR");
  EXPECT_EQ(cs.front().data[8], 16);  // bit depth
  EXPECT_EQ(cs.front().data[9], 0);   // grayscale
  bool saw_text = false;
  std::vector<std::uint8_t> idat;
  for (const auto& c : cs) {
    if (c.type == "tEXt") {
      const std::string body(c.data.begin(), c.data.end());
      EXPECT_EQ(body, std::string("photoncal:scale") + '\0' + "2.5");
      saw_text = true;
    }
    if (c.type == "IDAT") idat.insert(idat.end(), c.data.begin(), c.data.end());
  }
  EXPECT_TRUE(saw_text);
  std::uint8_t raw[16];
  uLongf n = sizeof(raw);
  ASSERT_EQ(uncompress(raw, &n, idat.data(), idat.size()), Z_OK);
  ASSERT_EQ(n, 3u);
  // Filter byte, then the sample most significant byte first. libpng drops
  // Sub for one-pixel rows; either way the first pixel is stored unchanged.
  EXPECT_LE(raw[0], 1);
  EXPECT_EQ(raw[1], 0x12);
  EXPECT_EQ(raw[2], 0x34);
}

TEST(Png, RejectsPaletteAndGarbage) {
  const auto palette = scratch("palette.png");
  write_palette_png(palette.string());
  try {
    (void)read_png(palette.string());
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("palette"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find(palette.string()), std::string::npos);
  }
  const auto junk = scratch("junk.png");
  binary::write_file(junk.string(), {'n', 'o', 't', ' ', 'p', 'n', 'g', '!', '!'});
  try {
    (void)read_png(junk.string());
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 0"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read_png(scratch("missing.png").string()), FormatError);
}

TEST(Png, TruncatedDataIsAFormatError) {
  ImageBuffer img(64, 64, 1, 16);
  Rng rng(101);
  for (auto& s : img.samples) s = static_cast<std::uint16_t>(rng.below(65536));
  const auto path = scratch("trunc.png");
  write_png(img, path.string());
  auto file = bytes_of(path);
  file.resize(file.size() / 2);
  binary::write_file(path.string(), file);
  EXPECT_THROW(read_png(path.string()), FormatError);
}

TEST(Pcal, HeaderLayoutAndCrc) {
  const auto t = tiny_table();
  const auto b = encode_table(t);
  // header 18 + totals 3*8 + 2 pixels * (3 + 2 + 2) * 4 + 2 states + crc 4
  ASSERT_EQ(b.size(), 18u + 24u + 56u + 2u + 4u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "PCAL");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], 0);
  EXPECT_EQ(b[6], 2);   // width
  EXPECT_EQ(b[10], 1);  // height
  EXPECT_EQ(b[14], 3);  // n_points
  EXPECT_EQ(b[16], 1);  // channels
  double a2;
  std::memcpy(&a2, &b[18 + 16], 8);
  EXPECT_EQ(a2, 300.0);
  float bp;
  std::memcpy(&bp, &b[42 + 4], 4);  // pixel 0, second breakpoint
  EXPECT_EQ(bp, 20.0f);
  std::uint32_t crc;
  std::memcpy(&crc, &b[b.size() - 4], 4);
  EXPECT_EQ(crc, static_cast<std::uint32_t>(::crc32(0L, b.data(), static_cast<uInt>(b.size() - 4))));
}

TEST(Pcal, RoundTripStabilizesAfterOneCycle) {
  const std::vector<std::vector<double>> a = {{0.0, 1000.0 / 3.0, 2000.0}, {0.0, 500.0, 1234.567}, {0.0, 0.1, 7.0}};
  std::vector<AnalogFrame> means(3, AnalogFrame(6, 4, BayerPattern::gbrg));
  Rng rng(103);
  for (std::size_t j = 0; j < 24; ++j) {
    means[0].data[j] = 60.0 + rng.uniform();
    means[1].data[j] = 900.0 + 100.0 * rng.uniform();
    means[2].data[j] = 3000.0 + 500.0 * rng.uniform();
  }
  const auto t = build_table(a, means, BayerPattern::gbrg).table;
  const auto once = decode_table(encode_table(t), "a.pcal");
  EXPECT_EQ(once.photon_totals, t.photon_totals);  // f64 on disk
  EXPECT_EQ(once.states, t.states);
  for (std::size_t i = 0; i < t.slopes.size(); ++i) {
    EXPECT_EQ(once.slopes[i], static_cast<double>(static_cast<float>(t.slopes[i])));
  }
  const auto twice = decode_table(encode_table(once), "a.pcal");
  EXPECT_EQ(twice, once);
  EXPECT_EQ(encode_table(twice), encode_table(once));

  const auto path = scratch("table.pcal");
  save_table(once, path.string());
  EXPECT_EQ(load_table(path.string()), once);
}

TEST(Pcal, CorruptionNamesOffset) {
  const auto good = encode_table(tiny_table());
  auto magic = good;
  magic[0] = 'X';
  EXPECT_NE(error_of(magic).find("t.pcal: offset 0"), std::string::npos);
  auto version = good;
  version[4] = 9;
  EXPECT_NE(error_of(version).find("offset 4"), std::string::npos);
  auto flipped = good;
  flipped[50] ^= 0x40;
  EXPECT_NE(error_of(flipped).find("CRC32"), std::string::npos);
  auto short_file = good;
  short_file.resize(30);
  EXPECT_NE(error_of(short_file).find("offset"), std::string::npos);
  auto n_bad = good;
  n_bad[14] = 1;
  EXPECT_NE(error_of(n_bad).find("offset 14"), std::string::npos);
  EXPECT_NE(error_of({}).find("offset 0"), std::string::npos);
}

TEST(Pmap, FileRoundTrip) {
  PhotonMap m(4, 2);
  Rng rng(107);
  for (auto& p : m.photons) p = 1e6 * rng.uniform();
  const auto path = scratch("m.pmap");
  write_pmap(m, path.string());
  const auto back = read_pmap(path.string());
  EXPECT_EQ(back.photons, m.photons);
  EXPECT_EQ(back.width, 4u);
}
