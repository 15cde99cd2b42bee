// photoncal: per-pixel photon calibration of Bayer camera frames.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "photoncal/photoncal.hpp"

namespace fs = std::filesystem;
using namespace photoncal;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kQuality = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories, const std::string& ext) {
  if (!fs::is_directory(dir)) throw FormatError(dir.string(), "open", "not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : (e.is_regular_file() && e.path().extension() == ext)) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path, "open", "cannot open file for reading");
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = KeyValueFile::trim(line);
    if (!t.empty()) names.emplace_back(t);
  }
  return names;
}

BayerPattern require_pattern(const std::string& text) {
  auto p = parse_pattern(text);
  if (!p) throw UsageError("unknown Bayer pattern '" + text + "'");
  return *p;
}

RawFrame read_mosaic(const std::string& path, BayerPattern pattern) {
  const auto img = read_png(path);
  if (img.channels != 1) throw FormatError(path, "header", "expected a single-channel (mosaic) image");
  return to_raw_frame(img, pattern);
}

std::string join(const std::vector<double>& v) {
  std::ostringstream out;
  out.precision(10);
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v[i];
  return out.str();
}

std::vector<double> parse_numbers(const std::string& text, const char* what) {
  auto kv = KeyValueFile::parse(std::string(what) + " = " + text, "--" + std::string(what));
  return kv.numbers(kv.entries().front());
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string spectra, frames, qe[3], pattern = "rggb", out, manifest;
  double max_dead = 0.05;
};

int cmd_calibrate(const CalibrateArgs& a, unsigned workers) {
  std::vector<fs::path> spectrum_files;
  std::vector<fs::path> frame_dirs;
  if (!a.manifest.empty()) {
    for (const auto& name : read_manifest(a.manifest)) {
      spectrum_files.push_back(fs::path(a.spectra) / (name + ".csv"));
      frame_dirs.push_back(fs::path(a.frames) / name);
    }
  } else {
    spectrum_files = sorted_entries(a.spectra, false, ".csv");
    frame_dirs = sorted_entries(a.frames, true, "");
  }
  if (spectrum_files.size() != frame_dirs.size()) {
    throw FormatError(a.frames, "layout",
                      std::to_string(spectrum_files.size()) + " spectra but " + std::to_string(frame_dirs.size()) +
                          " frame stacks");
  }
  const std::size_t n = spectrum_files.size();
  if (n < 2) throw UsageError("calibrate: need at least 2 filter settings (dark first), found " + std::to_string(n));
  const BayerPattern pattern = require_pattern(a.pattern);
  if (pattern == BayerPattern::none) throw UsageError("calibrate: a Bayer pattern is required");

  std::vector<Spectrum> spectra;
  for (const auto& f : spectrum_files) {
    auto s = read_spectrum_csv(f.string());
    if (s.clamped) std::cout << "note: " << f.string() << ": " << s.clamped << " negative samples clamped to 0\n";
    spectra.push_back(std::move(s.spectrum));
  }
  std::vector<std::vector<double>> totals;
  bool warned = false;
  const char* names[3] = {"R", "G", "B"};
  for (std::size_t c = 0; c < 3; ++c) {
    auto pt = photon_totals(spectra, read_spectrum_csv(a.qe[c]).spectrum);
    std::cout << "A_" << names[c] << " = [" << join(pt.values) << "]\n";
    for (const auto& w : pt.warnings) std::cout << "warning: " << names[c] << ": " << w << "\n";
    warned = warned || !pt.monotone;
    totals.push_back(std::move(pt.values));
  }

  std::vector<AnalogFrame> means;
  for (const auto& dir : frame_dirs) {
    std::vector<RawFrame> stack;
    for (const auto& f : sorted_entries(dir, false, ".png")) stack.push_back(read_mosaic(f.string(), pattern));
    if (stack.empty()) throw FormatError(dir.string(), "layout", "no PNG frames in stack");
    for (const auto& f : stack) {
      if (f.width != stack[0].width || f.height != stack[0].height) {
        throw FormatError(dir.string(), "layout", "replicate frames differ in size");
      }
    }
    means.push_back(mean_frame<std::uint16_t>(stack));
    std::cout << "setting " << means.size() - 1 << ": " << dir.filename().string() << ", " << stack.size()
              << " frames\n";
  }
  for (const auto& m : means) {
    if (m.width != means[0].width || m.height != means[0].height) {
      throw FormatError(a.frames, "layout", "frame stacks differ in size");
    }
  }

  BuildOptions opts;
  opts.max_dead_fraction = a.max_dead;
  opts.workers = workers;
  const auto built = build_table(totals, means, pattern, opts);
  save_table(built.table, a.out);
  const auto& r = built.report;
  std::cout << "pixels: " << built.table.pixels() << " valid " << r.valid << ", dead before repair "
            << r.dead_before_repair << ", repaired " << r.repaired << ", dead " << r.dead << "\n";
  if (warned) std::cout << "warning: photon totals are not monotone; check filter order\n";
  std::cout << "wrote " << a.out << "\n";
  return kOk;
}

struct CorrectArgs {
  std::string table, input, out, pmap, scale = "auto";
};

int cmd_correct(const CorrectArgs& a, unsigned workers) {
  const auto table = load_table(a.table);
  const auto frame = read_mosaic(a.input, table.pattern);
  const auto map = correct(frame, table, workers);
  std::optional<double> scale;
  if (a.scale != "auto") {
    double s = 0.0;
    if (!detail::parse_double(a.scale, s) || !(s > 0.0)) throw UsageError("--scale: expected 'auto' or a number > 0");
    scale = s;
  }
  const auto q = quantize_12bit(map, scale);
  write_png(q.image, a.out);
  if (!a.pmap.empty()) write_pmap(map, a.pmap);
  std::size_t clamped = 0;
  std::size_t dead = 0;
  for (auto f : map.flags) {
    clamped += f == PixelFlag::clamped;
    dead += f == PixelFlag::dead_source;
  }
  std::cout << "scale " << q.scale << ", clamped " << clamped << ", dead " << dead << "\n";
  return kOk;
}

struct DemosaicArgs {
  std::string input, out, pattern = "rggb";
  bool preview = false;
};

int cmd_demosaic(const DemosaicArgs& a, unsigned workers) {
  const auto src = read_png(a.input);
  if (src.channels != 1) throw FormatError(a.input, "header", "expected a single-channel (mosaic) image");
  const BayerPattern pattern = require_pattern(a.pattern);
  if (pattern == BayerPattern::none) throw UsageError("demosaic: a Bayer pattern is required");
  const auto rgb = demosaic(to_raw_frame(src, pattern), workers);
  ImageBuffer out(rgb.width, rgb.height, 3, 16);
  for (std::size_t i = 0; i < rgb.pixels.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      out.samples[i * 3 + c] = static_cast<std::uint16_t>(std::min(65535.0, std::round(rgb.pixels[i][c])));
    }
  }
  out.text = src.text;
  write_png(a.preview ? preview_8bit(out) : out, a.out);
  return kOk;
}

struct SegmentArgs {
  std::string input, out;
  std::uint64_t seed = 0;
  std::size_t max_iter = kBinarizeOptions.max_iter;
  double tol = kBinarizeOptions.tol;
};

int cmd_segment(const SegmentArgs& a, unsigned workers) {
  const auto src = read_png(a.input);
  if (src.channels != 3) throw FormatError(a.input, "header", "expected an RGB image");
  RgbQuarterImage img(src.width, src.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) img.pixels[i][c] = src.samples[i * 3 + c];
  }
  const auto labels = binarize(img, a.seed, {a.max_iter, a.tol, workers});
  write_png(label_image(labels), a.out);
  std::ofstream side(a.out + ".txt");
  side << label_sidecar(labels);
  if (!side) throw FormatError(a.out + ".txt", "write", "write failed");
  return kOk;
}

struct HistogramArgs {
  std::string input, out, svg, channel = "g", pattern = "rggb";
  std::size_t bins = 256;
};

std::string histogram_svg(const Histogram& h, const std::string& title) {
  const double w = 800.0;
  const double height = 300.0;
  std::uint64_t peak = 1;
  for (auto c : h.counts) peak = std::max(peak, c);
  const double bar = w / static_cast<double>(h.counts.size());
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << height + 20 << "\">\n";
  out << "<text x=\"4\" y=\"14\" font-size=\"12\">" << title << "</text>\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double bh = height * static_cast<double>(h.counts[i]) / static_cast<double>(peak);
    out << "<rect x=\"" << i * bar << "\" y=\"" << 20 + height - bh << "\" width=\"" << bar << "\" height=\"" << bh
        << "\" fill=\"#444\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

int cmd_histogram(const HistogramArgs& a) {
  auto channel = parse_channel(a.channel);
  if (!channel) throw UsageError("--channel: expected r, g or b");
  const BayerPattern pattern = require_pattern(a.pattern);
  const auto h = channel_histogram(read_mosaic(a.input, pattern), *channel, a.bins);
  std::ofstream out(a.out);
  out << "bin_start,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) out << h.edges[i] << "," << h.counts[i] << "\n";
  if (!out) throw FormatError(a.out, "write", "write failed");
  if (!a.svg.empty()) {
    std::ofstream svg(a.svg);
    svg << histogram_svg(h, a.input + " (" + a.channel + ")");
    if (!svg) throw FormatError(a.svg, "write", "write failed");
  }
  return kOk;
}

struct SimulateArgs {
  std::string scene, chip, out, corpus;
  std::uint64_t seed = 0;
  double target = 3600.0;
};

std::pair<std::size_t, std::size_t> parse_corpus(const std::string& text) {
  std::size_t n = 0;
  std::size_t p = 0;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    double v = 0.0;
    if (eq == std::string::npos || !detail::parse_double(item.substr(eq + 1), v) || v < 1 || v != std::floor(v)) {
      throw UsageError("--corpus: expected N=<count>,parallels=<count>");
    }
    const auto key = item.substr(0, eq);
    if (key == "N") {
      n = static_cast<std::size_t>(v);
    } else if (key == "parallels") {
      p = static_cast<std::size_t>(v);
    } else {
      throw UsageError("--corpus: unknown key '" + key + "'");
    }
  }
  if (n == 0 || p == 0) throw UsageError("--corpus: expected N=<count>,parallels=<count>");
  if (n < 2) throw UsageError("--corpus: N must be >= 2");
  return {n, p};
}

std::string two_digits(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02zu", i);
  return buf;
}

int cmd_simulate(const SimulateArgs& a, unsigned workers) {
  const auto scene_kv = KeyValueFile::load(a.scene);
  auto scene = sim::parse_scene(scene_kv);
  auto [chip, auto_gain] = sim::parse_chip(KeyValueFile::load(a.chip));
  std::optional<std::pair<std::size_t, std::size_t>> corpus;
  if (!a.corpus.empty()) {
    corpus = parse_corpus(a.corpus);
    if (!scene_kv.find("filters")) scene.filters = sim::default_filters(corpus->first);
  }
  if (auto_gain) chip.gain = sim::gain_for_target(chip, scene, a.target);
  sim::validate(chip);

  const fs::path out(a.out);
  fs::create_directories(out);
  const char* qe_names[3] = {"qe_r.csv", "qe_g.csv", "qe_b.csv"};
  for (std::size_t c = 0; c < 3; ++c) write_spectrum_csv(chip.qe[c], (out / qe_names[c]).string());

  const auto e = sim::render(chip, scene, std::nullopt, a.seed, workers);
  write_png(to_image(e.raw), (out / "frame.png").string());
  write_pmap(e.truth, (out / "truth.pmap").string());

  if (corpus) {
    const auto [n, parallels] = *corpus;
    const auto c = sim::calibration_corpus(chip, scene, n, parallels, a.seed, workers);
    fs::create_directories(out / "spectra");
    for (std::size_t i = 0; i < n; ++i) {
      const auto name = two_digits(i);
      write_spectrum_csv(c.spectra[i], (out / "spectra" / (name + ".csv")).string());
      fs::create_directories(out / "frames" / name);
      for (std::size_t p = 0; p < parallels; ++p) {
        write_png(to_image(c.frames[i][p]), (out / "frames" / name / ("rep_" + two_digits(p) + ".png")).string());
      }
    }
  }
  std::cout << "chip " << chip.width << "x" << chip.height << " " << to_string(chip.pattern) << ", gain " << chip.gain
            << "; wrote " << out.string() << "\n";
  return kOk;
}

int cmd_preview(const std::string& input, const std::string& out) {
  write_png(preview_8bit(read_png(input)), out);
  return kOk;
}

struct MaskArgs {
  std::string input, out;
  std::vector<std::string> rects, ellipses, polygons;
};

int cmd_mask(const MaskArgs& a) {
  std::vector<MaskShape> shapes;
  for (const auto& r : a.rects) {
    const auto v = parse_numbers(r, "rect");
    if (v.size() != 4) throw UsageError("--rect: expected x,y,w,h");
    shapes.push_back(MaskRect{v[0], v[1], v[2], v[3]});
  }
  for (const auto& r : a.ellipses) {
    const auto v = parse_numbers(r, "ellipse");
    if (v.size() != 4) throw UsageError("--ellipse: expected cx,cy,rx,ry");
    shapes.push_back(MaskEllipse{v[0], v[1], v[2], v[3]});
  }
  for (const auto& r : a.polygons) {
    const auto v = parse_numbers(r, "polygon");
    if (v.size() < 6 || v.size() % 2) throw UsageError("--polygon: expected x1,y1,x2,y2,x3,y3[,...]");
    MaskPolygon poly;
    for (std::size_t i = 0; i < v.size(); i += 2) poly.vertices.emplace_back(v[i], v[i + 1]);
    shapes.push_back(std::move(poly));
  }
  if (shapes.empty()) throw UsageError("mask: give at least one --rect, --ellipse or --polygon");
  for (const auto& s : shapes) {
    try {
      validate(s);
    } catch (const ContractError& e) {
      throw UsageError(e.what());
    }
  }
  auto img = read_png(a.input);
  apply_mask(img, shapes);
  write_png(img, a.out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"photoncal: per-pixel photon calibration for Bayer camera frames"};
  app.require_subcommand(1);
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Build a calibration table from filter spectra and frame stacks");
  c_cal->add_option("--spectra", cal.spectra, "Directory of filter spectra (*.csv)")->required();
  c_cal->add_option("--frames", cal.frames, "Directory of frame stacks, one subdirectory per filter")->required();
  c_cal->add_option("--qe-r", cal.qe[0], "Red QE curve (CSV)")->required()->check(CLI::ExistingFile);
  c_cal->add_option("--qe-g", cal.qe[1], "Green QE curve (CSV)")->required()->check(CLI::ExistingFile);
  c_cal->add_option("--qe-b", cal.qe[2], "Blue QE curve (CSV)")->required()->check(CLI::ExistingFile);
  c_cal->add_option("--pattern", cal.pattern, "Bayer pattern")->capture_default_str();
  c_cal->add_option("--manifest", cal.manifest, "Filter order, one setting name per line (dark first)");
  c_cal->add_option("--max-dead", cal.max_dead, "Largest tolerated dead-pixel fraction")->capture_default_str();
  c_cal->add_option("-o,--output", cal.out, "Output .pcal")->required();

  CorrectArgs cor;
  auto* c_cor = app.add_subcommand("correct", "Convert a raw frame to a photon map");
  c_cor->add_option("-c,--calibration", cor.table, "Calibration table (.pcal)")->required();
  c_cor->add_option("input", cor.input, "Raw 16-bit mosaic PNG")->required();
  c_cor->add_option("-o,--output", cor.out, "12-bit photon PNG")->required();
  c_cor->add_option("--dump-pmap", cor.pmap, "Also write the full-precision map (.pmap)");
  c_cor->add_option("--scale", cor.scale, "auto, or photons-to-counts factor")->capture_default_str();

  DemosaicArgs dem;
  auto* c_dem = app.add_subcommand("demosaic", "Quarter-resolution RGB from a Bayer mosaic");
  c_dem->add_option("input", dem.input)->required();
  c_dem->add_option("--pattern", dem.pattern, "Bayer pattern")->capture_default_str();
  c_dem->add_option("-o,--output", dem.out)->required();
  c_dem->add_flag("--preview", dem.preview, "Write an 8-bit min-max stretched image");

  SegmentArgs seg;
  auto* c_seg = app.add_subcommand("segment", "Two-class k-means++ segmentation of an RGB image");
  c_seg->add_option("input", seg.input)->required();
  c_seg->add_option("--seed", seg.seed)->capture_default_str();
  c_seg->add_option("--max-iter", seg.max_iter)->capture_default_str();
  c_seg->add_option("--tol", seg.tol, "Centroid movement stop threshold")->capture_default_str();
  c_seg->add_option("-o,--output", seg.out, "8-bit label PNG; a .txt sidecar is written next to it")->required();

  HistogramArgs hist;
  auto* c_hist = app.add_subcommand("histogram", "Per-channel intensity histogram of a mosaic");
  c_hist->add_option("input", hist.input)->required();
  c_hist->add_option("--channel", hist.channel, "r, g or b")->capture_default_str();
  c_hist->add_option("--bins", hist.bins)->capture_default_str()->check(CLI::PositiveNumber);
  c_hist->add_option("--pattern", hist.pattern)->capture_default_str();
  c_hist->add_option("--svg", hist.svg, "Also write a bar chart");
  c_hist->add_option("-o,--output", hist.out, "CSV (bin_start,count)")->required();

  SimulateArgs simu;
  auto* c_sim = app.add_subcommand("simulate", "Render a synthetic scene and calibration corpus");
  c_sim->add_option("--scene", simu.scene)->required()->check(CLI::ExistingFile);
  c_sim->add_option("--chip", simu.chip)->required()->check(CLI::ExistingFile);
  c_sim->add_option("--out", simu.out)->required();
  c_sim->add_option("--seed", simu.seed)->capture_default_str();
  c_sim->add_option("--corpus", simu.corpus, "N=<settings>,parallels=<replicates>");
  c_sim->add_option("--target", simu.target, "Peak counts for gain = auto")->capture_default_str();

  std::string prev_in;
  std::string prev_out;
  auto* c_prev = app.add_subcommand("preview", "8-bit min-max stretched copy of a PNG");
  c_prev->add_option("input", prev_in)->required();
  c_prev->add_option("-o,--output", prev_out)->required();

  MaskArgs mask;
  auto* c_mask = app.add_subcommand("mask", "Zero everything outside the given shapes");
  c_mask->add_option("input", mask.input)->required();
  c_mask->add_option("--rect", mask.rects, "x,y,w,h (pixels, repeatable)");
  c_mask->add_option("--ellipse", mask.ellipses, "cx,cy,rx,ry (pixels, repeatable)");
  c_mask->add_option("--polygon", mask.polygons, "x1,y1,x2,y2,... (pixels, repeatable)");
  c_mask->add_option("-o,--output", mask.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*c_cal) return cmd_calibrate(cal, workers);
    if (*c_cor) return cmd_correct(cor, workers);
    if (*c_dem) return cmd_demosaic(dem, workers);
    if (*c_seg) return cmd_segment(seg, workers);
    if (*c_hist) return cmd_histogram(hist);
    if (*c_sim) return cmd_simulate(simu, workers);
    if (*c_prev) return cmd_preview(prev_in, prev_out);
    if (*c_mask) return cmd_mask(mask);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const QualityError& e) {
    std::cerr << "calibration quality: " << e.what() << "\n";
    return kQuality;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
