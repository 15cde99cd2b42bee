#pragma once

#include <cstddef>
#include <utility>
#include <variant>
#include <vector>

#include "photoncal/errors.hpp"
#include "photoncal/frame.hpp"
#include "photoncal/image.hpp"

namespace photoncal {

// Background masking ahead of segmentation. Geometry is in pixel units with
// pixel (x, y) covering [x, x+1) x [y, y+1).

struct MaskRect {
  double x = 0, y = 0, w = 0, h = 0;
};

struct MaskEllipse {
  double cx = 0, cy = 0, rx = 0, ry = 0;
};

struct MaskPolygon {
  std::vector<std::pair<double, double>> vertices;
};

using MaskShape = std::variant<MaskRect, MaskEllipse, MaskPolygon>;

inline bool contains(const MaskShape& shape, double px, double py) {
  if (const auto* r = std::get_if<MaskRect>(&shape)) {
    return px >= r->x && px < r->x + r->w && py >= r->y && py < r->y + r->h;
  }
  if (const auto* e = std::get_if<MaskEllipse>(&shape)) {
    const double dx = (px - e->cx) / e->rx;
    const double dy = (py - e->cy) / e->ry;
    return dx * dx + dy * dy <= 1.0;
  }
  // even-odd rule
  const auto& v = std::get<MaskPolygon>(shape).vertices;
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    const auto [xi, yi] = v[i];
    const auto [xj, yj] = v[j];
    if ((yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi) inside = !inside;
  }
  return inside;
}

inline void validate(const MaskShape& shape) {
  if (const auto* r = std::get_if<MaskRect>(&shape)) {
    if (!(r->w > 0.0) || !(r->h > 0.0)) throw ContractError("mask: rectangle needs positive width and height");
  } else if (const auto* e = std::get_if<MaskEllipse>(&shape)) {
    if (!(e->rx > 0.0) || !(e->ry > 0.0)) throw ContractError("mask: ellipse needs positive radii");
  } else if (std::get<MaskPolygon>(shape).vertices.size() < 3) {
    throw ContractError("mask: polygon needs at least 3 vertices");
  }
}

/// Keeps the union of `shapes` and zeros everything else. With
/// `whole_tiles`, each 2x2 Bayer tile is kept or dropped as a unit (tested at
/// its center), so no partially masked tile reaches the demosaic.
template <class Sample>
void apply_mask(Frame<Sample>& f, const std::vector<MaskShape>& shapes, bool whole_tiles = true) {
  if (shapes.empty()) throw ContractError("mask: no shapes given");
  for (const auto& s : shapes) validate(s);
  if (whole_tiles) require_even(f, "mask");
  for (std::size_t y = 0; y < f.height; ++y) {
    for (std::size_t x = 0; x < f.width; ++x) {
      const double px = whole_tiles ? static_cast<double>(x & ~std::size_t{1}) + 1.0 : static_cast<double>(x) + 0.5;
      const double py = whole_tiles ? static_cast<double>(y & ~std::size_t{1}) + 1.0 : static_cast<double>(y) + 0.5;
      bool keep = false;
      for (const auto& s : shapes) keep = keep || contains(s, px, py);
      if (!keep) f(x, y) = Sample{0};
    }
  }
}

/// Same for PNG buffers: single-channel images are treated as Bayer mosaics
/// (whole tiles), RGB images pixel by pixel.
inline void apply_mask(ImageBuffer& img, const std::vector<MaskShape>& shapes) {
  img.validate();
  if (img.channels == 1) {
    if (img.width % 2 || img.height % 2) throw ContractError("mask: mosaic dimensions must be even");
    Frame<std::uint16_t> view;
    view.width = img.width;
    view.height = img.height;
    view.data = std::move(img.samples);
    apply_mask(view, shapes, true);
    img.samples = std::move(view.data);
    return;
  }
  if (shapes.empty()) throw ContractError("mask: no shapes given");
  for (const auto& s : shapes) validate(s);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      bool keep = false;
      for (const auto& s : shapes) keep = keep || contains(s, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5);
      if (keep) continue;
      for (std::size_t c = 0; c < img.channels; ++c) img.samples[(y * img.width + x) * img.channels + c] = 0;
    }
  }
}

}  // namespace photoncal
