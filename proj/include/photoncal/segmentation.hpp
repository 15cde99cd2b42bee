#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "photoncal/errors.hpp"
#include "photoncal/image.hpp"
#include "photoncal/mosaic.hpp"
#include "photoncal/parallel.hpp"
#include "photoncal/rng.hpp"

namespace photoncal {

inline double squared_distance(const Rgb& a, const Rgb& b) {
  const double d0 = a[0] - b[0];
  const double d1 = a[1] - b[1];
  const double d2 = a[2] - b[2];
  return d0 * d0 + d1 * d1 + d2 * d2;
}

inline double luminance(const Rgb& c) { return 0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2]; }

/// Squared distance from every point to its nearest centroid (the k-means++
/// sampling weights).
inline std::vector<double> d2_weights(std::span<const Rgb> points, std::span<const Rgb> centroids) {
  std::vector<double> w(points.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (const auto& c : centroids) w[i] = std::min(w[i], squared_distance(points[i], c));
  }
  return w;
}

namespace detail {

inline constexpr std::uint64_t kInitStream = 0x6b6d70702b2bULL;  // "kmpp++"

inline bool has_distinct(std::span<const Rgb> points, std::size_t k) {
  std::vector<Rgb> seen;
  for (const auto& p : points) {
    if (std::find(seen.begin(), seen.end(), p) == seen.end()) {
      seen.push_back(p);
      if (seen.size() >= k) return true;
    }
  }
  return seen.size() >= k;
}

// With `allow_duplicates`, seeding on data with fewer than k distinct points
// fills the remaining centroids with copies of the first one.
inline std::vector<Rgb> seed_centroids(std::span<const Rgb> points, std::size_t k, std::uint64_t seed,
                                       bool allow_duplicates) {
  if (k == 0) throw ContractError("kmeans++: k must be >= 1");
  if (points.empty()) throw ContractError("kmeans++: no points");
  if (!allow_duplicates && !has_distinct(points, k)) {
    throw ContractError("kmeans++: need at least " + std::to_string(k) + " distinct points");
  }
  Rng rng(stream_key(seed, kInitStream, 0));
  std::vector<Rgb> centroids;
  centroids.reserve(k);
  centroids.push_back(points[rng.below(points.size())]);
  std::vector<double> w = d2_weights(points, centroids);
  while (centroids.size() < k) {
    double total = 0.0;
    for (double x : w) total += x;
    if (!(total > 0.0)) {
      centroids.push_back(centroids.front());
      continue;
    }
    const double target = rng.uniform() * total;
    std::size_t pick = points.size();
    std::size_t last_positive = 0;
    double cumulative = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (w[i] <= 0.0) continue;
      last_positive = i;
      cumulative += w[i];
      if (cumulative > target) {
        pick = i;
        break;
      }
    }
    if (pick == points.size()) pick = last_positive;  // rounding at the top end
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < points.size(); ++i) w[i] = std::min(w[i], squared_distance(points[i], points[pick]));
  }
  return centroids;
}

}  // namespace detail

/// k-means++ seeding: the first centroid uniformly at random, each further
/// one with probability proportional to its squared distance to the nearest
/// centroid already chosen. Deterministic for a given seed.
inline std::vector<Rgb> kmeans_pp_init(std::span<const Rgb> points, std::size_t k, std::uint64_t seed) {
  return detail::seed_centroids(points, k, seed, false);
}

struct KMeansOptions {
  std::size_t max_iter = 100;
  double tol = 1e-4;
  unsigned workers = 1;
};

struct KMeansResult {
  std::vector<Rgb> centroids;
  std::vector<std::uint32_t> assignments;
  std::vector<double> inertia_history;  // one entry per assignment pass
  std::size_t iterations = 0;
  bool converged = false;

  double inertia() const { return inertia_history.empty() ? 0.0 : inertia_history.back(); }
};

namespace detail {

inline constexpr std::size_t kReductionChunk = 4096;

struct ChunkSums {
  std::vector<double> sums;  // k x 3
  std::vector<std::size_t> counts;
  double inertia = 0.0;
};

// Assigns points to their nearest centroid (ties go to the lower index) and
// accumulates per-cluster sums in fixed-size chunks, reduced in chunk order so
// the result is independent of the worker count.
inline ChunkSums assign(std::span<const Rgb> points, std::span<const Rgb> centroids,
                        std::vector<std::uint32_t>& assignments, unsigned workers) {
  const std::size_t k = centroids.size();
  const std::size_t chunks = (points.size() + kReductionChunk - 1) / kReductionChunk;
  std::vector<ChunkSums> partial(chunks);
  parallel_rows(chunks, workers, [&](std::size_t c_begin, std::size_t c_end) {
    for (std::size_t c = c_begin; c < c_end; ++c) {
      ChunkSums& cs = partial[c];
      cs.sums.assign(k * 3, 0.0);
      cs.counts.assign(k, 0);
      const std::size_t end = std::min(points.size(), (c + 1) * kReductionChunk);
      for (std::size_t i = c * kReductionChunk; i < end; ++i) {
        std::uint32_t best = 0;
        double best_d = squared_distance(points[i], centroids[0]);
        for (std::size_t q = 1; q < k; ++q) {
          const double d = squared_distance(points[i], centroids[q]);
          if (d < best_d) {
            best_d = d;
            best = static_cast<std::uint32_t>(q);
          }
        }
        assignments[i] = best;
        cs.inertia += best_d;
        ++cs.counts[best];
        for (std::size_t a = 0; a < 3; ++a) cs.sums[best * 3 + a] += points[i][a];
      }
    }
  });
  ChunkSums total;
  total.sums.assign(k * 3, 0.0);
  total.counts.assign(k, 0);
  for (const auto& cs : partial) {
    total.inertia += cs.inertia;
    for (std::size_t q = 0; q < k; ++q) total.counts[q] += cs.counts[q];
    for (std::size_t a = 0; a < k * 3; ++a) total.sums[a] += cs.sums[a];
  }
  return total;
}

}  // namespace detail

/// Lloyd iterations from k-means++ seeds. Stops when no centroid moves more
/// than `tol` (Euclidean) or after `max_iter` updates. An empty cluster is
/// reseeded at the point farthest from its assigned centroid. The returned
/// assignments match the returned centroids.
inline KMeansResult kmeans(std::span<const Rgb> points, std::size_t k, std::uint64_t seed,
                           const KMeansOptions& options = {}) {
  KMeansResult r;
  r.centroids = detail::seed_centroids(points, k, seed, true);
  r.assignments.assign(points.size(), 0);

  for (std::size_t it = 0; it < options.max_iter; ++it) {
    const auto sums = detail::assign(points, r.centroids, r.assignments, options.workers);
    r.inertia_history.push_back(sums.inertia);

    std::vector<Rgb> next(k);
    std::vector<std::size_t> empty;
    for (std::size_t q = 0; q < k; ++q) {
      if (sums.counts[q] == 0) {
        empty.push_back(q);
        continue;
      }
      const double n = static_cast<double>(sums.counts[q]);
      next[q] = {sums.sums[q * 3] / n, sums.sums[q * 3 + 1] / n, sums.sums[q * 3 + 2] / n};
    }
    if (!empty.empty()) {
      std::vector<double> dist(points.size());
      for (std::size_t i = 0; i < points.size(); ++i) {
        dist[i] = squared_distance(points[i], r.centroids[r.assignments[i]]);
      }
      for (std::size_t q : empty) {
        const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        next[q] = points[far];
        dist[far] = -1.0;
      }
    }

    double movement = 0.0;
    for (std::size_t q = 0; q < k; ++q) {
      movement = std::max(movement, std::sqrt(squared_distance(next[q], r.centroids[q])));
    }
    r.centroids = std::move(next);
    ++r.iterations;
    if (movement <= options.tol) {
      r.converged = true;
      break;
    }
  }
  r.inertia_history.push_back(detail::assign(points, r.centroids, r.assignments, options.workers).inertia);
  return r;
}

/// Two-class label image at demosaiced resolution.
/// 0 = excluded (all-zero input), 1 = darker cluster, 2 = brighter cluster.
struct LabelMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> labels;
  std::array<Rgb, 2> centroids{};
  std::uint64_t seed = 0;
  std::size_t iterations = 0;

  bool operator==(const LabelMap&) const = default;
};

/// Lloyd runs to an exact fixed point here: stopping at a centroid tolerance
/// leaves border tiles whose label depends on the seed.
inline constexpr KMeansOptions kBinarizeOptions{100, 0.0, 1};

/// Bi-level thresholding: clusters the non-black pixels into two groups by
/// RGB k-means++ and writes the class of each back at its position. Class 1
/// is the cluster whose centroid has the lower luminance.
inline LabelMap binarize(const RgbQuarterImage& img, std::uint64_t seed,
                         const KMeansOptions& options = kBinarizeOptions) {
  std::vector<Rgb> points;
  std::vector<std::size_t> where;
  points.reserve(img.pixels.size());
  where.reserve(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const auto& p = img.pixels[i];
    if (p[0] + p[1] + p[2] == 0.0) continue;
    points.push_back(p);
    where.push_back(i);
  }
  if (!detail::has_distinct(points, 2)) {
    throw ContractError("binarize: fewer than 2 distinct non-black pixels");
  }
  const auto km = kmeans(points, 2, seed, options);

  const auto& a = km.centroids[0];
  const auto& b = km.centroids[1];
  const double la = luminance(a);
  const double lb = luminance(b);
  const bool swap = la > lb || (la == lb && b < a);

  LabelMap out;
  out.width = img.width;
  out.height = img.height;
  out.labels.assign(img.pixels.size(), 0);
  out.centroids = swap ? std::array<Rgb, 2>{b, a} : std::array<Rgb, 2>{a, b};
  out.seed = seed;
  out.iterations = km.iterations;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::uint32_t cls = swap ? 1 - km.assignments[i] : km.assignments[i];
    out.labels[where[i]] = static_cast<std::uint8_t>(cls + 1);
  }
  return out;
}

/// Fraction of pixels labeled in both maps whose labels differ.
inline double label_disagreement(const LabelMap& a, const LabelMap& b) {
  if (a.labels.size() != b.labels.size()) throw ContractError("label_disagreement: size mismatch");
  std::size_t labeled = 0;
  std::size_t differ = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    if (a.labels[i] == 0 || b.labels[i] == 0) continue;
    ++labeled;
    if (a.labels[i] != b.labels[i]) ++differ;
  }
  return labeled == 0 ? 0.0 : static_cast<double>(differ) / static_cast<double>(labeled);
}

/// 8-bit gray rendering: labels {0, 1, 2} -> {0, 128, 255}.
inline ImageBuffer label_image(const LabelMap& m) {
  ImageBuffer img(m.width, m.height, 1, 8);
  constexpr std::uint16_t kLevels[3] = {0, 128, 255};
  for (std::size_t i = 0; i < m.labels.size(); ++i) img.samples[i] = kLevels[m.labels[i]];
  return img;
}

/// Sidecar text describing a label map: seed, iterations, centroids.
inline std::string label_sidecar(const LabelMap& m) {
  std::ostringstream out;
  out.precision(17);
  out << "seed = " << m.seed << "\n";
  out << "iterations = " << m.iterations << "\n";
  for (std::size_t c = 0; c < 2; ++c) {
    out << "centroid_" << c + 1 << " = " << m.centroids[c][0] << "," << m.centroids[c][1] << ","
        << m.centroids[c][2] << "\n";
  }
  return out.str();
}

}  // namespace photoncal
