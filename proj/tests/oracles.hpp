#pragma once

// Test-only reference computations. Nothing here calls into the library's
// geometry or loss code, so these stay independent of what they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "bbr/geometry.hpp"

namespace bbr::testing {

struct IntRect {
  int left, right, top, bottom;  // half-open cell ranges [left, right) x [top, bottom)
};

/// Counts unit cells covered by both / by either rectangle.
inline double raster_iou(const IntRect& a, const IntRect& b) {
  const int x0 = std::min(a.left, b.left), x1 = std::max(a.right, b.right);
  const int y0 = std::min(a.top, b.top), y1 = std::max(a.bottom, b.bottom);
  long both = 0, either = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool in_a = x >= a.left && x < a.right && y >= a.top && y < a.bottom;
      const bool in_b = x >= b.left && x < b.right && y >= b.top && y < b.bottom;
      both += in_a && in_b;
      either += in_a || in_b;
    }
  }
  return static_cast<double>(both) / static_cast<double>(either);
}

inline Box box_from_rect(const IntRect& r) {
  return {(r.left + r.right) / 2.0, (r.top + r.bottom) / 2.0,
          static_cast<double>(r.right - r.left), static_cast<double>(r.bottom - r.top)};
}

/// Random boxes for property tests: centers in [-20, 20], sizes in [0.5, 20].
class BoxSampler {
 public:
  explicit BoxSampler(std::uint64_t seed) : rng_(seed) {}

  Box next() { return {pos_(rng_), pos_(rng_), size_(rng_), size_(rng_)}; }

  /// A box near `ref`, so that pairs usually overlap.
  Box near(const Box& ref) {
    return {ref.x() + jitter_(rng_) * ref.w(), ref.y() + jitter_(rng_) * ref.h(),
            ref.w() * scale_(rng_), ref.h() * scale_(rng_)};
  }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }

 private:
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> pos_{-20.0, 20.0};
  std::uniform_real_distribution<double> size_{0.5, 20.0};
  std::uniform_real_distribution<double> jitter_{-0.6, 0.6};
  std::uniform_real_distribution<double> scale_{0.4, 2.5};
};

/// Mixed population: half independent pairs, half overlapping neighbours.
inline std::pair<Box, Box> random_pair(BoxSampler& s) {
  const Box gt = s.next();
  return {s.coin() ? s.next() : s.near(gt), gt};
}

/// True when no edge comparison that drives a min/max/abs/clamp switch lies
/// within `margin` of its switching point, so central differences with steps
/// well below `margin` never straddle a kink.
inline bool is_smooth_pair(const Box& a, const Box& g, double ratio, double margin) {
  const auto far = [margin](double u, double v) { return std::abs(u - v) > margin; };
  for (double r : {1.0, ratio}) {
    const double al = a.x() - a.w() * r / 2, ar = a.x() + a.w() * r / 2;
    const double gl = g.x() - g.w() * r / 2, gr = g.x() + g.w() * r / 2;
    const double at = a.y() - a.h() * r / 2, ab = a.y() + a.h() * r / 2;
    const double gt = g.y() - g.h() * r / 2, gb = g.y() + g.h() * r / 2;
    if (!far(al, gl) || !far(ar, gr) || !far(at, gt) || !far(ab, gb)) return false;
    // overlap clamp switch points
    if (!far(ar, gl) || !far(al, gr) || !far(ab, gt) || !far(at, gb)) return false;
  }
  const double dx = std::abs(a.x() - g.x()), dy = std::abs(a.y() - g.y());
  return far(dx, dy) && far(dx, 0.0) && far(dy, 0.0) && far(a.w(), g.w()) && far(a.h(), g.h());
}

}  // namespace bbr::testing
