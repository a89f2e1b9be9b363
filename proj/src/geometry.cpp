#include "bbr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bbr {

Box::Box(double x, double y, double w, double h) : x_(x), y_(y), w_(w), h_(h) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) || !std::isfinite(h)) {
    throw std::invalid_argument("box has non-finite field: " + str());
  }
  if (w <= 0.0 || h <= 0.0) {
    throw std::invalid_argument("box must have positive width and height: " + str());
  }
}

std::string Box::str() const {
  std::ostringstream os;
  os.precision(17);
  os << "(" << x_ << ", " << y_ << ", " << w_ << ", " << h_ << ")";
  return os.str();
}

void require_valid_ratio(double ratio) {
  if (!std::isfinite(ratio) || ratio <= 0.0) {
    throw std::invalid_argument("ratio must be finite and > 0, got " + std::to_string(ratio));
  }
}

bool ratio_in_range(double ratio, RatioRange range) {
  return ratio >= range.lo && ratio <= range.hi;
}

Corners to_corners(const Box& b, double ratio) {
  require_valid_ratio(ratio);
  const double hw = b.w() * ratio / 2.0;
  const double hh = b.h() * ratio / 2.0;
  return {b.x() - hw, b.x() + hw, b.y() - hh, b.y() + hh};
}

namespace {

// Overlap of the two scaled boxes along each axis, each clamped at zero.
double clamped_overlap(double lo_a, double hi_a, double lo_b, double hi_b) {
  return std::max(0.0, std::min(hi_a, hi_b) - std::max(lo_a, lo_b));
}

double scaled_iou(const Box& a, const Box& b, double ratio) {
  const double inter = intersection_area(a, b, ratio);
  const double r2 = ratio * ratio;
  const double uni = b.w() * b.h() * r2 + a.w() * a.h() * r2 - inter;
  return inter / uni;
}

}  // namespace

double intersection_area(const Box& a, const Box& b, double ratio) {
  const Corners ca = to_corners(a, ratio);
  const Corners cb = to_corners(b, ratio);
  return clamped_overlap(ca.left, ca.right, cb.left, cb.right) *
         clamped_overlap(ca.top, ca.bottom, cb.top, cb.bottom);
}

double iou(const Box& a, const Box& b) { return scaled_iou(a, b, 1.0); }

double inner_iou(const Box& a, const Box& b, double ratio) {
  require_valid_ratio(ratio);
  return scaled_iou(a, b, ratio);
}

EnclosingBox enclosing(const Box& a, const Box& b) {
  const Corners ca = to_corners(a);
  const Corners cb = to_corners(b);
  EnclosingBox e{};
  e.corners = {std::min(ca.left, cb.left), std::max(ca.right, cb.right),
               std::min(ca.top, cb.top), std::max(ca.bottom, cb.bottom)};
  e.width = e.corners.right - e.corners.left;
  e.height = e.corners.bottom - e.corners.top;
  e.area = e.width * e.height;
  e.diagonal_sq = e.width * e.width + e.height * e.height;
  return e;
}

}  // namespace bbr
