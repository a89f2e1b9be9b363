#pragma once

#include <string>

namespace bbr {

/// Axis-aligned box in center form. Width and height are strictly positive and
/// every field is finite; the constructor throws std::invalid_argument otherwise.
class Box {
 public:
  Box(double x, double y, double w, double h);

  double x() const { return x_; }
  double y() const { return y_; }
  double w() const { return w_; }
  double h() const { return h_; }
  double area() const { return w_ * h_; }

  Box translated(double dx, double dy) const { return {x_ + dx, y_ + dy, w_, h_}; }
  /// Every field multiplied by `s` (positions and sizes), s > 0.
  Box scaled(double s) const { return {x_ * s, y_ * s, w_ * s, h_ * s}; }
  /// Same center, sizes multiplied by `ratio`.
  Box shrunk(double ratio) const { return {x_, y_, w_ * ratio, h_ * ratio}; }

  std::string str() const;

  friend bool operator==(const Box&, const Box&) = default;

 private:
  double x_, y_, w_, h_;
};

/// Edge coordinates. y grows downward, so `top` is the smaller ordinate.
struct Corners {
  double left, right, top, bottom;
};

struct EnclosingBox {
  Corners corners;
  double width;
  double height;
  double area;
  double diagonal_sq;
};

/// Typical admissible interval for the auxiliary-box ratio. Values outside
/// are legal but deserve a warning from the caller.
struct RatioRange {
  double lo = 0.5;
  double hi = 1.5;
};

/// Throws std::invalid_argument unless ratio is finite and positive.
void require_valid_ratio(double ratio);
bool ratio_in_range(double ratio, RatioRange range = {});

Corners to_corners(const Box& b, double ratio = 1.0);

double intersection_area(const Box& a, const Box& b, double ratio = 1.0);
double iou(const Box& a, const Box& b);
EnclosingBox enclosing(const Box& a, const Box& b);

/// IoU of the two boxes after scaling each about its own center by `ratio`.
/// Union uses (w_a*h_a + w_b*h_b) * ratio^2 - inter.
double inner_iou(const Box& a, const Box& b, double ratio);

}  // namespace bbr
