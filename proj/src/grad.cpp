#include "bbr/grad.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bbr {

namespace {

// Direction used to resolve edge ties.
enum class Tie { Mean, Forward, Backward };

// Weight of the anchor edge inside min(anchor_edge, gt_edge) or
// max(anchor_edge, gt_edge). Forward/Backward describe the anchor edge moving
// up/down, as it does under a center perturbation.
double edge_weight(double anchor_edge, double gt_edge, bool is_min, Tie tie) {
  if (anchor_edge != gt_edge) {
    return (is_min ? anchor_edge < gt_edge : anchor_edge > gt_edge) ? 1.0 : 0.0;
  }
  switch (tie) {
    case Tie::Mean: return 0.5;
    case Tie::Forward: return is_min ? 0.0 : 1.0;
    case Tie::Backward: return is_min ? 1.0 : 0.0;
  }
  return 0.5;
}

struct AxisTerm {
  double value = 0.0;
  double d_center = 0.0;
  double d_size = 0.0;
};

struct Span {
  double center, size;
};

// Clamped overlap of the two spans after scaling each by `ratio`.
AxisTerm overlap(Span a, Span g, double ratio, Tie tie) {
  const double a_lo = a.center - a.size * ratio / 2.0;
  const double a_hi = a.center + a.size * ratio / 2.0;
  const double g_lo = g.center - g.size * ratio / 2.0;
  const double g_hi = g.center + g.size * ratio / 2.0;
  const double raw = std::min(a_hi, g_hi) - std::max(a_lo, g_lo);
  if (raw <= 0.0) return {};
  const double w_hi = edge_weight(a_hi, g_hi, true, tie);
  const double w_lo = edge_weight(a_lo, g_lo, false, tie);
  return {raw, w_hi - w_lo, (w_hi + w_lo) * ratio / 2.0};
}

// Extent of the smallest span covering both.
AxisTerm extent(Span a, Span g, Tie tie) {
  const double a_lo = a.center - a.size / 2.0;
  const double a_hi = a.center + a.size / 2.0;
  const double g_lo = g.center - g.size / 2.0;
  const double g_hi = g.center + g.size / 2.0;
  const double w_hi = edge_weight(a_hi, g_hi, false, tie);
  const double w_lo = edge_weight(a_lo, g_lo, true, tie);
  return {std::max(a_hi, g_hi) - std::min(a_lo, g_lo), w_hi - w_lo, (w_hi + w_lo) / 2.0};
}

Span x_span(const Box& b) { return {b.x(), b.w()}; }
Span y_span(const Box& b) { return {b.y(), b.h()}; }

// Product of an x-axis term and a y-axis term, with its partials.
struct AreaTerm {
  double value;
  Grad4 d;
};

AreaTerm product(const AxisTerm& ax, const AxisTerm& ay) {
  return {ax.value * ay.value,
          {ax.d_center * ay.value, ay.d_center * ax.value, ax.d_size * ay.value,
           ay.d_size * ax.value}};
}

struct IouTerm {
  double value;
  Grad4 d;
};

IouTerm iou_with_grad(const Box& anchor, const Box& gt, double ratio, Tie tie) {
  const AreaTerm inter = product(overlap(x_span(anchor), x_span(gt), ratio, tie),
                                 overlap(y_span(anchor), y_span(gt), ratio, tie));
  const double r2 = ratio * ratio;
  const double uni = gt.area() * r2 + anchor.area() * r2 - inter.value;
  const Grad4 d_uni = Grad4{0.0, 0.0, r2 * anchor.h(), r2 * anchor.w()} - inter.d;
  const Grad4 d_iou = (1.0 / (uni * uni)) * (uni * inter.d - inter.value * d_uni);
  return {inter.value / uni, d_iou};
}

struct Enclosure {
  AxisTerm ex, ey;
};

Enclosure enclosure(const Box& anchor, const Box& gt) {
  return {extent(x_span(anchor), x_span(gt), Tie::Mean),
          extent(y_span(anchor), y_span(gt), Tie::Mean)};
}

Grad4 giou_penalty_grad(const Box& anchor, const Box& gt, const Enclosure& c) {
  const AreaTerm inter = product(overlap(x_span(anchor), x_span(gt), 1.0, Tie::Mean),
                                 overlap(y_span(anchor), y_span(gt), 1.0, Tie::Mean));
  const double uni = gt.area() + anchor.area() - inter.value;
  const Grad4 d_uni = Grad4{0.0, 0.0, anchor.h(), anchor.w()} - inter.d;
  const AreaTerm area = product(c.ex, c.ey);
  // penalty = 1 - uni / area
  return (-1.0 / (area.value * area.value)) * (area.value * d_uni - uni * area.d);
}

Grad4 diou_penalty_grad(const Box& anchor, const Box& gt, const Enclosure& c) {
  const double dx = anchor.x() - gt.x();
  const double dy = anchor.y() - gt.y();
  const double rho2 = dx * dx + dy * dy;
  const double c2 = c.ex.value * c.ex.value + c.ey.value * c.ey.value;
  const Grad4 d_rho2{2.0 * dx, 2.0 * dy, 0.0, 0.0};
  const Grad4 d_c2{2.0 * c.ex.value * c.ex.d_center, 2.0 * c.ey.value * c.ey.d_center,
                   2.0 * c.ex.value * c.ex.d_size, 2.0 * c.ey.value * c.ey.d_size};
  return (1.0 / c2) * d_rho2 - (rho2 / (c2 * c2)) * d_c2;
}

Grad4 ciou_shape_grad(const Box& anchor, const Box& gt, double alpha) {
  const double w = anchor.w();
  const double h = anchor.h();
  const double diff = std::atan(gt.w() / gt.h()) - std::atan(w / h);
  const double k = 4.0 / (std::numbers::pi * std::numbers::pi);
  const double n = w * w + h * h;
  // d atan(w/h) / dw = h / n, / dh = -w / n
  return {0.0, 0.0, alpha * k * 2.0 * diff * (-h / n), alpha * k * 2.0 * diff * (w / n)};
}

Grad4 eiou_size_grad(const Box& anchor, const Box& gt, const Enclosure& c) {
  const auto term = [](double diff, const AxisTerm& e) {
    const double e2 = e.value * e.value;
    const double e3 = e2 * e.value;
    return AxisTerm{0.0, -2.0 * diff * diff * e.d_center / e3,
                    2.0 * diff / e2 - 2.0 * diff * diff * e.d_size / e3};
  };
  const AxisTerm tw = term(anchor.w() - gt.w(), c.ex);
  const AxisTerm th = term(anchor.h() - gt.h(), c.ey);
  return {tw.d_center, th.d_center, tw.d_size, th.d_size};
}

// d lambda / d(anchor.x, anchor.y).
Grad4 siou_angle_grad(const Box& anchor, const Box& gt, double epsilon) {
  const double dx = gt.x() - anchor.x();
  const double dy = gt.y() - anchor.y();
  const double ax = std::abs(dx);
  const double ay = std::abs(dy);
  const double sigma = std::sqrt(dx * dx + dy * dy);
  const double m = std::min(ax, ay);
  const double den = sigma + epsilon;
  const double s = m / den;

  const auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  const double wx = ax < ay ? 1.0 : (ax > ay ? 0.0 : 0.5);
  const double wy = 1.0 - wx;
  // d|dx|/d anchor.x = -sgn(dx)
  const double dm_x = -wx * sgn(dx);
  const double dm_y = -wy * sgn(dy);
  const double dsig_x = sigma > 0.0 ? -dx / sigma : 0.0;
  const double dsig_y = sigma > 0.0 ? -dy / sigma : 0.0;
  const double ds_x = (dm_x * den - m * dsig_x) / (den * den);
  const double ds_y = (dm_y * den - m * dsig_y) / (den * den);

  const double dl_ds = 2.0 * (1.0 - 2.0 * s * s) / std::sqrt(1.0 - s * s);
  return {dl_ds * ds_x, dl_ds * ds_y, 0.0, 0.0};
}

double shape_cost_slope(double omega, const SiouOptions& opts) {
  if (opts.printed_shape_sign) {
    const double e = std::exp(omega);
    return opts.theta * std::pow(1.0 - e, opts.theta - 1.0) * (-e);
  }
  const double e = std::exp(-omega);
  return opts.theta * std::pow(1.0 - e, opts.theta - 1.0) * e;
}

// d omega_t / d size for omega_t = |s - s_gt| / max(s, s_gt).
double omega_slope(double s, double s_gt) {
  if (s > s_gt) return s_gt / (s * s);
  if (s < s_gt) return -1.0 / s_gt;
  return 0.5 * (s_gt / (s * s) - 1.0 / s_gt);
}

Grad4 siou_penalty_grad(const Box& anchor, const Box& gt, const LossSpec& spec,
                        const SiouTerms& t, const Enclosure& c) {
  const SiouOptions& opts = spec.siou;
  const double half = opts.halve_terms ? 0.5 : 1.0;

  Grad4 d_gamma;
  if (!opts.freeze_angle) d_gamma = -1.0 * siou_angle_grad(anchor, gt, spec.epsilon);

  // rho_t = p_t^2, p_t = (anchor_t - gt_t) / e_t
  const auto rho_grad = [](double diff, const AxisTerm& e, bool x_axis) {
    const double p = diff / e.value;
    const double dp_c = 1.0 / e.value - diff * e.d_center / (e.value * e.value);
    const double dp_s = -diff * e.d_size / (e.value * e.value);
    return x_axis ? Grad4{2.0 * p * dp_c, 0.0, 2.0 * p * dp_s, 0.0}
                  : Grad4{0.0, 2.0 * p * dp_c, 0.0, 2.0 * p * dp_s};
  };
  const Grad4 d_rho_x = rho_grad(anchor.x() - gt.x(), c.ex, true);
  const Grad4 d_rho_y = rho_grad(anchor.y() - gt.y(), c.ey, false);

  Grad4 d_delta = std::exp(-t.gamma * t.rho_x) * (t.rho_x * d_gamma + t.gamma * d_rho_x);
  d_delta += std::exp(-t.gamma * t.rho_y) * (t.rho_y * d_gamma + t.gamma * d_rho_y);
  d_delta *= half;

  const Grad4 d_omega{0.0, 0.0,
                      half * shape_cost_slope(t.omega_w, opts) * omega_slope(anchor.w(), gt.w()),
                      half * shape_cost_slope(t.omega_h, opts) * omega_slope(anchor.h(), gt.h())};
  return 0.5 * (d_delta + d_omega);
}

Grad4 base_grad(const LossSpec& spec, const Box& anchor, const Box& gt) {
  Grad4 g = -1.0 * iou_with_grad(anchor, gt, 1.0, Tie::Mean).d;
  if (spec.base == LossKind::IoU) return g;

  const Enclosure c = enclosure(anchor, gt);
  switch (spec.base) {
    case LossKind::GIoU:
      g += giou_penalty_grad(anchor, gt, c);
      break;
    case LossKind::DIoU:
      g += diou_penalty_grad(anchor, gt, c);
      break;
    case LossKind::CIoU: {
      const LossValue v = loss_base(spec, anchor, gt);
      g += diou_penalty_grad(anchor, gt, c);
      g += ciou_shape_grad(anchor, gt, std::get<CiouTerms>(v.terms).alpha);
      break;
    }
    case LossKind::EIoU:
      g += diou_penalty_grad(anchor, gt, c);
      g += eiou_size_grad(anchor, gt, c);
      break;
    case LossKind::SIoU: {
      const LossValue v = loss_base(spec, anchor, gt);
      g += siou_penalty_grad(anchor, gt, spec, std::get<SiouTerms>(v.terms), c);
      break;
    }
    case LossKind::IoU:
      break;
  }
  return g;
}

}  // namespace

Grad4 grad_analytic(const LossSpec& spec, const Box& anchor, const Box& gt) {
  if (!spec.ratio) return base_grad(spec, anchor, gt);
  require_valid_ratio(*spec.ratio);
  const Grad4 d_inner = iou_with_grad(anchor, gt, *spec.ratio, Tie::Mean).d;
  if (spec.base == LossKind::IoU) return -1.0 * d_inner;
  const Grad4 d_iou = iou_with_grad(anchor, gt, 1.0, Tie::Mean).d;
  return base_grad(spec, anchor, gt) + d_iou - d_inner;
}

Grad4 grad_fd(const LossSpec& spec, const Box& anchor, const Box& gt, double step) {
  if (!std::isfinite(step) || step <= 0.0) {
    throw std::invalid_argument("finite-difference step must be > 0");
  }
  FrozenTerms frozen;
  const LossValue at = loss_value(spec, anchor, gt);
  if (const auto* t = std::get_if<CiouTerms>(&at.terms)) frozen.ciou_alpha = t->alpha;
  if (const auto* t = std::get_if<SiouTerms>(&at.terms); t && spec.siou.freeze_angle) {
    frozen.siou_lambda = t->lambda;
  }

  const auto f = [&](double x, double y, double w, double h) {
    return loss_value(spec, Box(x, y, w, h), gt, frozen).loss;
  };
  const double x = anchor.x(), y = anchor.y(), w = anchor.w(), h = anchor.h();
  const double two_step = 2.0 * step;
  return {(f(x + step, y, w, h) - f(x - step, y, w, h)) / two_step,
          (f(x, y + step, w, h) - f(x, y - step, w, h)) / two_step,
          (f(x, y, w + step, h) - f(x, y, w - step, h)) / two_step,
          (f(x, y, w, h + step) - f(x, y, w, h - step)) / two_step};
}

double grad_magnitude_1d(const LossSpec& spec, const Box& anchor, const Box& gt, Axis axis) {
  const double ratio = spec.ratio.value_or(1.0);
  require_valid_ratio(ratio);
  double offset = 0.0;
  switch (axis) {
    case Axis::X: offset = anchor.x() - gt.x(); break;
    case Axis::Y: offset = anchor.y() - gt.y(); break;
    case Axis::Diagonal: offset = (anchor.x() - gt.x()) + (anchor.y() - gt.y()); break;
  }
  const Tie tie = offset < 0.0 ? Tie::Backward : Tie::Forward;
  const Grad4 d = iou_with_grad(anchor, gt, ratio, tie).d;
  switch (axis) {
    case Axis::X: return std::abs(d.dx);
    case Axis::Y: return std::abs(d.dy);
    case Axis::Diagonal: return std::abs(d.dx + d.dy);
  }
  return 0.0;
}

}  // namespace bbr
