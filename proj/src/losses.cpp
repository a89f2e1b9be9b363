#include "bbr/losses.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "bbr/grad.hpp"

namespace bbr {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::IoU: return "iou";
    case LossKind::GIoU: return "giou";
    case LossKind::DIoU: return "diou";
    case LossKind::CIoU: return "ciou";
    case LossKind::EIoU: return "eiou";
    case LossKind::SIoU: return "siou";
  }
  return "?";
}

std::string LossSpec::name() const {
  std::string base_name(to_string(base));
  if (!ratio) return base_name;
  std::ostringstream os;
  os << "inner-" << base_name << "(" << *ratio << ")";
  return os.str();
}

std::vector<std::string> validate(const LossSpec& spec, RatioRange range) {
  std::vector<std::string> warnings;
  if (!std::isfinite(spec.epsilon) || spec.epsilon <= 0.0) {
    throw std::invalid_argument("epsilon must be finite and > 0");
  }
  if (spec.base == LossKind::SIoU && !(spec.siou.theta >= 2.0 && spec.siou.theta <= 6.0)) {
    throw std::invalid_argument("siou theta must lie in [2, 6]");
  }
  if (spec.ratio) {
    require_valid_ratio(*spec.ratio);
    if (!ratio_in_range(*spec.ratio, range)) {
      std::ostringstream os;
      os << "ratio " << *spec.ratio << " is outside the typical range [" << range.lo << ", "
         << range.hi << "]";
      warnings.push_back(os.str());
    }
  }
  return warnings;
}

LossSpec parse_loss_name(std::string_view name, std::optional<double> ratio) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  bool inner = false;
  constexpr std::string_view kInner = "inner-";
  if (lower.starts_with(kInner)) {
    inner = true;
    lower.erase(0, kInner.size());
  }
  LossSpec spec;
  bool found = false;
  for (LossKind k : kAllLossKinds) {
    if (lower == to_string(k)) {
      spec.base = k;
      found = true;
    }
  }
  if (!found) {
    throw std::invalid_argument(
        "unknown loss '" + std::string(name) +
        "'; valid: iou giou diou ciou eiou siou inner-iou inner-giou inner-diou "
        "inner-ciou inner-eiou inner-siou");
  }
  if (inner) {
    if (!ratio) throw std::invalid_argument("loss '" + std::string(name) + "' needs a ratio");
    require_valid_ratio(*ratio);
    spec.ratio = ratio;
  } else if (ratio) {
    throw std::invalid_argument("ratio given for non-inner loss '" + std::string(name) + "'");
  }
  return spec;
}

LossValue loss_iou(const Box& anchor, const Box& gt) {
  LossValue out;
  out.iou = iou(anchor, gt);
  out.loss = 1.0 - out.iou;
  return out;
}

LossValue loss_giou(const Box& anchor, const Box& gt) {
  LossValue out;
  const double inter = intersection_area(anchor, gt);
  const double uni = gt.area() + anchor.area() - inter;
  const EnclosingBox c = enclosing(anchor, gt);
  out.iou = iou(anchor, gt);
  out.loss = 1.0 - out.iou + (c.area - uni) / c.area;
  return out;
}

namespace {

double center_penalty(const Box& anchor, const Box& gt, const EnclosingBox& c) {
  const double dx = anchor.x() - gt.x();
  const double dy = anchor.y() - gt.y();
  return (dx * dx + dy * dy) / c.diagonal_sq;
}

}  // namespace

LossValue loss_diou(const Box& anchor, const Box& gt) {
  LossValue out;
  out.iou = iou(anchor, gt);
  out.loss = 1.0 - out.iou + center_penalty(anchor, gt, enclosing(anchor, gt));
  return out;
}

namespace {

double ciou_v(const Box& anchor, const Box& gt) {
  const double d = std::atan(gt.w() / gt.h()) - std::atan(anchor.w() / anchor.h());
  return 4.0 / (std::numbers::pi * std::numbers::pi) * d * d;
}

}  // namespace

LossValue loss_ciou(const Box& anchor, const Box& gt, double epsilon, const FrozenTerms& frozen) {
  LossValue out;
  out.iou = iou(anchor, gt);
  CiouTerms t;
  t.v = ciou_v(anchor, gt);
  t.alpha = frozen.ciou_alpha ? *frozen.ciou_alpha
                              : t.v / std::max((1.0 - out.iou) + t.v, epsilon);
  out.loss = 1.0 - out.iou + center_penalty(anchor, gt, enclosing(anchor, gt)) + t.alpha * t.v;
  out.terms = t;
  return out;
}

LossValue loss_eiou(const Box& anchor, const Box& gt) {
  LossValue out;
  out.iou = iou(anchor, gt);
  const EnclosingBox c = enclosing(anchor, gt);
  const double dw = anchor.w() - gt.w();
  const double dh = anchor.h() - gt.h();
  out.loss = 1.0 - out.iou + center_penalty(anchor, gt, c) + dw * dw / (c.width * c.width) +
             dh * dh / (c.height * c.height);
  return out;
}

namespace {

double siou_angle_sine(const Box& anchor, const Box& gt, double epsilon) {
  const double dx = gt.x() - anchor.x();
  const double dy = gt.y() - anchor.y();
  const double sigma = std::sqrt(dx * dx + dy * dy);
  return std::min(std::abs(dx), std::abs(dy)) / (sigma + epsilon);
}

double siou_shape_cost(double omega, const SiouOptions& opts) {
  const double e = opts.printed_shape_sign ? std::exp(omega) : std::exp(-omega);
  return std::pow(1.0 - e, opts.theta);
}

}  // namespace

LossValue loss_siou(const Box& anchor, const Box& gt, double epsilon, const SiouOptions& opts,
                    const FrozenTerms& frozen) {
  LossValue out;
  out.iou = iou(anchor, gt);
  const EnclosingBox c = enclosing(anchor, gt);
  const double half = opts.halve_terms ? 0.5 : 1.0;

  SiouTerms t;
  t.theta = opts.theta;
  t.lambda = frozen.siou_lambda
                 ? *frozen.siou_lambda
                 : std::sin(2.0 * std::asin(siou_angle_sine(anchor, gt, epsilon)));
  t.gamma = 2.0 - t.lambda;

  const double px = (anchor.x() - gt.x()) / c.width;
  const double py = (anchor.y() - gt.y()) / c.height;
  t.rho_x = px * px;
  t.rho_y = py * py;
  t.delta = half * ((1.0 - std::exp(-t.gamma * t.rho_x)) + (1.0 - std::exp(-t.gamma * t.rho_y)));

  t.omega_w = std::abs(anchor.w() - gt.w()) / std::max(anchor.w(), gt.w());
  t.omega_h = std::abs(anchor.h() - gt.h()) / std::max(anchor.h(), gt.h());
  t.omega = half * (siou_shape_cost(t.omega_w, opts) + siou_shape_cost(t.omega_h, opts));

  out.loss = 1.0 - out.iou + (t.delta + t.omega) / 2.0;
  out.terms = t;
  return out;
}

LossValue loss_base(const LossSpec& spec, const Box& anchor, const Box& gt,
                    const FrozenTerms& frozen) {
  switch (spec.base) {
    case LossKind::IoU: return loss_iou(anchor, gt);
    case LossKind::GIoU: return loss_giou(anchor, gt);
    case LossKind::DIoU: return loss_diou(anchor, gt);
    case LossKind::CIoU: return loss_ciou(anchor, gt, spec.epsilon, frozen);
    case LossKind::EIoU: return loss_eiou(anchor, gt);
    case LossKind::SIoU: return loss_siou(anchor, gt, spec.epsilon, spec.siou, frozen);
  }
  throw std::invalid_argument("unknown loss kind");
}

LossValue loss_inner(const LossSpec& spec, const Box& anchor, const Box& gt,
                     const FrozenTerms& frozen) {
  if (!spec.ratio) throw std::invalid_argument("loss_inner requires a ratio");
  require_valid_ratio(*spec.ratio);
  const double aux = inner_iou(anchor, gt, *spec.ratio);
  LossValue out;
  if (spec.base == LossKind::IoU) {
    out.iou = iou(anchor, gt);
    out.loss = 1.0 - aux;
  } else {
    out = loss_base(spec, anchor, gt, frozen);
    out.loss = out.loss + out.iou - aux;
  }
  out.inner_iou = aux;
  return out;
}

LossValue loss_value(const LossSpec& spec, const Box& anchor, const Box& gt,
                     const FrozenTerms& frozen) {
  return spec.ratio ? loss_inner(spec, anchor, gt, frozen) : loss_base(spec, anchor, gt, frozen);
}

LossValue evaluate(const LossSpec& spec, const Box& anchor, const Box& gt) {
  LossValue out = loss_value(spec, anchor, gt);
  out.grad = grad_analytic(spec, anchor, gt);
  return out;
}

}  // namespace bbr
