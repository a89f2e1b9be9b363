#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bbr/geometry.hpp"

namespace bbr {

enum class LossKind { IoU, GIoU, DIoU, CIoU, EIoU, SIoU };

inline constexpr std::array<LossKind, 6> kAllLossKinds = {
    LossKind::IoU, LossKind::GIoU, LossKind::DIoU,
    LossKind::CIoU, LossKind::EIoU, LossKind::SIoU};

std::string_view to_string(LossKind kind);

struct SiouOptions {
  /// Shape-cost exponent, accepted in [2, 6].
  double theta = 4.0;
  /// Keep the 1/2 factor inside both the distance and the shape cost, on top
  /// of the final (distance + shape) / 2. false drops the inner halves.
  bool halve_terms = true;
  /// Use (1 - e^{+omega})^theta for the shape cost instead of (1 - e^{-omega})^theta.
  bool printed_shape_sign = false;
  /// Treat the angle cost as a constant when differentiating.
  bool freeze_angle = false;

  friend bool operator==(const SiouOptions&, const SiouOptions&) = default;
};

struct LossSpec {
  LossKind base = LossKind::IoU;
  /// Auxiliary-box scale. Present means the Inner-X variant.
  std::optional<double> ratio;
  double epsilon = 1e-7;
  SiouOptions siou;

  /// "ciou", "inner-ciou(0.8)", ...
  std::string name() const;

  friend bool operator==(const LossSpec&, const LossSpec&) = default;
};

/// Throws std::invalid_argument for a malformed spec; returns human-readable
/// warnings (e.g. ratio outside the typical range) otherwise.
std::vector<std::string> validate(const LossSpec& spec, RatioRange range = {});

/// Parses "iou", "giou", ..., "inner-siou". An "inner-" prefix requires a ratio.
LossSpec parse_loss_name(std::string_view name, std::optional<double> ratio);

struct CiouTerms {
  double v = 0.0;
  double alpha = 0.0;
};

struct SiouTerms {
  double lambda = 0.0;
  double gamma = 2.0;
  double delta = 0.0;
  double omega = 0.0;
  double rho_x = 0.0;
  double rho_y = 0.0;
  double omega_w = 0.0;
  double omega_h = 0.0;
  double theta = 4.0;
};

/// Partial derivatives of a loss w.r.t. the anchor's (x, y, w, h).
struct Grad4 {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;

  Grad4& operator+=(const Grad4& o) {
    dx += o.dx; dy += o.dy; dw += o.dw; dh += o.dh;
    return *this;
  }
  Grad4& operator-=(const Grad4& o) {
    dx -= o.dx; dy -= o.dy; dw -= o.dw; dh -= o.dh;
    return *this;
  }
  Grad4& operator*=(double s) {
    dx *= s; dy *= s; dw *= s; dh *= s;
    return *this;
  }
  friend Grad4 operator+(Grad4 a, const Grad4& b) { return a += b; }
  friend Grad4 operator-(Grad4 a, const Grad4& b) { return a -= b; }
  friend Grad4 operator*(double s, Grad4 a) { return a *= s; }
  friend Grad4 operator*(Grad4 a, double s) { return a *= s; }
};

struct LossValue {
  double loss = 0.0;
  double iou = 0.0;
  std::optional<double> inner_iou;
  std::variant<std::monostate, CiouTerms, SiouTerms> terms;
  Grad4 grad;
};

/// Values pinned from an earlier evaluation point. Used to evaluate the
/// function whose derivative the analytic gradient actually computes.
struct FrozenTerms {
  std::optional<double> ciou_alpha;
  std::optional<double> siou_lambda;
};

LossValue loss_iou(const Box& anchor, const Box& gt);
LossValue loss_giou(const Box& anchor, const Box& gt);
LossValue loss_diou(const Box& anchor, const Box& gt);
LossValue loss_ciou(const Box& anchor, const Box& gt, double epsilon = 1e-7,
                    const FrozenTerms& frozen = {});
LossValue loss_eiou(const Box& anchor, const Box& gt);
LossValue loss_siou(const Box& anchor, const Box& gt, double epsilon = 1e-7,
                    const SiouOptions& opts = {}, const FrozenTerms& frozen = {});

/// Base loss of `spec` (ratio ignored), value and terms only.
LossValue loss_base(const LossSpec& spec, const Box& anchor, const Box& gt,
                    const FrozenTerms& frozen = {});

/// Inner-X: 1 - IoU^inner for base IoU, L_X + IoU - IoU^inner otherwise.
/// Requires spec.ratio.
LossValue loss_inner(const LossSpec& spec, const Box& anchor, const Box& gt,
                     const FrozenTerms& frozen = {});

/// Value and terms without the gradient.
LossValue loss_value(const LossSpec& spec, const Box& anchor, const Box& gt,
                     const FrozenTerms& frozen = {});

/// Full evaluation: value, terms and analytic gradient.
LossValue evaluate(const LossSpec& spec, const Box& anchor, const Box& gt);

}  // namespace bbr
