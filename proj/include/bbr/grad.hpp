#pragma once

#include "bbr/geometry.hpp"
#include "bbr/losses.hpp"

namespace bbr {

enum class Axis { X, Y, Diagonal };

/// Hand-derived partials of loss_value(spec, ., gt) w.r.t. the anchor.
///
/// Conventions at non-smooth points:
///  - an overlap clamped at zero contributes no derivative;
///  - when an anchor edge coincides with the matching gt edge inside a min/max,
///    each side gets half the weight (mean of the one-sided derivatives), which
///    makes coincident boxes a stationary point;
///  - the CIoU trade-off weight alpha is held constant;
///  - the SIoU angle cost is differentiated unless spec.siou.freeze_angle.
Grad4 grad_analytic(const LossSpec& spec, const Box& anchor, const Box& gt);

/// Central differences with the same frozen terms the analytic gradient
/// assumes, so the two are directly comparable. Throws std::invalid_argument if
/// step <= 0 or a perturbed anchor is not a valid box.
Grad4 grad_fd(const LossSpec& spec, const Box& anchor, const Box& gt, double step);

/// |d IoU / d deviation| where the deviation moves the anchor center along
/// `axis` (both coordinates at once for Diagonal). The IoU is the inner IoU when
/// spec.ratio is set. The derivative is one-sided, taken in the direction that
/// moves the anchor away from the gt center (positive direction at zero), so a
/// symmetric configuration gives a symmetric curve.
double grad_magnitude_1d(const LossSpec& spec, const Box& anchor, const Box& gt, Axis axis);

}  // namespace bbr
