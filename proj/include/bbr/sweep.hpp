#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bbr/grad.hpp"

namespace bbr {

struct SweepConfig {
  double box_side = 10.0;
  std::vector<double> aux_sides{8.0, 12.0};
  std::pair<double, double> deviation_range{-15.0, 15.0};
  int samples = 601;
  /// Diagonal shifts the anchor center by the deviation on both axes.
  Axis axis = Axis::Diagonal;
};

void validate(const SweepConfig& cfg);

/// Keys are box sides (the actual side and every auxiliary side).
struct SweepRecord {
  double deviation = 0.0;
  std::map<double, double> iou_per_scale;
  std::map<double, double> absgrad_per_scale;
};

/// Square gt of side box_side at the origin; the anchor is the same square
/// displaced by each sampled deviation. An auxiliary side s is evaluated as the
/// inner IoU with ratio s / box_side.
std::vector<SweepRecord> run_sweep(const SweepConfig& cfg);

struct ConclusionResult {
  /// Number of samples (or sample pairs, for the monotonicity check) the
  /// conclusion applies to. Zero means vacuous.
  int applicable = 0;
  int violations = 0;
  /// Deviation interval spanned by the samples where the conclusion holds.
  std::pair<double, double> region{0.0, 0.0};

  bool vacuous() const { return applicable == 0; }
  bool passed() const { return applicable > 0 && violations == 0; }
};

struct ConclusionReport {
  double high_iou_threshold = 0.0;
  double low_iou_threshold = 0.0;
  /// IoU curves of every scale are non-increasing in |deviation|.
  ConclusionResult consistent_trend;
  /// IoU(actual) >= high threshold, deviation != 0: smaller aux box has larger |grad|.
  ConclusionResult small_aux_high_iou;
  /// 0 < IoU(actual) <= low threshold: larger aux box has larger |grad|.
  ConclusionResult large_aux_low_iou;

  bool all_passed() const {
    return consistent_trend.passed() && small_aux_high_iou.passed() && large_aux_low_iou.passed();
  }
};

inline constexpr double kDefaultHighIouThreshold = 0.7;
inline constexpr double kDefaultLowIouThreshold = 0.25;

/// The smallest and largest sides present must differ from `actual_side`,
/// with one below and one above it; throws std::invalid_argument otherwise.
ConclusionReport check_conclusions(const std::vector<SweepRecord>& records, double actual_side,
                                   double high_iou_threshold = kDefaultHighIouThreshold,
                                   double low_iou_threshold = kDefaultLowIouThreshold);

}  // namespace bbr
