#include "bbr/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bbr {

void validate(const SweepConfig& cfg) {
  if (cfg.samples < 3) throw std::invalid_argument("sweep samples must be >= 3");
  if (!std::isfinite(cfg.box_side) || cfg.box_side <= 0.0) {
    throw std::invalid_argument("sweep box_side must be > 0");
  }
  for (double s : cfg.aux_sides) {
    if (!std::isfinite(s) || s <= 0.0) throw std::invalid_argument("sweep aux sides must be > 0");
  }
  const auto [lo, hi] = cfg.deviation_range;
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo >= hi) {
    throw std::invalid_argument("sweep deviation range must be finite with lo < hi");
  }
}

std::vector<SweepRecord> run_sweep(const SweepConfig& cfg) {
  validate(cfg);
  std::vector<double> sides{cfg.box_side};
  sides.insert(sides.end(), cfg.aux_sides.begin(), cfg.aux_sides.end());

  const Box gt(0.0, 0.0, cfg.box_side, cfg.box_side);
  const auto [lo, hi] = cfg.deviation_range;
  std::vector<SweepRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.samples));
  for (int i = 0; i < cfg.samples; ++i) {
    SweepRecord rec;
    rec.deviation = lo + (hi - lo) * i / (cfg.samples - 1);
    const double dx = cfg.axis == Axis::Y ? 0.0 : rec.deviation;
    const double dy = cfg.axis == Axis::X ? 0.0 : rec.deviation;
    const Box anchor = gt.translated(dx, dy);
    for (double side : sides) {
      LossSpec spec;
      if (side != cfg.box_side) spec.ratio = side / cfg.box_side;
      rec.iou_per_scale[side] = spec.ratio ? inner_iou(anchor, gt, *spec.ratio) : iou(anchor, gt);
      rec.absgrad_per_scale[side] = grad_magnitude_1d(spec, anchor, gt, cfg.axis);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

struct RegionTracker {
  ConclusionResult& result;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void record(double deviation, bool holds) {
    ++result.applicable;
    if (!holds) {
      ++result.violations;
      return;
    }
    extend(deviation);
  }
  void extend(double deviation) {
    lo = std::min(lo, deviation);
    hi = std::max(hi, deviation);
  }
  ~RegionTracker() {
    if (lo <= hi) result.region = {lo, hi};
  }
};

}  // namespace

ConclusionReport check_conclusions(const std::vector<SweepRecord>& records, double actual_side,
                                   double high_iou_threshold, double low_iou_threshold) {
  ConclusionReport report;
  report.high_iou_threshold = high_iou_threshold;
  report.low_iou_threshold = low_iou_threshold;
  if (records.empty()) return report;

  const auto& scales = records.front().iou_per_scale;
  if (!scales.contains(actual_side)) {
    throw std::invalid_argument("sweep records lack the actual box side");
  }
  const double small = scales.begin()->first;
  const double large = scales.rbegin()->first;
  if (!(small < actual_side) || !(large > actual_side)) {
    throw std::invalid_argument(
        "conclusions need one auxiliary side below and one above the actual side");
  }
  for (const SweepRecord& r : records) {
    for (double s : {small, actual_side, large}) {
      if (!r.iou_per_scale.contains(s) || !r.absgrad_per_scale.contains(s)) {
        throw std::invalid_argument("sweep record is missing a required scale");
      }
    }
  }

  std::vector<const SweepRecord*> sorted;
  for (const SweepRecord& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const SweepRecord* a, const SweepRecord* b) { return a->deviation < b->deviation; });

  {
    RegionTracker trend{report.consistent_trend};
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      const SweepRecord& a = *sorted[i - 1];
      const SweepRecord& b = *sorted[i];
      // Only pairs on the same side of zero; `inward` is the one nearer zero.
      if (a.deviation < 0.0 && b.deviation > 0.0) continue;
      const SweepRecord& inward = b.deviation <= 0.0 ? b : a;
      const SweepRecord& outward = b.deviation <= 0.0 ? a : b;
      bool holds = true;
      for (const auto& [side, value] : outward.iou_per_scale) {
        if (value > inward.iou_per_scale.at(side)) holds = false;
      }
      trend.record(outward.deviation, holds);
      if (holds) trend.extend(inward.deviation);
    }
  }
  {
    RegionTracker high{report.small_aux_high_iou};
    for (const SweepRecord* r : sorted) {
      if (r->deviation == 0.0 || r->iou_per_scale.at(actual_side) < high_iou_threshold) continue;
      high.record(r->deviation,
                  r->absgrad_per_scale.at(small) > r->absgrad_per_scale.at(actual_side));
    }
  }
  {
    RegionTracker low{report.large_aux_low_iou};
    for (const SweepRecord* r : sorted) {
      const double v = r->iou_per_scale.at(actual_side);
      if (!(v > 0.0 && v <= low_iou_threshold)) continue;
      low.record(r->deviation,
                 r->absgrad_per_scale.at(large) > r->absgrad_per_scale.at(actual_side));
    }
  }
  return report;
}

}  // namespace bbr
