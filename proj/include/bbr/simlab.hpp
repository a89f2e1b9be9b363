#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "bbr/geometry.hpp"
#include "bbr/losses.hpp"

namespace bbr {

enum class StepSchedule {
  Constant,
  /// step_size * (2 - IoU_t), IoU_t of the current anchor.
  DiouStyle,
};

struct SimConfig {
  std::pair<double, double> center{100.0, 100.0};
  std::vector<double> target_aspects{1.0 / 4, 1.0 / 3, 1.0 / 2, 1.0, 2.0, 3.0, 4.0};
  std::vector<double> anchor_scales{0.5, 0.67, 0.75, 1.0, 1.33, 1.5, 2.0};
  std::vector<double> anchor_aspects{1.0 / 4, 1.0 / 3, 1.0 / 2, 1.0, 2.0, 3.0, 4.0};
  int n_points = 2000;
  /// Anchor centers are drawn uniformly (by area) from the annulus
  /// radius.first <= r <= radius.second around `center`.
  std::pair<double, double> radius{0.0, 3.0};
  int iterations = 200;
  double step_size = 0.1;
  StepSchedule step_schedule = StepSchedule::DiouStyle;
  std::uint64_t seed = 0;
  std::vector<LossSpec> specs;
  double target_area = 1.0;
  double min_size = 1e-4;
};

/// Preset for the high-overlap scenario: radius [0, 3], CIoU and Inner-CIoU(0.8).
SimConfig high_iou_preset();
/// Preset for the low-overlap scenario: radius [6, 9], SIoU and Inner-SIoU(1.2).
SimConfig low_iou_preset();

/// Throws std::invalid_argument naming the offending field.
void validate(const SimConfig& cfg);

std::size_t case_count(const SimConfig& cfg);

struct SimCase {
  Box anchor;
  Box target;
};

/// Case order: target aspect, then sampled point, then anchor scale, then
/// anchor aspect (innermost). Deterministic for a given seed.
std::vector<SimCase> generate_cases(const SimConfig& cfg);

struct CaseResult {
  std::size_t case_id = 0;
  std::size_t spec_id = 0;
  /// iterations + 1 entries; entry 0 is the initial error.
  std::vector<double> error_curve;
  double final_iou = 0.0;
  /// Iterations at which w or h had to be clamped to min_size.
  int clamp_count = 0;
};

/// L1 distance between the corner coordinates of the two boxes.
double corner_l1(const Box& a, const Box& b);

CaseResult run_case(const LossSpec& spec, const Box& anchor, const Box& target,
                    const SimConfig& cfg);

struct ConvergenceSummary {
  std::size_t spec_id = 0;
  std::vector<double> total_error_curve;
  double mean_final_error = 0.0;
  /// Trapezoidal area under total_error_curve (unit spacing).
  double auc = 0.0;
  /// Iterations whose total error exceeds the previous one.
  int increases = 0;
  long long clamp_count = 0;
};

/// Cases are summed in case_id order within blocks of this many cases, then
/// the block sums are added in block order.
inline constexpr std::size_t kReductionBlock = 256;

struct RunOptions {
  /// 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;
  /// Keep every CaseResult (memory: cases * specs * (iterations + 1) doubles).
  bool keep_cases = false;
};

struct SimulationResult {
  std::vector<ConvergenceSummary> summaries;
  std::vector<CaseResult> cases;
  std::size_t n_cases = 0;
};

/// Runs every spec over every case. Results are independent of the thread
/// count: cases are reduced in fixed-size blocks in case_id order.
SimulationResult run_simulation(const SimConfig& cfg, const RunOptions& opts = {});

}  // namespace bbr
