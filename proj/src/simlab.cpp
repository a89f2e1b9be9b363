#include "bbr/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

#include "bbr/grad.hpp"

namespace bbr {

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid config field '" + field + "': " + what);
}

void require_positive_list(const std::vector<double>& v, const std::string& field) {
  require(!v.empty(), field, "must not be empty");
  for (double x : v) require(std::isfinite(x) && x > 0.0, field, "entries must be finite and > 0");
}

// 53-bit uniform in [0, 1). Avoids std::uniform_real_distribution, whose
// output is not specified across standard libraries.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Box box_from_area(double cx, double cy, double area, double aspect) {
  return {cx, cy, std::sqrt(area * aspect), std::sqrt(area / aspect)};
}

}  // namespace

SimConfig high_iou_preset() {
  SimConfig cfg;
  cfg.radius = {0.0, 3.0};
  cfg.target_area = 100.0;
  cfg.step_size = 0.4;
  LossSpec base;
  base.base = LossKind::CIoU;
  LossSpec inner = base;
  inner.ratio = 0.8;
  cfg.specs = {base, inner};
  return cfg;
}

SimConfig low_iou_preset() {
  SimConfig cfg = high_iou_preset();
  cfg.radius = {6.0, 9.0};
  LossSpec base;
  base.base = LossKind::SIoU;
  LossSpec inner = base;
  inner.ratio = 1.2;
  cfg.specs = {base, inner};
  return cfg;
}

void validate(const SimConfig& cfg) {
  require(std::isfinite(cfg.center.first) && std::isfinite(cfg.center.second), "center",
          "must be finite");
  require_positive_list(cfg.target_aspects, "target_aspects");
  require_positive_list(cfg.anchor_scales, "anchor_scales");
  require_positive_list(cfg.anchor_aspects, "anchor_aspects");
  require(cfg.n_points >= 1, "n_points", "must be >= 1");
  require(std::isfinite(cfg.radius.first) && std::isfinite(cfg.radius.second) &&
              cfg.radius.first >= 0.0 && cfg.radius.first <= cfg.radius.second,
          "radius", "must satisfy 0 <= lo <= hi");
  require(cfg.iterations >= 1, "iterations", "must be >= 1");
  require(std::isfinite(cfg.step_size) && cfg.step_size > 0.0, "step_size", "must be > 0");
  require(std::isfinite(cfg.target_area) && cfg.target_area > 0.0, "target_area", "must be > 0");
  require(std::isfinite(cfg.min_size) && cfg.min_size > 0.0, "min_size", "must be > 0");
  for (const LossSpec& s : cfg.specs) {
    try {
      validate(s);
    } catch (const std::invalid_argument& e) {
      require(false, "specs", e.what());
    }
  }
}

std::size_t case_count(const SimConfig& cfg) {
  return cfg.target_aspects.size() * static_cast<std::size_t>(cfg.n_points) *
         cfg.anchor_scales.size() * cfg.anchor_aspects.size();
}

std::vector<SimCase> generate_cases(const SimConfig& cfg) {
  validate(cfg);
  std::mt19937_64 rng(cfg.seed);
  const double r_lo2 = cfg.radius.first * cfg.radius.first;
  const double r_hi2 = cfg.radius.second * cfg.radius.second;
  std::vector<std::pair<double, double>> points;
  points.reserve(static_cast<std::size_t>(cfg.n_points));
  for (int i = 0; i < cfg.n_points; ++i) {
    const double r = std::sqrt(r_lo2 + unit_uniform(rng) * (r_hi2 - r_lo2));
    const double phi = 2.0 * std::numbers::pi * unit_uniform(rng);
    points.emplace_back(cfg.center.first + r * std::cos(phi), cfg.center.second + r * std::sin(phi));
  }

  std::vector<SimCase> cases;
  cases.reserve(case_count(cfg));
  for (double t_aspect : cfg.target_aspects) {
    const Box target = box_from_area(cfg.center.first, cfg.center.second, cfg.target_area, t_aspect);
    for (const auto& [px, py] : points) {
      for (double scale : cfg.anchor_scales) {
        for (double a_aspect : cfg.anchor_aspects) {
          cases.push_back({box_from_area(px, py, scale * cfg.target_area, a_aspect), target});
        }
      }
    }
  }
  return cases;
}

double corner_l1(const Box& a, const Box& b) {
  const Corners ca = to_corners(a);
  const Corners cb = to_corners(b);
  return std::abs(ca.left - cb.left) + std::abs(ca.right - cb.right) +
         std::abs(ca.top - cb.top) + std::abs(ca.bottom - cb.bottom);
}

CaseResult run_case(const LossSpec& spec, const Box& anchor, const Box& target,
                    const SimConfig& cfg) {
  CaseResult out;
  out.error_curve.reserve(static_cast<std::size_t>(cfg.iterations) + 1);
  Box current = anchor;
  out.error_curve.push_back(corner_l1(current, target));
  for (int t = 0; t < cfg.iterations; ++t) {
    const Grad4 g = grad_analytic(spec, current, target);
    double eta = cfg.step_size;
    if (cfg.step_schedule == StepSchedule::DiouStyle) eta *= 2.0 - iou(current, target);
    double w = current.w() - eta * g.dw;
    double h = current.h() - eta * g.dh;
    if (w <= cfg.min_size || h <= cfg.min_size) {
      ++out.clamp_count;
      w = std::max(w, cfg.min_size);
      h = std::max(h, cfg.min_size);
    }
    current = Box(current.x() - eta * g.dx, current.y() - eta * g.dy, w, h);
    out.error_curve.push_back(corner_l1(current, target));
  }
  out.final_iou = iou(current, target);
  return out;
}

SimulationResult run_simulation(const SimConfig& cfg, const RunOptions& opts) {
  validate(cfg);
  if (cfg.specs.empty()) throw std::invalid_argument("invalid config field 'specs': must not be empty");

  const std::vector<SimCase> cases = generate_cases(cfg);
  const std::size_t n_cases = cases.size();
  const std::size_t n_specs = cfg.specs.size();
  const std::size_t curve_len = static_cast<std::size_t>(cfg.iterations) + 1;
  const std::size_t n_blocks = (n_cases + kReductionBlock - 1) / kReductionBlock;

  // partial[spec][block] holds that block's curve sum, accumulated in case order.
  std::vector<std::vector<std::vector<double>>> partial(
      n_specs, std::vector<std::vector<double>>(n_blocks));
  std::vector<std::vector<long long>> partial_clamps(n_specs, std::vector<long long>(n_blocks, 0));

  SimulationResult result;
  result.n_cases = n_cases;
  if (opts.keep_cases) result.cases.resize(n_cases * n_specs);

  std::atomic<std::size_t> next_block{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  const auto worker = [&] {
    try {
      for (std::size_t b = next_block++; b < n_blocks; b = next_block++) {
        const std::size_t begin = b * kReductionBlock;
        const std::size_t end = std::min(begin + kReductionBlock, n_cases);
        for (std::size_t s = 0; s < n_specs; ++s) {
          std::vector<double> sum(curve_len, 0.0);
          long long clamps = 0;
          for (std::size_t c = begin; c < end; ++c) {
            CaseResult r = run_case(cfg.specs[s], cases[c].anchor, cases[c].target, cfg);
            r.case_id = c;
            r.spec_id = s;
            for (std::size_t t = 0; t < curve_len; ++t) sum[t] += r.error_curve[t];
            clamps += r.clamp_count;
            if (opts.keep_cases) result.cases[s * n_cases + c] = std::move(r);
          }
          partial[s][b] = std::move(sum);
          partial_clamps[s][b] = clamps;
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next_block = n_blocks;
    }
  };

  unsigned threads = opts.threads == 0 ? std::thread::hardware_concurrency() : opts.threads;
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_blocks)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t s = 0; s < n_specs; ++s) {
    ConvergenceSummary summary;
    summary.spec_id = s;
    summary.total_error_curve.assign(curve_len, 0.0);
    for (std::size_t b = 0; b < n_blocks; ++b) {
      for (std::size_t t = 0; t < curve_len; ++t) summary.total_error_curve[t] += partial[s][b][t];
      summary.clamp_count += partial_clamps[s][b];
    }
    const auto& curve = summary.total_error_curve;
    summary.mean_final_error = curve.back() / static_cast<double>(n_cases);
    for (std::size_t t = 1; t < curve_len; ++t) {
      summary.auc += 0.5 * (curve[t - 1] + curve[t]);
      if (curve[t] > curve[t - 1]) ++summary.increases;
    }
    result.summaries.push_back(std::move(summary));
  }
  return result;
}

}  // namespace bbr
