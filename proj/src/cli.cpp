#include "bbr/cli.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "bbr/grad.hpp"
#include "bbr/version.hpp"

namespace bbr::cli {

using nlohmann::json;

namespace {

double parse_double(std::string_view text, std::string_view what) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first != last && *first == ' ') ++first;
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw UsageError("malformed number '" + std::string(text) + "' in " + std::string(what));
  }
  return v;
}

std::vector<double> parse_list(std::string_view text, std::string_view what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    out.push_back(parse_double(text.substr(start, comma - start), what));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Runs `fn`, turning any JSON or argument error into a UsageError about `field`.
template <typename Fn>
auto field_guard(const std::string& field, Fn&& fn) {
  try {
    return fn();
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError("invalid config field '" + field + "': " + e.what());
  }
}

std::pair<double, double> pair_from_json(const json& j, const std::string& field) {
  return field_guard(field, [&] {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 2) throw std::invalid_argument("expected two numbers");
    return std::pair{v[0], v[1]};
  });
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string scale_label(double side) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", side);
  return buf;
}

}  // namespace

Box parse_box(std::string_view text) {
  const std::vector<double> v = parse_list(text, "box");
  if (v.size() != 4) {
    throw UsageError("box '" + std::string(text) + "' must have four fields x,y,w,h");
  }
  try {
    return Box(v[0], v[1], v[2], v[3]);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json to_json(const LossSpec& spec) {
  json j;
  j["loss"] = (spec.ratio ? "inner-" : "") + std::string(to_string(spec.base));
  if (spec.ratio) j["ratio"] = *spec.ratio;
  j["epsilon"] = spec.epsilon;
  if (spec.base == LossKind::SIoU) {
    j["theta"] = spec.siou.theta;
    j["siou_halve_terms"] = spec.siou.halve_terms;
    j["siou_printed_shape_sign"] = spec.siou.printed_shape_sign;
    j["siou_freeze_angle"] = spec.siou.freeze_angle;
  }
  return j;
}

LossSpec loss_spec_from_json(const json& j) {
  if (j.is_string()) return parse_loss_name(j.get<std::string>(), std::nullopt);
  if (!j.is_object()) throw std::invalid_argument("loss spec must be a string or an object");
  static const std::set<std::string> kKnown = {
      "loss", "ratio", "epsilon", "theta", "siou_halve_terms", "siou_printed_shape_sign",
      "siou_freeze_angle"};
  for (const auto& [key, _] : j.items()) {
    if (!kKnown.contains(key)) throw std::invalid_argument("unknown loss spec field '" + key + "'");
  }
  if (!j.contains("loss")) throw std::invalid_argument("loss spec needs a 'loss' name");
  std::optional<double> ratio;
  if (j.contains("ratio")) ratio = j.at("ratio").get<double>();
  LossSpec spec = parse_loss_name(j.at("loss").get<std::string>(), ratio);
  if (j.contains("epsilon")) spec.epsilon = j.at("epsilon").get<double>();
  if (j.contains("theta")) spec.siou.theta = j.at("theta").get<double>();
  if (j.contains("siou_halve_terms")) spec.siou.halve_terms = j.at("siou_halve_terms").get<bool>();
  if (j.contains("siou_printed_shape_sign")) {
    spec.siou.printed_shape_sign = j.at("siou_printed_shape_sign").get<bool>();
  }
  if (j.contains("siou_freeze_angle")) spec.siou.freeze_angle = j.at("siou_freeze_angle").get<bool>();
  validate(spec);
  return spec;
}

SimConfig sim_config_from_json(const json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  static const std::set<std::string> kKnown = {
      "scenario",       "center",     "target_aspects", "anchor_scales", "anchor_aspects",
      "n_points",       "radius",     "iterations",     "step_size",     "step_schedule",
      "seed",           "specs",      "target_area",    "min_size"};
  for (const auto& [key, _] : j.items()) {
    if (!kKnown.contains(key)) throw UsageError("unknown config field '" + key + "'");
  }

  SimConfig cfg;
  if (j.contains("scenario")) {
    const std::string scenario = field_guard("scenario", [&] { return j.at("scenario").get<std::string>(); });
    if (scenario == "high") {
      cfg = high_iou_preset();
    } else if (scenario == "low") {
      cfg = low_iou_preset();
    } else {
      throw UsageError("invalid config field 'scenario': expected \"high\" or \"low\"");
    }
  }
  const auto list = [&](const char* key, std::vector<double>& dst) {
    if (j.contains(key)) dst = field_guard(key, [&] { return j.at(key).get<std::vector<double>>(); });
  };
  const auto number = [&](const char* key, auto& dst) {
    using T = std::remove_reference_t<decltype(dst)>;
    if (j.contains(key)) dst = field_guard(key, [&] { return j.at(key).get<T>(); });
  };
  if (j.contains("center")) cfg.center = pair_from_json(j.at("center"), "center");
  if (j.contains("radius")) cfg.radius = pair_from_json(j.at("radius"), "radius");
  list("target_aspects", cfg.target_aspects);
  list("anchor_scales", cfg.anchor_scales);
  list("anchor_aspects", cfg.anchor_aspects);
  number("n_points", cfg.n_points);
  number("iterations", cfg.iterations);
  number("step_size", cfg.step_size);
  number("seed", cfg.seed);
  number("target_area", cfg.target_area);
  number("min_size", cfg.min_size);
  if (j.contains("step_schedule")) {
    const std::string s = field_guard("step_schedule", [&] { return j.at("step_schedule").get<std::string>(); });
    if (s == "constant") {
      cfg.step_schedule = StepSchedule::Constant;
    } else if (s == "diou_style") {
      cfg.step_schedule = StepSchedule::DiouStyle;
    } else {
      throw UsageError("invalid config field 'step_schedule': expected \"constant\" or \"diou_style\"");
    }
  }
  if (j.contains("specs")) {
    cfg.specs = field_guard("specs", [&] {
      std::vector<LossSpec> specs;
      for (const json& s : j.at("specs")) specs.push_back(loss_spec_from_json(s));
      return specs;
    });
  }
  field_guard("config", [&] {
    validate(cfg);
    return 0;
  });
  if (cfg.specs.empty()) throw UsageError("invalid config field 'specs': must not be empty");
  return cfg;
}

json to_json(const SimConfig& cfg) {
  json j;
  j["center"] = {cfg.center.first, cfg.center.second};
  j["target_aspects"] = cfg.target_aspects;
  j["anchor_scales"] = cfg.anchor_scales;
  j["anchor_aspects"] = cfg.anchor_aspects;
  j["n_points"] = cfg.n_points;
  j["radius"] = {cfg.radius.first, cfg.radius.second};
  j["iterations"] = cfg.iterations;
  j["step_size"] = cfg.step_size;
  j["step_schedule"] = cfg.step_schedule == StepSchedule::Constant ? "constant" : "diou_style";
  j["seed"] = cfg.seed;
  j["target_area"] = cfg.target_area;
  j["min_size"] = cfg.min_size;
  j["specs"] = json::array();
  for (const LossSpec& s : cfg.specs) j["specs"].push_back(to_json(s));
  return j;
}

std::string config_digest(const SimConfig& cfg) {
  const std::string canonical = to_json(cfg).dump();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

void write_summary_csv(std::ostream& os, const SimConfig& cfg, const SimulationResult& result) {
  os << "spec,iteration,total_error\n";
  for (const ConvergenceSummary& s : result.summaries) {
    const std::string name = cfg.specs[s.spec_id].name();
    for (std::size_t t = 0; t < s.total_error_curve.size(); ++t) {
      os << name << ',' << t << ',' << format_double(s.total_error_curve[t]) << '\n';
    }
  }
}

void write_cases_csv(std::ostream& os, const SimConfig& cfg, const SimulationResult& result) {
  os << "spec,case_id,final_iou,clamp_count";
  for (int t = 0; t <= cfg.iterations; ++t) os << ",e" << t;
  os << '\n';
  for (const CaseResult& c : result.cases) {
    os << cfg.specs[c.spec_id].name() << ',' << c.case_id << ',' << format_double(c.final_iou) << ','
       << c.clamp_count;
    for (double e : c.error_curve) os << ',' << format_double(e);
    os << '\n';
  }
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRecord>& records) {
  if (records.empty()) return;
  os << "deviation";
  for (const auto& [side, _] : records.front().iou_per_scale) {
    os << ",iou_" << scale_label(side) << ",absgrad_" << scale_label(side);
  }
  os << '\n';
  for (const SweepRecord& r : records) {
    os << format_double(r.deviation);
    for (const auto& [side, v] : r.iou_per_scale) {
      os << ',' << format_double(v) << ',' << format_double(r.absgrad_per_scale.at(side));
    }
    os << '\n';
  }
}

json report_to_json(const ConclusionReport& report) {
  const auto one = [](const ConclusionResult& c) {
    json j;
    j["pass"] = c.passed();
    j["vacuous"] = c.vacuous();
    j["applicable"] = c.applicable;
    j["violations"] = c.violations;
    if (c.passed() || (!c.vacuous() && c.applicable > c.violations)) {
      j["region"] = {c.region.first, c.region.second};
    } else {
      j["region"] = nullptr;
    }
    return j;
  };
  json j;
  j["high_iou_threshold"] = report.high_iou_threshold;
  j["low_iou_threshold"] = report.low_iou_threshold;
  j["C1"] = one(report.consistent_trend);
  j["C2"] = one(report.small_aux_high_iou);
  j["C3"] = one(report.large_aux_low_iou);
  j["all_pass"] = report.all_passed();
  return j;
}

namespace {

struct EvalArgs {
  std::string anchor, gt, loss;
  std::optional<double> ratio;
  bool grad = false;
  double epsilon = 1e-7;
  double theta = 4.0;
  bool siou_no_halve = false;
  bool siou_printed_shape = false;
  bool freeze_angle = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const Box anchor = parse_box(a.anchor);
  const Box gt = parse_box(a.gt);
  LossSpec spec;
  try {
    spec = parse_loss_name(a.loss, a.ratio);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  spec.epsilon = a.epsilon;
  spec.siou.theta = a.theta;
  spec.siou.halve_terms = !a.siou_no_halve;
  spec.siou.printed_shape_sign = a.siou_printed_shape;
  spec.siou.freeze_angle = a.freeze_angle;
  std::vector<std::string> warnings;
  try {
    warnings = validate(spec);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  for (const auto& w : warnings) err << "warning: " << w << '\n';

  const LossValue v = a.grad ? evaluate(spec, anchor, gt) : loss_value(spec, anchor, gt);
  json j;
  j["spec"] = to_json(spec);
  j["anchor"] = {anchor.x(), anchor.y(), anchor.w(), anchor.h()};
  j["gt"] = {gt.x(), gt.y(), gt.w(), gt.h()};
  j["loss"] = v.loss;
  j["iou"] = v.iou;
  if (v.inner_iou) j["inner_iou"] = *v.inner_iou;
  if (const auto* t = std::get_if<CiouTerms>(&v.terms)) {
    j["terms"] = {{"v", t->v}, {"alpha", t->alpha}};
  } else if (const auto* t = std::get_if<SiouTerms>(&v.terms)) {
    j["terms"] = {{"lambda", t->lambda}, {"gamma", t->gamma}, {"delta", t->delta},
                  {"omega", t->omega},   {"rho_x", t->rho_x}, {"rho_y", t->rho_y},
                  {"omega_w", t->omega_w}, {"omega_h", t->omega_h}, {"theta", t->theta}};
  }
  if (a.grad) j["grad"] = {{"dx", v.grad.dx}, {"dy", v.grad.dy}, {"dw", v.grad.dw}, {"dh", v.grad.dh}};
  out << j.dump() << '\n';
  return kOk;
}

struct SimArgs {
  std::string config;
  std::string out_dir;
  bool per_case = false;
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
};

int cmd_sim(const SimArgs& a, std::ostream& out, std::ostream& err) {
  std::ifstream in(a.config);
  if (!in) throw UsageError("cannot read config '" + a.config + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config '" + a.config + "' is not valid JSON: " + e.what());
  }
  SimConfig cfg = sim_config_from_json(j);
  if (a.seed) cfg.seed = *a.seed;
  for (const LossSpec& s : cfg.specs) {
    for (const auto& w : validate(s)) err << "warning: " << s.name() << ": " << w << '\n';
  }

  const std::filesystem::path dir(a.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory '" + a.out_dir + "': " + ec.message());

  RunOptions opts;
  opts.threads = a.threads;
  opts.keep_cases = a.per_case;
  const SimulationResult result = run_simulation(cfg, opts);

  {
    std::ofstream os(dir / "summary.csv", std::ios::binary);
    write_summary_csv(os, cfg, result);
  }
  if (a.per_case) {
    std::ofstream os(dir / "cases.csv", std::ios::binary);
    write_cases_csv(os, cfg, result);
  }

  json manifest;
  manifest["config_digest"] = config_digest(cfg);
  manifest["seed"] = cfg.seed;
  manifest["spec_list"] = json::array();
  for (const LossSpec& s : cfg.specs) manifest["spec_list"].push_back(s.name());
  manifest["timestamp"] = timestamp_utc();
  manifest["tool_version"] = kVersion;
  manifest["error_metric"] = "corner_l1";
  manifest["n_cases"] = result.n_cases;
  manifest["config"] = to_json(cfg);
  manifest["summaries"] = json::array();
  for (const ConvergenceSummary& s : result.summaries) {
    manifest["summaries"].push_back({{"spec", cfg.specs[s.spec_id].name()},
                                     {"initial_total_error", s.total_error_curve.front()},
                                     {"final_total_error", s.total_error_curve.back()},
                                     {"mean_final_error", s.mean_final_error},
                                     {"auc", s.auc},
                                     {"increases", s.increases},
                                     {"clamp_count", s.clamp_count}});
  }
  {
    std::ofstream os(dir / "manifest.json", std::ios::binary);
    os << manifest.dump(2) << '\n';
  }
  out << "cases: " << result.n_cases << '\n';
  for (const ConvergenceSummary& s : result.summaries) {
    out << cfg.specs[s.spec_id].name() << ": final total error "
        << format_double(s.total_error_curve.back()) << '\n';
  }
  return kOk;
}

struct SweepArgs {
  SweepConfig cfg;
  std::string aux_sides;
  std::string range;
  std::string axis = "diagonal";
  std::string out;
  std::string report;
  double high = kDefaultHighIouThreshold;
  double low = kDefaultLowIouThreshold;
};

int cmd_sweep(SweepArgs a, std::ostream& out, std::ostream&) {
  if (!a.aux_sides.empty()) a.cfg.aux_sides = parse_list(a.aux_sides, "--aux-sides");
  if (!a.range.empty()) {
    const auto r = parse_list(a.range, "--range");
    if (r.size() != 2) throw UsageError("--range needs lo,hi");
    a.cfg.deviation_range = {r[0], r[1]};
  }
  if (a.axis == "x") {
    a.cfg.axis = Axis::X;
  } else if (a.axis == "y") {
    a.cfg.axis = Axis::Y;
  } else if (a.axis == "diagonal") {
    a.cfg.axis = Axis::Diagonal;
  } else {
    throw UsageError("--axis must be x, y or diagonal");
  }

  std::vector<SweepRecord> records;
  ConclusionReport report;
  try {
    records = run_sweep(a.cfg);
    report = check_conclusions(records, a.cfg.box_side, a.high, a.low);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  {
    std::ofstream os(a.out, std::ios::binary);
    if (!os) throw UsageError("cannot write '" + a.out + "'");
    write_sweep_csv(os, records);
  }
  const json j = report_to_json(report);
  if (!a.report.empty()) {
    std::ofstream os(a.report, std::ios::binary);
    if (!os) throw UsageError("cannot write '" + a.report + "'");
    os << j.dump(2) << '\n';
  }
  out << j.dump() << '\n';
  return report.all_passed() ? kOk : kCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bounding-box regression losses, Inner-IoU variants and simulation lab", "bbr"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate one loss on one anchor/gt pair (JSON output)");
  eval_cmd->add_option("--anchor", eval.anchor, "Anchor box x,y,w,h")->required();
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth box x,y,w,h")->required();
  eval_cmd->add_option("--loss", eval.loss, "iou|giou|diou|ciou|eiou|siou, optionally inner-*")
      ->required();
  eval_cmd->add_option("--ratio", eval.ratio, "Auxiliary-box ratio for inner-* losses");
  eval_cmd->add_flag("--grad", eval.grad, "Also print the analytic gradient");
  eval_cmd->add_option("--epsilon", eval.epsilon, "Numerical guard")->capture_default_str();
  eval_cmd->add_option("--theta", eval.theta, "SIoU shape exponent in [2, 6]")->capture_default_str();
  eval_cmd->add_flag("--siou-no-halve", eval.siou_no_halve,
                     "Drop the inner 1/2 factors of the SIoU distance and shape costs");
  eval_cmd->add_flag("--siou-printed-shape", eval.siou_printed_shape,
                     "Use (1 - e^omega)^theta for the SIoU shape cost");
  eval_cmd->add_flag("--freeze-angle", eval.freeze_angle,
                     "Do not differentiate the SIoU angle cost");

  SimArgs sim;
  std::uint64_t seed = 0;
  auto* sim_cmd = app.add_subcommand("sim", "Run the regression simulation from a JSON config");
  sim_cmd->add_option("--config", sim.config, "JSON config file")->required();
  sim_cmd->add_option("--out", sim.out_dir, "Output directory")->required();
  sim_cmd->add_flag("--per-case", sim.per_case, "Also write cases.csv");
  sim_cmd->add_option("--threads", sim.threads, "Worker threads (0 = auto)")->capture_default_str();
  auto* seed_opt = sim_cmd->add_option("--seed", seed, "Override the config seed");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "IoU and |dIoU| versus center deviation");
  sweep_cmd->add_option("--out", sweep.out, "CSV output file")->required();
  sweep_cmd->add_option("--report", sweep.report, "Also write the conclusions report here");
  sweep_cmd->add_option("--box-side", sweep.cfg.box_side, "Actual box side")->capture_default_str();
  sweep_cmd->add_option("--aux-sides", sweep.aux_sides, "Comma-separated auxiliary sides (default 8,12)");
  sweep_cmd->add_option("--range", sweep.range, "Deviation range lo,hi (default -15,15)");
  sweep_cmd->add_option("--samples", sweep.cfg.samples, "Number of deviation samples")
      ->capture_default_str();
  sweep_cmd->add_option("--axis", sweep.axis, "x, y or diagonal")->capture_default_str();
  sweep_cmd->add_option("--high-threshold", sweep.high, "IoU at or above which a sample is high")
      ->capture_default_str();
  sweep_cmd->add_option("--low-threshold", sweep.low, "IoU at or below which a sample is low")
      ->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (*eval_cmd) return cmd_eval(eval, out, err);
    if (*sim_cmd) {
      if (*seed_opt) sim.seed = seed;
      return cmd_sim(sim, out, err);
    }
    if (*sweep_cmd) return cmd_sweep(sweep, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace bbr::cli
