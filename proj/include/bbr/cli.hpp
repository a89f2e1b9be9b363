#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bbr/geometry.hpp"
#include "bbr/losses.hpp"
#include "bbr/simlab.hpp"
#include "bbr/sweep.hpp"

namespace bbr::cli {

/// Stable exit-code contract.
enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kUsageError = 2,
};

/// Thrown for malformed user input; maps to kUsageError.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// "x,y,w,h" -> Box.
Box parse_box(std::string_view text);

/// Parses a simulation config. An optional "scenario" field ("high" or "low")
/// selects a preset that the remaining fields override. Unknown fields and
/// bad values throw UsageError naming the field.
SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimConfig& cfg);
nlohmann::json to_json(const LossSpec& spec);
LossSpec loss_spec_from_json(const nlohmann::json& j);

/// Hex SHA-256 of the canonical JSON form of the config.
std::string config_digest(const SimConfig& cfg);

/// Doubles formatted with 17 significant digits.
std::string format_double(double v);

void write_summary_csv(std::ostream& os, const SimConfig& cfg, const SimulationResult& result);
void write_cases_csv(std::ostream& os, const SimConfig& cfg, const SimulationResult& result);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRecord>& records);
nlohmann::json report_to_json(const ConclusionReport& report);

/// Entry point. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bbr::cli
