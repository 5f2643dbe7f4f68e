#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chaintrust/benchmark.hpp"
#include "chaintrust/pipeline.hpp"
#include "chaintrust/registry.hpp"

namespace chaintrust {

/// Malformed fleet document. The message carries the line or the field path.
class FleetParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fleet document schema:
///
///   {"description": "...",                       (optional)
///    "devices": [
///      {"id": "a8", "class": "phone",
///       "services": ["AI model training", "3D mapping"],
///       "comm": {"rate_mb_per_s": 33, "security": "high"},
///       "compute": {"cpu_clock_ghz": 2.91 | "cpu_clock_mhz": 2910,
///                   "has_gpu": false, "security": "high"},
///       "delivery": {"loyalty": "high"},
///       "note": "..."}                            (optional)
///    ]}
///
/// Unknown fields are rejected; exactly one clock field per device. MHz
/// clocks are converted to GHz.
std::vector<Device> parse_fleet(const std::string& text);
std::vector<Device> load_fleet(const std::filesystem::path& path);

/// Duplicate ids and per-device violations, each prefixed with the id.
std::vector<std::string> validate_fleet(const std::vector<Device>& devices);

/// Registers every device; throws FleetParseError listing all violations.
Registry registry_from_fleet(const std::vector<Device>& devices);

nlohmann::json fleet_to_json(const std::vector<Device>& devices);
std::vector<Device> fleet_of(const Registry& registry);

nlohmann::json task_to_json(const Task& task);
nlohmann::json snapshot_to_json(const FamilySnapshot& snapshot);
nlohmann::json trace_to_json(const EvaluationTrace& trace);

/// Offline check of a trace document against the fleet it ran on: nested
/// survivor sets, owner exclusion, snapshot coverage, and snapshot values
/// equal to the fleet's. With `policy`, rule-evaluated stages are re-judged
/// and compared. Returns one message per problem found.
std::vector<std::string> verify_trace(const nlohmann::json& trace, const std::vector<Device>& fleet,
                                      const RulePolicy* policy = nullptr);

/// Machine-readable report. Everything except "elapsed_seconds" is a
/// deterministic function of the inputs.
nlohmann::json report_to_json(const BenchmarkReport& report);

/// Reports keyed by evaluator and mode plus the rendered table.
nlohmann::json comparison_to_json(const std::vector<BenchmarkReport>& reports);

}  // namespace chaintrust
