#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "expmon/drift.hpp"

namespace expmon {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> profiles;  // training profile JSON files, one per model
  std::string registry;               // scenario file; PUT /scenarios writes it back
  std::string event_log;              // empty = in memory
  std::string command_log;
  std::size_t window = 500;
  std::size_t stride = 0;  // 0 = window / 5
  double alpha = 0.01;
  Correction correction = Correction::benjamini_hochberg;
  std::size_t min_window = 100;
  std::size_t min_subgroup_rows = 20;
  double bf_threshold = 5.0;
  std::uint64_t cooldown_windows = 10;
  std::int64_t approval_ttl_ms = 24LL * 3600 * 1000;
  std::size_t mc_samples = 20000;
  std::uint64_t seed = 0;
  int webhook_attempts = 3;
  int webhook_timeout_ms = 2000;

  std::size_t effective_stride() const { return stride == 0 ? std::max<std::size_t>(1, window / 5) : stride; }
};

// Applies a JSON object on top of `config`. Unknown keys and bad values throw
// invalid-config naming the key.
void apply_config_json(ServiceConfig& config, const nlohmann::json& j);

// DRIFT_<KEY> variables (key upper-cased, e.g. DRIFT_BF_THRESHOLD) override
// file values. `profiles` takes a comma-separated list.
void apply_environment(ServiceConfig& config, const std::map<std::string, std::string>& environment);
std::map<std::string, std::string> process_environment();

void validate(const ServiceConfig& config);

// File (optional, may be empty path) then environment, then validation.
ServiceConfig load_config(const std::filesystem::path& file, const std::map<std::string, std::string>& environment);

nlohmann::json to_json(const ServiceConfig& config);

}  // namespace expmon
