#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "expmon/profile.hpp"
#include "expmon/scenario.hpp"

namespace expmon {

// Throws malformed-document (with byte position) for invalid JSON and
// schema-violation (naming the offending field path) for well-formed JSON
// that does not match the registry schema.
std::vector<ScenarioSpec> parse_scenario_file(std::string_view document);
std::vector<ScenarioSpec> parse_scenario_json(const nlohmann::json& document);

nlohmann::json to_json(const ScenarioSpec& spec);
nlohmann::json to_json(const ResponseSpec& response);
ResponseSpec response_from_json(const nlohmann::json& j);
nlohmann::json serialize_scenarios(const std::vector<ScenarioSpec>& specs);

struct Violation {
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::string scenario_id;
  std::vector<Violation> violations;

  bool accepted() const { return violations.empty(); }
};

ValidationReport validate_scenario(const ScenarioSpec& spec, const TrainingProfile& profile);

// Training statistic an estimate is relative to, or nullopt when the profile
// has none for (feature, parameter).
std::optional<double> training_statistic(const TrainingProfile& profile, std::string_view feature,
                                         ParameterKind parameter);

ParameterEstimate resolve_estimate(const ParameterEstimate& est, const TrainingProfile& profile);

ParameterPrior build_prior(const ParameterEstimate& est);

// Copy-on-update store: readers take an immutable snapshot, writers swap the
// whole scenario list.
class ScenarioRegistry {
 public:
  using Snapshot = std::shared_ptr<const std::vector<ScenarioSpec>>;

  ScenarioRegistry();

  Snapshot snapshot() const;

  // Throws schema-violation on duplicate ids or empty estimate lists.
  void replace(std::vector<ScenarioSpec> specs);

  std::vector<ScenarioSpec> for_model(const ModelRef& model) const;
  const ScenarioSpec* find(const Snapshot& snap, std::string_view id) const;

 private:
  mutable std::mutex mutex_;
  Snapshot current_;
};

}  // namespace expmon
