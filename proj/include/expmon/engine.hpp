#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "expmon/monte_carlo.hpp"
#include "expmon/profile.hpp"
#include "expmon/scenario.hpp"
#include "expmon/window.hpp"

namespace expmon {

inline constexpr double kDefaultPseudoCount = 100.0;

// One feature's Bayesian model: likelihood family, fixed parameters, and the
// prior over the free parameter(s).
struct FeatureLikelihoodModel {
  std::string feature;
  LikelihoodFamily likelihood = LikelihoodFamily::normal_known_variance;
  double known_variance = 1.0;           // normal-known-variance only
  std::vector<std::string> categories;   // bernoulli (success first) and categorical
  ParameterPrior prior = NormalPrior{};

  // True when the marginal has a closed form for this prior.
  bool conjugate() const;
};

struct ReferenceModel {
  ModelRef model;
  std::vector<FeatureLikelihoodModel> features;
  std::vector<std::string> flags;  // e.g. zero-variance features whose prior was floored

  const FeatureLikelihoodModel* find(std::string_view feature) const;
};

struct ScenarioModel {
  std::string scenario_id;
  std::vector<FeatureLikelihoodModel> features;  // same feature set as the reference
  std::vector<std::string> affected;             // features carrying scenario priors
  std::optional<SubgroupPredicate> subgroup;
  double prior_weight = 2.0;                     // unnormalized
};

ReferenceModel build_reference_model(const TrainingProfile& profile, double pseudo_count = kDefaultPseudoCount);

// Resolves and compiles every estimate; unaffected features inherit the
// reference models. Throws on estimates that validate_scenario would flag.
ScenarioModel build_scenario_model(const ScenarioSpec& spec, const TrainingProfile& profile,
                                   const ReferenceModel& reference);

// A scenario model whose every feature is the reference's, for sanity checks.
ScenarioModel reference_as_scenario(const ReferenceModel& reference, std::string id);

struct EngineConfig {
  std::size_t min_window = 100;
  std::size_t min_subgroup_rows = 20;
  std::size_t mc_samples = 20000;
  std::uint64_t seed = 0;
  double reference_weight = 2.0;  // moderate
};

enum class AssessmentStatus { ok, insufficient_data };
std::string_view to_string(AssessmentStatus v);

struct FeatureContribution {
  std::string feature;
  bool affected = false;
  double log_ml = 0.0;            // this model's contribution
  double reference_log_ml = 0.0;  // reference on the same rows
  bool monte_carlo = false;
  double mc_std_error = 0.0;
};

struct ScenarioAssessment {
  std::string scenario_id;
  AssessmentStatus status = AssessmentStatus::ok;
  double log_ml = 0.0;
  double reference_log_ml = 0.0;  // reference evaluated on this scenario's row partition
  double log_bf = 0.0;
  double posterior = 0.0;
  double prior_weight = 2.0;
  std::size_t subgroup_rows = 0;
  double mc_std_error = 0.0;
  std::vector<FeatureContribution> per_feature;
};

struct Evaluation {
  ModelRef model;
  std::string window_id;
  std::int64_t timestamp_ms = 0;
  double reference_log_ml = 0.0;
  double reference_posterior = 0.0;
  std::vector<ScenarioAssessment> assessments;
};

// Marginal likelihood of one feature model on a window (all rows of `view`).
struct FeatureMarginal {
  double log_ml = 0.0;
  bool monte_carlo = false;
  double std_error = 0.0;
};
FeatureMarginal feature_log_marginal(const FeatureLikelihoodModel& model, const WindowView& view,
                                     std::size_t mc_samples, std::uint64_t seed);

// Scores every scenario against the reference on the window. Throws
// no-scenarios-registered for an empty list and precondition when the window
// is below config.min_window.
Evaluation evaluate_scenarios(const WindowView& view, std::span<const ScenarioModel> scenarios,
                              const ReferenceModel& reference, const EngineConfig& config);

nlohmann::json to_json(const Evaluation& evaluation);
// Non-finite values travel as "Infinity", "-Infinity" or "NaN".
nlohmann::json json_number(double x);
double number_from_json(const nlohmann::json& j);
Evaluation evaluation_from_json(const nlohmann::json& j);

}  // namespace expmon
