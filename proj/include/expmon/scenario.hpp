#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "expmon/observation.hpp"

namespace expmon {

enum class ParameterKind { mean, std_dev, proportion, rate, category_probabilities };
enum class PriorFamily { normal, uniform, beta, gamma, dirichlet };
enum class EstimateMode { absolute, relative_delta, relative_scale };
enum class Level { low, moderate, high };
enum class ActionKind { notify_only, webhook, model_swap_command, fallback_model };
enum class Comparator { less, less_equal, greater, greater_equal, equal, in_set };

std::string_view to_string(ParameterKind v);
std::string_view to_string(PriorFamily v);
std::string_view to_string(EstimateMode v);
std::string_view to_string(Level v);
std::string_view to_string(ActionKind v);
std::string_view to_string(Comparator v);

// theta = Dist(location, spread). Scalar location for every family except
// dirichlet, whose location is a probability vector over the feature's
// categories in lexicographic order.
struct ParameterEstimate {
  std::string feature;
  ParameterKind parameter = ParameterKind::mean;
  PriorFamily family = PriorFamily::normal;
  std::variant<double, std::vector<double>> location = 0.0;
  double spread = 1.0;
  EstimateMode mode = EstimateMode::absolute;

  double scalar_location() const;
  bool operator==(const ParameterEstimate&) const = default;
};

struct SubgroupClause {
  std::string feature;
  Comparator op = Comparator::equal;
  // Scalar for ordering/equality comparators, a list for in-set.
  std::variant<double, std::string, std::vector<FeatureValue>> value = 0.0;

  bool matches(const Observation& obs) const;
  bool operator==(const SubgroupClause&) const = default;
};

// Conjunction; an empty clause list matches every row.
struct SubgroupPredicate {
  std::vector<SubgroupClause> all;

  bool matches(const Observation& obs) const;
  bool operator==(const SubgroupPredicate&) const = default;
};

struct ScenarioUnderstanding {
  Level severity = Level::moderate;
  Level transition_speed = Level::moderate;
  Level duration = Level::moderate;
  Level recurrence = Level::moderate;
  Level likelihood = Level::moderate;
  std::string note;

  bool operator==(const ScenarioUnderstanding&) const = default;
};

struct ResponseSpec {
  ActionKind kind = ActionKind::notify_only;
  nlohmann::json payload = nlohmann::json::object();
  bool automated = false;

  bool operator==(const ResponseSpec&) const = default;
};

struct ScenarioSpec {
  std::string id;
  ModelRef model;
  std::string description;
  std::vector<ParameterEstimate> estimates;
  std::optional<SubgroupPredicate> subgroup;
  ScenarioUnderstanding understanding;
  std::optional<ResponseSpec> response;

  bool operator==(const ScenarioSpec&) const = default;
};

struct NormalPrior {
  double mean = 0.0;
  double variance = 1.0;
};
struct UniformPrior {
  double lower = 0.0;
  double upper = 1.0;
};
struct BetaPrior {
  double alpha = 1.0;
  double beta = 1.0;
};
struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
};
struct DirichletPrior {
  std::vector<double> concentration;
};
// mu | sigma^2 ~ N(mean, sigma^2 / kappa), sigma^2 ~ InvGamma(shape, scale).
// Never produced from a single estimate; the engine assembles it when a
// scenario estimates a standard deviation.
struct NormalInverseGammaPrior {
  double mean = 0.0;
  double kappa = 1.0;
  double shape = 2.0;
  double scale = 1.0;
};

using ParameterPrior =
    std::variant<NormalPrior, UniformPrior, BetaPrior, GammaPrior, DirichletPrior, NormalInverseGammaPrior>;

PriorFamily family_of(const ParameterPrior& prior);

// Log density of a scalar prior at theta (-inf outside the support). Throws
// precondition for the multivariate families.
double log_prior_density(const ParameterPrior& prior, double theta);

// Prior weight on the low/moderate/high scale, before normalization.
double prior_weight(Level likelihood);

bool is_valid_webhook_url(std::string_view url);

}  // namespace expmon
