#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "expmon/drift.hpp"
#include "expmon/engine.hpp"
#include "expmon/observation.hpp"
#include "expmon/profile.hpp"
#include "expmon/scenario.hpp"

namespace expmon {

struct NormalFeature {
  double mean = 0.0;
  double sd = 1.0;
};
struct PoissonFeature {
  double rate = 1.0;
};
// Categories in lexicographic order, probabilities aligned.
struct CategoricalFeature {
  std::vector<std::string> categories;
  std::vector<double> probabilities;
};
using FeatureDistribution = std::variant<NormalFeature, PoissonFeature, CategoricalFeature>;

struct FeatureGenerator {
  std::string name;
  FeatureDistribution distribution;
};

struct GeneratorConfig {
  ModelRef model{"churn", "v1"};
  std::vector<FeatureGenerator> features;
  bool prediction = false;  // emit a logistic churn score
  std::size_t training_size = 10000;
  std::size_t stream_length = 500;
  std::uint64_t seed = 20240601;
};

// customer_age ~ N(40, 12^2), recent_page_visits ~ Poisson(8),
// plan_type ~ Categorical(basic 0.7, premium 0.3).
GeneratorConfig default_churn_config();
void validate(const GeneratorConfig& config);
FeatureSchema schema_of(const GeneratorConfig& config);

// i.i.d. rows with timestamps ts0, ts0 + 1, ...
std::vector<Observation> generate_rows(const GeneratorConfig& config, std::size_t n, std::uint64_t seed,
                                       std::int64_t ts0 = 0);
std::vector<Observation> generate_training_data(const GeneratorConfig& config, std::uint64_t seed);

struct ParameterShift {
  std::string feature;
  ParameterKind parameter = ParameterKind::mean;
  std::variant<double, std::vector<double>> target = 0.0;
};

enum class Transition { abrupt, gradual };

struct InjectedScenario {
  std::string scenario_id;
  std::vector<ParameterShift> shifts;
  std::size_t onset = 0;
  Transition transition = Transition::abrupt;
  std::size_t ramp = 1;
};

// Parameters after moving a fraction `weight` of the way to the shifted ones.
GeneratorConfig interpolate(const GeneratorConfig& base, const std::vector<ParameterShift>& shifts, double weight);

// Rows from onset on are redrawn from the shifted (abrupt) or linearly
// interpolated (gradual, weight (i - onset) / ramp capped at 1) parameters.
std::vector<Observation> inject_scenario(const std::vector<Observation>& stream, const GeneratorConfig& config,
                                         const InjectedScenario& injected, std::uint64_t seed);

// The three single-feature scenarios of the accuracy experiment.
struct TrueScenario {
  std::string id;
  ParameterShift shift;
  PriorFamily family = PriorFamily::normal;
};
std::vector<TrueScenario> default_grid_scenarios();

struct GridConfig {
  std::vector<double> error_levels{0.0, 0.05, 0.1, 0.2, 0.3, 0.4};
  std::vector<double> uncertainty_levels{0.25, 0.5, 1.0, 2.0, 4.0};
  std::size_t trials = 200;
  double threshold = 5.0;
  std::uint64_t seed = 7;
  // Prior sd = uncertainty * scale_fraction * |true parameter|.
  double scale_fraction = 0.1;
  std::size_t window = 500;
  GeneratorConfig generator = default_churn_config();
  std::vector<TrueScenario> scenarios = default_grid_scenarios();
  DriftConfig drift;
  EngineConfig engine;
};

struct GridCell {
  double error_level = 0.0;
  double uncertainty_level = 0.0;
  std::size_t trials = 0;
  std::size_t successes = 0;
  std::size_t alerts = 0;
  double accuracy() const { return trials == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(trials); }
};

struct AccuracyGrid {
  std::vector<double> error_levels;
  std::vector<double> uncertainty_levels;
  std::vector<GridCell> cells;  // error-major
  double seconds = 0.0;

  const GridCell& at(std::size_t error_index, std::size_t uncertainty_index) const;
};

// Spec for one grid scenario with its location off by `error` in the given
// direction (+1 / -1) and spread uncertainty * scale.
ScenarioSpec grid_scenario_spec(const TrueScenario& truth, const ModelRef& model, double error, int direction,
                                double uncertainty, double scale_fraction);

// Success per trial: an alert fires, the injected scenario ranks first, and
// its Bayes factor reaches the threshold. Throws invalid-level for error < 0,
// uncertainty <= 0 or fewer than 50 trials.
AccuracyGrid run_grid_experiment(const GridConfig& config);

std::string grid_csv(const AccuracyGrid& grid);
nlohmann::json grid_manifest(const GridConfig& config, const AccuracyGrid& grid);

// Scenario file for the churn narrative: the marketing campaign (young
// customers, age mean 18) and a competitor campaign that cuts page visits
// among young customers.
std::vector<ScenarioSpec> churn_registry(const ModelRef& model);

// Stable 64-bit mix used to derive per-trial seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

nlohmann::json to_json(const GeneratorConfig& config);

}  // namespace expmon
