#include "expmon/sim.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "expmon/error.hpp"
#include "expmon/registry.hpp"
#include "expmon/responder.hpp"
#include "expmon/window.hpp"

namespace expmon {

using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a simple combination.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ b);
}

GeneratorConfig default_churn_config() {
  GeneratorConfig c;
  c.features = {
      {"customer_age", NormalFeature{40.0, 12.0}},
      {"recent_page_visits", PoissonFeature{8.0}},
      {"plan_type", CategoricalFeature{{"basic", "premium"}, {0.7, 0.3}}},
  };
  return c;
}

void validate(const GeneratorConfig& config) {
  if (config.training_size < 1 || config.stream_length < 1)
    throw Error(ErrorKind::invalid_config, "generator sizes must be >= 1");
  for (const auto& f : config.features) {
    if (const auto* n = std::get_if<NormalFeature>(&f.distribution)) {
      if (!(n->sd > 0.0) || !std::isfinite(n->mean))
        throw Error(ErrorKind::invalid_config, f.name + ": normal needs finite mean and sd > 0");
    } else if (const auto* p = std::get_if<PoissonFeature>(&f.distribution)) {
      if (!(p->rate > 0.0)) throw Error(ErrorKind::invalid_config, f.name + ": poisson rate must be > 0");
    } else {
      const auto& c = std::get<CategoricalFeature>(f.distribution);
      double total = 0.0;
      for (double p : c.probabilities) {
        if (!(p >= 0.0)) throw Error(ErrorKind::invalid_config, f.name + ": negative probability");
        total += p;
      }
      if (c.categories.empty() || c.categories.size() != c.probabilities.size() || std::abs(total - 1.0) > 1e-9)
        throw Error(ErrorKind::invalid_config, f.name + ": categories and probabilities must align and sum to 1");
    }
  }
}

FeatureSchema schema_of(const GeneratorConfig& config) {
  FeatureSchema schema;
  for (const auto& f : config.features) {
    FeatureKind kind = std::holds_alternative<NormalFeature>(f.distribution)    ? FeatureKind::numeric
                       : std::holds_alternative<PoissonFeature>(f.distribution) ? FeatureKind::count
                                                                                : FeatureKind::categorical;
    schema.features.push_back({f.name, kind});
  }
  schema.has_prediction = config.prediction;
  return schema;
}

namespace {

double churn_score(const Observation& row) {
  double z = -1.0;
  if (auto it = row.features.find("customer_age"); it != row.features.end())
    if (const auto* v = std::get_if<double>(&it->second)) z += 0.05 * (40.0 - *v);
  if (auto it = row.features.find("recent_page_visits"); it != row.features.end())
    if (const auto* v = std::get_if<double>(&it->second)) z -= 0.15 * (*v - 8.0);
  if (auto it = row.features.find("plan_type"); it != row.features.end())
    if (const auto* v = std::get_if<std::string>(&it->second); v && *v == "premium") z -= 0.5;
  return 1.0 / (1.0 + std::exp(-z));
}

// Pre-built samplers for one parameter setting.
struct RowSampler {
  explicit RowSampler(const GeneratorConfig& config) : config(config) {
    for (const auto& f : config.features) {
      if (const auto* n = std::get_if<NormalFeature>(&f.distribution))
        normals.emplace_back(n->mean, n->sd);
      else if (const auto* p = std::get_if<PoissonFeature>(&f.distribution))
        poissons.emplace_back(p->rate);
      else {
        const auto& c = std::get<CategoricalFeature>(f.distribution);
        discretes.emplace_back(c.probabilities.begin(), c.probabilities.end());
      }
    }
  }

  Observation draw(std::mt19937_64& rng, std::int64_t ts) {
    Observation row;
    row.model = config.model;
    row.timestamp_ms = ts;
    std::size_t ni = 0, pi = 0, ci = 0;
    for (const auto& f : config.features) {
      if (std::holds_alternative<NormalFeature>(f.distribution)) {
        row.features[f.name] = normals[ni++](rng);
      } else if (std::holds_alternative<PoissonFeature>(f.distribution)) {
        row.features[f.name] = static_cast<double>(poissons[pi++](rng));
      } else {
        const auto& c = std::get<CategoricalFeature>(f.distribution);
        row.features[f.name] = c.categories[discretes[ci++](rng)];
      }
    }
    if (config.prediction) row.prediction = churn_score(row);
    return row;
  }

  const GeneratorConfig& config;
  std::vector<std::normal_distribution<double>> normals;
  std::vector<std::poisson_distribution<long long>> poissons;
  std::vector<std::discrete_distribution<std::size_t>> discretes;
};

double shift_scalar(const ParameterShift& s) {
  if (const auto* v = std::get_if<double>(&s.target)) return *v;
  throw Error(ErrorKind::invalid_config, s.feature + ": expected a scalar shift target");
}

}  // namespace

std::vector<Observation> generate_rows(const GeneratorConfig& config, std::size_t n, std::uint64_t seed,
                                       std::int64_t ts0) {
  validate(config);
  std::mt19937_64 rng(seed);
  RowSampler sampler(config);
  std::vector<Observation> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) rows.push_back(sampler.draw(rng, ts0 + static_cast<std::int64_t>(i)));
  return rows;
}

std::vector<Observation> generate_training_data(const GeneratorConfig& config, std::uint64_t seed) {
  return generate_rows(config, config.training_size, seed);
}

GeneratorConfig interpolate(const GeneratorConfig& base, const std::vector<ParameterShift>& shifts, double weight) {
  GeneratorConfig out = base;
  auto lerp = [weight](double a, double b) { return a + weight * (b - a); };
  for (const auto& s : shifts) {
    auto it = std::find_if(out.features.begin(), out.features.end(),
                           [&](const FeatureGenerator& f) { return f.name == s.feature; });
    if (it == out.features.end()) throw Error(ErrorKind::invalid_config, "shift on unknown feature " + s.feature);
    auto& dist = it->distribution;
    if (auto* n = std::get_if<NormalFeature>(&dist)) {
      if (s.parameter == ParameterKind::mean)
        n->mean = lerp(n->mean, shift_scalar(s));
      else if (s.parameter == ParameterKind::std_dev)
        n->sd = lerp(n->sd, shift_scalar(s));
      else
        throw Error(ErrorKind::invalid_config, s.feature + ": numeric features shift mean or std-dev");
    } else if (auto* p = std::get_if<PoissonFeature>(&dist)) {
      if (s.parameter != ParameterKind::rate && s.parameter != ParameterKind::mean)
        throw Error(ErrorKind::invalid_config, s.feature + ": count features shift rate");
      p->rate = lerp(p->rate, shift_scalar(s));
    } else {
      auto& c = std::get<CategoricalFeature>(dist);
      std::vector<double> target;
      if (s.parameter == ParameterKind::proportion) {
        // Proportion of the first category; the rest keep their relative sizes.
        const double p0 = shift_scalar(s);
        const double rest = 1.0 - c.probabilities[0];
        target.push_back(p0);
        for (std::size_t i = 1; i < c.probabilities.size(); ++i)
          target.push_back(rest > 0.0 ? (1.0 - p0) * c.probabilities[i] / rest
                                      : (1.0 - p0) / static_cast<double>(c.probabilities.size() - 1));
      } else if (s.parameter == ParameterKind::category_probabilities) {
        target = std::get<std::vector<double>>(s.target);
        if (target.size() != c.probabilities.size())
          throw Error(ErrorKind::invalid_config, s.feature + ": probability vector has the wrong length");
      } else {
        throw Error(ErrorKind::invalid_config, s.feature + ": categorical features shift proportions");
      }
      for (std::size_t i = 0; i < target.size(); ++i) c.probabilities[i] = lerp(c.probabilities[i], target[i]);
    }
  }
  return out;
}

std::vector<Observation> inject_scenario(const std::vector<Observation>& stream, const GeneratorConfig& config,
                                         const InjectedScenario& injected, std::uint64_t seed) {
  if (injected.onset >= stream.size()) throw Error(ErrorKind::precondition, "onset must lie inside the stream");
  if (injected.ramp < 1) throw Error(ErrorKind::precondition, "ramp must be >= 1");
  std::vector<Observation> out = stream;
  std::mt19937_64 rng(seed);
  if (injected.transition == Transition::abrupt) {
    GeneratorConfig shifted = interpolate(config, injected.shifts, 1.0);
    RowSampler sampler(shifted);
    for (std::size_t i = injected.onset; i < out.size(); ++i) out[i] = sampler.draw(rng, stream[i].timestamp_ms);
    return out;
  }
  for (std::size_t i = injected.onset; i < out.size(); ++i) {
    const double w = std::min(1.0, static_cast<double>(i - injected.onset) / static_cast<double>(injected.ramp));
    GeneratorConfig shifted = interpolate(config, injected.shifts, w);
    RowSampler sampler(shifted);
    out[i] = sampler.draw(rng, stream[i].timestamp_ms);
  }
  return out;
}

std::vector<TrueScenario> default_grid_scenarios() {
  return {
      {"younger-customers", {"customer_age", ParameterKind::mean, 34.0}, PriorFamily::normal},
      {"fewer-visits", {"recent_page_visits", ParameterKind::rate, 6.0}, PriorFamily::gamma},
      {"premium-uptake", {"plan_type", ParameterKind::proportion, 0.5}, PriorFamily::beta},
  };
}

const GridCell& AccuracyGrid::at(std::size_t e, std::size_t u) const {
  return cells.at(e * uncertainty_levels.size() + u);
}

ScenarioSpec grid_scenario_spec(const TrueScenario& truth, const ModelRef& model, double error, int direction,
                                double uncertainty, double scale_fraction) {
  const double theta = shift_scalar(truth.shift);
  ScenarioSpec spec;
  spec.id = truth.id;
  spec.model = model;
  spec.description = "injected shift of " + truth.shift.feature;
  ParameterEstimate est;
  est.feature = truth.shift.feature;
  est.parameter = truth.shift.parameter;
  est.family = truth.family;
  est.location = theta * (1.0 + static_cast<double>(direction) * error);
  est.spread = uncertainty * scale_fraction * std::abs(theta);
  spec.estimates.push_back(est);
  return spec;
}

AccuracyGrid run_grid_experiment(const GridConfig& config) {
  if (config.error_levels.empty() || config.uncertainty_levels.empty())
    throw Error(ErrorKind::invalid_level, "error and uncertainty levels must be non-empty");
  for (double e : config.error_levels)
    if (!(e >= 0.0)) throw Error(ErrorKind::invalid_level, "error levels must be >= 0");
  for (double u : config.uncertainty_levels)
    if (!(u > 0.0)) throw Error(ErrorKind::invalid_level, "uncertainty levels must be > 0");
  if (config.trials < 50) throw Error(ErrorKind::invalid_level, "at least 50 trials per cell");
  if (config.scenarios.empty()) throw Error(ErrorKind::invalid_config, "no grid scenarios");

  const auto start = std::chrono::steady_clock::now();
  const GeneratorConfig& gen = config.generator;
  const FeatureSchema schema = schema_of(gen);
  const auto training = generate_training_data(gen, derive_seed(config.seed, 0xda7a));
  const TrainingProfile profile =
      fit_training_profile(training, schema, kDefaultReservoirSize, derive_seed(config.seed, 0x9e5e));
  const ReferenceModel reference = build_reference_model(profile);

  AccuracyGrid grid;
  grid.error_levels = config.error_levels;
  grid.uncertainty_levels = config.uncertainty_levels;
  for (std::size_t ei = 0; ei < config.error_levels.size(); ++ei) {
    for (std::size_t ui = 0; ui < config.uncertainty_levels.size(); ++ui) {
      const std::uint64_t cell = ei * config.uncertainty_levels.size() + ui;
      GridCell c{config.error_levels[ei], config.uncertainty_levels[ui], config.trials, 0, 0};
      for (std::size_t t = 0; t < config.trials; ++t) {
        const std::uint64_t trial_seed = derive_seed(config.seed, cell + 1, t);
        std::mt19937_64 rng(trial_seed);
        const TrueScenario& truth = config.scenarios[rng() % config.scenarios.size()];

        std::vector<ScenarioSpec> specs;
        for (const auto& s : config.scenarios) {
          const int direction = (rng() & 1U) ? 1 : -1;
          specs.push_back(
              grid_scenario_spec(s, gen.model, c.error_level, direction, c.uncertainty_level, config.scale_fraction));
        }

        const auto rows = generate_rows(interpolate(gen, {truth.shift}, 1.0), config.window,
                                        derive_seed(trial_seed, 1), 0);
        WindowStore store(config.window);
        store.register_model(gen.model, schema);
        store.ingest_batch(rows);
        const WindowView view = store.snapshot(gen.model);

        const DriftReport drift = detect_drift(view, profile, config.drift);
        if (!drift.alert) continue;
        ++c.alerts;

        std::vector<ScenarioModel> models;
        for (const auto& s : specs) models.push_back(build_scenario_model(s, profile, reference));
        EngineConfig engine = config.engine;
        engine.seed = derive_seed(trial_seed, 2);
        const Evaluation ev = evaluate_scenarios(view, models, reference, engine);
        const auto ranked = rank_assessments(ev.assessments);
        const Decision d = decide_action(ranked, response_table(specs), config.threshold);
        if (d.scenario_id == truth.id && d.log_bf >= std::log(config.threshold)) ++c.successes;
      }
      grid.cells.push_back(c);
    }
  }
  grid.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return grid;
}

std::string grid_csv(const AccuracyGrid& grid) {
  std::ostringstream out;
  out << "error_level,uncertainty_level,trials,successes,accuracy\n";
  out << std::setprecision(10);
  for (const auto& c : grid.cells)
    out << c.error_level << ',' << c.uncertainty_level << ',' << c.trials << ',' << c.successes << ','
        << c.accuracy() << '\n';
  return out.str();
}

json to_json(const GeneratorConfig& config) {
  json features = json::array();
  for (const auto& f : config.features) {
    json d;
    if (const auto* n = std::get_if<NormalFeature>(&f.distribution))
      d = {{"family", "normal"}, {"mean", n->mean}, {"sd", n->sd}};
    else if (const auto* p = std::get_if<PoissonFeature>(&f.distribution))
      d = {{"family", "poisson"}, {"rate", p->rate}};
    else {
      const auto& c = std::get<CategoricalFeature>(f.distribution);
      d = {{"family", "categorical"}, {"categories", c.categories}, {"probabilities", c.probabilities}};
    }
    features.push_back({{"name", f.name}, {"distribution", d}});
  }
  return {{"model", {{"name", config.model.name}, {"version", config.model.version}}},
          {"features", features},
          {"prediction", config.prediction},
          {"training_size", config.training_size},
          {"stream_length", config.stream_length},
          {"seed", config.seed}};
}

json grid_manifest(const GridConfig& config, const AccuracyGrid& grid) {
  json scenarios = json::array();
  for (const auto& s : config.scenarios)
    scenarios.push_back({{"id", s.id},
                         {"feature", s.shift.feature},
                         {"parameter", std::string(to_string(s.shift.parameter))},
                         {"true_value", shift_scalar(s.shift)},
                         {"prior_family", std::string(to_string(s.family))}});
  json settings = {{"seed", config.seed},
                   {"threshold", config.threshold},
                   {"error_levels", config.error_levels},
                   {"uncertainty_levels", config.uncertainty_levels},
                   {"trials_per_cell", config.trials},
                   {"window", config.window},
                   {"alpha", config.drift.alpha},
                   {"correction", std::string(to_string(config.drift.correction))},
                   {"generator", to_json(config.generator)},
                   {"scenarios", scenarios}};
  // FNV-1a over the canonical settings document.
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : settings.dump()) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << hash;
  json manifest = settings;
  manifest["config_hash"] = hex.str();
  manifest["error_definition"] = "estimate location = true value * (1 +/- error), sign drawn per scenario and trial";
  manifest["uncertainty_definition"] =
      "estimate spread = uncertainty * " + std::to_string(config.scale_fraction) + " * |true value|";
  manifest["accuracy_definition"] =
      "fraction of drift-injected trials where an alert fires, the injected scenario ranks first, and its Bayes "
      "factor is >= threshold";
  manifest["runtime_seconds"] = grid.seconds;
  return manifest;
}

std::vector<ScenarioSpec> churn_registry(const ModelRef& model) {
  ScenarioSpec marketing;
  marketing.id = "marketing-campaign";
  marketing.model = model;
  marketing.description = "Marketing campaign targeting young people shifts the customer age distribution";
  marketing.estimates.push_back({"customer_age", ParameterKind::mean, PriorFamily::normal, 18.0, 1.0});
  marketing.understanding = {Level::low, Level::high, Level::moderate, Level::low, Level::moderate,
                             "Decision boundary stays valid; no retraining needed"};
  marketing.response = ResponseSpec{ActionKind::notify_only, json{{"message", "benign input shift"}}, false};

  ScenarioSpec competitor;
  competitor.id = "competitor-campaign";
  competitor.model = model;
  competitor.description = "Competitor campaign draws young customers away, cutting their page visits";
  competitor.estimates.push_back({"recent_page_visits", ParameterKind::rate, PriorFamily::gamma, 3.0, 1.0});
  competitor.subgroup = SubgroupPredicate{{SubgroupClause{"customer_age", Comparator::less, 30.0}}};
  competitor.understanding = {Level::high, Level::moderate, Level::high, Level::low, Level::moderate,
                              "Concept drift among younger customers"};
  competitor.response =
      ResponseSpec{ActionKind::fallback_model, json{{"fallback", model.name + ":previous"}}, false};
  return {marketing, competitor};
}

}  // namespace expmon
