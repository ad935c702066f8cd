#include "expmon/registry.hpp"

#include <cmath>
#include <set>

#include "expmon/error.hpp"

namespace expmon {

using nlohmann::json;

namespace {

[[noreturn]] void violation(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::schema_violation, path + ": " + what);
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& required,
                const std::set<std::string>& optional = {}) {
  if (!j.is_object()) violation(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!required.count(key) && !optional.count(key)) violation(path + "." + key, "unknown key");
  }
  for (const auto& key : required) {
    if (!j.contains(key)) violation(path + "." + key, "missing required key");
  }
}

std::string get_string(const json& j, const std::string& key, const std::string& path) {
  const json& v = j.at(key);
  if (!v.is_string()) violation(path + "." + key, "expected a string");
  return v.get<std::string>();
}

template <typename Enum, std::size_t N>
Enum get_enum(const json& j, const std::string& key, const std::string& path,
              const std::array<Enum, N>& values) {
  std::string text = get_string(j, key, path);
  for (Enum e : values)
    if (to_string(e) == text) return e;
  violation(path + "." + key, "unknown value '" + text + "'");
}

constexpr std::array kParameters = {ParameterKind::mean, ParameterKind::std_dev, ParameterKind::proportion,
                                    ParameterKind::rate, ParameterKind::category_probabilities};
constexpr std::array kFamilies = {PriorFamily::normal, PriorFamily::uniform, PriorFamily::beta,
                                  PriorFamily::gamma, PriorFamily::dirichlet};
constexpr std::array kModes = {EstimateMode::absolute, EstimateMode::relative_delta,
                               EstimateMode::relative_scale};
constexpr std::array kLevels = {Level::low, Level::moderate, Level::high};
constexpr std::array kActions = {ActionKind::notify_only, ActionKind::webhook, ActionKind::model_swap_command,
                                 ActionKind::fallback_model};
constexpr std::array kComparators = {Comparator::less, Comparator::less_equal, Comparator::greater,
                                     Comparator::greater_equal, Comparator::equal, Comparator::in_set};

double get_finite(const json& v, const std::string& path) {
  if (!v.is_number()) violation(path, "expected a number");
  double x = v.get<double>();
  if (!std::isfinite(x)) violation(path, "expected a finite number");
  return x;
}

ParameterEstimate parse_estimate(const json& j, const std::string& path) {
  check_keys(j, path, {"feature", "parameter", "family", "location", "spread"}, {"mode"});
  ParameterEstimate est;
  est.feature = get_string(j, "feature", path);
  est.parameter = get_enum(j, "parameter", path, kParameters);
  est.family = get_enum(j, "family", path, kFamilies);
  est.mode = j.contains("mode") ? get_enum(j, "mode", path, kModes) : EstimateMode::absolute;

  const json& loc = j.at("location");
  if (est.family == PriorFamily::dirichlet) {
    if (!loc.is_array() || loc.empty()) violation(path + ".location", "dirichlet location must be a non-empty array");
    std::vector<double> p;
    for (std::size_t i = 0; i < loc.size(); ++i)
      p.push_back(get_finite(loc[i], path + ".location[" + std::to_string(i) + "]"));
    est.location = std::move(p);
  } else {
    est.location = get_finite(loc, path + ".location");
  }

  est.spread = get_finite(j.at("spread"), path + ".spread");
  if (!(est.spread > 0.0)) violation(path + ".spread", "spread must be > 0");
  return est;
}

FeatureValue parse_feature_value(const json& v, const std::string& path) {
  if (v.is_number()) return get_finite(v, path);
  if (v.is_string()) return v.get<std::string>();
  violation(path, "expected a number or string");
}

SubgroupPredicate parse_subgroup(const json& j, const std::string& path) {
  check_keys(j, path, {"all"});
  const json& clauses = j.at("all");
  if (!clauses.is_array()) violation(path + ".all", "expected an array");
  SubgroupPredicate pred;
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    std::string cpath = path + ".all[" + std::to_string(i) + "]";
    const json& c = clauses[i];
    check_keys(c, cpath, {"feature", "op", "value"});
    SubgroupClause clause;
    clause.feature = get_string(c, "feature", cpath);
    clause.op = get_enum(c, "op", cpath, kComparators);
    const json& v = c.at("value");
    if (clause.op == Comparator::in_set) {
      if (!v.is_array()) violation(cpath + ".value", "'in' requires an array");
      std::vector<FeatureValue> set;
      for (std::size_t k = 0; k < v.size(); ++k)
        set.push_back(parse_feature_value(v[k], cpath + ".value[" + std::to_string(k) + "]"));
      clause.value = std::move(set);
    } else {
      FeatureValue fv = parse_feature_value(v, cpath + ".value");
      if (const double* x = std::get_if<double>(&fv))
        clause.value = *x;
      else
        clause.value = std::get<std::string>(fv);
    }
    pred.all.push_back(std::move(clause));
  }
  return pred;
}

ScenarioUnderstanding parse_understanding(const json& j, const std::string& path) {
  check_keys(j, path, {"severity", "transition_speed", "duration", "recurrence"}, {"likelihood", "note"});
  ScenarioUnderstanding u;
  u.severity = get_enum(j, "severity", path, kLevels);
  u.transition_speed = get_enum(j, "transition_speed", path, kLevels);
  u.duration = get_enum(j, "duration", path, kLevels);
  u.recurrence = get_enum(j, "recurrence", path, kLevels);
  u.likelihood = j.contains("likelihood") ? get_enum(j, "likelihood", path, kLevels) : Level::moderate;
  if (j.contains("note")) u.note = get_string(j, "note", path);
  return u;
}

ResponseSpec parse_response(const json& j, const std::string& path) {
  check_keys(j, path, {"kind", "automated"}, {"payload"});
  ResponseSpec r;
  r.kind = get_enum(j, "kind", path, kActions);
  if (!j.at("automated").is_boolean()) violation(path + ".automated", "expected a boolean");
  r.automated = j.at("automated").get<bool>();
  if (j.contains("payload")) {
    if (!j.at("payload").is_object()) violation(path + ".payload", "expected an object");
    r.payload = j.at("payload");
  }
  if (r.kind == ActionKind::webhook) {
    if (!r.payload.contains("url") || !r.payload.at("url").is_string() ||
        !is_valid_webhook_url(r.payload.at("url").get<std::string>()))
      violation(path + ".payload.url", "webhook requires a valid http(s) URL");
  }
  if (r.automated && r.kind == ActionKind::notify_only)
    violation(path + ".automated", "automated responses need a non-notify action");
  return r;
}

ScenarioSpec parse_scenario(const json& j, const std::string& path) {
  check_keys(j, path, {"id", "model", "description", "estimates", "understanding"}, {"subgroup", "response"});
  ScenarioSpec spec;
  spec.id = get_string(j, "id", path);
  if (spec.id.empty()) violation(path + ".id", "must be non-empty");
  check_keys(j.at("model"), path + ".model", {"name", "version"});
  spec.model.name = get_string(j.at("model"), "name", path + ".model");
  spec.model.version = get_string(j.at("model"), "version", path + ".model");
  spec.description = get_string(j, "description", path);

  const json& ests = j.at("estimates");
  if (!ests.is_array()) violation(path + ".estimates", "expected an array");
  if (ests.empty()) violation(path + ".estimates", "at least one estimate is required");
  for (std::size_t i = 0; i < ests.size(); ++i)
    spec.estimates.push_back(parse_estimate(ests[i], path + ".estimates[" + std::to_string(i) + "]"));

  if (j.contains("subgroup")) spec.subgroup = parse_subgroup(j.at("subgroup"), path + ".subgroup");
  spec.understanding = parse_understanding(j.at("understanding"), path + ".understanding");
  if (j.contains("response")) spec.response = parse_response(j.at("response"), path + ".response");
  return spec;
}

json feature_value_json(const FeatureValue& v) {
  if (const double* x = std::get_if<double>(&v)) return *x;
  return std::get<std::string>(v);
}

}  // namespace

std::vector<ScenarioSpec> parse_scenario_file(std::string_view document) {
  json j;
  try {
    j = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::malformed_document, "at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return parse_scenario_json(j);
}

std::vector<ScenarioSpec> parse_scenario_json(const json& document) {
  check_keys(document, "$", {"scenarios"});
  const json& list = document.at("scenarios");
  if (!list.is_array()) violation("$.scenarios", "expected an array");
  std::vector<ScenarioSpec> specs;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < list.size(); ++i) {
    std::string path = "$.scenarios[" + std::to_string(i) + "]";
    specs.push_back(parse_scenario(list[i], path));
    if (!ids.insert(specs.back().id).second) violation(path + ".id", "duplicate scenario id '" + specs.back().id + "'");
  }
  return specs;
}

json to_json(const ScenarioSpec& spec) {
  json estimates = json::array();
  for (const auto& e : spec.estimates) {
    json loc;
    if (const double* x = std::get_if<double>(&e.location))
      loc = *x;
    else
      loc = std::get<std::vector<double>>(e.location);
    estimates.push_back({{"feature", e.feature},
                         {"parameter", std::string(to_string(e.parameter))},
                         {"family", std::string(to_string(e.family))},
                         {"location", loc},
                         {"spread", e.spread},
                         {"mode", std::string(to_string(e.mode))}});
  }
  json understanding = {{"severity", std::string(to_string(spec.understanding.severity))},
                        {"transition_speed", std::string(to_string(spec.understanding.transition_speed))},
                        {"duration", std::string(to_string(spec.understanding.duration))},
                        {"recurrence", std::string(to_string(spec.understanding.recurrence))},
                        {"likelihood", std::string(to_string(spec.understanding.likelihood))}};
  if (!spec.understanding.note.empty()) understanding["note"] = spec.understanding.note;

  json j = {{"id", spec.id},
            {"model", {{"name", spec.model.name}, {"version", spec.model.version}}},
            {"description", spec.description},
            {"estimates", estimates},
            {"understanding", understanding}};
  if (spec.subgroup) {
    json clauses = json::array();
    for (const auto& c : spec.subgroup->all) {
      json value;
      if (const double* x = std::get_if<double>(&c.value)) {
        value = *x;
      } else if (const std::string* s = std::get_if<std::string>(&c.value)) {
        value = *s;
      } else {
        value = json::array();
        for (const auto& v : std::get<std::vector<FeatureValue>>(c.value)) value.push_back(feature_value_json(v));
      }
      clauses.push_back({{"feature", c.feature}, {"op", std::string(to_string(c.op))}, {"value", value}});
    }
    j["subgroup"] = {{"all", clauses}};
  }
  if (spec.response) j["response"] = to_json(*spec.response);
  return j;
}

json to_json(const ResponseSpec& response) {
  return {{"kind", std::string(to_string(response.kind))},
          {"payload", response.payload},
          {"automated", response.automated}};
}

ResponseSpec response_from_json(const json& j) { return parse_response(j, "$.response"); }

json serialize_scenarios(const std::vector<ScenarioSpec>& specs) {
  json list = json::array();
  for (const auto& s : specs) list.push_back(to_json(s));
  return {{"scenarios", list}};
}

std::optional<double> training_statistic(const TrainingProfile& profile, std::string_view feature,
                                         ParameterKind parameter) {
  const FeatureProfile* fp = profile.find(feature);
  if (!fp) return std::nullopt;
  switch (parameter) {
    case ParameterKind::mean:
      if (fp->kind != FeatureKind::categorical) return fp->numeric.mean;
      break;
    case ParameterKind::rate:
      if (fp->kind == FeatureKind::count) return fp->numeric.mean;
      break;
    case ParameterKind::std_dev:
      if (fp->kind == FeatureKind::numeric) return std::sqrt(fp->numeric.variance);
      break;
    case ParameterKind::proportion:
      if (fp->kind == FeatureKind::categorical && fp->categorical.counts.size() == 2)
        return fp->categorical.proportion(fp->categorical.counts.begin()->first);
      break;
    case ParameterKind::category_probabilities:
      break;
  }
  return std::nullopt;
}

ParameterEstimate resolve_estimate(const ParameterEstimate& est, const TrainingProfile& profile) {
  if (est.mode == EstimateMode::absolute) return est;
  auto stat = training_statistic(profile, est.feature, est.parameter);
  if (!stat || !std::holds_alternative<double>(est.location)) {
    throw Error(ErrorKind::missing_profile_statistic,
                "no training statistic for " + std::string(to_string(est.parameter)) + " of '" + est.feature + "'");
  }
  ParameterEstimate out = est;
  double loc = std::get<double>(est.location);
  out.location = est.mode == EstimateMode::relative_delta ? *stat + loc : *stat * loc;
  out.mode = EstimateMode::absolute;
  return out;
}

ParameterPrior build_prior(const ParameterEstimate& est) {
  if (est.mode != EstimateMode::absolute)
    throw Error(ErrorKind::precondition, "build_prior needs an absolute estimate for '" + est.feature + "'");
  if (!(est.spread > 0.0) || !std::isfinite(est.spread))
    throw Error(ErrorKind::precondition, "spread must be positive for '" + est.feature + "'");
  const double s = est.spread;

  if (est.family == PriorFamily::dirichlet) {
    const auto* p = std::get_if<std::vector<double>>(&est.location);
    if (!p || p->empty())
      throw Error(ErrorKind::moment_matching_infeasible, "dirichlet location must be a probability vector");
    double total = 0.0;
    for (double pi : *p) {
      if (!(pi > 0.0) || !(pi < 1.0 || p->size() == 1))
        throw Error(ErrorKind::moment_matching_infeasible, "dirichlet probabilities must lie in (0,1)");
      total += pi;
    }
    if (std::abs(total - 1.0) > 1e-6)
      throw Error(ErrorKind::moment_matching_infeasible, "dirichlet probabilities must sum to 1");
    DirichletPrior prior;
    const double c = 1.0 / s;
    for (double pi : *p) prior.concentration.push_back(c * pi);
    return prior;
  }

  const double m = est.scalar_location();
  switch (est.family) {
    case PriorFamily::normal:
      return NormalPrior{m, s * s};
    case PriorFamily::uniform:
      return UniformPrior{m - s, m + s};
    case PriorFamily::beta: {
      if (!(m > 0.0 && m < 1.0))
        throw Error(ErrorKind::moment_matching_infeasible, "beta mean must lie in (0,1) for '" + est.feature + "'");
      const double nu = m * (1.0 - m) / (s * s) - 1.0;
      if (!(nu > 0.0))
        throw Error(ErrorKind::moment_matching_infeasible,
                    "beta spread too wide for mean " + std::to_string(m) + " on '" + est.feature + "'");
      return BetaPrior{m * nu, (1.0 - m) * nu};
    }
    case PriorFamily::gamma:
      if (!(m > 0.0))
        throw Error(ErrorKind::moment_matching_infeasible, "gamma mean must be > 0 for '" + est.feature + "'");
      return GammaPrior{(m / s) * (m / s), m / (s * s)};
    case PriorFamily::dirichlet:
      break;
  }
  throw Error(ErrorKind::precondition, "unsupported prior family");
}

namespace {

bool parameter_fits_feature(ParameterKind parameter, const FeatureProfile& fp) {
  switch (parameter) {
    case ParameterKind::mean: return fp.kind != FeatureKind::categorical;
    case ParameterKind::std_dev: return fp.kind == FeatureKind::numeric;
    case ParameterKind::rate: return fp.kind == FeatureKind::count;
    case ParameterKind::proportion:
      return fp.kind == FeatureKind::categorical && fp.categorical.counts.size() == 2;
    case ParameterKind::category_probabilities: return fp.kind == FeatureKind::categorical;
  }
  return false;
}

}  // namespace

ValidationReport validate_scenario(const ScenarioSpec& spec, const TrainingProfile& profile) {
  ValidationReport report;
  report.scenario_id = spec.id;
  auto flag = [&](std::string field, std::string message) {
    report.violations.push_back({std::move(field), std::move(message)});
  };

  if (spec.model != profile.model)
    flag("model", "scenario targets " + spec.model.key() + " but the profile is for " + profile.model.key());
  if (spec.estimates.empty()) flag("estimates", "no estimates");

  std::set<std::pair<std::string, ParameterKind>> seen;
  for (std::size_t i = 0; i < spec.estimates.size(); ++i) {
    const ParameterEstimate& est = spec.estimates[i];
    const std::string field = "estimates[" + std::to_string(i) + "]";
    const FeatureProfile* fp = profile.find(est.feature);
    if (!fp) {
      flag(field + ".feature", "unknown feature '" + est.feature + "'");
      continue;
    }
    if (!seen.insert({est.feature, est.parameter}).second)
      flag(field, "duplicate estimate for " + std::string(to_string(est.parameter)) + " of '" + est.feature + "'");
    if (!parameter_fits_feature(est.parameter, *fp)) {
      flag(field + ".parameter", std::string(to_string(est.parameter)) + " is not supported on " +
                                     std::string(to_string(fp->kind)) + " feature '" + est.feature + "'");
      continue;
    }
    const bool dirichlet_pair =
        (est.family == PriorFamily::dirichlet) == (est.parameter == ParameterKind::category_probabilities);
    if (!dirichlet_pair) {
      flag(field + ".family", "dirichlet priors pair exactly with category-probabilities");
      continue;
    }
    if (est.parameter == ParameterKind::std_dev && est.family != PriorFamily::normal &&
        est.family != PriorFamily::gamma) {
      flag(field + ".family", "std-dev estimates take a normal or gamma family (normal-unknown-variance path)");
      continue;
    }
    if (est.family == PriorFamily::dirichlet) {
      const auto& p = std::get<std::vector<double>>(est.location);
      if (p.size() != fp->categorical.counts.size()) {
        flag(field + ".location", "expected " + std::to_string(fp->categorical.counts.size()) +
                                      " probabilities (categories in lexicographic order)");
        continue;
      }
    }
    if (est.mode != EstimateMode::absolute && !training_statistic(profile, est.feature, est.parameter)) {
      flag(field + ".mode", "relative estimate without a training statistic for '" + est.feature + "'");
      continue;
    }
    try {
      build_prior(resolve_estimate(est, profile));
    } catch (const Error& e) {
      flag(field, e.detail());
    }
  }

  if (spec.subgroup) {
    for (std::size_t i = 0; i < spec.subgroup->all.size(); ++i) {
      const SubgroupClause& c = spec.subgroup->all[i];
      const std::string field = "subgroup.all[" + std::to_string(i) + "]";
      const FeatureProfile* fp = profile.find(c.feature);
      if (!fp) {
        flag(field + ".feature", "unknown feature '" + c.feature + "'");
        continue;
      }
      const bool numeric_feature = fp->kind != FeatureKind::categorical;
      const bool ordering = c.op == Comparator::less || c.op == Comparator::less_equal ||
                            c.op == Comparator::greater || c.op == Comparator::greater_equal;
      if (ordering && !numeric_feature) {
        flag(field + ".op", "ordering comparator on categorical feature '" + c.feature + "'");
        continue;
      }
      auto value_ok = [&](const FeatureValue& v) {
        return numeric_feature ? std::holds_alternative<double>(v) : std::holds_alternative<std::string>(v);
      };
      bool ok = true;
      if (const double* x = std::get_if<double>(&c.value))
        ok = value_ok(FeatureValue(*x));
      else if (const std::string* s = std::get_if<std::string>(&c.value))
        ok = value_ok(FeatureValue(*s));
      else
        for (const auto& v : std::get<std::vector<FeatureValue>>(c.value)) ok = ok && value_ok(v);
      if (!ok) flag(field + ".value", "value type does not match feature '" + c.feature + "'");
    }
  }
  return report;
}

ScenarioRegistry::ScenarioRegistry() : current_(std::make_shared<const std::vector<ScenarioSpec>>()) {}

ScenarioRegistry::Snapshot ScenarioRegistry::snapshot() const {
  std::lock_guard lock(mutex_);
  return current_;
}

void ScenarioRegistry::replace(std::vector<ScenarioSpec> specs) {
  std::set<std::string> ids;
  for (const auto& s : specs) {
    if (!ids.insert(s.id).second) throw Error(ErrorKind::schema_violation, "duplicate scenario id '" + s.id + "'");
    if (s.estimates.empty()) throw Error(ErrorKind::schema_violation, "scenario '" + s.id + "' has no estimates");
  }
  auto next = std::make_shared<const std::vector<ScenarioSpec>>(std::move(specs));
  std::lock_guard lock(mutex_);
  current_ = std::move(next);
}

std::vector<ScenarioSpec> ScenarioRegistry::for_model(const ModelRef& model) const {
  std::vector<ScenarioSpec> out;
  for (const auto& s : *snapshot())
    if (s.model == model) out.push_back(s);
  return out;
}

const ScenarioSpec* ScenarioRegistry::find(const Snapshot& snap, std::string_view id) const {
  for (const auto& s : *snap)
    if (s.id == id) return &s;
  return nullptr;
}

}  // namespace expmon
