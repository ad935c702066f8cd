#include "expmon/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "expmon/error.hpp"
#include "expmon/log_math.hpp"
#include "expmon/registry.hpp"

namespace expmon {

using nlohmann::json;

bool FeatureLikelihoodModel::conjugate() const {
  switch (likelihood) {
    case LikelihoodFamily::normal_known_variance: return std::holds_alternative<NormalPrior>(prior);
    case LikelihoodFamily::normal_unknown_variance: return std::holds_alternative<NormalInverseGammaPrior>(prior);
    case LikelihoodFamily::bernoulli: return std::holds_alternative<BetaPrior>(prior);
    case LikelihoodFamily::categorical: return std::holds_alternative<DirichletPrior>(prior);
    case LikelihoodFamily::poisson: return std::holds_alternative<GammaPrior>(prior);
  }
  return false;
}

const FeatureLikelihoodModel* ReferenceModel::find(std::string_view feature) const {
  auto it = std::find_if(features.begin(), features.end(),
                         [&](const FeatureLikelihoodModel& f) { return f.feature == feature; });
  return it == features.end() ? nullptr : &*it;
}

namespace {

double variance_floor(double mean) {
  const double floor = 1e-9 * mean * mean;
  return floor > 0.0 ? floor : 1e-9;
}

// Mean and variance of a scalar prior, used when a mean estimate has to be
// folded into a normal-inverse-gamma prior.
std::pair<double, double> prior_moments(const ParameterPrior& prior) {
  if (const auto* p = std::get_if<NormalPrior>(&prior)) return {p->mean, p->variance};
  if (const auto* p = std::get_if<UniformPrior>(&prior)) {
    const double w = p->upper - p->lower;
    return {0.5 * (p->lower + p->upper), w * w / 12.0};
  }
  if (const auto* p = std::get_if<BetaPrior>(&prior)) {
    const double s = p->alpha + p->beta;
    return {p->alpha / s, p->alpha * p->beta / (s * s * (s + 1.0))};
  }
  if (const auto* p = std::get_if<GammaPrior>(&prior)) return {p->shape / p->rate, p->shape / (p->rate * p->rate)};
  throw Error(ErrorKind::precondition, "prior has no scalar moments");
}

}  // namespace

ReferenceModel build_reference_model(const TrainingProfile& profile, double pseudo_count) {
  ReferenceModel ref;
  ref.model = profile.model;
  for (const auto& fp : profile.features) {
    FeatureLikelihoodModel m;
    m.feature = fp.name;
    if (fp.kind == FeatureKind::categorical) {
      m.likelihood = LikelihoodFamily::categorical;
      DirichletPrior prior;
      const double total = static_cast<double>(fp.categorical.total());
      for (const auto& [category, count] : fp.categorical.counts) {
        m.categories.push_back(category);
        prior.concentration.push_back(pseudo_count * static_cast<double>(count) / total);
      }
      m.prior = std::move(prior);
    } else {
      const NumericSummary& s = fp.numeric;
      double variance = s.variance;
      if (!(variance > 0.0)) {
        variance = variance_floor(s.mean);
        ref.flags.push_back("zero-variance-feature: " + fp.name);
      }
      const double mean_variance = variance / static_cast<double>(std::max<std::size_t>(s.n, 1));
      if (fp.kind == FeatureKind::numeric) {
        m.likelihood = LikelihoodFamily::normal_known_variance;
        m.known_variance = variance;
        m.prior = NormalPrior{s.mean, mean_variance};
      } else {
        m.likelihood = LikelihoodFamily::poisson;
        if (s.mean > 0.0) {
          m.prior = GammaPrior{s.mean * s.mean / mean_variance, s.mean / mean_variance};
        } else {
          m.prior = GammaPrior{1.0, static_cast<double>(std::max<std::size_t>(s.n, 1))};
          ref.flags.push_back("zero-mean-count-feature: " + fp.name);
        }
      }
    }
    ref.features.push_back(std::move(m));
  }
  return ref;
}

ScenarioModel build_scenario_model(const ScenarioSpec& spec, const TrainingProfile& profile,
                                   const ReferenceModel& reference) {
  ScenarioModel out;
  out.scenario_id = spec.id;
  out.features = reference.features;
  out.subgroup = spec.subgroup;
  out.prior_weight = prior_weight(spec.understanding.likelihood);

  std::map<std::string, std::map<ParameterKind, ParameterEstimate>> by_feature;
  for (const auto& est : spec.estimates) by_feature[est.feature][est.parameter] = resolve_estimate(est, profile);

  for (const auto& [feature, estimates] : by_feature) {
    const FeatureProfile* fp = profile.find(feature);
    auto slot = std::find_if(out.features.begin(), out.features.end(),
                             [&](const FeatureLikelihoodModel& f) { return f.feature == feature; });
    if (!fp || slot == out.features.end())
      throw Error(ErrorKind::precondition, "scenario '" + spec.id + "' estimates unknown feature '" + feature + "'");
    FeatureLikelihoodModel& m = *slot;
    auto has = [&](ParameterKind k) { return estimates.count(k) > 0; };

    if (fp->kind == FeatureKind::numeric && has(ParameterKind::std_dev)) {
      // Inverse-gamma on sigma^2 matched to E[sigma^2] and Var[sigma^2] of a
      // sigma with the estimate's mean L and sd S.
      const ParameterEstimate& sd = estimates.at(ParameterKind::std_dev);
      const double L = sd.scalar_location();
      const double S = sd.spread;
      if (!(L > 0.0))
        throw Error(ErrorKind::moment_matching_infeasible, "std-dev location must be > 0 on '" + feature + "'");
      const double mean_var = L * L + S * S;
      const double var_var = 4.0 * L * L * S * S + 2.0 * S * S * S * S;
      NormalInverseGammaPrior nig;
      nig.shape = 2.0 + mean_var * mean_var / var_var;
      nig.scale = mean_var * (nig.shape - 1.0);
      double mu_var = 0.0;
      if (has(ParameterKind::mean)) {
        auto [mu, v] = prior_moments(build_prior(estimates.at(ParameterKind::mean)));
        nig.mean = mu;
        mu_var = v;
      } else {
        nig.mean = fp->numeric.mean;
        mu_var = std::get<NormalPrior>(m.prior).variance;
      }
      nig.kappa = mean_var / mu_var;
      m.likelihood = LikelihoodFamily::normal_unknown_variance;
      m.prior = nig;
    } else if (fp->kind == FeatureKind::numeric && has(ParameterKind::mean)) {
      m.prior = build_prior(estimates.at(ParameterKind::mean));
    } else if (fp->kind == FeatureKind::count && (has(ParameterKind::rate) || has(ParameterKind::mean))) {
      m.prior = build_prior(estimates.at(has(ParameterKind::rate) ? ParameterKind::rate : ParameterKind::mean));
    } else if (fp->kind == FeatureKind::categorical && has(ParameterKind::category_probabilities)) {
      m.prior = build_prior(estimates.at(ParameterKind::category_probabilities));
      if (std::get<DirichletPrior>(m.prior).concentration.size() != m.categories.size())
        throw Error(ErrorKind::category_mismatch, "dirichlet estimate on '" + feature + "' has the wrong arity");
    } else if (fp->kind == FeatureKind::categorical && has(ParameterKind::proportion) && m.categories.size() == 2) {
      m.likelihood = LikelihoodFamily::bernoulli;
      m.prior = build_prior(estimates.at(ParameterKind::proportion));
    } else {
      throw Error(ErrorKind::precondition,
                  "scenario '" + spec.id + "': unsupported estimate combination on '" + feature + "'");
    }
    out.affected.push_back(feature);
  }
  return out;
}

ScenarioModel reference_as_scenario(const ReferenceModel& reference, std::string id) {
  ScenarioModel s;
  s.scenario_id = std::move(id);
  s.features = reference.features;
  for (const auto& f : reference.features) s.affected.push_back(f.feature);
  return s;
}

std::string_view to_string(AssessmentStatus v) {
  return v == AssessmentStatus::ok ? "ok" : "insufficient-data";
}

FeatureMarginal feature_log_marginal(const FeatureLikelihoodModel& model, const WindowView& view,
                                     std::size_t mc_samples, std::uint64_t seed) {
  FeatureMarginal out;
  DataSummary data;
  switch (model.likelihood) {
    case LikelihoodFamily::normal_known_variance:
    case LikelihoodFamily::normal_unknown_variance:
      data = GaussianSummary::from(view.numeric_column(model.feature));
      break;
    case LikelihoodFamily::poisson:
      data = CountSummary::from(view.numeric_column(model.feature));
      break;
    case LikelihoodFamily::bernoulli:
    case LikelihoodFamily::categorical: {
      // Categories never seen in training are left to the chi-square drift
      // test; every model of a feature sees the same filtered counts.
      auto counts = view.category_counts(model.feature);
      CategoryCounts aligned;
      for (const auto& c : model.categories) {
        auto it = counts.find(c);
        aligned.counts.push_back(it == counts.end() ? 0 : it->second);
      }
      if (model.likelihood == LikelihoodFamily::bernoulli)
        data = BinarySummary{aligned.counts.at(0), aligned.counts.at(0) + aligned.counts.at(1)};
      else
        data = std::move(aligned);
      break;
    }
  }

  if (!model.conjugate()) {
    MonteCarloEstimate mc =
        log_marginal_monte_carlo(data, model.likelihood, model.prior, model.known_variance, mc_samples, seed);
    out.log_ml = mc.log_estimate;
    out.monte_carlo = true;
    out.std_error = mc.std_error;
    return out;
  }

  switch (model.likelihood) {
    case LikelihoodFamily::normal_known_variance:
      out.log_ml = log_marginal_normal_known_var(std::get<GaussianSummary>(data), model.known_variance,
                                                 std::get<NormalPrior>(model.prior));
      break;
    case LikelihoodFamily::normal_unknown_variance:
      out.log_ml = log_marginal_normal_inverse_gamma(std::get<GaussianSummary>(data),
                                                     std::get<NormalInverseGammaPrior>(model.prior));
      break;
    case LikelihoodFamily::poisson:
      out.log_ml = log_marginal_gamma_poisson(std::get<CountSummary>(data), std::get<GammaPrior>(model.prior));
      break;
    case LikelihoodFamily::bernoulli: {
      const auto& b = std::get<BinarySummary>(data);
      const auto& p = std::get<BetaPrior>(model.prior);
      out.log_ml = log_marginal_beta_binomial(b.k, b.n, p.alpha, p.beta);
      break;
    }
    case LikelihoodFamily::categorical:
      out.log_ml = log_marginal_dirichlet_multinomial(std::get<CategoryCounts>(data).counts,
                                                      std::get<DirichletPrior>(model.prior).concentration);
      break;
  }
  return out;
}

Evaluation evaluate_scenarios(const WindowView& view, std::span<const ScenarioModel> scenarios,
                              const ReferenceModel& reference, const EngineConfig& config) {
  if (scenarios.empty()) throw Error(ErrorKind::no_scenarios, "no scenarios for " + view.model().key());
  if (view.fill() < config.min_window)
    throw Error(ErrorKind::precondition, "window fill " + std::to_string(view.fill()) + " below minimum " +
                                             std::to_string(config.min_window));

  Evaluation ev;
  ev.model = view.model();
  ev.window_id = view.id();
  ev.timestamp_ms = view.rows().back().timestamp_ms;

  // Reference models are always closed form, so no seed is consumed here.
  std::vector<double> reference_full;
  for (const auto& f : reference.features) {
    reference_full.push_back(feature_log_marginal(f, view, config.mc_samples, config.seed).log_ml);
    ev.reference_log_ml += reference_full.back();
  }

  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const ScenarioModel& scenario = scenarios[s];
    if (scenario.features.size() != reference.features.size())
      throw Error(ErrorKind::precondition, "scenario '" + scenario.scenario_id + "' does not cover the feature set");

    ScenarioAssessment a;
    a.scenario_id = scenario.scenario_id;
    a.prior_weight = scenario.prior_weight;

    WindowView subgroup = view;
    WindowView complement(view.model(), view.end_sequence(), {});
    if (scenario.subgroup && !scenario.subgroup->all.empty()) {
      std::vector<Observation> in;
      std::vector<Observation> out;
      for (const auto& row : view.rows()) (scenario.subgroup->matches(row) ? in : out).push_back(row);
      subgroup = WindowView(view.model(), view.end_sequence(), std::move(in));
      complement = WindowView(view.model(), view.end_sequence(), std::move(out));
    }
    a.subgroup_rows = subgroup.fill();
    if (a.subgroup_rows < config.min_subgroup_rows) {
      a.status = AssessmentStatus::insufficient_data;
      a.log_ml = a.reference_log_ml = a.log_bf = std::numeric_limits<double>::quiet_NaN();
      ev.assessments.push_back(std::move(a));
      continue;
    }

    double mc_var = 0.0;
    for (std::size_t f = 0; f < reference.features.size(); ++f) {
      const FeatureLikelihoodModel& ref = reference.features[f];
      const FeatureLikelihoodModel& mine = scenario.features[f];
      if (mine.feature != ref.feature)
        throw Error(ErrorKind::precondition, "scenario '" + scenario.scenario_id + "' feature order differs");
      FeatureContribution c;
      c.feature = ref.feature;
      c.affected = std::find(scenario.affected.begin(), scenario.affected.end(), ref.feature) != scenario.affected.end();
      if (!c.affected) {
        c.log_ml = c.reference_log_ml = reference_full[f];
      } else {
        const std::uint64_t seed = config.seed + 1000003ULL * (s + 1) + f;
        FeatureMarginal scen = feature_log_marginal(mine, subgroup, config.mc_samples, seed);
        const double ref_sub = feature_log_marginal(ref, subgroup, config.mc_samples, seed).log_ml;
        const double ref_rest =
            complement.fill() > 0 ? feature_log_marginal(ref, complement, config.mc_samples, seed).log_ml : 0.0;
        c.log_ml = scen.log_ml + ref_rest;
        c.reference_log_ml = ref_sub + ref_rest;
        c.monte_carlo = scen.monte_carlo;
        c.mc_std_error = scen.std_error;
        mc_var += scen.std_error * scen.std_error;
      }
      a.log_ml += c.log_ml;
      a.reference_log_ml += c.reference_log_ml;
      a.per_feature.push_back(std::move(c));
    }
    a.log_bf = a.log_ml - a.reference_log_ml;
    a.mc_std_error = std::sqrt(mc_var);
    ev.assessments.push_back(std::move(a));
  }

  // Posterior over {reference} and every ok scenario.
  std::vector<double> scores = {std::log(config.reference_weight) + ev.reference_log_ml};
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < ev.assessments.size(); ++i) {
    const auto& a = ev.assessments[i];
    if (a.status != AssessmentStatus::ok) continue;
    scores.push_back(std::log(a.prior_weight) + a.log_ml);
    index.push_back(i);
  }
  std::vector<double> post = posterior_normalize(scores);
  ev.reference_posterior = post[0];
  for (std::size_t k = 0; k < index.size(); ++k) ev.assessments[index[k]].posterior = post[k + 1];
  return ev;
}

json json_number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "NaN";
  return x > 0 ? "Infinity" : "-Infinity";
}

double number_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "Infinity") return std::numeric_limits<double>::infinity();
    if (s == "-Infinity") return -std::numeric_limits<double>::infinity();
    if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  }
  throw Error(ErrorKind::schema_violation, "expected a number");
}

json to_json(const Evaluation& ev) {
  json assessments = json::array();
  for (const auto& a : ev.assessments) {
    json per_feature = json::array();
    for (const auto& c : a.per_feature) {
      per_feature.push_back({{"feature", c.feature},
                             {"affected", c.affected},
                             {"log_ml", json_number(c.log_ml)},
                             {"reference_log_ml", json_number(c.reference_log_ml)},
                             {"monte_carlo", c.monte_carlo},
                             {"mc_std_error", json_number(c.mc_std_error)}});
    }
    assessments.push_back({{"scenario_id", a.scenario_id},
                           {"log_ml", json_number(a.log_ml)},
                           {"log_bf", json_number(a.log_bf)},
                           {"posterior", json_number(a.posterior)},
                           {"status", std::string(to_string(a.status))},
                           {"prior_weight", a.prior_weight},
                           {"reference_log_ml", json_number(a.reference_log_ml)},
                           {"subgroup_rows", a.subgroup_rows},
                           {"mc_std_error", json_number(a.mc_std_error)},
                           {"per_feature", per_feature}});
  }
  return {{"model", ev.model.name},
          {"version", ev.model.version},
          {"window_id", ev.window_id},
          {"ts", ev.timestamp_ms},
          {"assessments", assessments},
          {"reference_log_ml", json_number(ev.reference_log_ml)},
          {"reference_posterior", json_number(ev.reference_posterior)}};
}

Evaluation evaluation_from_json(const json& j) {
  Evaluation ev;
  try {
    ev.model = {j.at("model").get<std::string>(), j.at("version").get<std::string>()};
    ev.window_id = j.at("window_id").get<std::string>();
    ev.timestamp_ms = j.at("ts").get<std::int64_t>();
    ev.reference_log_ml = number_from_json(j.at("reference_log_ml"));
    ev.reference_posterior = number_from_json(j.at("reference_posterior"));
    for (const auto& aj : j.at("assessments")) {
      ScenarioAssessment a;
      a.scenario_id = aj.at("scenario_id").get<std::string>();
      a.log_ml = number_from_json(aj.at("log_ml"));
      a.log_bf = number_from_json(aj.at("log_bf"));
      a.posterior = number_from_json(aj.at("posterior"));
      a.status = aj.at("status").get<std::string>() == "ok" ? AssessmentStatus::ok : AssessmentStatus::insufficient_data;
      a.prior_weight = aj.at("prior_weight").get<double>();
      a.reference_log_ml = number_from_json(aj.at("reference_log_ml"));
      a.subgroup_rows = aj.at("subgroup_rows").get<std::size_t>();
      a.mc_std_error = number_from_json(aj.at("mc_std_error"));
      for (const auto& cj : aj.at("per_feature")) {
        FeatureContribution c;
        c.feature = cj.at("feature").get<std::string>();
        c.affected = cj.at("affected").get<bool>();
        c.log_ml = number_from_json(cj.at("log_ml"));
        c.reference_log_ml = number_from_json(cj.at("reference_log_ml"));
        c.monte_carlo = cj.at("monte_carlo").get<bool>();
        c.mc_std_error = number_from_json(cj.at("mc_std_error"));
        a.per_feature.push_back(std::move(c));
      }
      ev.assessments.push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema_violation, std::string("assessment record: ") + e.what());
  }
  return ev;
}

}  // namespace expmon
