#include "expmon/scenario.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>

#include "expmon/error.hpp"

namespace expmon {

std::string_view to_string(ParameterKind v) {
  switch (v) {
    case ParameterKind::mean: return "mean";
    case ParameterKind::std_dev: return "std-dev";
    case ParameterKind::proportion: return "proportion";
    case ParameterKind::rate: return "rate";
    case ParameterKind::category_probabilities: return "category-probabilities";
  }
  return "mean";
}

std::string_view to_string(PriorFamily v) {
  switch (v) {
    case PriorFamily::normal: return "normal";
    case PriorFamily::uniform: return "uniform";
    case PriorFamily::beta: return "beta";
    case PriorFamily::gamma: return "gamma";
    case PriorFamily::dirichlet: return "dirichlet";
  }
  return "normal";
}

std::string_view to_string(EstimateMode v) {
  switch (v) {
    case EstimateMode::absolute: return "absolute";
    case EstimateMode::relative_delta: return "relative-delta";
    case EstimateMode::relative_scale: return "relative-scale";
  }
  return "absolute";
}

std::string_view to_string(Level v) {
  switch (v) {
    case Level::low: return "low";
    case Level::moderate: return "moderate";
    case Level::high: return "high";
  }
  return "moderate";
}

std::string_view to_string(ActionKind v) {
  switch (v) {
    case ActionKind::notify_only: return "notify-only";
    case ActionKind::webhook: return "webhook";
    case ActionKind::model_swap_command: return "model-swap-command";
    case ActionKind::fallback_model: return "fallback-model";
  }
  return "notify-only";
}

std::string_view to_string(Comparator v) {
  switch (v) {
    case Comparator::less: return "<";
    case Comparator::less_equal: return "<=";
    case Comparator::greater: return ">";
    case Comparator::greater_equal: return ">=";
    case Comparator::equal: return "=";
    case Comparator::in_set: return "in";
  }
  return "=";
}

double ParameterEstimate::scalar_location() const {
  if (const double* x = std::get_if<double>(&location)) return *x;
  throw Error(ErrorKind::precondition, "estimate on '" + feature + "' has a vector location");
}

bool SubgroupClause::matches(const Observation& obs) const {
  auto it = obs.features.find(feature);
  if (it == obs.features.end()) return false;
  const FeatureValue& actual = it->second;

  if (op == Comparator::in_set) {
    const auto* set = std::get_if<std::vector<FeatureValue>>(&value);
    if (!set) return false;
    for (const auto& candidate : *set)
      if (candidate == actual) return true;
    return false;
  }
  if (op == Comparator::equal) {
    if (const double* x = std::get_if<double>(&value)) return actual == FeatureValue(*x);
    if (const std::string* s = std::get_if<std::string>(&value)) return actual == FeatureValue(*s);
    return false;
  }

  const double* lhs = std::get_if<double>(&actual);
  const double* rhs = std::get_if<double>(&value);
  if (!lhs || !rhs) return false;
  switch (op) {
    case Comparator::less: return *lhs < *rhs;
    case Comparator::less_equal: return *lhs <= *rhs;
    case Comparator::greater: return *lhs > *rhs;
    case Comparator::greater_equal: return *lhs >= *rhs;
    default: return false;
  }
}

bool SubgroupPredicate::matches(const Observation& obs) const {
  for (const auto& clause : all)
    if (!clause.matches(obs)) return false;
  return true;
}

PriorFamily family_of(const ParameterPrior& prior) {
  struct Visitor {
    PriorFamily operator()(const NormalPrior&) const { return PriorFamily::normal; }
    PriorFamily operator()(const UniformPrior&) const { return PriorFamily::uniform; }
    PriorFamily operator()(const BetaPrior&) const { return PriorFamily::beta; }
    PriorFamily operator()(const GammaPrior&) const { return PriorFamily::gamma; }
    PriorFamily operator()(const DirichletPrior&) const { return PriorFamily::dirichlet; }
    PriorFamily operator()(const NormalInverseGammaPrior&) const { return PriorFamily::normal; }
  };
  return std::visit(Visitor{}, prior);
}

double log_prior_density(const ParameterPrior& prior, double theta) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (const auto* p = std::get_if<NormalPrior>(&prior)) {
    double z = theta - p->mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * p->variance) - z * z / (2.0 * p->variance);
  }
  if (const auto* p = std::get_if<UniformPrior>(&prior)) {
    if (theta < p->lower || theta > p->upper) return kNegInf;
    return -std::log(p->upper - p->lower);
  }
  if (const auto* p = std::get_if<BetaPrior>(&prior)) {
    if (theta <= 0.0 || theta >= 1.0) return kNegInf;
    return (p->alpha - 1.0) * std::log(theta) + (p->beta - 1.0) * std::log1p(-theta) -
           (std::lgamma(p->alpha) + std::lgamma(p->beta) - std::lgamma(p->alpha + p->beta));
  }
  if (const auto* p = std::get_if<GammaPrior>(&prior)) {
    if (theta <= 0.0) return kNegInf;
    return p->shape * std::log(p->rate) - std::lgamma(p->shape) + (p->shape - 1.0) * std::log(theta) -
           p->rate * theta;
  }
  throw Error(ErrorKind::precondition, "multivariate prior has no scalar density");
}

double prior_weight(Level likelihood) {
  switch (likelihood) {
    case Level::low: return 1.0;
    case Level::moderate: return 2.0;
    case Level::high: return 3.0;
  }
  return 2.0;
}

bool is_valid_webhook_url(std::string_view url) {
  std::string_view rest;
  if (url.starts_with("http://"))
    rest = url.substr(7);
  else if (url.starts_with("https://"))
    rest = url.substr(8);
  else
    return false;
  std::string_view host = rest.substr(0, rest.find('/'));
  if (host.empty()) return false;
  for (char c : host) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == ':' ||
              c == '[' || c == ']' || c == '_';
    if (!ok) return false;
  }
  if (host.front() == ':') return false;
  auto colon = host.rfind(':');
  if (colon != std::string_view::npos && host.find(']') == std::string_view::npos) {
    std::string_view port = host.substr(colon + 1);
    if (port.empty() || port.size() > 5) return false;
    for (char c : port)
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace expmon
