#include "expmon/marginal.hpp"

#include <cmath>
#include <numbers>

#include "expmon/error.hpp"
#include "expmon/log_math.hpp"

namespace expmon {

GaussianSummary GaussianSummary::from(std::span<const double> xs) {
  GaussianSummary s;
  s.n = xs.size();
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  for (double x : xs) s.m2 += (x - s.mean) * (x - s.mean);
  return s;
}

GaussianSummary GaussianSummary::from_sums(std::size_t n, double sum, double sum_sq) {
  GaussianSummary s;
  s.n = n;
  if (n == 0) return s;
  s.mean = sum / static_cast<double>(n);
  s.m2 = std::max(0.0, sum_sq - sum * s.mean);
  return s;
}

CountSummary CountSummary::from(std::span<const double> xs) {
  CountSummary s;
  s.n = xs.size();
  for (double x : xs) {
    s.sum += x;
    s.sum_log_factorial += std::lgamma(x + 1.0);
  }
  return s;
}

double log_marginal_normal_known_var(std::size_t n, double sum, double sum_sq, double known_var,
                                     const NormalPrior& prior) {
  return log_marginal_normal_known_var(GaussianSummary::from_sums(n, sum, sum_sq), known_var, prior);
}

double log_marginal_normal_known_var(const GaussianSummary& data, double known_var, const NormalPrior& prior) {
  if (data.n == 0) return 0.0;
  if (!(known_var > 0.0) || !(prior.variance > 0.0))
    throw Error(ErrorKind::precondition, "variances must be positive");
  const double n = static_cast<double>(data.n);
  const double total_var = known_var + n * prior.variance;
  const double d = data.mean - prior.mean;
  return -0.5 * n * std::log(2.0 * std::numbers::pi * known_var) - data.m2 / (2.0 * known_var) +
         0.5 * std::log(known_var / total_var) - n * d * d / (2.0 * total_var);
}

double log_marginal_normal_inverse_gamma(const GaussianSummary& data, const NormalInverseGammaPrior& prior) {
  if (data.n == 0) return 0.0;
  if (!(prior.kappa > 0.0 && prior.shape > 0.0 && prior.scale > 0.0))
    throw Error(ErrorKind::precondition, "normal-inverse-gamma hyperparameters must be positive");
  NormalInverseGammaPrior post = posterior(prior, data);
  const double n = static_cast<double>(data.n);
  return std::lgamma(post.shape) - std::lgamma(prior.shape) + prior.shape * std::log(prior.scale) -
         post.shape * std::log(post.scale) + 0.5 * (std::log(prior.kappa) - std::log(post.kappa)) -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

double log_marginal_beta_binomial(std::uint64_t k, std::uint64_t n, double alpha, double beta) {
  if (k > n) throw Error(ErrorKind::precondition, "k must not exceed n");
  if (n == 0) return 0.0;
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  return log_binomial_coefficient(nd, kd) + log_beta(kd + alpha, nd - kd + beta) - log_beta(alpha, beta);
}

double log_marginal_dirichlet_multinomial(std::span<const std::uint64_t> counts,
                                          std::span<const double> concentrations) {
  if (counts.size() != concentrations.size())
    throw Error(ErrorKind::category_mismatch, "counts and concentrations differ in length");
  double n = 0.0;
  double a = 0.0;
  double terms = 0.0;
  double log_coef = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double x = static_cast<double>(counts[i]);
    n += x;
    a += concentrations[i];
    log_coef -= std::lgamma(x + 1.0);
    terms += std::lgamma(x + concentrations[i]) - std::lgamma(concentrations[i]);
  }
  if (n == 0.0) return 0.0;
  log_coef += std::lgamma(n + 1.0);
  return log_coef + std::lgamma(a) - std::lgamma(n + a) + terms;
}

double log_marginal_dirichlet_multinomial(const std::map<std::string, std::uint64_t>& counts,
                                          const std::map<std::string, double>& concentrations) {
  std::vector<std::uint64_t> x;
  std::vector<double> alpha;
  for (const auto& [category, c] : concentrations) {
    auto it = counts.find(category);
    if (it == counts.end()) throw Error(ErrorKind::category_mismatch, "no count for category '" + category + "'");
    x.push_back(it->second);
    alpha.push_back(c);
  }
  if (counts.size() != concentrations.size())
    throw Error(ErrorKind::category_mismatch, "count categories not covered by the prior");
  return log_marginal_dirichlet_multinomial(x, alpha);
}

double log_marginal_gamma_poisson(double sum, std::size_t n, double shape, double rate) {
  if (n == 0) return 0.0;
  const double nd = static_cast<double>(n);
  return shape * std::log(rate) - std::lgamma(shape) + std::lgamma(shape + sum) - (shape + sum) * std::log(rate + nd);
}

double log_marginal_gamma_poisson(const CountSummary& data, const GammaPrior& prior) {
  if (data.n == 0) return 0.0;
  return log_marginal_gamma_poisson(data.sum, data.n, prior.shape, prior.rate) - data.sum_log_factorial;
}

NormalPrior posterior(const NormalPrior& prior, const GaussianSummary& data, double known_var) {
  const double n = static_cast<double>(data.n);
  const double precision = 1.0 / prior.variance + n / known_var;
  const double mean = (prior.mean / prior.variance + n * data.mean / known_var) / precision;
  return {mean, 1.0 / precision};
}

NormalInverseGammaPrior posterior(const NormalInverseGammaPrior& prior, const GaussianSummary& data) {
  const double n = static_cast<double>(data.n);
  NormalInverseGammaPrior post;
  post.kappa = prior.kappa + n;
  post.mean = (prior.kappa * prior.mean + n * data.mean) / post.kappa;
  post.shape = prior.shape + 0.5 * n;
  const double d = data.mean - prior.mean;
  post.scale = prior.scale + 0.5 * data.m2 + prior.kappa * n * d * d / (2.0 * post.kappa);
  return post;
}

BetaPrior posterior(const BetaPrior& prior, std::uint64_t k, std::uint64_t n) {
  return {prior.alpha + static_cast<double>(k), prior.beta + static_cast<double>(n - k)};
}

GammaPrior posterior(const GammaPrior& prior, const CountSummary& data) {
  return {prior.shape + data.sum, prior.rate + static_cast<double>(data.n)};
}

DirichletPrior posterior(const DirichletPrior& prior, std::span<const std::uint64_t> counts) {
  if (counts.size() != prior.concentration.size())
    throw Error(ErrorKind::category_mismatch, "counts and concentrations differ in length");
  DirichletPrior post = prior;
  for (std::size_t i = 0; i < counts.size(); ++i) post.concentration[i] += static_cast<double>(counts[i]);
  return post;
}

}  // namespace expmon
