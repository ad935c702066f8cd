#include "expmon/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "expmon/error.hpp"
#include "expmon/log_math.hpp"

namespace expmon {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

std::string_view to_string(LikelihoodFamily v) {
  switch (v) {
    case LikelihoodFamily::normal_known_variance: return "normal-known-variance";
    case LikelihoodFamily::normal_unknown_variance: return "normal-unknown-variance";
    case LikelihoodFamily::bernoulli: return "bernoulli";
    case LikelihoodFamily::categorical: return "categorical";
    case LikelihoodFamily::poisson: return "poisson";
  }
  return "normal-known-variance";
}

double log_likelihood(const DataSummary& data, LikelihoodFamily family, double theta, double known_variance) {
  switch (family) {
    case LikelihoodFamily::normal_known_variance: {
      const auto& g = std::get<GaussianSummary>(data);
      if (g.n == 0) return 0.0;
      const double n = static_cast<double>(g.n);
      const double d = g.mean - theta;
      return -0.5 * n * std::log(2.0 * std::numbers::pi * known_variance) - (g.m2 + n * d * d) / (2.0 * known_variance);
    }
    case LikelihoodFamily::bernoulli: {
      const auto& b = std::get<BinarySummary>(data);
      if (b.n == 0) return 0.0;
      if (!(theta > 0.0 && theta < 1.0)) return kNegInf;
      const double k = static_cast<double>(b.k);
      const double n = static_cast<double>(b.n);
      return log_binomial_coefficient(n, k) + k * std::log(theta) + (n - k) * std::log1p(-theta);
    }
    case LikelihoodFamily::poisson: {
      const auto& c = std::get<CountSummary>(data);
      if (c.n == 0) return 0.0;
      if (!(theta > 0.0)) return kNegInf;
      return c.sum * std::log(theta) - static_cast<double>(c.n) * theta - c.sum_log_factorial;
    }
    default:
      throw Error(ErrorKind::precondition,
                  "scalar likelihood not defined for " + std::string(to_string(family)));
  }
}

double log_likelihood(const CategoryCounts& data, std::span<const double> probabilities) {
  if (data.counts.size() != probabilities.size())
    throw Error(ErrorKind::category_mismatch, "counts and probabilities differ in length");
  double n = 0.0;
  double out = 0.0;
  for (std::size_t i = 0; i < data.counts.size(); ++i) {
    const double x = static_cast<double>(data.counts[i]);
    n += x;
    out -= std::lgamma(x + 1.0);
    if (x > 0.0) {
      if (!(probabilities[i] > 0.0)) return kNegInf;
      out += x * std::log(probabilities[i]);
    }
  }
  return out + std::lgamma(n + 1.0);
}

MonteCarloEstimate jackknife_log_mean(std::span<const double> log_weights) {
  MonteCarloEstimate est;
  est.n_samples = log_weights.size();
  double max = kNegInf;
  for (double l : log_weights) {
    if (l > kNegInf) ++est.finite_samples;
    max = std::max(max, l);
  }
  if (est.finite_samples == 0) {
    est.log_estimate = kNegInf;
    est.std_error = std::numeric_limits<double>::infinity();
    est.diagnostic = "all " + std::to_string(est.n_samples) + " prior draws gave zero likelihood";
    return est;
  }

  const std::size_t n = log_weights.size();
  std::vector<double> w(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(log_weights[i] - max);
    total += w[i];
  }
  est.log_estimate = max + std::log(total / static_cast<double>(n));
  if (n < 2) {
    est.std_error = std::numeric_limits<double>::infinity();
    return est;
  }

  // theta_(i) = log mean of the other n - 1 weights.
  std::vector<double> loo(n);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    double rest = total - w[i];
    if (rest < 1e-12 * total) {
      rest = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        if (k != i) rest += w[k];
    }
    loo[i] = rest > 0.0 ? max + std::log(rest / denom) : kNegInf;
  }
  double mean = 0.0;
  for (double v : loo) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  est.std_error = std::isfinite(mean) ? std::sqrt(denom / static_cast<double>(n) * ss)
                                      : std::numeric_limits<double>::infinity();
  return est;
}

MonteCarloEstimate log_marginal_monte_carlo(const DataSummary& data, LikelihoodFamily family,
                                            const ParameterPrior& prior, double known_variance,
                                            std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < kMinMonteCarloSamples)
    throw Error(ErrorKind::precondition, "at least " + std::to_string(kMinMonteCarloSamples) + " samples required");
  std::mt19937_64 rng(seed);
  std::vector<double> log_weights;
  log_weights.reserve(n_samples);

  if (family == LikelihoodFamily::categorical) {
    const auto* dir = std::get_if<DirichletPrior>(&prior);
    const auto* counts = std::get_if<CategoryCounts>(&data);
    if (!dir || !counts) throw Error(ErrorKind::precondition, "categorical likelihood needs a dirichlet prior");
    std::vector<std::gamma_distribution<double>> draws;
    for (double a : dir->concentration) draws.emplace_back(a, 1.0);
    std::vector<double> p(dir->concentration.size());
    for (std::size_t j = 0; j < n_samples; ++j) {
      double total = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] = draws[i](rng));
      for (double& pi : p) pi /= total;
      log_weights.push_back(log_likelihood(*counts, p));
    }
    return jackknife_log_mean(log_weights);
  }
  if (family == LikelihoodFamily::normal_unknown_variance)
    throw Error(ErrorKind::precondition, "normal-unknown-variance is evaluated in closed form only");

  auto evaluate = [&](double theta) { log_weights.push_back(log_likelihood(data, family, theta, known_variance)); };

  if (const auto* p = std::get_if<NormalPrior>(&prior)) {
    std::normal_distribution<double> draw(p->mean, std::sqrt(p->variance));
    for (std::size_t j = 0; j < n_samples; ++j) evaluate(draw(rng));
  } else if (const auto* p = std::get_if<UniformPrior>(&prior)) {
    std::uniform_real_distribution<double> draw(p->lower, p->upper);
    for (std::size_t j = 0; j < n_samples; ++j) evaluate(draw(rng));
  } else if (const auto* p = std::get_if<BetaPrior>(&prior)) {
    std::gamma_distribution<double> ga(p->alpha, 1.0);
    std::gamma_distribution<double> gb(p->beta, 1.0);
    for (std::size_t j = 0; j < n_samples; ++j) {
      const double x = ga(rng);
      const double y = gb(rng);
      evaluate(x / (x + y));
    }
  } else if (const auto* p = std::get_if<GammaPrior>(&prior)) {
    std::gamma_distribution<double> draw(p->shape, 1.0 / p->rate);
    for (std::size_t j = 0; j < n_samples; ++j) evaluate(draw(rng));
  } else {
    throw Error(ErrorKind::precondition, "prior family not supported by the Monte-Carlo estimator");
  }
  return jackknife_log_mean(log_weights);
}

}  // namespace expmon
