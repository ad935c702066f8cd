#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "expmon/marginal.hpp"
#include "expmon/scenario.hpp"

namespace expmon {

enum class LikelihoodFamily { normal_known_variance, normal_unknown_variance, bernoulli, categorical, poisson };

std::string_view to_string(LikelihoodFamily v);

// Binary data summarized as k successes in n trials.
struct BinarySummary {
  std::uint64_t k = 0;
  std::uint64_t n = 0;
};

// Category counts aligned with a model's category list.
struct CategoryCounts {
  std::vector<std::uint64_t> counts;
};

using DataSummary = std::variant<GaussianSummary, BinarySummary, CountSummary, CategoryCounts>;

// log P(D | theta) for a scalar parameter (mean, proportion or rate), with
// the same data constants as the closed forms. -inf outside the support.
double log_likelihood(const DataSummary& data, LikelihoodFamily family, double theta, double known_variance);
// Categorical likelihood at a probability vector.
double log_likelihood(const CategoryCounts& data, std::span<const double> probabilities);

struct MonteCarloEstimate {
  double log_estimate = 0.0;
  double std_error = 0.0;  // jackknife standard error of log_estimate
  std::size_t n_samples = 0;
  std::size_t finite_samples = 0;
  std::string diagnostic;  // non-empty when every draw underflowed
};

inline constexpr std::size_t kMinMonteCarloSamples = 1000;

// Prior-predictive estimator: theta_j ~ prior, log mean_j P(D | theta_j).
// Supports every scalar prior with the normal-known-variance, bernoulli and
// poisson likelihoods, and dirichlet with categorical. Reproducible from
// `seed`.
MonteCarloEstimate log_marginal_monte_carlo(const DataSummary& data, LikelihoodFamily family,
                                            const ParameterPrior& prior, double known_variance,
                                            std::size_t n_samples, std::uint64_t seed);

// Leave-one-out jackknife of log mean exp(log_weights). Exposed for tests.
MonteCarloEstimate jackknife_log_mean(std::span<const double> log_weights);

}  // namespace expmon
