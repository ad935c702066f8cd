#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "expmon/scenario.hpp"

namespace expmon {

// Sufficient statistics for a real-valued column: count, mean and the sum of
// squared deviations from the mean (two-pass).
struct GaussianSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  static GaussianSummary from(std::span<const double> xs);
  static GaussianSummary from_sums(std::size_t n, double sum, double sum_sq);
};

// Poisson data: count, total and sum of log(x!) (kept so the reported log
// marginal is a true log probability).
struct CountSummary {
  std::size_t n = 0;
  double sum = 0.0;
  double sum_log_factorial = 0.0;

  static CountSummary from(std::span<const double> xs);
};

// Every closed form below returns log P(D) with all data constants included
// (binomial/multinomial coefficients, sum log x!), and 0 for empty data.

double log_marginal_normal_known_var(std::size_t n, double sum, double sum_sq, double known_var,
                                     const NormalPrior& prior);
double log_marginal_normal_known_var(const GaussianSummary& data, double known_var, const NormalPrior& prior);

// Normal likelihood with unknown mean and variance under a
// normal-inverse-gamma prior.
double log_marginal_normal_inverse_gamma(const GaussianSummary& data, const NormalInverseGammaPrior& prior);

double log_marginal_beta_binomial(std::uint64_t k, std::uint64_t n, double alpha, double beta);

// Throws category-mismatch when the two vectors differ in length.
double log_marginal_dirichlet_multinomial(std::span<const std::uint64_t> counts,
                                          std::span<const double> concentrations);
// Keyed form: the key sets must be identical.
double log_marginal_dirichlet_multinomial(const std::map<std::string, std::uint64_t>& counts,
                                          const std::map<std::string, double>& concentrations);

// Data constant excluded here; see the CountSummary overload.
double log_marginal_gamma_poisson(double sum, std::size_t n, double shape, double rate);
double log_marginal_gamma_poisson(const CountSummary& data, const GammaPrior& prior);

// Conjugate posterior updates.
NormalPrior posterior(const NormalPrior& prior, const GaussianSummary& data, double known_var);
NormalInverseGammaPrior posterior(const NormalInverseGammaPrior& prior, const GaussianSummary& data);
BetaPrior posterior(const BetaPrior& prior, std::uint64_t k, std::uint64_t n);
GammaPrior posterior(const GammaPrior& prior, const CountSummary& data);
DirichletPrior posterior(const DirichletPrior& prior, std::span<const std::uint64_t> counts);

}  // namespace expmon
