#pragma once

#include <span>
#include <vector>

namespace expmon {

// log(sum exp(x_i)); -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> values);

// log((1/N) sum exp(x_i)).
double log_mean_exp(std::span<const double> values);

// Softmax in log space (max subtracted before exponentiation). Entries equal
// to -inf map to probability 0. Throws all-scores-minus-infinity when no
// entry is finite.
std::vector<double> posterior_normalize(std::span<const double> weighted_log_scores);

double log_binomial_coefficient(double n, double k);
double log_beta(double a, double b);

}  // namespace expmon
