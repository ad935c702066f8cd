#include "expmon/log_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "expmon/error.hpp"

namespace expmon {

double log_sum_exp(std::span<const double> values) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  double max = kNegInf;
  for (double v : values) max = std::max(max, v);
  if (max == kNegInf) return kNegInf;
  if (std::isinf(max)) return max;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max);
  return max + std::log(sum);
}

double log_mean_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  return log_sum_exp(values) - std::log(static_cast<double>(values.size()));
}

std::vector<double> posterior_normalize(std::span<const double> weighted_log_scores) {
  double max = -std::numeric_limits<double>::infinity();
  for (double v : weighted_log_scores)
    if (!std::isnan(v)) max = std::max(max, v);
  if (!std::isfinite(max))
    throw Error(ErrorKind::all_scores_minus_infinity, "no finite score to normalize");

  std::vector<double> out;
  out.reserve(weighted_log_scores.size());
  double sum = 0.0;
  for (double v : weighted_log_scores) {
    double w = std::isnan(v) ? 0.0 : std::exp(v - max);
    out.push_back(w);
    sum += w;
  }
  for (double& p : out) p /= sum;
  return out;
}

double log_binomial_coefficient(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

}  // namespace expmon
