#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "expmon/profile.hpp"
#include "expmon/window.hpp"

namespace expmon {

struct KsResult {
  double statistic = 0.0;  // sup |ECDF_a - ECDF_b|, in [0, 1]
  double p_value = 1.0;
};

// Limiting Kolmogorov survival function Q(lambda) = P(K > lambda).
double kolmogorov_survival(double lambda);

// Two-sample KS. D is exact (merge scan over the sorted samples); the p-value
// uses the asymptotic distribution at sqrt(n_e) * D, n_e = n_a n_b / (n_a + n_b).
// Throws sample-too-small when either sample has fewer than 2 points.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

struct ChiSquareResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t degrees_of_freedom = 0;
  bool skipped = false;  // fewer than two cells after pooling
};

// Pearson goodness-of-fit of the window counts against the training
// proportions. Cells with expected count < 5 pool into one "other" cell; if
// that cell is itself under 5 it merges into the smallest remaining cell.
ChiSquareResult chi_square_categorical(const std::map<std::string, std::uint64_t>& window_counts,
                                       const std::map<std::string, std::uint64_t>& training_counts);

// Step-up adjusted p-values, same order as the input.
std::vector<double> benjamini_hochberg(std::span<const double> p_values);
std::vector<double> bonferroni(std::span<const double> p_values);

enum class Correction { benjamini_hochberg, bonferroni };
enum class TestKind { ks, chi_square };
enum class DriftStatus { no_drift, drift, insufficient_window };

std::string_view to_string(TestKind v);
std::string_view to_string(DriftStatus v);
std::string_view to_string(Correction v);
Correction correction_from_string(std::string_view text);

struct DriftConfig {
  double alpha = 0.01;
  std::size_t min_window = 100;
  Correction correction = Correction::benjamini_hochberg;
};

struct FeatureTestResult {
  std::string feature;
  TestKind test = TestKind::ks;
  double statistic = 0.0;
  double p_value = 1.0;
  double p_adjusted = 1.0;
  bool drifted = false;
  bool skipped = false;
};

struct DriftAlert {
  ModelRef model;
  std::string window_id;
  std::int64_t timestamp_ms = 0;
  std::vector<FeatureTestResult> features;
  std::vector<std::string> drifted;
};

struct DriftReport {
  DriftStatus status = DriftStatus::no_drift;
  std::vector<FeatureTestResult> results;
  std::optional<DriftAlert> alert;  // set iff status == drift
};

// Tests every schema feature (and the prediction pseudo-feature when the
// profile tracks one) against the training reference.
DriftReport detect_drift(const WindowView& view, const TrainingProfile& profile, const DriftConfig& config);

nlohmann::json to_json(const DriftAlert& alert);

}  // namespace expmon
