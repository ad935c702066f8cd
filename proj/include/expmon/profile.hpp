#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "expmon/observation.hpp"

namespace expmon {

inline constexpr std::size_t kDefaultReservoirSize = 2000;

// Sample moments plus a seeded reservoir used as the KS reference sample.
struct NumericSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased (n - 1) sample variance; 0 when n == 1
  std::vector<double> reservoir;
};

// Categories are kept in lexicographic order; that order is the one used by
// vector-valued (dirichlet) estimates.
struct CategoricalSummary {
  std::map<std::string, std::uint64_t> counts;

  std::uint64_t total() const;
  double proportion(const std::string& category) const;
  std::vector<std::string> categories() const;
};

struct FeatureProfile {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  NumericSummary numeric;          // numeric and count features
  CategoricalSummary categorical;  // categorical features
};

struct TrainingProfile {
  ModelRef model;
  std::size_t reservoir_capacity = kDefaultReservoirSize;
  std::vector<FeatureProfile> features;
  std::optional<NumericSummary> prediction;

  const FeatureProfile* find(std::string_view name) const;
  FeatureSchema schema() const;
};

TrainingProfile fit_training_profile(std::span<const Observation> dataset, const FeatureSchema& schema,
                                     std::size_t reservoir_size, std::uint64_t seed);

nlohmann::json to_json(const TrainingProfile& profile);
TrainingProfile profile_from_json(const nlohmann::json& j);

}  // namespace expmon
