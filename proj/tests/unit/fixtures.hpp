#pragma once

#include <string>

#include <json.hpp>

#include "expmon/profile.hpp"
#include "expmon/sim.hpp"

namespace fixtures {

// Churn profile fitted once from 10 000 generator rows.
inline const expmon::TrainingProfile& churn_profile() {
  static const expmon::TrainingProfile profile = [] {
    auto gen = expmon::default_churn_config();
    auto rows = expmon::generate_training_data(gen, 11);
    return expmon::fit_training_profile(rows, expmon::schema_of(gen), expmon::kDefaultReservoirSize, 3);
  }();
  return profile;
}

inline nlohmann::json estimate(const std::string& feature, const std::string& parameter, const std::string& family,
                               nlohmann::json location, double spread) {
  return {{"feature", feature}, {"parameter", parameter}, {"family", family}, {"location", location},
          {"spread", spread}};
}

inline nlohmann::json scenario(const std::string& id, nlohmann::json estimates) {
  return {{"id", id},
          {"model", {{"name", "churn"}, {"version", "v1"}}},
          {"description", "test scenario " + id},
          {"estimates", estimates},
          {"understanding",
           {{"severity", "high"}, {"transition_speed", "low"}, {"duration", "moderate"}, {"recurrence", "low"}}}};
}

inline nlohmann::json document(std::initializer_list<nlohmann::json> scenarios) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : scenarios) list.push_back(s);
  return {{"scenarios", list}};
}

}  // namespace fixtures
