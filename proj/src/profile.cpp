#include "expmon/profile.hpp"

#include <algorithm>
#include <random>

#include "expmon/error.hpp"

namespace expmon {

using nlohmann::json;

std::uint64_t CategoricalSummary::total() const {
  std::uint64_t sum = 0;
  for (const auto& [category, count] : counts) sum += count;
  return sum;
}

double CategoricalSummary::proportion(const std::string& category) const {
  auto it = counts.find(category);
  std::uint64_t all = total();
  if (it == counts.end() || all == 0) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(all);
}

std::vector<std::string> CategoricalSummary::categories() const {
  std::vector<std::string> out;
  for (const auto& [category, count] : counts) out.push_back(category);
  return out;
}

const FeatureProfile* TrainingProfile::find(std::string_view name) const {
  auto it = std::find_if(features.begin(), features.end(),
                         [&](const FeatureProfile& f) { return f.name == name; });
  return it == features.end() ? nullptr : &*it;
}

FeatureSchema TrainingProfile::schema() const {
  FeatureSchema schema;
  for (const auto& f : features) schema.features.push_back({f.name, f.kind});
  schema.has_prediction = prediction.has_value();
  return schema;
}

namespace {

// Two-pass moments in plain forward summation order.
NumericSummary summarize(const std::vector<double>& values, std::size_t reservoir_size,
                         std::mt19937_64& rng) {
  NumericSummary s;
  s.n = values.size();
  double sum = 0.0;
  for (double x : values) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : values) ss += (x - s.mean) * (x - s.mean);
    s.variance = ss / static_cast<double>(s.n - 1);
  }

  // Algorithm R.
  std::size_t capacity = std::min(reservoir_size, values.size());
  s.reservoir.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(capacity));
  for (std::size_t i = capacity; i < values.size() && capacity > 0; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::size_t j = pick(rng);
    if (j < capacity) s.reservoir[j] = values[i];
  }
  return s;
}

json to_json(const NumericSummary& s) {
  return {{"n", s.n}, {"mean", s.mean}, {"variance", s.variance}, {"reservoir", s.reservoir}};
}

NumericSummary numeric_from_json(const json& j) {
  NumericSummary s;
  s.n = j.at("n").get<std::size_t>();
  s.mean = j.at("mean").get<double>();
  s.variance = j.at("variance").get<double>();
  s.reservoir = j.at("reservoir").get<std::vector<double>>();
  if (s.variance < 0.0) throw Error(ErrorKind::schema_violation, "negative variance in profile");
  if (s.reservoir.size() > s.n) throw Error(ErrorKind::schema_violation, "reservoir larger than n");
  return s;
}

}  // namespace

TrainingProfile fit_training_profile(std::span<const Observation> dataset, const FeatureSchema& schema,
                                     std::size_t reservoir_size, std::uint64_t seed) {
  if (dataset.empty()) throw Error(ErrorKind::empty_dataset, "training dataset has no rows");
  for (const auto& row : dataset) schema.check(row);

  TrainingProfile profile;
  profile.model = dataset.front().model;
  profile.reservoir_capacity = reservoir_size;
  // One generator walked feature by feature keeps the whole profile a pure
  // function of (dataset, schema, reservoir_size, seed).
  std::mt19937_64 rng(seed);

  for (const auto& spec : schema.features) {
    FeatureProfile fp;
    fp.name = spec.name;
    fp.kind = spec.kind;
    if (spec.kind == FeatureKind::categorical) {
      for (const auto& row : dataset) ++fp.categorical.counts[std::get<std::string>(row.features.at(spec.name))];
    } else {
      std::vector<double> column;
      column.reserve(dataset.size());
      for (const auto& row : dataset) column.push_back(std::get<double>(row.features.at(spec.name)));
      fp.numeric = summarize(column, reservoir_size, rng);
    }
    profile.features.push_back(std::move(fp));
  }
  if (schema.has_prediction) {
    std::vector<double> column;
    column.reserve(dataset.size());
    for (const auto& row : dataset) column.push_back(*row.prediction);
    profile.prediction = summarize(column, reservoir_size, rng);
  }
  return profile;
}

json to_json(const TrainingProfile& profile) {
  json features = json::array();
  for (const auto& f : profile.features) {
    json entry = {{"name", f.name}, {"kind", std::string(to_string(f.kind))}};
    if (f.kind == FeatureKind::categorical) {
      json counts = json::object();
      for (const auto& [category, count] : f.categorical.counts) counts[category] = count;
      entry["counts"] = counts;
    } else {
      entry["summary"] = to_json(f.numeric);
    }
    features.push_back(entry);
  }
  json j = {{"model", {{"name", profile.model.name}, {"version", profile.model.version}}},
            {"reservoir_capacity", profile.reservoir_capacity},
            {"features", features}};
  if (profile.prediction) j["prediction"] = to_json(*profile.prediction);
  return j;
}

TrainingProfile profile_from_json(const json& j) {
  TrainingProfile profile;
  try {
    profile.model.name = j.at("model").at("name").get<std::string>();
    profile.model.version = j.at("model").at("version").get<std::string>();
    profile.reservoir_capacity = j.value("reservoir_capacity", kDefaultReservoirSize);
    for (const auto& entry : j.at("features")) {
      FeatureProfile f;
      f.name = entry.at("name").get<std::string>();
      f.kind = feature_kind_from_string(entry.at("kind").get<std::string>());
      if (f.kind == FeatureKind::categorical) {
        for (const auto& [category, count] : entry.at("counts").items())
          f.categorical.counts[category] = count.get<std::uint64_t>();
      } else {
        f.numeric = numeric_from_json(entry.at("summary"));
      }
      profile.features.push_back(std::move(f));
    }
    if (j.contains("prediction")) profile.prediction = numeric_from_json(j.at("prediction"));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema_violation, std::string("training profile: ") + e.what());
  }
  return profile;
}

}  // namespace expmon
