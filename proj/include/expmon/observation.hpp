#pragma once

#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace expmon {

struct ModelRef {
  std::string name;
  std::string version;

  std::string key() const { return name + ":" + version; }
  auto operator<=>(const ModelRef&) const = default;
};

enum class FeatureKind { numeric, count, categorical };

std::string_view to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view text);

// Numeric and count features carry doubles (counts are validated to be
// non-negative integers); categorical features carry tokens.
using FeatureValue = std::variant<double, std::string>;

struct Observation {
  ModelRef model;
  std::int64_t timestamp_ms = 0;
  std::map<std::string, FeatureValue> features;
  std::optional<double> prediction;
};

// Column name under which the model's prediction is tracked as a
// pseudo-feature by the drift detector.
inline constexpr std::string_view kPredictionColumn = "prediction";

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
};

struct FeatureSchema {
  std::vector<FeatureSpec> features;
  bool has_prediction = false;

  const FeatureSpec* find(std::string_view name) const;

  // Throws schema-mismatch naming the first offending feature.
  void check(const Observation& obs) const;
};

nlohmann::json to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Observation& obs);
Observation observation_from_json(const nlohmann::json& j);

// One observation per non-empty line. Parse failures carry the 1-based line
// number in the message.
std::vector<Observation> read_json_lines(std::istream& in);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Plain comma-separated values with a header row; double quotes may wrap a
// field. No embedded newlines.
CsvTable read_csv_table(std::istream& in);

// Column types come from `schema`; an optional "prediction" column fills
// Observation::prediction. Every row is tagged with `model`.
std::vector<Observation> rows_from_csv(const CsvTable& table, const FeatureSchema& schema,
                                       const ModelRef& model);

// A column is numeric when every cell parses as a number, otherwise
// categorical; names in `count_features` become counts.
FeatureSchema infer_schema(const CsvTable& table,
                           const std::vector<std::string>& count_features = {});

// Schema inference from data: JSON strings become categorical, numbers
// numeric. Counts are never inferred; callers name them in `count_features`.
FeatureSchema infer_schema(const std::vector<Observation>& rows,
                           const std::vector<std::string>& count_features = {});

}  // namespace expmon
