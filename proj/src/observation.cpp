#include "expmon/observation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "expmon/error.hpp"

namespace expmon {

using nlohmann::json;

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::numeric: return "numeric";
    case FeatureKind::count: return "count";
    case FeatureKind::categorical: return "categorical";
  }
  return "numeric";
}

FeatureKind feature_kind_from_string(std::string_view text) {
  if (text == "numeric") return FeatureKind::numeric;
  if (text == "count") return FeatureKind::count;
  if (text == "categorical") return FeatureKind::categorical;
  throw Error(ErrorKind::schema_violation, "unknown feature kind '" + std::string(text) + "'");
}

const FeatureSpec* FeatureSchema::find(std::string_view name) const {
  auto it = std::find_if(features.begin(), features.end(),
                         [&](const FeatureSpec& f) { return f.name == name; });
  return it == features.end() ? nullptr : &*it;
}

void FeatureSchema::check(const Observation& obs) const {
  if (obs.features.size() != features.size()) {
    for (const auto& spec : features) {
      if (!obs.features.count(spec.name))
        throw Error(ErrorKind::schema_mismatch, "missing feature '" + spec.name + "'");
    }
    for (const auto& [name, value] : obs.features) {
      if (!find(name)) throw Error(ErrorKind::schema_mismatch, "unexpected feature '" + name + "'");
    }
  }
  for (const auto& spec : features) {
    auto it = obs.features.find(spec.name);
    if (it == obs.features.end())
      throw Error(ErrorKind::schema_mismatch, "missing feature '" + spec.name + "'");
    const FeatureValue& value = it->second;
    if (spec.kind == FeatureKind::categorical) {
      if (!std::holds_alternative<std::string>(value))
        throw Error(ErrorKind::schema_mismatch, "feature '" + spec.name + "' must be a category token");
      continue;
    }
    if (!std::holds_alternative<double>(value))
      throw Error(ErrorKind::schema_mismatch, "feature '" + spec.name + "' must be numeric");
    double x = std::get<double>(value);
    if (!std::isfinite(x))
      throw Error(ErrorKind::schema_mismatch, "feature '" + spec.name + "' is not finite");
    if (spec.kind == FeatureKind::count && (x < 0.0 || x != std::floor(x)))
      throw Error(ErrorKind::schema_mismatch,
                  "feature '" + spec.name + "' must be a non-negative integer count");
  }
  if (has_prediction != obs.prediction.has_value()) {
    throw Error(ErrorKind::schema_mismatch,
                has_prediction ? "missing prediction" : "unexpected prediction");
  }
  if (obs.prediction && !std::isfinite(*obs.prediction))
    throw Error(ErrorKind::schema_mismatch, "prediction is not finite");
}

json to_json(const FeatureSchema& schema) {
  json features = json::array();
  for (const auto& f : schema.features)
    features.push_back({{"name", f.name}, {"kind", std::string(to_string(f.kind))}});
  return {{"features", features}, {"prediction", schema.has_prediction}};
}

FeatureSchema schema_from_json(const json& j) {
  FeatureSchema schema;
  try {
    for (const auto& f : j.at("features")) {
      schema.features.push_back(
          {f.at("name").get<std::string>(), feature_kind_from_string(f.at("kind").get<std::string>())});
    }
    schema.has_prediction = j.value("prediction", false);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema_violation, std::string("feature schema: ") + e.what());
  }
  std::set<std::string> seen;
  for (const auto& f : schema.features) {
    if (!seen.insert(f.name).second)
      throw Error(ErrorKind::schema_violation, "duplicate feature '" + f.name + "'");
    if (schema.has_prediction && f.name == kPredictionColumn)
      throw Error(ErrorKind::schema_violation, "feature name 'prediction' is reserved");
  }
  return schema;
}

json to_json(const Observation& obs) {
  json features = json::object();
  for (const auto& [name, value] : obs.features) {
    if (const double* x = std::get_if<double>(&value))
      features[name] = *x;
    else
      features[name] = std::get<std::string>(value);
  }
  json j = {{"model", obs.model.name},
            {"version", obs.model.version},
            {"ts", obs.timestamp_ms},
            {"features", features}};
  if (obs.prediction) j["prediction"] = *obs.prediction;
  return j;
}

Observation observation_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::malformed_document, "observation must be an object");
  static const std::set<std::string> allowed = {"model", "version", "ts", "features", "prediction"};
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw Error(ErrorKind::schema_violation, "unknown key '" + key + "'");
  }
  Observation obs;
  try {
    obs.model.name = j.at("model").get<std::string>();
    obs.model.version = j.at("version").get<std::string>();
    obs.timestamp_ms = j.at("ts").get<std::int64_t>();
    for (const auto& [name, value] : j.at("features").items()) {
      if (value.is_number())
        obs.features[name] = value.get<double>();
      else if (value.is_string())
        obs.features[name] = value.get<std::string>();
      else
        throw Error(ErrorKind::schema_mismatch,
                    "feature '" + name + "' must be a number or string (missing values are rejected)");
    }
    if (j.contains("prediction")) obs.prediction = j.at("prediction").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::malformed_document, std::string("observation: ") + e.what());
  }
  return obs;
}

std::vector<Observation> read_json_lines(std::istream& in) {
  std::vector<Observation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
      continue;
    try {
      out.push_back(observation_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::malformed_document,
                  "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

std::optional<double> parse_number(const std::string& text) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || text.empty()) return std::nullopt;
  return value;
}

}  // namespace

CsvTable read_csv_table(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw Error(ErrorKind::malformed_document,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " fields, got " +
                      std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw Error(ErrorKind::empty_dataset, "CSV has no header row");
  return table;
}

std::vector<Observation> rows_from_csv(const CsvTable& table, const FeatureSchema& schema,
                                       const ModelRef& model) {
  std::vector<Observation> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    Observation obs;
    obs.model = model;
    obs.timestamp_ms = static_cast<std::int64_t>(r);
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const std::string& name = table.header[c];
      const std::string& cell = table.rows[r][c];
      if (schema.has_prediction && name == kPredictionColumn) {
        auto x = parse_number(cell);
        if (!x) throw Error(ErrorKind::schema_mismatch, "row " + std::to_string(r + 1) + ": bad prediction");
        obs.prediction = *x;
        continue;
      }
      const FeatureSpec* spec = schema.find(name);
      if (!spec) throw Error(ErrorKind::schema_mismatch, "unexpected column '" + name + "'");
      if (cell.empty())
        throw Error(ErrorKind::schema_mismatch,
                    "row " + std::to_string(r + 1) + ": missing value for '" + name + "'");
      if (spec->kind == FeatureKind::categorical) {
        obs.features[name] = cell;
      } else {
        auto x = parse_number(cell);
        if (!x)
          throw Error(ErrorKind::schema_mismatch,
                      "row " + std::to_string(r + 1) + ": '" + name + "' is not numeric");
        obs.features[name] = *x;
      }
    }
    schema.check(obs);
    out.push_back(std::move(obs));
  }
  return out;
}

FeatureSchema infer_schema(const CsvTable& table, const std::vector<std::string>& count_features) {
  FeatureSchema schema;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string& name = table.header[c];
    if (name == kPredictionColumn) {
      schema.has_prediction = true;
      continue;
    }
    bool numeric = std::all_of(table.rows.begin(), table.rows.end(),
                               [&](const auto& row) { return parse_number(row[c]).has_value(); });
    FeatureKind kind = numeric ? FeatureKind::numeric : FeatureKind::categorical;
    if (std::find(count_features.begin(), count_features.end(), name) != count_features.end())
      kind = FeatureKind::count;
    schema.features.push_back({name, kind});
  }
  return schema;
}

FeatureSchema infer_schema(const std::vector<Observation>& rows,
                           const std::vector<std::string>& count_features) {
  if (rows.empty()) throw Error(ErrorKind::empty_dataset, "cannot infer a schema from no rows");
  FeatureSchema schema;
  schema.has_prediction = rows.front().prediction.has_value();
  for (const auto& [name, value] : rows.front().features) {
    FeatureKind kind = std::holds_alternative<std::string>(value) ? FeatureKind::categorical
                                                                   : FeatureKind::numeric;
    if (std::find(count_features.begin(), count_features.end(), name) != count_features.end())
      kind = FeatureKind::count;
    schema.features.push_back({name, kind});
  }
  return schema;
}

}  // namespace expmon
