#include "expmon/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "expmon/drift.hpp"
#include "expmon/error.hpp"
#include "expmon/sim.hpp"

namespace expmon {

using nlohmann::json;

TrainingProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::file_not_found, path.string());
  try {
    return profile_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::malformed_document, path.string() + ": " + e.what());
  }
}

std::vector<ScenarioSpec> load_registry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::file_not_found, path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario_file(buffer.str());
}

Pipeline::Pipeline(ServiceConfig config, std::vector<TrainingProfile> profiles, std::vector<ScenarioSpec> scenarios,
                   EventLog& log, Clock clock)
    : config_(std::move(config)),
      log_(log),
      clock_(clock),
      store_(config_.window),
      responder_(ResponderConfig{config_.bf_threshold, config_.cooldown_windows, config_.approval_ttl_ms,
                                 config_.webhook_attempts, config_.webhook_timeout_ms, 50, config_.command_log},
                 log) {
  validate(config_);
  if (profiles.empty()) throw Error(ErrorKind::invalid_config, "profiles: at least one training profile required");
  for (auto& p : profiles) {
    const std::string key = p.model.key();
    if (profiles_.count(key)) throw Error(ErrorKind::invalid_config, "profiles: duplicate model " + key);
    store_.register_model(p.model, p.schema());
    references_.emplace(key, build_reference_model(p));
    profiles_.emplace(key, std::move(p));
  }
  auto reports = replace_scenarios(std::move(scenarios));
  for (const auto& r : reports) {
    if (r.accepted()) continue;
    throw Error(ErrorKind::schema_violation, "scenario '" + r.scenario_id + "' rejected: " +
                                                 r.violations.front().field + ": " + r.violations.front().message);
  }
  responder_.recover(log_.records());
}

std::vector<ValidationReport> Pipeline::replace_scenarios(std::vector<ScenarioSpec> specs, bool persist) {
  std::vector<ValidationReport> reports;
  std::map<std::string, std::vector<ScenarioModel>> compiled;
  bool ok = true;
  for (const auto& spec : specs) {
    auto it = profiles_.find(spec.model.key());
    if (it == profiles_.end()) {
      reports.push_back({spec.id, {{"model", "no training profile for " + spec.model.key()}}});
      ok = false;
      continue;
    }
    ValidationReport r = validate_scenario(spec, it->second);
    if (r.accepted()) {
      try {
        compiled[spec.model.key()].push_back(build_scenario_model(spec, it->second, references_.at(it->first)));
      } catch (const Error& e) {
        r.violations.push_back({"estimates", e.detail()});
      }
    }
    ok = ok && r.accepted();
    reports.push_back(std::move(r));
  }
  if (!ok) return reports;

  std::lock_guard lock(mutex_);
  registry_.replace(specs);
  compiled_ = std::move(compiled);
  if (persist && !config_.registry.empty()) {
    std::ofstream out(config_.registry, std::ios::trunc);
    out << serialize_scenarios(specs).dump(2) << '\n';
    if (!out) throw Error(ErrorKind::invalid_config, "registry: cannot write " + config_.registry);
  }
  return reports;
}

std::vector<ModelRef> Pipeline::models() const {
  std::vector<ModelRef> out;
  for (const auto& [key, p] : profiles_) out.push_back(p.model);
  return out;
}

std::int64_t Pipeline::now() const {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::int64_t Pipeline::timestamp(std::int64_t data_ts) const { return clock_ == Clock::data ? data_ts : now(); }

IngestResult Pipeline::ingest(std::span<const Observation> batch) {
  std::lock_guard lock(mutex_);
  store_.validate_batch(batch);
  IngestResult result;
  if (batch.empty()) return result;

  const std::size_t stride = config_.effective_stride();
  std::map<std::string, std::size_t> received;
  for (const auto& row : batch) {
    auto fills = store_.ingest_batch(std::span<const Observation>(&row, 1));
    const std::string key = row.model.key();
    result.fills[key] = fills.at(key);
    ++received[key];
    if (store_.total_ingested(row.model) % stride == 0) {
      evaluate_locked(row.model);
      ++result.evaluations;
    }
  }

  json models = json::object();
  for (const auto& [key, n] : received) {
    const ModelRef& m = profiles_.at(key).model;
    models[key] = {{"received", n}, {"fill", result.fills.at(key)}, {"total", store_.total_ingested(m)}};
  }
  log_.append(EventKind::ingest_summary, timestamp(batch.back().timestamp_ms), {{"models", models}});
  return result;
}

void Pipeline::evaluate_locked(const ModelRef& model) {
  const std::string key = model.key();
  const WindowView view = store_.snapshot(model);
  if (view.fill() < config_.min_window) return;
  const std::int64_t ts = timestamp(view.rows().back().timestamp_ms);

  DriftConfig drift{config_.alpha, config_.min_window, config_.correction};
  const DriftReport report = detect_drift(view, profiles_.at(key), drift);
  if (!report.alert) return;
  log_.append(EventKind::alert, ts, to_json(*report.alert));

  auto it = compiled_.find(key);
  if (it == compiled_.end() || it->second.empty()) return;
  EngineConfig engine;
  engine.min_window = config_.min_window;
  engine.min_subgroup_rows = config_.min_subgroup_rows;
  engine.mc_samples = config_.mc_samples;
  engine.seed = derive_seed(config_.seed, view.end_sequence());
  const Evaluation ev = evaluate_scenarios(view, it->second, references_.at(key), engine);
  responder_.handle(ev, registry_.for_model(model), ts);
}

namespace {

bool model_matches(const json& payload, const std::string& model) {
  if (model.empty()) return true;
  const std::string name = payload.value("model", std::string());
  const std::string version = payload.value("version", std::string());
  return model == name || model == name + ":" + version;
}

}  // namespace

std::vector<json> Pipeline::alerts(const std::string& model, std::size_t limit) const {
  std::vector<json> out;
  auto records = log_.records(EventKind::alert);
  for (auto it = records.rbegin(); it != records.rend() && out.size() < limit; ++it)
    if (model_matches(it->payload, model)) out.push_back(it->payload);
  return out;
}

json Pipeline::assessment_view(const EventRecord& record) const {
  json view = record.payload;
  view.erase("responses");
  const Evaluation ev = evaluation_from_json(view);

  // Server-side order is the responder's ranking; insufficient-data rows
  // follow in registry order.
  std::vector<std::string> order;
  try {
    for (const auto& a : rank_assessments(ev.assessments)) order.push_back(a.scenario_id);
  } catch (const Error&) {
  }
  for (const auto& a : ev.assessments)
    if (a.status != AssessmentStatus::ok) order.push_back(a.scenario_id);
  json sorted = json::array();
  for (const auto& id : order)
    for (const auto& a : view.at("assessments"))
      if (a.at("scenario_id") == id) sorted.push_back(a);
  view["assessments"] = sorted;
  view["threshold"] = config_.bf_threshold;

  view["decision"] = nullptr;
  for (const auto& d : log_.records(EventKind::decision)) {
    if (d.seq > record.seq && d.payload.at("window_id") == ev.window_id) {
      view["decision"] = d.payload;
      break;
    }
  }
  const CooldownLedger ledger = responder_.ledger();
  json cooldown = json::object();
  const std::string prefix = ev.model.key() + "/";
  const auto evaluations = ledger.evaluations.count(ev.model.key()) ? ledger.evaluations.at(ev.model.key()) : 0;
  for (const auto& [k, last] : ledger.last_trigger) {
    if (!k.starts_with(prefix)) continue;
    const std::uint64_t since = evaluations - last - 1;
    const std::uint64_t remaining = since + 1 < config_.cooldown_windows ? config_.cooldown_windows - since - 1 : 0;
    cooldown[k.substr(prefix.size())] = {{"last_trigger_evaluation", last}, {"remaining_evaluations", remaining}};
  }
  view["cooldown"] = cooldown;
  return view;
}

std::optional<json> Pipeline::latest_assessment(const std::string& model) const {
  auto records = log_.records(EventKind::assessment);
  for (auto it = records.rbegin(); it != records.rend(); ++it)
    if (model_matches(it->payload, model)) return assessment_view(*it);
  return std::nullopt;
}

std::optional<json> Pipeline::assessment(const std::string& window_id) const {
  auto records = log_.records(EventKind::assessment);
  for (auto it = records.rbegin(); it != records.rend(); ++it)
    if (it->payload.value("window_id", std::string()) == window_id) return assessment_view(*it);
  return std::nullopt;
}

void Pipeline::check(std::span<const Observation> batch) const { store_.validate_batch(batch); }

ReplaySummary replay_stream(std::istream& in, Pipeline& pipeline, EventLog& log) {
  const std::size_t before = log.size();
  std::vector<Observation> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(observation_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::malformed_document, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.detail());
    }
    try {
      pipeline.check(std::span<const Observation>(&rows.back(), 1));
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  ReplaySummary summary;
  summary.observations = rows.size();
  summary.evaluations = pipeline.ingest(rows).evaluations;
  const auto records = log.records();
  for (std::size_t i = before; i < records.size(); ++i) ++summary.events[std::string(to_string(records[i].kind))];
  return summary;
}

}  // namespace expmon
