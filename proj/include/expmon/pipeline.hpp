#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "expmon/config.hpp"
#include "expmon/engine.hpp"
#include "expmon/events.hpp"
#include "expmon/profile.hpp"
#include "expmon/registry.hpp"
#include "expmon/responder.hpp"
#include "expmon/window.hpp"

namespace expmon {

TrainingProfile load_profile(const std::filesystem::path& path);
std::vector<ScenarioSpec> load_registry(const std::filesystem::path& path);

// Where event timestamps come from: the last observation of the window
// (reproducible batch runs) or the system clock (live service).
enum class Clock { data, wall };

struct IngestResult {
  std::map<std::string, std::size_t> fills;  // model key -> window fill
  std::size_t evaluations = 0;
};

// ingest -> detect -> evaluate -> decide. Every stride of new observations
// per model triggers one drift check; an alert with registered scenarios
// triggers one evaluation and one decision. All calls are serialized.
class Pipeline {
 public:
  Pipeline(ServiceConfig config, std::vector<TrainingProfile> profiles, std::vector<ScenarioSpec> scenarios,
           EventLog& log, Clock clock = Clock::data);

  // All-or-nothing validation, then row-by-row insertion so evaluations land
  // on exact stride boundaries regardless of batch size.
  IngestResult ingest(std::span<const Observation> batch);
  // Throws what ingest would throw for the batch, without ingesting.
  void check(std::span<const Observation> batch) const;

  // Validates against the training profiles; applies only when every
  // scenario is accepted. Returns the per-scenario reports either way.
  // With `persist`, an accepted registry is also written to config.registry.
  std::vector<ValidationReport> replace_scenarios(std::vector<ScenarioSpec> specs, bool persist = false);
  ScenarioRegistry::Snapshot scenarios() const { return registry_.snapshot(); }

  // `model` matches a model name or name:version key; empty matches all.
  std::vector<nlohmann::json> alerts(const std::string& model, std::size_t limit) const;
  std::optional<nlohmann::json> latest_assessment(const std::string& model) const;
  std::optional<nlohmann::json> assessment(const std::string& window_id) const;

  Responder& responder() { return responder_; }
  const ServiceConfig& config() const { return config_; }
  std::vector<ModelRef> models() const;
  std::int64_t now() const;

 private:
  void evaluate_locked(const ModelRef& model);
  std::int64_t timestamp(std::int64_t data_ts) const;
  nlohmann::json assessment_view(const EventRecord& record) const;

  ServiceConfig config_;
  EventLog& log_;
  Clock clock_;
  mutable std::mutex mutex_;
  WindowStore store_;
  ScenarioRegistry registry_;
  std::map<std::string, TrainingProfile> profiles_;
  std::map<std::string, ReferenceModel> references_;
  std::map<std::string, std::vector<ScenarioModel>> compiled_;  // per model, rebuilt on registry change
  Responder responder_;
};

struct ReplaySummary {
  std::size_t observations = 0;
  std::size_t evaluations = 0;
  std::map<std::string, std::size_t> events;  // kind -> count emitted by this run
};

// Reads a JSON-lines stream (errors name the line) and feeds it through the
// pipeline.
ReplaySummary replay_stream(std::istream& in, Pipeline& pipeline, EventLog& log);

}  // namespace expmon
