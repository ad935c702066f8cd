#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "expmon/engine.hpp"
#include "expmon/events.hpp"
#include "expmon/scenario.hpp"

namespace expmon {

inline constexpr double kDefaultBayesFactorThreshold = 5.0;
inline constexpr std::uint64_t kDefaultCooldownWindows = 10;
inline constexpr std::int64_t kDefaultApprovalTtlMs = 24LL * 3600 * 1000;

// Ok-status assessments, descending log BF; ties go to the higher prior
// weight, then the smaller scenario id. Throws all-insufficient-data.
std::vector<ScenarioAssessment> rank_assessments(std::span<const ScenarioAssessment> assessments);

enum class DecisionKind { auto_trigger, notify, none };
std::string_view to_string(DecisionKind v);

struct Decision {
  ModelRef model;
  std::string window_id;
  std::uint64_t evaluation_index = 0;  // per-model count of evaluations before this one
  DecisionKind kind = DecisionKind::none;
  std::string scenario_id;
  double log_bf = 0.0;
  double threshold = kDefaultBayesFactorThreshold;
  std::string rationale;
  bool approval_required = false;
  std::string approval_id;

  bool operator==(const Decision&) const = default;
};

nlohmann::json to_json(const Decision& d);
Decision decision_from_json(const nlohmann::json& j);

// Responses by scenario id; nullopt for scenarios without one.
using ResponseTable = std::map<std::string, std::optional<ResponseSpec>>;
ResponseTable response_table(std::span<const ScenarioSpec> specs);

// Pure threshold rule on a ranked, non-empty list. Comparison is in log space.
Decision decide_action(std::span<const ScenarioAssessment> ranked, const ResponseTable& responses,
                       double threshold = kDefaultBayesFactorThreshold);

// Per-model evaluation counters and the last auto-trigger per scenario.
struct CooldownLedger {
  std::map<std::string, std::uint64_t> evaluations;    // model key -> evaluations seen
  std::map<std::string, std::uint64_t> last_trigger;   // "model key/scenario" -> evaluation index
  bool operator==(const CooldownLedger&) const = default;
};

// decide_action plus cooldown; advances the ledger. Every evaluation yields
// exactly one decision.
Decision decide_with_cooldown(const Evaluation& evaluation, const ResponseTable& responses, CooldownLedger& ledger,
                              double threshold, std::uint64_t cooldown_windows);

enum class ApprovalState { pending, approved, rejected, expired };
std::string_view to_string(ApprovalState v);
ApprovalState approval_state_from_string(std::string_view text);

enum class Verdict { approve, reject };
Verdict verdict_from_string(std::string_view text);

struct PendingApproval {
  std::string id;
  Decision decision;
  ResponseSpec response;
  nlohmann::json assessment;  // engine record the response would act on
  std::int64_t created_ts = 0;
  ApprovalState state = ApprovalState::pending;
  std::optional<std::string> resolver;
  std::optional<std::int64_t> resolved_ts;
};

nlohmann::json to_json(const PendingApproval& a);
PendingApproval approval_from_json(const nlohmann::json& j);

struct ActionResult {
  ActionKind kind = ActionKind::notify_only;
  bool success = false;
  int attempts = 0;
  std::string detail;
};

struct ResponderConfig {
  double threshold = kDefaultBayesFactorThreshold;
  std::uint64_t cooldown_windows = kDefaultCooldownWindows;
  std::int64_t approval_ttl_ms = kDefaultApprovalTtlMs;
  int webhook_attempts = 3;
  int webhook_timeout_ms = 2000;
  int webhook_backoff_ms = 50;
  std::string command_log;  // JSON-lines file for model-swap / fallback commands; empty = event log only
};

// Executes a response and appends the outcome to the event log. Failures are
// recorded, never thrown.
ActionResult execute_response(const ResponseSpec& response, const Decision& decision,
                              const nlohmann::json& assessment, const ResponderConfig& config, EventLog& log,
                              std::int64_t now_ms, const std::string& approval_id = {});

// Stateful front end: one call per evaluation. Writes assessment, decision,
// approval and action-result events; the state it keeps can be rebuilt from
// the log alone.
class Responder {
 public:
  Responder(ResponderConfig config, EventLog& log);

  const ResponderConfig& config() const { return config_; }

  Decision handle(const Evaluation& evaluation, std::span<const ScenarioSpec> specs, std::int64_t now_ms);

  // Idempotent for a repeated verdict; throws unknown-id or already-resolved.
  PendingApproval resolve_approval(const std::string& id, Verdict verdict, const std::string& resolver,
                                   std::int64_t now_ms);
  std::vector<PendingApproval> approvals(std::optional<ApprovalState> state, std::int64_t now_ms);
  CooldownLedger ledger() const;

  // Rebuilds approvals and cooldown state from previously logged records.
  void recover(std::span<const EventRecord> records);

 private:
  void expire_locked(std::int64_t now_ms);

  ResponderConfig config_;
  EventLog& log_;
  mutable std::mutex mutex_;
  CooldownLedger ledger_;
  std::map<std::string, PendingApproval> approvals_;
};

// Re-derives every decision from the assessment events in a log.
std::vector<Decision> replay_decisions(std::span<const EventRecord> records, double threshold,
                                       std::uint64_t cooldown_windows);

}  // namespace expmon
