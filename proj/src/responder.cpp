#include "expmon/responder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "expmon/error.hpp"
#include "expmon/registry.hpp"

namespace expmon {

using nlohmann::json;

std::vector<ScenarioAssessment> rank_assessments(std::span<const ScenarioAssessment> assessments) {
  std::vector<ScenarioAssessment> ranked;
  for (const auto& a : assessments)
    if (a.status == AssessmentStatus::ok) ranked.push_back(a);
  if (ranked.empty()) throw Error(ErrorKind::all_insufficient_data, "no assessment has enough data");
  std::sort(ranked.begin(), ranked.end(), [](const ScenarioAssessment& x, const ScenarioAssessment& y) {
    if (x.log_bf != y.log_bf) return x.log_bf > y.log_bf;
    if (x.prior_weight != y.prior_weight) return x.prior_weight > y.prior_weight;
    return x.scenario_id < y.scenario_id;
  });
  return ranked;
}

std::string_view to_string(DecisionKind v) {
  switch (v) {
    case DecisionKind::auto_trigger: return "auto-trigger";
    case DecisionKind::notify: return "notify";
    case DecisionKind::none: return "none";
  }
  return "none";
}

namespace {

DecisionKind decision_kind_from_string(std::string_view s) {
  for (auto k : {DecisionKind::auto_trigger, DecisionKind::notify, DecisionKind::none})
    if (to_string(k) == s) return k;
  throw Error(ErrorKind::schema_violation, "unknown decision kind '" + std::string(s) + "'");
}

std::string cooldown_key(const ModelRef& model, const std::string& scenario) {
  return model.key() + "/" + scenario;
}

json strip_responses(json assessment) {
  assessment.erase("responses");
  return assessment;
}

}  // namespace

json to_json(const Decision& d) {
  json j = {{"model", d.model.name},
            {"version", d.model.version},
            {"window_id", d.window_id},
            {"evaluation_index", d.evaluation_index},
            {"decision", std::string(to_string(d.kind))},
            {"scenario_id", d.scenario_id},
            {"log_bf", json_number(d.log_bf)},
            {"bf", json_number(std::exp(d.log_bf))},
            {"threshold", d.threshold},
            {"rationale", d.rationale},
            {"approval_required", d.approval_required}};
  if (!d.approval_id.empty()) j["approval_id"] = d.approval_id;
  return j;
}

Decision decision_from_json(const json& j) {
  Decision d;
  try {
    d.model = {j.at("model").get<std::string>(), j.at("version").get<std::string>()};
    d.window_id = j.at("window_id").get<std::string>();
    d.evaluation_index = j.at("evaluation_index").get<std::uint64_t>();
    d.kind = decision_kind_from_string(j.at("decision").get<std::string>());
    d.scenario_id = j.at("scenario_id").get<std::string>();
    d.log_bf = number_from_json(j.at("log_bf"));
    d.threshold = j.at("threshold").get<double>();
    d.rationale = j.at("rationale").get<std::string>();
    d.approval_required = j.at("approval_required").get<bool>();
    if (j.contains("approval_id")) d.approval_id = j.at("approval_id").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema_violation, std::string("decision record: ") + e.what());
  }
  return d;
}

ResponseTable response_table(std::span<const ScenarioSpec> specs) {
  ResponseTable table;
  for (const auto& s : specs) table[s.id] = s.response;
  return table;
}

Decision decide_action(std::span<const ScenarioAssessment> ranked, const ResponseTable& responses,
                       double threshold) {
  if (ranked.empty()) throw Error(ErrorKind::precondition, "decide_action needs at least one assessment");
  if (!(threshold > 0.0)) throw Error(ErrorKind::invalid_config, "threshold must be positive");
  const ScenarioAssessment& top = ranked.front();
  Decision d;
  d.scenario_id = top.scenario_id;
  d.log_bf = top.log_bf;
  d.threshold = threshold;
  d.kind = DecisionKind::notify;

  if (!(top.log_bf >= std::log(threshold))) {
    d.rationale = "below-threshold: drift detected but no scenario reaches the Bayes factor threshold";
    return d;
  }
  auto it = responses.find(top.scenario_id);
  const std::optional<ResponseSpec> response = it == responses.end() ? std::nullopt : it->second;
  if (!response) {
    d.rationale = "no response specified";
  } else if (response->kind == ActionKind::notify_only) {
    d.rationale = "threshold met, notify-only response";
  } else if (response->automated) {
    d.kind = DecisionKind::auto_trigger;
    d.rationale = "threshold met, automated " + std::string(to_string(response->kind));
  } else {
    d.approval_required = true;
    d.rationale = "threshold met, " + std::string(to_string(response->kind)) + " awaits approval";
  }
  return d;
}

Decision decide_with_cooldown(const Evaluation& evaluation, const ResponseTable& responses, CooldownLedger& ledger,
                              double threshold, std::uint64_t cooldown_windows) {
  const std::uint64_t index = ledger.evaluations[evaluation.model.key()]++;
  Decision d;
  try {
    auto ranked = rank_assessments(evaluation.assessments);
    d = decide_action(ranked, responses, threshold);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::all_insufficient_data) throw;
    d.kind = DecisionKind::none;
    d.threshold = threshold;
    d.log_bf = std::numeric_limits<double>::quiet_NaN();
    d.rationale = "all scenarios have insufficient data";
  }
  d.model = evaluation.model;
  d.window_id = evaluation.window_id;
  d.evaluation_index = index;

  if (d.kind == DecisionKind::auto_trigger) {
    const std::string key = cooldown_key(d.model, d.scenario_id);
    auto last = ledger.last_trigger.find(key);
    if (last != ledger.last_trigger.end() && index - last->second < cooldown_windows) {
      d.kind = DecisionKind::none;
      d.rationale = "cooldown: auto-triggered " + std::to_string(index - last->second) + " evaluation(s) ago";
    } else {
      ledger.last_trigger[key] = index;
    }
  }
  return d;
}

std::string_view to_string(ApprovalState v) {
  switch (v) {
    case ApprovalState::pending: return "pending";
    case ApprovalState::approved: return "approved";
    case ApprovalState::rejected: return "rejected";
    case ApprovalState::expired: return "expired";
  }
  return "pending";
}

ApprovalState approval_state_from_string(std::string_view text) {
  for (auto s : {ApprovalState::pending, ApprovalState::approved, ApprovalState::rejected, ApprovalState::expired})
    if (to_string(s) == text) return s;
  throw Error(ErrorKind::schema_violation, "unknown approval state '" + std::string(text) + "'");
}

Verdict verdict_from_string(std::string_view text) {
  if (text == "approve") return Verdict::approve;
  if (text == "reject") return Verdict::reject;
  throw Error(ErrorKind::schema_violation, "verdict must be 'approve' or 'reject'");
}

json to_json(const PendingApproval& a) {
  json j = {{"id", a.id},
            {"decision", to_json(a.decision)},
            {"response", to_json(a.response)},
            {"assessment", a.assessment},
            {"created_ts", a.created_ts},
            {"state", std::string(to_string(a.state))},
            {"resolver", nullptr},
            {"resolved_ts", nullptr}};
  if (a.resolver) j["resolver"] = *a.resolver;
  if (a.resolved_ts) j["resolved_ts"] = *a.resolved_ts;
  return j;
}

PendingApproval approval_from_json(const json& j) {
  PendingApproval a;
  try {
    a.id = j.at("id").get<std::string>();
    a.decision = decision_from_json(j.at("decision"));
    a.response = response_from_json(j.at("response"));
    a.assessment = j.at("assessment");
    a.created_ts = j.at("created_ts").get<std::int64_t>();
    a.state = approval_state_from_string(j.at("state").get<std::string>());
    if (!j.at("resolver").is_null()) a.resolver = j.at("resolver").get<std::string>();
    if (!j.at("resolved_ts").is_null()) a.resolved_ts = j.at("resolved_ts").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema_violation, std::string("approval record: ") + e.what());
  }
  return a;
}

namespace {

ActionResult post_webhook(const std::string& url, const json& body, const ResponderConfig& config) {
  ActionResult r{ActionKind::webhook, false, 0, ""};
  // Split scheme://host[:port] from the path.
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  if (!client.is_valid()) {
    r.detail = "unsupported webhook URL " + url;
    return r;
  }
  const auto timeout = std::chrono::milliseconds(config.webhook_timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  const std::string payload = body.dump();
  for (int attempt = 1; attempt <= std::max(1, config.webhook_attempts); ++attempt) {
    r.attempts = attempt;
    auto res = client.Post(path, payload, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      r.success = true;
      r.detail = "HTTP " + std::to_string(res->status);
      return r;
    }
    r.detail = res ? "HTTP " + std::to_string(res->status) : "webhook-unreachable: " + httplib::to_string(res.error());
    if (attempt < config.webhook_attempts)
      std::this_thread::sleep_for(std::chrono::milliseconds(config.webhook_backoff_ms * attempt));
  }
  return r;
}

}  // namespace

ActionResult execute_response(const ResponseSpec& response, const Decision& decision, const json& assessment,
                              const ResponderConfig& config, EventLog& log, std::int64_t now_ms,
                              const std::string& approval_id) {
  ActionResult r{response.kind, true, 1, ""};
  const json record = strip_responses(assessment);
  switch (response.kind) {
    case ActionKind::notify_only:
      r.detail = "notified";
      break;
    case ActionKind::webhook: {
      json body = record;
      body["decision"] = std::string(to_string(decision.kind));
      body["scenario_id"] = decision.scenario_id;
      body["bf"] = json_number(std::exp(decision.log_bf));
      body["threshold"] = decision.threshold;
      if (!approval_id.empty()) body["approval_id"] = approval_id;
      r = post_webhook(response.payload.value("url", std::string()), body, config);
      break;
    }
    case ActionKind::model_swap_command:
    case ActionKind::fallback_model: {
      json command = {{"command", std::string(to_string(response.kind))},
                      {"model", decision.model.name},
                      {"version", decision.model.version},
                      {"scenario_id", decision.scenario_id},
                      {"window_id", decision.window_id},
                      {"payload", response.payload},
                      {"ts", now_ms}};
      if (!config.command_log.empty()) {
        std::ofstream out(config.command_log, std::ios::app);
        if (out) out << command.dump() << '\n';
        out.flush();
        if (!out) {
          r.success = false;
          r.detail = "cannot write command log " + config.command_log;
          break;
        }
      }
      r.detail = "command emitted";
      break;
    }
  }
  json entry = {{"model", decision.model.name},
                {"version", decision.model.version},
                {"window_id", decision.window_id},
                {"scenario_id", decision.scenario_id},
                {"action", std::string(to_string(r.kind))},
                {"success", r.success},
                {"attempts", r.attempts},
                {"detail", r.detail},
                {"approval_id", approval_id.empty() ? json(nullptr) : json(approval_id)}};
  log.append(EventKind::action_result, now_ms, std::move(entry));
  return r;
}

Responder::Responder(ResponderConfig config, EventLog& log) : config_(std::move(config)), log_(log) {
  if (!(config_.threshold > 0.0)) throw Error(ErrorKind::invalid_config, "bf_threshold must be positive");
}

Decision Responder::handle(const Evaluation& evaluation, std::span<const ScenarioSpec> specs, std::int64_t now_ms) {
  const ResponseTable responses = response_table(specs);
  json assessment = to_json(evaluation);
  json table = json::object();
  for (const auto& [id, r] : responses) table[id] = r ? to_json(*r) : json(nullptr);
  assessment["responses"] = table;

  std::lock_guard lock(mutex_);
  log_.append(EventKind::assessment, now_ms, assessment);
  Decision d = decide_with_cooldown(evaluation, responses, ledger_, config_.threshold, config_.cooldown_windows);

  std::optional<ResponseSpec> response;
  if (auto it = responses.find(d.scenario_id); it != responses.end()) response = it->second;
  if (d.approval_required) d.approval_id = "apr-" + d.model.key() + "-" + std::to_string(d.evaluation_index);
  log_.append(EventKind::decision, now_ms, to_json(d));

  if (d.approval_required) {
    PendingApproval a;
    a.id = d.approval_id;
    a.decision = d;
    a.response = *response;
    a.assessment = strip_responses(assessment);
    a.created_ts = now_ms;
    approvals_[a.id] = a;
    log_.append(EventKind::approval, now_ms, to_json(a));
  } else if (d.kind == DecisionKind::auto_trigger) {
    execute_response(*response, d, assessment, config_, log_, now_ms);
  } else if (d.kind == DecisionKind::notify) {
    execute_response(ResponseSpec{}, d, assessment, config_, log_, now_ms);
  }
  return d;
}

void Responder::expire_locked(std::int64_t now_ms) {
  for (auto& [id, a] : approvals_) {
    if (a.state != ApprovalState::pending || now_ms - a.created_ts < config_.approval_ttl_ms) continue;
    a.state = ApprovalState::expired;
    a.resolver = "ttl";
    a.resolved_ts = now_ms;
    log_.append(EventKind::approval, now_ms, to_json(a));
  }
}

PendingApproval Responder::resolve_approval(const std::string& id, Verdict verdict, const std::string& resolver,
                                            std::int64_t now_ms) {
  std::lock_guard lock(mutex_);
  expire_locked(now_ms);
  auto it = approvals_.find(id);
  if (it == approvals_.end()) throw Error(ErrorKind::unknown_id, "no approval '" + id + "'");
  PendingApproval& a = it->second;
  const ApprovalState target = verdict == Verdict::approve ? ApprovalState::approved : ApprovalState::rejected;
  if (a.state == target) return a;
  if (a.state != ApprovalState::pending)
    throw Error(ErrorKind::already_resolved, "approval '" + id + "' is " + std::string(to_string(a.state)));

  a.state = target;
  a.resolver = resolver;
  a.resolved_ts = now_ms;
  // The state change is logged before the action so a crash in between can
  // never lead to a second execution on restart.
  log_.append(EventKind::approval, now_ms, to_json(a));
  if (target == ApprovalState::approved) execute_response(a.response, a.decision, a.assessment, config_, log_, now_ms, a.id);
  return a;
}

std::vector<PendingApproval> Responder::approvals(std::optional<ApprovalState> state, std::int64_t now_ms) {
  std::lock_guard lock(mutex_);
  expire_locked(now_ms);
  std::vector<PendingApproval> out;
  for (const auto& [id, a] : approvals_)
    if (!state || a.state == *state) out.push_back(a);
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.created_ts != y.created_ts ? x.created_ts < y.created_ts : x.id < y.id;
  });
  return out;
}

CooldownLedger Responder::ledger() const {
  std::lock_guard lock(mutex_);
  return ledger_;
}

void Responder::recover(std::span<const EventRecord> records) {
  std::lock_guard lock(mutex_);
  ledger_ = {};
  approvals_.clear();
  for (const auto& r : records) {
    if (r.kind == EventKind::decision) {
      Decision d = decision_from_json(r.payload);
      auto& count = ledger_.evaluations[d.model.key()];
      count = std::max(count, d.evaluation_index + 1);
      if (d.kind == DecisionKind::auto_trigger) ledger_.last_trigger[cooldown_key(d.model, d.scenario_id)] = d.evaluation_index;
    } else if (r.kind == EventKind::approval) {
      PendingApproval a = approval_from_json(r.payload);
      approvals_[a.id] = std::move(a);
    }
  }
}

std::vector<Decision> replay_decisions(std::span<const EventRecord> records, double threshold,
                                       std::uint64_t cooldown_windows) {
  CooldownLedger ledger;
  std::vector<Decision> out;
  for (const auto& r : records) {
    if (r.kind != EventKind::assessment) continue;
    Evaluation ev = evaluation_from_json(r.payload);
    ResponseTable responses;
    if (r.payload.contains("responses")) {
      for (const auto& [id, spec] : r.payload.at("responses").items())
        responses[id] = spec.is_null() ? std::nullopt : std::optional<ResponseSpec>(response_from_json(spec));
    }
    Decision d = decide_with_cooldown(ev, responses, ledger, threshold, cooldown_windows);
    if (d.approval_required) d.approval_id = "apr-" + d.model.key() + "-" + std::to_string(d.evaluation_index);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace expmon
