#include "expmon/events.hpp"

#include <string>

#include "expmon/error.hpp"

namespace expmon {

using nlohmann::json;

std::string_view to_string(EventKind v) {
  switch (v) {
    case EventKind::ingest_summary: return "ingest-summary";
    case EventKind::alert: return "alert";
    case EventKind::assessment: return "assessment";
    case EventKind::decision: return "decision";
    case EventKind::approval: return "approval";
    case EventKind::action_result: return "action-result";
  }
  return "ingest-summary";
}

EventKind event_kind_from_string(std::string_view text) {
  for (auto k : {EventKind::ingest_summary, EventKind::alert, EventKind::assessment, EventKind::decision,
                 EventKind::approval, EventKind::action_result})
    if (to_string(k) == text) return k;
  throw Error(ErrorKind::schema_violation, "unknown event kind '" + std::string(text) + "'");
}

json to_json(const EventRecord& record) {
  return {{"seq", record.seq}, {"kind", std::string(to_string(record.kind))}, {"ts", record.ts},
          {"payload", record.payload}};
}

EventRecord event_from_json(const json& j) {
  EventRecord r;
  try {
    r.seq = j.at("seq").get<std::uint64_t>();
    r.kind = event_kind_from_string(j.at("kind").get<std::string>());
    r.ts = j.at("ts").get<std::int64_t>();
    r.payload = j.at("payload");
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema_violation, std::string("event record: ") + e.what());
  }
  return r;
}

std::vector<EventRecord> read_event_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::file_not_found, path.string());
  std::vector<EventRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(event_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::malformed_document, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.detail());
    }
    if (out.size() > 1 && out.back().seq <= out[out.size() - 2].seq)
      throw Error(ErrorKind::schema_violation, "line " + std::to_string(line_no) + ": sequence not increasing");
  }
  return out;
}

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) records_ = read_event_log(path_);
  out_.open(path_, std::ios::app);
  if (!out_) throw Error(ErrorKind::invalid_config, "cannot open event log " + path_.string());
}

EventRecord EventLog::append(EventKind kind, std::int64_t ts, json payload) {
  std::lock_guard lock(mutex_);
  EventRecord r{records_.empty() ? 1 : records_.back().seq + 1, kind, ts, std::move(payload)};
  if (out_.is_open()) {
    out_ << to_json(r).dump() << '\n';
    out_.flush();
  }
  records_.push_back(r);
  return r;
}

std::vector<EventRecord> EventLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::vector<EventRecord> EventLog::records(EventKind kind) const {
  std::lock_guard lock(mutex_);
  std::vector<EventRecord> out;
  for (const auto& r : records_)
    if (r.kind == kind) out.push_back(r);
  return out;
}

std::size_t EventLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

void EventLog::flush() {
  std::lock_guard lock(mutex_);
  if (out_.is_open()) out_.flush();
}

}  // namespace expmon
