#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace expmon {

enum class EventKind { ingest_summary, alert, assessment, decision, approval, action_result };

std::string_view to_string(EventKind v);
EventKind event_kind_from_string(std::string_view text);

struct EventRecord {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::ingest_summary;
  std::int64_t ts = 0;
  nlohmann::json payload;
};

nlohmann::json to_json(const EventRecord& record);
EventRecord event_from_json(const nlohmann::json& j);

// Append-only JSON-lines log with strictly increasing sequence numbers. With
// a path, existing records are loaded on construction and every append is
// written through; without one the log lives in memory only.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(std::filesystem::path path);

  EventRecord append(EventKind kind, std::int64_t ts, nlohmann::json payload);
  std::vector<EventRecord> records() const;
  std::vector<EventRecord> records(EventKind kind) const;
  std::size_t size() const;
  void flush();

 private:
  mutable std::mutex mutex_;
  std::filesystem::path path_;
  std::ofstream out_;
  std::vector<EventRecord> records_;
};

// Parses a JSON-lines event log; errors name the offending line.
std::vector<EventRecord> read_event_log(const std::filesystem::path& path);

}  // namespace expmon
