#include "expmon/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "expmon/error.hpp"

extern char** environ;

namespace expmon {

using nlohmann::json;

namespace {

const std::vector<std::string> kKeys = {
    "host",       "port",      "profiles",     "registry",     "event_log",         "command_log",
    "window",     "stride",    "alpha",        "correction",   "min_window",        "min_subgroup_rows",
    "bf_threshold", "cooldown_windows", "approval_ttl_ms", "mc_samples", "seed", "webhook_attempts",
    "webhook_timeout_ms"};

[[noreturn]] void bad(const std::string& key, const std::string& message) {
  throw Error(ErrorKind::invalid_config, key + ": " + message);
}

template <typename T>
T get_number(const json& v, const std::string& key) {
  if (!v.is_number()) bad(key, "expected a number");
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) bad(key, "expected an integer");
    if constexpr (std::is_unsigned_v<T>)
      if (v.get<std::int64_t>() < 0) bad(key, "must be non-negative");
  }
  return v.get<T>();
}

void apply_one(ServiceConfig& c, const std::string& key, const json& v) {
  auto str = [&]() {
    if (!v.is_string()) bad(key, "expected a string");
    return v.get<std::string>();
  };
  if (key == "host") c.host = str();
  else if (key == "port") c.port = get_number<int>(v, key);
  else if (key == "profiles") {
    if (!v.is_array()) bad(key, "expected an array of paths");
    c.profiles.clear();
    for (const auto& p : v) {
      if (!p.is_string()) bad(key, "expected an array of paths");
      c.profiles.push_back(p.get<std::string>());
    }
  } else if (key == "registry") c.registry = str();
  else if (key == "event_log") c.event_log = str();
  else if (key == "command_log") c.command_log = str();
  else if (key == "window") c.window = get_number<std::size_t>(v, key);
  else if (key == "stride") c.stride = get_number<std::size_t>(v, key);
  else if (key == "alpha") c.alpha = get_number<double>(v, key);
  else if (key == "correction") {
    try {
      c.correction = correction_from_string(str());
    } catch (const Error&) {
      bad(key, "expected benjamini-hochberg or bonferroni");
    }
  } else if (key == "min_window") c.min_window = get_number<std::size_t>(v, key);
  else if (key == "min_subgroup_rows") c.min_subgroup_rows = get_number<std::size_t>(v, key);
  else if (key == "bf_threshold") c.bf_threshold = get_number<double>(v, key);
  else if (key == "cooldown_windows") c.cooldown_windows = get_number<std::uint64_t>(v, key);
  else if (key == "approval_ttl_ms") c.approval_ttl_ms = get_number<std::int64_t>(v, key);
  else if (key == "mc_samples") c.mc_samples = get_number<std::size_t>(v, key);
  else if (key == "seed") c.seed = get_number<std::uint64_t>(v, key);
  else if (key == "webhook_attempts") c.webhook_attempts = get_number<int>(v, key);
  else if (key == "webhook_timeout_ms") c.webhook_timeout_ms = get_number<int>(v, key);
  else bad(key, "unknown configuration key");
}

}  // namespace

void apply_config_json(ServiceConfig& config, const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::invalid_config, "configuration must be a JSON object");
  for (const auto& [key, value] : j.items()) apply_one(config, key, value);
}

void apply_environment(ServiceConfig& config, const std::map<std::string, std::string>& environment) {
  for (const auto& key : kKeys) {
    std::string name = "DRIFT_" + key;
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::toupper(ch); });
    auto it = environment.find(name);
    if (it == environment.end()) continue;
    const std::string& text = it->second;
    json value;
    if (key == "profiles") {
      value = json::array();
      std::size_t start = 0;
      while (start <= text.size()) {
        auto end = text.find(',', start);
        if (end == std::string::npos) end = text.size();
        if (end > start) value.push_back(text.substr(start, end - start));
        start = end + 1;
      }
    } else if (key == "host" || key == "registry" || key == "event_log" || key == "command_log" ||
               key == "correction") {
      value = text;
    } else {
      try {
        value = json::parse(text);
      } catch (const json::parse_error&) {
        bad(name, "expected a number, got '" + text + "'");
      }
    }
    try {
      apply_one(config, key, value);
    } catch (const Error& e) {
      throw Error(ErrorKind::invalid_config, name + " (" + e.detail() + ")");
    }
  }
}

std::map<std::string, std::string> process_environment() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    std::string entry(*e);
    auto eq = entry.find('=');
    if (eq != std::string::npos && entry.starts_with("DRIFT_")) out[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  return out;
}

void validate(const ServiceConfig& c) {
  if (c.port < 0 || c.port > 65535) bad("port", "must be in [0, 65535]");
  if (c.window < 2) bad("window", "must be >= 2");
  if (c.stride > c.window) bad("stride", "must not exceed window");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) bad("alpha", "must be in (0, 1)");
  if (c.min_window < 2 || c.min_window > c.window) bad("min_window", "must be in [2, window]");
  if (!(c.bf_threshold > 0.0)) bad("bf_threshold", "must be > 0");
  if (c.approval_ttl_ms <= 0) bad("approval_ttl_ms", "must be > 0");
  if (c.mc_samples < 1000) bad("mc_samples", "must be >= 1000");
  if (c.webhook_attempts < 1) bad("webhook_attempts", "must be >= 1");
  if (c.webhook_timeout_ms < 1) bad("webhook_timeout_ms", "must be >= 1");
}

ServiceConfig load_config(const std::filesystem::path& file, const std::map<std::string, std::string>& environment) {
  ServiceConfig config;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::file_not_found, file.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::invalid_config, file.string() + ": " + e.what());
    }
    apply_config_json(config, j);
  }
  apply_environment(config, environment);
  validate(config);
  return config;
}

json to_json(const ServiceConfig& c) {
  return {{"host", c.host},
          {"port", c.port},
          {"profiles", c.profiles},
          {"registry", c.registry},
          {"event_log", c.event_log},
          {"command_log", c.command_log},
          {"window", c.window},
          {"stride", c.effective_stride()},
          {"alpha", c.alpha},
          {"correction", std::string(to_string(c.correction))},
          {"min_window", c.min_window},
          {"min_subgroup_rows", c.min_subgroup_rows},
          {"bf_threshold", c.bf_threshold},
          {"cooldown_windows", c.cooldown_windows},
          {"approval_ttl_ms", c.approval_ttl_ms},
          {"mc_samples", c.mc_samples},
          {"seed", c.seed},
          {"webhook_attempts", c.webhook_attempts},
          {"webhook_timeout_ms", c.webhook_timeout_ms}};
}

}  // namespace expmon
