#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace expmon {

enum class ErrorKind {
  malformed_document,
  schema_violation,
  missing_profile_statistic,
  moment_matching_infeasible,
  empty_dataset,
  schema_mismatch,
  unknown_model,
  sample_too_small,
  category_mismatch,
  no_scenarios,
  all_scores_minus_infinity,
  all_insufficient_data,
  unknown_id,
  already_resolved,
  invalid_config,
  invalid_level,
  file_not_found,
  precondition,
};

std::string_view to_string(ErrorKind kind);

// Every recoverable failure in the library surfaces as this exception; `kind`
// lets callers (CLI exit codes, HTTP status mapping) branch without parsing
// the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  // The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace expmon
