#include "expmon/error.hpp"

namespace expmon {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::malformed_document: return "malformed-document";
    case ErrorKind::schema_violation: return "schema-violation";
    case ErrorKind::missing_profile_statistic: return "missing-profile-statistic";
    case ErrorKind::moment_matching_infeasible: return "moment-matching-infeasible";
    case ErrorKind::empty_dataset: return "empty-dataset";
    case ErrorKind::schema_mismatch: return "schema-mismatch";
    case ErrorKind::unknown_model: return "unknown-model";
    case ErrorKind::sample_too_small: return "sample-too-small";
    case ErrorKind::category_mismatch: return "category-mismatch";
    case ErrorKind::no_scenarios: return "no-scenarios-registered";
    case ErrorKind::all_scores_minus_infinity: return "all-scores-minus-infinity";
    case ErrorKind::all_insufficient_data: return "all-insufficient-data";
    case ErrorKind::unknown_id: return "unknown-id";
    case ErrorKind::already_resolved: return "already-resolved";
    case ErrorKind::invalid_config: return "invalid-config";
    case ErrorKind::invalid_level: return "invalid-level";
    case ErrorKind::file_not_found: return "file-not-found";
    case ErrorKind::precondition: return "precondition";
  }
  return "unknown";
}

}  // namespace expmon
