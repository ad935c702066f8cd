#pragma once

#include <httplib.h>

#include "expmon/error.hpp"
#include "expmon/pipeline.hpp"

namespace expmon {

// Registers the JSON API on `server`:
//   POST /observations            JSON-lines body -> 202 {accepted, fills, evaluations}
//   GET  /alerts?model=&limit=    newest first
//   GET  /assessments/latest?model=
//   GET  /assessments/{window_id}
//   GET  /scenarios, PUT /scenarios
//   GET  /approvals?state=, POST /approvals/{id} {"verdict", "resolver"}
//   GET  /healthz
void install_routes(httplib::Server& server, Pipeline& pipeline);

// HTTP status for a library error.
int http_status(ErrorKind kind);

}  // namespace expmon
