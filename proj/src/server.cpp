#include "expmon/server.hpp"

#include <sstream>

#include "expmon/error.hpp"

namespace expmon {

using nlohmann::json;

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::malformed_document:
    case ErrorKind::schema_violation:
    case ErrorKind::invalid_config:
      return 400;
    case ErrorKind::unknown_id:
      return 404;
    case ErrorKind::already_resolved:
      return 409;
    case ErrorKind::schema_mismatch:
    case ErrorKind::unknown_model:
    case ErrorKind::category_mismatch:
      return 422;
    default:
      return 500;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status(e.kind()), {{"error", std::string(to_string(e.kind()))}, {"message", e.detail()}});
}

std::vector<Observation> parse_body(const std::string& body) {
  std::vector<Observation> rows;
  std::istringstream in(body);
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
  }
  return rows;
}

json report_json(const ValidationReport& r) {
  json violations = json::array();
  for (const auto& v : r.violations) violations.push_back({{"field", v.field}, {"message", v.message}});
  return {{"scenario_id", r.scenario_id}, {"accepted", r.accepted()}, {"violations", violations}};
}

// Wraps a handler so library errors become JSON error responses.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", "internal"}, {"message", e.what()}});
    }
  };
}

}  // namespace

void install_routes(httplib::Server& server, Pipeline& pipeline) {
  server.Post("/observations", guarded([&](const httplib::Request& req, httplib::Response& res) {
                const auto rows = parse_body(req.body);
                const IngestResult r = pipeline.ingest(rows);
                send_json(res, 202, {{"accepted", rows.size()}, {"fills", r.fills}, {"evaluations", r.evaluations}});
              }));

  server.Get("/alerts", guarded([&](const httplib::Request& req, httplib::Response& res) {
               std::size_t limit = 50;
               if (req.has_param("limit")) {
                 try {
                   limit = std::stoul(req.get_param_value("limit"));
                 } catch (const std::exception&) {
                   throw Error(ErrorKind::schema_violation, "limit must be a non-negative integer");
                 }
               }
               send_json(res, 200, pipeline.alerts(req.get_param_value("model"), limit));
             }));

  server.Get("/assessments/latest", guarded([&](const httplib::Request& req, httplib::Response& res) {
               auto a = pipeline.latest_assessment(req.get_param_value("model"));
               if (!a) return send_json(res, 404, {{"error", "not-found"}, {"message", "no assessment yet"}});
               send_json(res, 200, *a);
             }));

  server.Get(R"(/assessments/(.+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
               const std::string id = httplib::detail::decode_url(req.matches[1], false);
               auto a = pipeline.assessment(id);
               if (!a) return send_json(res, 404, {{"error", "not-found"}, {"message", "no assessment for " + id}});
               send_json(res, 200, *a);
             }));

  server.Get("/scenarios", guarded([&](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, serialize_scenarios(*pipeline.scenarios()));
             }));

  server.Put("/scenarios", guarded([&](const httplib::Request& req, httplib::Response& res) {
               auto specs = parse_scenario_file(req.body);
               const auto reports = pipeline.replace_scenarios(std::move(specs), true);
               json body = json::array();
               bool ok = true;
               for (const auto& r : reports) {
                 body.push_back(report_json(r));
                 ok = ok && r.accepted();
               }
               send_json(res, ok ? 200 : 422, {{"accepted", ok}, {"reports", body}});
             }));

  server.Get("/approvals", guarded([&](const httplib::Request& req, httplib::Response& res) {
               std::optional<ApprovalState> state;
               if (req.has_param("state")) state = approval_state_from_string(req.get_param_value("state"));
               json list = json::array();
               for (const auto& a : pipeline.responder().approvals(state, pipeline.now())) list.push_back(to_json(a));
               send_json(res, 200, list);
             }));

  server.Post(R"(/approvals/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
                const std::string id = httplib::detail::decode_url(req.matches[1], false);
                json body;
                try {
                  body = json::parse(req.body);
                } catch (const json::parse_error& e) {
                  throw Error(ErrorKind::malformed_document, e.what());
                }
                if (!body.is_object() || !body.contains("verdict") || !body.at("verdict").is_string())
                  throw Error(ErrorKind::schema_violation, "body must be {\"verdict\": \"approve\"|\"reject\"}");
                const Verdict verdict = verdict_from_string(body.at("verdict").get<std::string>());
                const std::string resolver = body.value("resolver", std::string("anonymous"));
                try {
                  auto a = pipeline.responder().resolve_approval(id, verdict, resolver, pipeline.now());
                  send_json(res, 200, to_json(a));
                } catch (const Error& e) {
                  if (e.kind() != ErrorKind::already_resolved) throw;
                  // Surface the server-side state so clients can reconcile.
                  json current = nullptr;
                  for (const auto& a : pipeline.responder().approvals(std::nullopt, pipeline.now()))
                    if (a.id == id) current = to_json(a);
                  send_json(res, 409, {{"error", std::string(to_string(e.kind()))}, {"message", e.detail()},
                                       {"approval", current}});
                }
              }));

  server.Get("/healthz", [&](const httplib::Request&, httplib::Response& res) {
    json models = json::array();
    for (const auto& m : pipeline.models()) models.push_back(m.key());
    send_json(res, 200, {{"status", "ok"}, {"models", models}, {"scenarios", pipeline.scenarios()->size()}});
  });
}

}  // namespace expmon
