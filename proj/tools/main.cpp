// expmon command-line front end: serve, replay, simulate, fit-profile,
// validate-registry.
#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "expmon/config.hpp"
#include "expmon/error.hpp"
#include "expmon/events.hpp"
#include "expmon/pipeline.hpp"
#include "expmon/profile.hpp"
#include "expmon/registry.hpp"
#include "expmon/server.hpp"
#include "expmon/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace expmon;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNotFound = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_config:
    case ErrorKind::invalid_level:
      return kExitUsage;
    case ErrorKind::file_not_found:
      return kExitNotFound;
    default:
      return kExitData;
  }
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  out << content;
  if (!out) throw Error(ErrorKind::invalid_config, "cannot write " + path.string());
}

void write_rows(const fs::path& path, const std::vector<Observation>& rows) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& r : rows) out << to_json(r).dump() << '\n';
  if (!out) throw Error(ErrorKind::invalid_config, "cannot write " + path.string());
}

std::vector<TrainingProfile> load_profiles(const std::vector<std::string>& paths) {
  std::vector<TrainingProfile> out;
  for (const auto& p : paths) out.push_back(load_profile(p));
  return out;
}

struct ServeOptions {
  std::string config;
};

int run_serve(const ServeOptions& o) {
  ServiceConfig config = load_config(o.config, process_environment());
  auto profiles = load_profiles(config.profiles);
  std::vector<ScenarioSpec> scenarios;
  if (!config.registry.empty() && fs::exists(config.registry)) scenarios = load_registry(config.registry);
  EventLog log = config.event_log.empty() ? EventLog() : EventLog(config.event_log);
  Pipeline pipeline(config, std::move(profiles), std::move(scenarios), log, Clock::wall);

  httplib::Server server;
  install_routes(server, pipeline);
  int port = config.port;
  if (port == 0) {
    port = server.bind_to_any_port(config.host);
  } else if (!server.bind_to_port(config.host, port)) {
    std::cerr << "bind-failure: cannot bind " << config.host << ':' << port << '\n';
    return kExitUsage;
  }
  if (port < 0) {
    std::cerr << "bind-failure: cannot bind " << config.host << '\n';
    return kExitUsage;
  }
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on " << config.host << ':' << port << std::endl;
  server.listen_after_bind();
  g_server = nullptr;
  log.flush();
  std::cout << "stopped, event log flushed" << std::endl;
  return 0;
}

struct ReplayOptions {
  std::string config;
  std::string stream;
  std::vector<std::string> profiles;
  std::string registry;
  std::string events;
  std::string command_log;
  bool force = false;
};

int run_replay(const ReplayOptions& o) {
  ServiceConfig config = load_config(o.config, process_environment());
  for (const auto& p : o.profiles) config.profiles.push_back(p);
  if (!o.registry.empty()) config.registry = o.registry;
  if (!o.command_log.empty()) config.command_log = o.command_log;
  config.event_log = o.events;
  if (config.profiles.empty()) throw Error(ErrorKind::invalid_config, "profiles: pass --profile or set it in --config");

  std::ifstream in(o.stream);
  if (!in) throw Error(ErrorKind::file_not_found, o.stream);
  auto profiles = load_profiles(config.profiles);
  std::vector<ScenarioSpec> scenarios;
  if (!config.registry.empty()) scenarios = load_registry(config.registry);

  if (!o.events.empty() && fs::exists(o.events)) {
    if (!o.force) throw Error(ErrorKind::invalid_config, "events: " + o.events + " exists (use --force to overwrite)");
    fs::remove(o.events);
  }
  EventLog log = o.events.empty() ? EventLog() : EventLog(o.events);
  Pipeline pipeline(config, std::move(profiles), std::move(scenarios), log, Clock::data);
  const ReplaySummary s = replay_stream(in, pipeline, log);
  log.flush();
  json out = {{"observations", s.observations}, {"evaluations", s.evaluations}, {"events", s.events}};
  std::cout << out.dump(2) << std::endl;
  return 0;
}

struct SimulateOptions {
  std::vector<double> errors{0.0, 0.05, 0.1, 0.2, 0.3, 0.4};
  std::vector<double> uncertainties{0.25, 0.5, 1.0, 2.0, 4.0};
  std::size_t trials = 200;
  std::uint64_t seed = 7;
  double threshold = 5.0;
  std::string csv = "grid.csv";
  std::string manifest = "grid_manifest.json";
  std::string data_dir;
  bool no_grid = false;
};

void write_simulation_data(const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  GeneratorConfig gen = default_churn_config();
  const auto training = generate_training_data(gen, derive_seed(seed, 1));
  const TrainingProfile profile = fit_training_profile(training, schema_of(gen), kDefaultReservoirSize, seed);
  write_rows(dir / "training.jsonl", training);
  write_file(dir / "profile.json", to_json(profile).dump(2) + "\n");
  write_file(dir / "registry.json", serialize_scenarios(churn_registry(gen.model)).dump(2) + "\n");

  const std::int64_t t0 = 1'700'000'000'000;
  auto stream = [&](std::uint64_t s) {
    auto rows = generate_rows(gen, 2000, derive_seed(seed, s));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].timestamp_ms = t0 + static_cast<std::int64_t>(i) * 1000;
    return rows;
  };
  write_rows(dir / "stream_null.jsonl", stream(2));
  const ParameterShift campaign{"customer_age", ParameterKind::mean, 18.0};
  write_rows(dir / "stream_campaign.jsonl",
             inject_scenario(stream(3), gen, {"marketing-campaign", {campaign}, 1000, Transition::abrupt, 1},
                             derive_seed(seed, 4)));
  write_rows(dir / "stream_campaign_ramp.jsonl",
             inject_scenario(stream(5), gen, {"marketing-campaign", {campaign}, 600, Transition::gradual, 400},
                             derive_seed(seed, 6)));
}

int run_simulate(const SimulateOptions& o) {
  if (!o.data_dir.empty()) {
    write_simulation_data(o.data_dir, o.seed);
    std::cout << "wrote training data, profile, registry and streams to " << o.data_dir << '\n';
  }
  if (o.no_grid) return 0;
  GridConfig grid;
  grid.error_levels = o.errors;
  grid.uncertainty_levels = o.uncertainties;
  grid.trials = o.trials;
  grid.seed = o.seed;
  grid.threshold = o.threshold;
  const AccuracyGrid result = run_grid_experiment(grid);
  write_file(o.csv, grid_csv(result));
  write_file(o.manifest, grid_manifest(grid, result).dump(2) + "\n");
  std::cout << grid_csv(result) << "# accuracy = P(alert, injected scenario ranked first, BF >= " << o.threshold
            << "); " << result.seconds << " s\n";
  return 0;
}

struct FitOptions {
  std::string input;
  std::string output;
  std::string model;
  std::string version = "v1";
  std::string schema;
  std::vector<std::string> counts;
  std::size_t reservoir = kDefaultReservoirSize;
  std::uint64_t seed = 0;
};

int run_fit(const FitOptions& o) {
  std::ifstream in(o.input);
  if (!in) throw Error(ErrorKind::file_not_found, o.input);
  std::optional<FeatureSchema> schema;
  if (!o.schema.empty()) {
    std::ifstream s(o.schema);
    if (!s) throw Error(ErrorKind::file_not_found, o.schema);
    try {
      schema = schema_from_json(json::parse(s));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::malformed_document, o.schema + ": " + e.what());
    }
  }
  std::vector<Observation> rows;
  if (fs::path(o.input).extension() == ".csv") {
    if (o.model.empty()) throw Error(ErrorKind::invalid_config, "model: --model is required for CSV input");
    const CsvTable table = read_csv_table(in);
    if (!schema) schema = infer_schema(table, o.counts);
    rows = rows_from_csv(table, *schema, {o.model, o.version});
  } else {
    rows = read_json_lines(in);
    if (!schema) schema = infer_schema(rows, o.counts);
  }
  if (!rows.empty() && !o.model.empty()) {
    for (auto& r : rows)
      if (r.model.name != o.model) throw Error(ErrorKind::unknown_model, "row for model " + r.model.key());
  }
  const TrainingProfile profile = fit_training_profile(rows, *schema, o.reservoir, o.seed);
  const std::string text = to_json(profile).dump(2) + "\n";
  if (o.output.empty())
    std::cout << text;
  else
    write_file(o.output, text);
  return 0;
}

struct ValidateOptions {
  std::string registry;
  std::vector<std::string> profiles;
};

int run_validate(const ValidateOptions& o) {
  const auto specs = load_registry(o.registry);
  const auto profiles = load_profiles(o.profiles);
  bool ok = true;
  json reports = json::array();
  for (const auto& spec : specs) {
    const TrainingProfile* profile = nullptr;
    for (const auto& p : profiles)
      if (p.model == spec.model) profile = &p;
    ValidationReport r{spec.id, {}};
    if (!profile)
      r.violations.push_back({"model", "no training profile for " + spec.model.key()});
    else
      r = validate_scenario(spec, *profile);
    json v = json::array();
    for (const auto& x : r.violations) v.push_back({{"field", x.field}, {"message", x.message}});
    reports.push_back({{"scenario_id", r.scenario_id}, {"accepted", r.accepted()}, {"violations", v}});
    ok = ok && r.accepted();
  }
  std::cout << reports.dump(2) << std::endl;
  return ok ? 0 : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drift monitor with Bayesian scenario identification"};
  app.require_subcommand(1);

  ServeOptions serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("-c,--config", serve.config, "JSON config file (DRIFT_* variables override it)");

  ReplayOptions replay;
  auto* replay_cmd = app.add_subcommand("replay", "Run the pipeline over a recorded JSON-lines stream");
  replay_cmd->add_option("-c,--config", replay.config, "JSON config file");
  replay_cmd->add_option("-s,--stream", replay.stream, "Observation stream (JSON lines)")->required();
  replay_cmd->add_option("-p,--profile", replay.profiles, "Training profile(s)");
  replay_cmd->add_option("-r,--registry", replay.registry, "Scenario registry");
  replay_cmd->add_option("-e,--events", replay.events, "Write the event log here");
  replay_cmd->add_option("--command-log", replay.command_log, "Command log for model-swap/fallback responses");
  replay_cmd->add_flag("-f,--force", replay.force, "Overwrite an existing event log");

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the accuracy grid over estimate error x uncertainty");
  sim_cmd->add_option("--errors", sim.errors, "Proportional error levels")->delimiter(',');
  sim_cmd->add_option("--uncertainties", sim.uncertainties, "Uncertainty levels")->delimiter(',');
  sim_cmd->add_option("--trials", sim.trials, "Trials per cell")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim.seed, "Experiment seed");
  sim_cmd->add_option("--threshold", sim.threshold, "Bayes factor threshold")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--csv", sim.csv, "Grid CSV output");
  sim_cmd->add_option("--manifest", sim.manifest, "Run manifest output");
  sim_cmd->add_option("--write-data", sim.data_dir, "Also write churn training data, profile, registry, streams");
  sim_cmd->add_flag("--no-grid", sim.no_grid, "Only write data files");

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit-profile", "Fit a training profile from JSON lines or CSV");
  fit_cmd->add_option("-i,--input", fit.input, "Training data (.jsonl or .csv)")->required();
  fit_cmd->add_option("-o,--output", fit.output, "Profile output (stdout when omitted)");
  fit_cmd->add_option("--model", fit.model, "Model name (required for CSV)");
  fit_cmd->add_option("--version", fit.version, "Model version for CSV input");
  fit_cmd->add_option("--schema", fit.schema, "Feature schema JSON (inferred when omitted)");
  fit_cmd->add_option("--count", fit.counts, "Treat these columns as counts")->delimiter(',');
  fit_cmd->add_option("--reservoir", fit.reservoir, "Reservoir size")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--seed", fit.seed, "Reservoir seed");

  ValidateOptions val;
  auto* val_cmd = app.add_subcommand("validate-registry", "Check a scenario file against training profiles");
  val_cmd->add_option("-r,--registry", val.registry, "Scenario registry")->required();
  val_cmd->add_option("-p,--profile", val.profiles, "Training profile(s)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (serve_cmd->parsed()) return run_serve(serve);
    if (replay_cmd->parsed()) return run_replay(replay);
    if (sim_cmd->parsed()) return run_simulate(sim);
    if (fit_cmd->parsed()) return run_fit(fit);
    if (val_cmd->parsed()) return run_validate(val);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
