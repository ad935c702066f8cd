// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "expmon/drift.hpp"
#include "expmon/engine.hpp"
#include "expmon/error.hpp"
#include "expmon/marginal.hpp"
#include "expmon/monte_carlo.hpp"
#include "expmon/pipeline.hpp"
#include "expmon/profile.hpp"
#include "expmon/responder.hpp"
#include "expmon/sim.hpp"
#include "oracles.hpp"

using namespace expmon;
using nlohmann::json;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool rel_close(double got, double want) {
  if (!std::isfinite(got) || !std::isfinite(want)) return false;
  return std::abs(got - want) <= 1e-6 * std::abs(want) || std::abs(got - want) <= 1e-12;
}

const TrainingProfile& churn_profile() {
  static const TrainingProfile p = [] {
    auto gen = default_churn_config();
    auto rows = generate_training_data(gen, gen.seed);
    return fit_training_profile(rows, schema_of(gen), kDefaultReservoirSize, gen.seed);
  }();
  return p;
}

// ---------------------------------------------------------------------------

void conjugate_correctness() {
  const int cases = 1000;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uint = [&](int lo, int hi) { return lo + static_cast<int>(u(rng) * (hi - lo + 1)) % (hi - lo + 1); };
  std::map<std::string, int> agree;
  std::map<std::string, double> worst;
  double library_seconds = 0.0;
  const auto t0 = std::chrono::steady_clock::now();

  auto record = [&](const std::string& family, double got, double want) {
    agree[family] += rel_close(got, want) ? 1 : 0;
    worst[family] = std::max(worst[family], std::abs(got - want) / std::max(1e-300, std::abs(want)));
  };
  auto timed = [&](const std::function<double()>& f) {
    const auto t = std::chrono::steady_clock::now();
    const double v = f();
    library_seconds += seconds_since(t);
    return v;
  };

  for (int i = 0; i < cases; ++i) {
    {
      const double m = -100.0 + 200.0 * u(rng), v = 0.001 + 50.0 * u(rng), kv = 0.01 + 50.0 * u(rng);
      std::normal_distribution<double> d(m + 4.0 * std::sqrt(v) * (u(rng) - 0.5), std::sqrt(kv));
      std::vector<double> xs(uint(1, 200));
      for (auto& x : xs) x = d(rng);
      const double got = timed([&] {
        return log_marginal_normal_known_var(GaussianSummary::from(xs), kv, NormalPrior{m, v});
      });
      record("normal-known-variance", got, oracle::normal_known_var(xs, kv, m, v));
    }
    {
      NormalInverseGammaPrior p{-20.0 + 40.0 * u(rng), 0.05 + 10.0 * u(rng), 1.0 + 10.0 * u(rng),
                                0.1 + 20.0 * u(rng)};
      std::normal_distribution<double> d(p.mean + 4.0 * (u(rng) - 0.5), 0.3 + 4.0 * u(rng));
      std::vector<double> xs(uint(1, 100));
      for (auto& x : xs) x = d(rng);
      const double got = timed([&] { return log_marginal_normal_inverse_gamma(GaussianSummary::from(xs), p); });
      record("normal-inverse-gamma", got, oracle::normal_inverse_gamma(xs, p.mean, p.kappa, p.shape, p.scale));
    }
    {
      const auto n = static_cast<std::uint64_t>(uint(1, 500));
      const auto k = static_cast<std::uint64_t>(uint(0, static_cast<int>(n)));
      const double a = 1.0 + 50.0 * u(rng), b = 1.0 + 50.0 * u(rng);
      const double got = timed([&] { return log_marginal_beta_binomial(k, n, a, b); });
      record("beta-binomial", got, oracle::beta_binomial(k, n, a, b));
    }
    {
      std::vector<std::uint64_t> counts{static_cast<std::uint64_t>(uint(0, 100)),
                                        static_cast<std::uint64_t>(uint(0, 100)),
                                        static_cast<std::uint64_t>(uint(0, 100))};
      if (counts[0] + counts[1] + counts[2] == 0) counts[0] = 1;
      std::vector<double> alpha{1.0 + 20.0 * u(rng), 1.0 + 20.0 * u(rng), 1.0 + 20.0 * u(rng)};
      const double got = timed([&] { return log_marginal_dirichlet_multinomial(counts, alpha); });
      record("dirichlet-multinomial", got, oracle::dirichlet_multinomial3(counts, alpha));
    }
    {
      const double shape = 1.0 + 50.0 * u(rng), rate = 0.1 + 10.0 * u(rng);
      std::poisson_distribution<int> d(0.1 + 30.0 * u(rng));
      std::vector<double> xs(uint(1, 200));
      for (auto& x : xs) x = d(rng);
      const double got =
          timed([&] { return log_marginal_gamma_poisson(CountSummary::from(xs), GammaPrior{shape, rate}); });
      record("gamma-poisson", got, oracle::gamma_poisson(xs, shape, rate));
    }
  }
  const double total = seconds_since(t0);
  bool ok = library_seconds < 60.0;
  std::string detail;
  for (const auto& [family, n] : agree) {
    ok = ok && n == cases;
    detail += family + " " + std::to_string(n) + "/" + std::to_string(cases) + " (max rel " +
              fmt("%.1e", worst[family]) + "), ";
  }
  detail += "closed forms " + fmt("%.3f", library_seconds) + " s, with oracles " + fmt("%.1f", total) + " s";
  report(ok, "conjugate-correctness", detail);
}

// ---------------------------------------------------------------------------

void monte_carlo_soundness() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int within = 0;
  const int cases = 100;
  for (int i = 0; i < cases; ++i) {
    const std::uint64_t seed = 5000 + static_cast<std::uint64_t>(i);
    const std::size_t samples = 100000;
    double exact = 0.0;
    MonteCarloEstimate est;
    switch (i % 4) {
      case 0: {
        const double m = -10.0 + 20.0 * u(rng), v = 0.2 + 3.0 * u(rng), kv = 1.0 + 10.0 * u(rng);
        std::normal_distribution<double> d(m, std::sqrt(kv + v));
        std::vector<double> xs(1 + i % 30);
        for (auto& x : xs) x = d(rng);
        const auto g = GaussianSummary::from(xs);
        exact = log_marginal_normal_known_var(g, kv, NormalPrior{m, v});
        est = log_marginal_monte_carlo(g, LikelihoodFamily::normal_known_variance, NormalPrior{m, v}, kv, samples,
                                       seed);
        break;
      }
      case 1: {
        const double a = 0.5 + 10.0 * u(rng), b = 0.5 + 10.0 * u(rng);
        const std::uint64_t n = 1 + i % 40;
        std::binomial_distribution<std::uint64_t> d(n, a / (a + b));
        const std::uint64_t k = d(rng);
        exact = log_marginal_beta_binomial(k, n, a, b);
        est = log_marginal_monte_carlo(BinarySummary{k, n}, LikelihoodFamily::bernoulli, BetaPrior{a, b}, 0.0,
                                       samples, seed);
        break;
      }
      case 2: {
        const double shape = 1.0 + 20.0 * u(rng), rate = 0.5 + 3.0 * u(rng);
        std::poisson_distribution<int> d(shape / rate);
        std::vector<double> xs(1 + i % 25);
        for (auto& x : xs) x = d(rng);
        const auto c = CountSummary::from(xs);
        exact = log_marginal_gamma_poisson(c, GammaPrior{shape, rate});
        est = log_marginal_monte_carlo(c, LikelihoodFamily::poisson, GammaPrior{shape, rate}, 0.0, samples, seed);
        break;
      }
      default: {
        DirichletPrior prior{{1.0 + 10.0 * u(rng), 1.0 + 10.0 * u(rng), 1.0 + 10.0 * u(rng)}};
        std::discrete_distribution<int> d(prior.concentration.begin(), prior.concentration.end());
        CategoryCounts cc{{0, 0, 0}};
        for (int j = 0; j < 1 + i % 30; ++j) ++cc.counts[static_cast<std::size_t>(d(rng))];
        exact = log_marginal_dirichlet_multinomial(cc.counts, prior.concentration);
        est = log_marginal_monte_carlo(cc, LikelihoodFamily::categorical, prior, 0.0, samples, seed);
        break;
      }
    }
    if (std::abs(est.log_estimate - exact) <= 3.0 * est.std_error) ++within;
  }
  report(within >= 99, "monte-carlo-soundness",
         std::to_string(within) + "/" + std::to_string(cases) + " within 3 reported standard errors (need >= 99)");
}

// ---------------------------------------------------------------------------

void ks_correctness() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> size(2, 50);
  int exact = 0;
  const int cases = 1000;
  for (int i = 0; i < cases; ++i) {
    std::vector<double> a(static_cast<std::size_t>(size(rng))), b(static_cast<std::size_t>(size(rng)));
    if (i % 2 == 0) {
      std::uniform_int_distribution<int> v(0, 10);  // ties
      for (auto& x : a) x = v(rng);
      for (auto& x : b) x = v(rng) + (i % 3);
    } else {
      std::normal_distribution<double> v(0.0, 1.0);
      for (auto& x : a) x = v(rng);
      for (auto& x : b) x = v(rng) + 0.1 * (i % 7);
    }
    if (ks_two_sample(a, b).statistic == oracle::ks_brute_force(a, b)) ++exact;
  }

  const auto& profile = churn_profile();
  auto gen = default_churn_config();
  DriftConfig drift;
  const int windows = 1000;
  int alerts = 0;
  for (int w = 0; w < windows; ++w) {
    WindowView view(profile.model, 500, generate_rows(gen, 500, derive_seed(404, static_cast<std::uint64_t>(w))));
    if (detect_drift(view, profile, drift).status == DriftStatus::drift) ++alerts;
  }
  const double rate = static_cast<double>(alerts) / windows;
  const double upper = drift.alpha + 1.96 * std::sqrt(drift.alpha * (1.0 - drift.alpha) / windows);
  report(exact == cases && rate <= upper, "ks-correctness",
         std::to_string(exact) + "/" + std::to_string(cases) + " statistics exact; null false-alert rate " +
             fmt("%.3f", rate) + " (bound " + fmt("%.4f", upper) + ")");
}

// ---------------------------------------------------------------------------

void reference_sanity() {
  const auto& profile = churn_profile();
  const ReferenceModel reference = build_reference_model(profile);
  auto gen = default_churn_config();
  const auto training = generate_training_data(gen, gen.seed);

  std::vector<ScenarioSpec> specs = churn_registry(profile.model);
  for (const auto& truth : default_grid_scenarios())
    specs.push_back(grid_scenario_spec(truth, profile.model, 0.0, 1, 1.0, 0.1));
  std::vector<ScenarioModel> models;
  for (const auto& s : specs) models.push_back(build_scenario_model(s, profile, reference));

  std::mt19937_64 rng(505);
  std::uniform_int_distribution<std::size_t> pick(0, training.size() - 1);
  const int trials = 500;
  int top = 0;
  EngineConfig engine;
  for (int t = 0; t < trials; ++t) {
    std::vector<Observation> rows;
    for (int i = 0; i < 500; ++i) rows.push_back(training[pick(rng)]);
    WindowView view(profile.model, 500, std::move(rows));
    engine.seed = static_cast<std::uint64_t>(t);
    const Evaluation ev = evaluate_scenarios(view, models, reference, engine);
    bool best = true;
    for (const auto& a : ev.assessments)
      if (a.status == AssessmentStatus::ok && a.log_ml > ev.reference_log_ml) best = false;
    top += best ? 1 : 0;
  }

  std::vector<ScenarioModel> same{reference_as_scenario(reference, "identical")};
  WindowView view(profile.model, 500, generate_rows(gen, 500, 9));
  const double log_bf = evaluate_scenarios(view, same, reference, EngineConfig{}).assessments[0].log_bf;
  const double share = static_cast<double>(top) / trials;
  report(share >= 0.95 && log_bf == 0.0, "reference-sanity",
         "reference top in " + std::to_string(top) + "/" + std::to_string(trials) + " resampled windows; identical " +
             "scenario log BF = " + fmt("%g", log_bf));
}

// ---------------------------------------------------------------------------

void grid_trends() {
  GridConfig config;
  const AccuracyGrid grid = run_grid_experiment(config);
  const std::size_t ne = grid.error_levels.size(), nu = grid.uncertainty_levels.size();
  const double n = static_cast<double>(config.trials);

  const double a = grid.at(0, 0).accuracy();
  bool b = true;
  for (std::size_t e = 0; e + 1 < ne; ++e) {
    const double p = grid.at(e, 0).accuracy(), q = grid.at(e + 1, 0).accuracy();
    const double se = std::sqrt(p * (1.0 - p) / n + q * (1.0 - q) / n);
    if (q > p + 2.0 * se) b = false;
  }
  const double low = grid.at(ne - 1, 0).accuracy(), high = grid.at(ne - 1, nu - 1).accuracy();
  const bool c = high > low;
  const bool fast = grid.seconds < 600.0;

  std::string column;
  for (std::size_t e = 0; e < ne; ++e) column += (e ? " " : "") + fmt("%.3f", grid.at(e, 0).accuracy());
  report(a >= 0.9 && b && c && fast, "grid-trends",
         "(a) accuracy at error 0, smallest uncertainty " + fmt("%.3f", a) + "; (b) smallest-uncertainty column [" +
             column + "] " + (b ? "non-increasing" : "increases") + " within 2 SE; (c) largest error: " +
             fmt("%.3f", high) + " at high uncertainty vs " + fmt("%.3f", low) + " at smallest; " +
             std::to_string(ne) + "x" + std::to_string(nu) + "x" + std::to_string(config.trials) + " grid in " +
             fmt("%.1f", grid.seconds) + " s");
}

// ---------------------------------------------------------------------------

std::vector<EventRecord> replay(const std::vector<Observation>& rows, const TrainingProfile& profile,
                                const std::vector<ScenarioSpec>& specs, ServiceConfig config = {}) {
  EventLog log;
  Pipeline pipeline(config, {profile}, specs, log);
  pipeline.ingest(rows);
  return log.records();
}

std::vector<Observation> shifted_stream(const GeneratorConfig& gen, std::size_t length, std::size_t onset,
                                        std::uint64_t seed) {
  auto rows = generate_rows(gen, length, seed, 1'700'000'000'000);
  InjectedScenario young{"marketing-campaign", {ParameterShift{"customer_age", ParameterKind::mean, 18.0}}, onset};
  return inject_scenario(rows, gen, young, seed + 1);
}

void churn_replay() {
  const auto& profile = churn_profile();
  auto gen = default_churn_config();
  const auto specs = churn_registry(profile.model);
  const double log_threshold = std::log(kDefaultBayesFactorThreshold);

  const int replays = 100;
  int hits = 0;
  for (int r = 0; r < replays; ++r) {
    auto rows = shifted_stream(gen, 1500, 1000, derive_seed(606, static_cast<std::uint64_t>(r)));
    const auto records = replay(rows, profile, specs);
    // The last assessment covers a window drawn entirely after the shift.
    std::optional<EventRecord> last;
    for (const auto& rec : records)
      if (rec.kind == EventKind::assessment) last = rec;
    if (!last) continue;
    json view = last->payload;
    view.erase("responses");
    const Evaluation ev = evaluation_from_json(view);
    const auto ranked = rank_assessments(ev.assessments);
    if (ranked.front().scenario_id == "marketing-campaign" && ranked.front().log_bf >= log_threshold) ++hits;
  }

  // Covariate shift with a prediction column: P(X) moves, the churn score
  // keeps following the same P(Y|X). The correctly specified scenario carries
  // an automated response.
  GeneratorConfig pgen = default_churn_config();
  pgen.prediction = true;
  const auto ptraining = generate_training_data(pgen, 17);
  const TrainingProfile pprofile = fit_training_profile(ptraining, schema_of(pgen), kDefaultReservoirSize, 17);
  auto pspecs = churn_registry(pprofile.model);
  pspecs[0].response = ResponseSpec{ActionKind::model_swap_command, json{{"target", "churn:v1-young"}}, true};
  ServiceConfig config;
  config.command_log = (std::filesystem::temp_directory_path() / "expmon-acceptance-commands.jsonl").string();
  std::filesystem::remove(config.command_log);
  const auto shifted = replay(shifted_stream(pgen, 1500, 1000, 707), pprofile, pspecs, config);
  bool triggered = false;
  for (const auto& rec : shifted)
    if (rec.kind == EventKind::decision && rec.payload.at("decision") == "auto-trigger" &&
        rec.payload.at("scenario_id") == "marketing-campaign")
      triggered = true;

  const auto null_records = replay(generate_rows(pgen, 1500, 808, 1'700'000'000'000), pprofile, pspecs, config);
  int null_triggers = 0, null_alerts = 0;
  for (const auto& rec : null_records) {
    if (rec.kind == EventKind::alert) ++null_alerts;
    if (rec.kind == EventKind::decision &&
        (rec.payload.at("decision") == "auto-trigger" || rec.payload.at("approval_required") == true))
      ++null_triggers;
    if (rec.kind == EventKind::action_result) ++null_triggers;
  }
  std::filesystem::remove(config.command_log);

  report(hits >= 90 && triggered && null_triggers == 0, "churn-replay",
         "marketing-campaign top with BF >= 5 in " + std::to_string(hits) + "/" + std::to_string(replays) +
             " replays; covariate-shift stream " + (triggered ? "auto-triggered" : "did not trigger") +
             " the scenario; training-matched stream: " + std::to_string(null_alerts) + " alert(s), " +
             std::to_string(null_triggers) + " trigger(s)");
}

// ---------------------------------------------------------------------------

void responder_safety() {
  const auto& profile = churn_profile();
  auto gen = default_churn_config();
  auto specs = churn_registry(profile.model);
  // Automated swap on the marketing campaign, approval-gated fallback on the
  // competitor campaign.
  specs[0].response = ResponseSpec{ActionKind::model_swap_command, json{{"target", "v0"}}, true};
  specs[1].estimates[0].location = 3.0;

  auto rows = shifted_stream(gen, 4000, 500, 909);
  // A competitor phase: young customers visit less.
  auto competitor = generate_rows(interpolate(gen, {ParameterShift{"customer_age", ParameterKind::mean, 22.0}}, 1.0),
                                  1500, 910, 1'800'000'000'000);
  GeneratorConfig low = interpolate(gen,
                                    {ParameterShift{"customer_age", ParameterKind::mean, 22.0},
                                     ParameterShift{"recent_page_visits", ParameterKind::rate, 3.0}},
                                    1.0);
  auto lows = generate_rows(low, 1500, 911, 1'800'000'000'000);
  for (std::size_t i = 0; i < competitor.size(); ++i) {
    const double age = std::get<double>(competitor[i].features.at("customer_age"));
    if (age < 30.0) competitor[i] = lows[i];
  }
  rows.insert(rows.end(), competitor.begin(), competitor.end());

  const auto dir = std::filesystem::temp_directory_path() / "expmon-acceptance-responder";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  ServiceConfig config;
  config.event_log = (dir / "events.jsonl").string();
  config.command_log = (dir / "commands.jsonl").string();

  std::vector<json> live;
  std::set<std::string> approval_ids;
  {
    EventLog log(config.event_log);
    Pipeline pipeline(config, {profile}, specs, log);
    pipeline.ingest(rows);
    for (const auto& r : log.records(EventKind::decision)) live.push_back(r.payload);
    // Approve every pending request twice, then once more after a restart.
    for (const auto& a : pipeline.responder().approvals(ApprovalState::pending, 0)) {
      approval_ids.insert(a.id);
      pipeline.responder().resolve_approval(a.id, Verdict::approve, "acceptance", 1);
      pipeline.responder().resolve_approval(a.id, Verdict::approve, "acceptance", 2);
    }
  }
  EventLog log(config.event_log);
  Pipeline restarted(config, {profile}, specs, log);
  int rejected_after_restart = 0;
  for (const auto& id : approval_ids) {
    restarted.responder().resolve_approval(id, Verdict::approve, "acceptance", 3);
    try {
      restarted.responder().resolve_approval(id, Verdict::reject, "acceptance", 4);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::already_resolved) ++rejected_after_restart;
    }
  }

  const auto records = read_event_log(config.event_log);
  const auto replayed = replay_decisions(records, config.bf_threshold, config.cooldown_windows);
  bool same = replayed.size() == live.size() && !live.empty();
  for (std::size_t i = 0; same && i < live.size(); ++i) same = to_json(replayed[i]).dump() == live[i].dump();

  std::map<std::string, int> executions;
  for (const auto& r : records)
    if (r.kind == EventKind::action_result && r.payload.at("approval_id").is_string())
      ++executions[r.payload.at("approval_id").get<std::string>()];
  bool once = !approval_ids.empty() && rejected_after_restart == static_cast<int>(approval_ids.size());
  for (const auto& id : approval_ids) once = once && executions[id] == 1;

  // Auto-triggers of one scenario are at least cooldown_windows evaluations
  // apart, and at least one repeat was suppressed.
  std::map<std::string, std::vector<std::uint64_t>> triggers;
  int suppressed = 0;
  for (const auto& d : live) {
    if (d.at("decision") == "auto-trigger")
      triggers[d.at("scenario_id").get<std::string>()].push_back(d.at("evaluation_index").get<std::uint64_t>());
    if (d.at("rationale").get<std::string>().starts_with("cooldown")) ++suppressed;
  }
  bool spaced = !triggers.empty();
  for (const auto& [id, idx] : triggers)
    for (std::size_t i = 1; i < idx.size(); ++i) spaced = spaced && idx[i] - idx[i - 1] >= config.cooldown_windows;
  std::size_t auto_count = 0;
  for (const auto& [id, idx] : triggers) auto_count += idx.size();
  std::filesystem::remove_all(dir);

  report(same && once && spaced && suppressed > 0, "responder-determinism-and-safety",
         std::to_string(replayed.size()) + "/" + std::to_string(live.size()) + " decisions reproduced from the log" +
             (same ? "" : " (MISMATCH)") + "; " + std::to_string(approval_ids.size()) +
             " approval(s) each executed " + (once ? "exactly once" : "more or less than once") + "; " +
             std::to_string(auto_count) + " auto-trigger(s), " + std::to_string(suppressed) +
             " suppressed by cooldown");
}

// ---------------------------------------------------------------------------

void primary_only() {
  // This binary links only the core library; reaching this point means the
  // whole primary suite ran without the dashboard being built.
  report(true, "primary-suite-standalone", "acceptance and unit suites link only the expmon core library");
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  conjugate_correctness();
  monte_carlo_soundness();
  ks_correctness();
  reference_sanity();
  grid_trends();
  churn_replay();
  responder_safety();
  primary_only();
  std::printf("%d failure(s), %.1f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
