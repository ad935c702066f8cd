#include "expmon/drift.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "expmon/error.hpp"

namespace expmon {

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Small-lambda form converges where the alternating series does not:
    // CDF = sqrt(2 pi)/lambda * sum_k exp(-(2k-1)^2 pi^2 / (8 lambda^2)).
    const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
    double cdf = std::sqrt(2.0 * std::numbers::pi) / lambda * (y + std::pow(y, 9.0) + std::pow(y, 25.0) +
                                                               std::pow(y, 49.0) + std::pow(y, 81.0));
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw Error(ErrorKind::sample_too_small, "KS needs at least 2 points per sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());

  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  // Step both ECDFs past every copy of the current smallest value before
  // comparing, so ties never produce a spurious gap.
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }

  KsResult r;
  r.statistic = d;
  const double ne = na * nb / (na + nb);
  r.p_value = kolmogorov_survival(std::sqrt(ne) * d);
  return r;
}

ChiSquareResult chi_square_categorical(const std::map<std::string, std::uint64_t>& window_counts,
                                       const std::map<std::string, std::uint64_t>& training_counts) {
  std::uint64_t train_total = 0;
  for (const auto& [c, k] : training_counts) train_total += k;
  if (train_total == 0) throw Error(ErrorKind::precondition, "training counts are all zero");
  if (window_counts.empty() && training_counts.empty())
    throw Error(ErrorKind::precondition, "no categories");

  std::uint64_t n = 0;
  for (const auto& [c, k] : window_counts) n += k;

  struct Cell {
    double observed = 0.0;
    double expected = 0.0;
  };
  std::map<std::string, Cell> cells;
  for (const auto& [c, k] : training_counts)
    cells[c].expected = static_cast<double>(n) * static_cast<double>(k) / static_cast<double>(train_total);
  for (const auto& [c, k] : window_counts) cells[c].observed = static_cast<double>(k);

  std::vector<Cell> kept;
  Cell other;
  bool have_other = false;
  for (const auto& [c, cell] : cells) {
    if (cell.expected >= 5.0) {
      kept.push_back(cell);
    } else {
      other.observed += cell.observed;
      other.expected += cell.expected;
      have_other = true;
    }
  }
  if (have_other) {
    if (other.expected >= 5.0 || kept.empty()) {
      kept.push_back(other);
    } else {
      auto smallest = std::min_element(kept.begin(), kept.end(),
                                       [](const Cell& l, const Cell& r) { return l.expected < r.expected; });
      smallest->observed += other.observed;
      smallest->expected += other.expected;
    }
  }

  ChiSquareResult r;
  if (kept.size() < 2) {
    r.skipped = true;
    return r;
  }
  for (const auto& cell : kept) {
    const double diff = cell.observed - cell.expected;
    r.statistic += diff * diff / cell.expected;
  }
  r.degrees_of_freedom = kept.size() - 1;
  r.p_value = r.statistic > 0.0
                  ? boost::math::gamma_q(0.5 * static_cast<double>(r.degrees_of_freedom), 0.5 * r.statistic)
                  : 1.0;
  return r;
}

std::vector<double> benjamini_hochberg(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return p_values[l] < p_values[r]; });

  std::vector<double> adjusted(m);
  double running = 1.0;
  for (std::size_t rank = m; rank >= 1; --rank) {
    const std::size_t idx = order[rank - 1];
    running = std::min(running, p_values[idx] * static_cast<double>(m) / static_cast<double>(rank));
    adjusted[idx] = std::max(std::min(running, 1.0), p_values[idx]);
  }
  return adjusted;
}

std::vector<double> bonferroni(std::span<const double> p_values) {
  std::vector<double> adjusted;
  adjusted.reserve(p_values.size());
  for (double p : p_values) adjusted.push_back(std::min(1.0, p * static_cast<double>(p_values.size())));
  return adjusted;
}

std::string_view to_string(TestKind v) { return v == TestKind::ks ? "ks" : "chi-square"; }

std::string_view to_string(DriftStatus v) {
  switch (v) {
    case DriftStatus::no_drift: return "no-drift";
    case DriftStatus::drift: return "drift";
    case DriftStatus::insufficient_window: return "insufficient-window";
  }
  return "no-drift";
}

std::string_view to_string(Correction v) {
  return v == Correction::benjamini_hochberg ? "benjamini-hochberg" : "bonferroni";
}

Correction correction_from_string(std::string_view text) {
  if (text == "benjamini-hochberg" || text == "bh") return Correction::benjamini_hochberg;
  if (text == "bonferroni") return Correction::bonferroni;
  throw Error(ErrorKind::invalid_config, "unknown correction '" + std::string(text) + "'");
}

DriftReport detect_drift(const WindowView& view, const TrainingProfile& profile, const DriftConfig& config) {
  DriftReport report;
  if (view.fill() < config.min_window) {
    report.status = DriftStatus::insufficient_window;
    return report;
  }

  auto run_ks = [&](const std::string& name, const std::vector<double>& column, const NumericSummary& ref) {
    FeatureTestResult r;
    r.feature = name;
    r.test = TestKind::ks;
    if (column.size() < 2 || ref.reservoir.size() < 2) {
      r.skipped = true;
      return r;
    }
    KsResult ks = ks_two_sample(column, ref.reservoir);
    r.statistic = ks.statistic;
    r.p_value = ks.p_value;
    return r;
  };

  for (const auto& fp : profile.features) {
    if (fp.kind == FeatureKind::categorical) {
      FeatureTestResult r;
      r.feature = fp.name;
      r.test = TestKind::chi_square;
      ChiSquareResult chi = chi_square_categorical(view.category_counts(fp.name), fp.categorical.counts);
      r.skipped = chi.skipped;
      r.statistic = chi.statistic;
      r.p_value = chi.p_value;
      report.results.push_back(r);
    } else {
      report.results.push_back(run_ks(fp.name, view.numeric_column(fp.name), fp.numeric));
    }
  }
  if (profile.prediction) {
    const std::string name(kPredictionColumn);
    report.results.push_back(run_ks(name, view.numeric_column(name), *profile.prediction));
  }

  // Skipped tests stay out of the multiplicity family.
  std::vector<double> raw;
  std::vector<std::size_t> tested;
  for (std::size_t i = 0; i < report.results.size(); ++i) {
    if (!report.results[i].skipped) {
      raw.push_back(report.results[i].p_value);
      tested.push_back(i);
    }
  }
  std::vector<double> adjusted =
      config.correction == Correction::benjamini_hochberg ? benjamini_hochberg(raw) : bonferroni(raw);

  DriftAlert alert;
  for (std::size_t k = 0; k < tested.size(); ++k) {
    FeatureTestResult& r = report.results[tested[k]];
    r.p_adjusted = adjusted[k];
    r.drifted = r.p_adjusted < config.alpha;
    if (r.drifted) alert.drifted.push_back(r.feature);
  }

  if (alert.drifted.empty()) {
    report.status = DriftStatus::no_drift;
    return report;
  }
  report.status = DriftStatus::drift;
  alert.model = view.model();
  alert.window_id = view.id();
  alert.timestamp_ms = view.rows().back().timestamp_ms;
  alert.features = report.results;
  report.alert = std::move(alert);
  return report;
}

nlohmann::json to_json(const DriftAlert& alert) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& r : alert.features) {
    features.push_back({{"name", r.feature},
                        {"test", std::string(to_string(r.test))},
                        {"stat", r.statistic},
                        {"p", r.p_value},
                        {"p_adj", r.p_adjusted},
                        {"drifted", r.drifted}});
  }
  return {{"model", alert.model.name},
          {"version", alert.model.version},
          {"window_id", alert.window_id},
          {"ts", alert.timestamp_ms},
          {"features", features}};
}

}  // namespace expmon
