#include <doctest.h>

#include <algorithm>
#include <random>

#include "expmon/drift.hpp"
#include "expmon/error.hpp"
#include "expmon/sim.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace expmon;

TEST_CASE("KS statistic on small samples") {
  std::vector<double> a{1, 2, 3}, b{1, 2, 3};
  CHECK(ks_two_sample(a, b).statistic == 0.0);
  CHECK(ks_two_sample(a, b).p_value == doctest::Approx(1.0));

  std::vector<double> lo{1, 2}, hi{3, 4};
  CHECK(ks_two_sample(lo, hi).statistic == 1.0);

  std::vector<double> c{1, 2, 3, 4}, d{1, 2, 3, 5};
  CHECK(ks_two_sample(c, d).statistic == doctest::Approx(0.25));

  std::vector<double> one{1};
  CHECK_THROWS_AS(ks_two_sample(one, a), Error);
}

TEST_CASE("KS statistic matches a brute-force ECDF scan") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> size(2, 40);
  std::uniform_int_distribution<int> value(0, 15);  // many ties
  for (int t = 0; t < 300; ++t) {
    std::vector<double> a(size(rng)), b(size(rng));
    for (auto& x : a) x = value(rng);
    for (auto& x : b) x = value(rng) + (t % 3);
    CHECK(ks_two_sample(a, b).statistic == oracle::ks_brute_force(a, b));
  }
}

TEST_CASE("Kolmogorov survival function") {
  CHECK(kolmogorov_survival(0.0) == 1.0);
  CHECK(kolmogorov_survival(1.0) == doctest::Approx(0.2699996716).epsilon(1e-8));
  CHECK(kolmogorov_survival(1.36) == doctest::Approx(0.0494).epsilon(1e-3));
  CHECK(kolmogorov_survival(1.628) == doctest::Approx(0.01).epsilon(1e-2));
  CHECK(kolmogorov_survival(10.0) < 1e-80);
}

TEST_CASE("chi-square against training proportions") {
  auto equal = chi_square_categorical({{"a", 50}, {"b", 50}}, {{"a", 500}, {"b", 500}});
  CHECK(equal.statistic == 0.0);
  CHECK(equal.p_value == doctest::Approx(1.0));
  CHECK(equal.degrees_of_freedom == 1);

  auto extreme = chi_square_categorical({{"a", 100}, {"b", 0}}, {{"a", 1}, {"b", 1}});
  CHECK(extreme.statistic == doctest::Approx(100.0));
  CHECK(extreme.p_value < 1e-20);

  auto single = chi_square_categorical({{"a", 100}}, {{"a", 10}});
  CHECK(single.skipped);
}

TEST_CASE("chi-square pools sparse cells") {
  // Expected counts 90, 6, 2, 2: the two small cells pool (4 < 5) and merge
  // into the smallest remaining one, leaving two cells.
  auto r = chi_square_categorical({{"a", 90}, {"b", 6}, {"c", 2}, {"d", 2}},
                                  {{"a", 900}, {"b", 60}, {"c", 20}, {"d", 20}});
  CHECK(r.degrees_of_freedom == 1);
  CHECK(r.statistic == doctest::Approx(0.0));
}

TEST_CASE("multiple-testing corrections") {
  std::vector<double> p{0.01, 0.04, 0.03, 0.005};
  auto bh = benjamini_hochberg(p);
  CHECK(bh[0] == doctest::Approx(0.02));
  CHECK(bh[1] == doctest::Approx(0.04));
  CHECK(bh[2] == doctest::Approx(0.04));
  CHECK(bh[3] == doctest::Approx(0.02));
  auto bf = bonferroni(p);
  CHECK(bf[0] == doctest::Approx(0.04));
  CHECK(bf[1] == doctest::Approx(0.16));
  std::vector<double> big{0.5, 0.9};
  CHECK(bonferroni(big)[1] == 1.0);
  CHECK(correction_from_string("bonferroni") == Correction::bonferroni);
}

TEST_CASE("detect_drift on churn windows") {
  const auto& profile = fixtures::churn_profile();
  auto gen = default_churn_config();

  SUBCASE("short window") {
    WindowView view(profile.model, 50, generate_rows(gen, 50, 1));
    auto r = detect_drift(view, profile, DriftConfig{});
    CHECK(r.status == DriftStatus::insufficient_window);
    CHECK_FALSE(r.alert);
  }
  SUBCASE("null window") {
    WindowView view(profile.model, 500, generate_rows(gen, 500, 77));
    auto r = detect_drift(view, profile, DriftConfig{});
    CHECK(r.results.size() == 3);
    CHECK(r.status == DriftStatus::no_drift);
  }
  SUBCASE("shifted age mean") {
    auto shifted = interpolate(gen, {ParameterShift{"customer_age", ParameterKind::mean, 18.0}}, 1.0);
    WindowView view(profile.model, 500, generate_rows(shifted, 500, 3, 1000));
    auto r = detect_drift(view, profile, DriftConfig{});
    REQUIRE(r.status == DriftStatus::drift);
    REQUIRE(r.alert);
    CHECK(r.alert->drifted == std::vector<std::string>{"customer_age"});
    CHECK(r.alert->window_id == "churn:v1#500");
    CHECK(r.alert->timestamp_ms == 1499);
    auto j = to_json(*r.alert);
    CHECK(j.at("model") == "churn");
    CHECK(j.at("features").size() == 3);
  }
}
