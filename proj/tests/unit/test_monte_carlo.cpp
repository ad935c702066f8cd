#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "expmon/error.hpp"
#include "expmon/monte_carlo.hpp"
#include "oracles.hpp"

using namespace expmon;

TEST_CASE("bernoulli under a flat beta prior") {
  auto est = log_marginal_monte_carlo(BinarySummary{1, 1}, LikelihoodFamily::bernoulli, BetaPrior{1.0, 1.0}, 0.0,
                                      100000, 11);
  CHECK(std::abs(std::exp(est.log_estimate) - 0.5) <= 0.005);
  CHECK(est.n_samples == 100000);
  CHECK(est.finite_samples == 100000);
  CHECK(est.std_error > 0.0);
}

TEST_CASE("normal prior, single observation") {
  GaussianSummary data = GaussianSummary::from(std::vector<double>{0.0});
  auto est = log_marginal_monte_carlo(data, LikelihoodFamily::normal_known_variance, NormalPrior{0.0, 1.0}, 1.0,
                                      20000, 5);
  const double want = std::log(1.0 / std::sqrt(4.0 * std::numbers::pi));
  CHECK(std::abs(est.log_estimate - want) <= 2.0 * est.std_error);
}

TEST_CASE("uniform prior against a quadrature oracle") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n18(18.0, 1.0);
  std::vector<double> xs(50);
  for (auto& x : xs) x = n18(rng);
  const auto data = GaussianSummary::from(xs);

  auto uni = log_marginal_monte_carlo(data, LikelihoodFamily::normal_known_variance, UniformPrior{16.0, 20.0}, 1.0,
                                      20000, 3);
  auto nrm = log_marginal_monte_carlo(data, LikelihoodFamily::normal_known_variance, NormalPrior{18.0, 1.0}, 1.0,
                                      20000, 3);
  REQUIRE(std::isfinite(uni.log_estimate));
  CHECK(std::abs(uni.log_estimate - nrm.log_estimate) < std::log(10.0));

  const oracle::NormalData d(xs);
  const double want = oracle::log_integral([&](double mu) { return d.log_lik(mu, 1.0) - std::log(4.0); }, 16.0, 20.0);
  CHECK(std::abs(uni.log_estimate - want) <= 3.0 * uni.std_error);
}

TEST_CASE("poisson and categorical likelihoods") {
  std::vector<double> counts{3, 5, 4, 6};
  auto cs = CountSummary::from(counts);
  auto mc = log_marginal_monte_carlo(cs, LikelihoodFamily::poisson, GammaPrior{4.0, 1.0}, 0.0, 50000, 2);
  const double exact = log_marginal_gamma_poisson(cs, GammaPrior{4.0, 1.0});
  CHECK(std::abs(mc.log_estimate - exact) <= 4.0 * mc.std_error);

  CategoryCounts cc{{6, 3, 1}};
  DirichletPrior dir{{2.0, 1.0, 1.0}};
  auto mcd = log_marginal_monte_carlo(cc, LikelihoodFamily::categorical, dir, 0.0, 50000, 2);
  const double exact_d = log_marginal_dirichlet_multinomial(cc.counts, dir.concentration);
  CHECK(std::abs(mcd.log_estimate - exact_d) <= 4.0 * mcd.std_error);
}

TEST_CASE("zero likelihood under every draw is reported, not thrown") {
  // Every prior draw is a negative Poisson rate.
  auto cs = CountSummary::from(std::vector<double>{1.0, 2.0});
  auto est = log_marginal_monte_carlo(cs, LikelihoodFamily::poisson, UniformPrior{-2.0, -1.0}, 0.0, 1000, 1);
  CHECK(est.log_estimate == -std::numeric_limits<double>::infinity());
  CHECK_FALSE(est.diagnostic.empty());
  CHECK(est.finite_samples == 0);
}

TEST_CASE("seeded reproducibility and argument checks") {
  BinarySummary data{7, 20};
  auto a = log_marginal_monte_carlo(data, LikelihoodFamily::bernoulli, BetaPrior{2.0, 3.0}, 0.0, 5000, 42);
  auto b = log_marginal_monte_carlo(data, LikelihoodFamily::bernoulli, BetaPrior{2.0, 3.0}, 0.0, 5000, 42);
  auto c = log_marginal_monte_carlo(data, LikelihoodFamily::bernoulli, BetaPrior{2.0, 3.0}, 0.0, 5000, 43);
  CHECK(a.log_estimate == b.log_estimate);
  CHECK(a.std_error == b.std_error);
  CHECK(a.log_estimate != c.log_estimate);
  CHECK_THROWS_AS(log_marginal_monte_carlo(data, LikelihoodFamily::bernoulli, BetaPrior{}, 0.0, 999, 1), Error);
}

TEST_CASE("jackknife of a constant sample has zero error") {
  std::vector<double> w(100, -3.0);
  auto est = jackknife_log_mean(w);
  CHECK(est.log_estimate == doctest::Approx(-3.0));
  CHECK(est.std_error == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("likelihood at a point") {
  auto g = GaussianSummary::from(std::vector<double>{0.0});
  CHECK(log_likelihood(g, LikelihoodFamily::normal_known_variance, 0.0, 1.0) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)));
  CHECK(log_likelihood(BinarySummary{1, 2}, LikelihoodFamily::bernoulli, 0.5, 0.0) ==
        doctest::Approx(std::log(0.5)));  // C(2,1) 0.5^2
  CHECK(log_likelihood(BinarySummary{1, 2}, LikelihoodFamily::bernoulli, 1.5, 0.0) ==
        -std::numeric_limits<double>::infinity());
}
