#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "expmon/error.hpp"
#include "expmon/log_math.hpp"
#include "expmon/marginal.hpp"
#include "oracles.hpp"

using namespace expmon;

namespace {

double known_var_ml(const std::vector<double>& xs, double kv, NormalPrior prior) {
  return log_marginal_normal_known_var(GaussianSummary::from(xs), kv, prior);
}

}  // namespace

TEST_CASE("normal known variance: frozen values") {
  CHECK(known_var_ml({}, 1.0, {0.0, 1.0}) == 0.0);
  const double want = std::log(1.0 / std::sqrt(4.0 * std::numbers::pi));  // N(0; 0, 2)
  CHECK(known_var_ml({0.0}, 1.0, {0.0, 1.0}) == doctest::Approx(want).epsilon(1e-12));
  CHECK(want == doctest::Approx(-1.265512).epsilon(1e-6));
  CHECK(known_var_ml({18.0}, 1.0, {18.0, 1.0}) == doctest::Approx(want).epsilon(1e-12));
  CHECK(log_marginal_normal_known_var(1, 0.0, 0.0, 1.0, {0.0, 1.0}) == doctest::Approx(want).epsilon(1e-12));
  CHECK(oracle::close_in_log(oracle::normal_known_var({0.0}, 1.0, 0.0, 1.0), want, 1e-9));
}

TEST_CASE("normal known variance: quadrature agreement") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 25; ++t) {
    const double m = -50.0 + 100.0 * u(rng), v = 0.01 + 20.0 * u(rng), kv = 0.1 + 10.0 * u(rng);
    std::normal_distribution<double> data(m + 3.0 * (u(rng) - 0.5), std::sqrt(kv));
    std::vector<double> xs(1 + t * 4);
    for (auto& x : xs) x = data(rng);
    CHECK(oracle::close_in_log(known_var_ml(xs, kv, {m, v}), oracle::normal_known_var(xs, kv, m, v)));
  }
}

TEST_CASE("normal inverse gamma: quadrature agreement") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 12; ++t) {
    NormalInverseGammaPrior p{-10.0 + 20.0 * u(rng), 0.1 + 5.0 * u(rng), 1.5 + 5.0 * u(rng), 0.5 + 10.0 * u(rng)};
    std::normal_distribution<double> data(p.mean + u(rng), 1.0 + 2.0 * u(rng));
    std::vector<double> xs(2 + t * 3);
    for (auto& x : xs) x = data(rng);
    CHECK(oracle::close_in_log(log_marginal_normal_inverse_gamma(GaussianSummary::from(xs), p),
                               oracle::normal_inverse_gamma(xs, p.mean, p.kappa, p.shape, p.scale)));
  }
  CHECK(log_marginal_normal_inverse_gamma(GaussianSummary{}, NormalInverseGammaPrior{}) == 0.0);
}

TEST_CASE("beta-binomial: frozen values") {
  CHECK(log_marginal_beta_binomial(1, 1, 1.0, 1.0) == doctest::Approx(std::log(0.5)));
  CHECK(log_marginal_beta_binomial(0, 0, 3.0, 4.0) == 0.0);
  CHECK(log_marginal_beta_binomial(3, 10, 2.0, 2.0) == doctest::Approx(std::log(720.0 / 6435.0)).epsilon(1e-12));
  CHECK(oracle::close_in_log(oracle::beta_binomial(3, 10, 2.0, 2.0), std::log(720.0 / 6435.0), 1e-9));
}

TEST_CASE("beta-binomial: quadrature agreement and normalization") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 25; ++t) {
    const std::uint64_t n = 1 + t * 7;
    const std::uint64_t k = static_cast<std::uint64_t>(u(rng) * static_cast<double>(n + 1)) % (n + 1);
    const double a = 1.0 + 30.0 * u(rng), b = 1.0 + 30.0 * u(rng);
    CHECK(oracle::close_in_log(log_marginal_beta_binomial(k, n, a, b), oracle::beta_binomial(k, n, a, b)));
  }
  // Predictive probabilities over k sum to one.
  std::vector<double> terms;
  for (std::uint64_t k = 0; k <= 12; ++k) terms.push_back(log_marginal_beta_binomial(k, 12, 0.7, 2.5));
  CHECK(log_sum_exp(terms) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dirichlet-multinomial: frozen values") {
  std::vector<std::uint64_t> c1{1, 0}, c2{2, 1}, c0{0, 0};
  std::vector<double> ones{1.0, 1.0};
  CHECK(log_marginal_dirichlet_multinomial(c1, ones) == doctest::Approx(std::log(0.5)));
  CHECK(log_marginal_dirichlet_multinomial(c2, ones) == doctest::Approx(std::log(0.25)));
  CHECK(log_marginal_dirichlet_multinomial(c0, ones) == 0.0);
  std::vector<double> three{1.0, 1.0, 1.0};
  CHECK_THROWS_AS(log_marginal_dirichlet_multinomial(c1, three), Error);
  CHECK(log_marginal_dirichlet_multinomial({{"a", 1}, {"b", 0}}, {{"a", 1.0}, {"b", 1.0}}) ==
        doctest::Approx(std::log(0.5)));
  CHECK_THROWS_AS(log_marginal_dirichlet_multinomial({{"a", 1}}, {{"b", 1.0}}), Error);
  // Two categories reduce to the beta-binomial.
  std::vector<std::uint64_t> c{3, 7};
  std::vector<double> alpha{2.0, 2.0};
  CHECK(log_marginal_dirichlet_multinomial(c, alpha) ==
        doctest::Approx(log_marginal_beta_binomial(3, 10, 2.0, 2.0)).epsilon(1e-12));
}

TEST_CASE("dirichlet-multinomial: nested quadrature for three categories") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 6; ++t) {
    std::vector<std::uint64_t> counts{static_cast<std::uint64_t>(20 * u(rng)), static_cast<std::uint64_t>(20 * u(rng)),
                                      static_cast<std::uint64_t>(20 * u(rng))};
    std::vector<double> alpha{1.0 + 5.0 * u(rng), 1.0 + 5.0 * u(rng), 1.0 + 5.0 * u(rng)};
    CHECK(oracle::close_in_log(log_marginal_dirichlet_multinomial(counts, alpha),
                               oracle::dirichlet_multinomial3(counts, alpha)));
  }
}

TEST_CASE("gamma-poisson: frozen values") {
  std::vector<double> zero{0.0};
  CHECK(log_marginal_gamma_poisson(CountSummary::from(zero), GammaPrior{1.0, 1.0}) == doctest::Approx(std::log(0.5)));
  CHECK(log_marginal_gamma_poisson(CountSummary{}, GammaPrior{2.0, 3.0}) == 0.0);
  CHECK(oracle::close_in_log(oracle::gamma_poisson(zero, 1.0, 1.0), std::log(0.5), 1e-9));
}

TEST_CASE("gamma-poisson: quadrature agreement and probabilities below one") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 25; ++t) {
    const double shape = 1.0 + 20.0 * u(rng), rate = 0.2 + 5.0 * u(rng);
    std::poisson_distribution<int> data(0.5 + 15.0 * u(rng));
    std::vector<double> xs(1 + t * 3);
    for (auto& x : xs) x = data(rng);
    const double got = log_marginal_gamma_poisson(CountSummary::from(xs), GammaPrior{shape, rate});
    CHECK(oracle::close_in_log(got, oracle::gamma_poisson(xs, shape, rate)));
    CHECK(got <= 0.0);
  }
}

TEST_CASE("conjugate posteriors") {
  std::vector<double> xs{1.0, 2.0, 3.0};
  auto n = posterior(NormalPrior{0.0, 1.0}, GaussianSummary::from(xs), 1.0);
  CHECK(n.mean == doctest::Approx(1.5));
  CHECK(n.variance == doctest::Approx(0.25));
  auto b = posterior(BetaPrior{2.0, 2.0}, 3, 10);
  CHECK(b.alpha == 5.0);
  CHECK(b.beta == 9.0);
  auto g = posterior(GammaPrior{1.0, 1.0}, CountSummary::from(xs));
  CHECK(g.shape == 7.0);
  CHECK(g.rate == 4.0);
  std::vector<std::uint64_t> counts{2, 1};
  auto d = posterior(DirichletPrior{{1.0, 1.0}}, counts);
  CHECK(d.concentration == std::vector<double>{3.0, 2.0});
}

TEST_CASE("summaries") {
  std::vector<double> xs{1.0, 2.0, 3.0};
  auto g = GaussianSummary::from(xs);
  CHECK(g.n == 3);
  CHECK(g.mean == 2.0);
  CHECK(g.m2 == doctest::Approx(2.0));
  auto s = GaussianSummary::from_sums(3, 6.0, 14.0);
  CHECK(s.m2 == doctest::Approx(2.0));
  auto c = CountSummary::from(xs);
  CHECK(c.sum == 6.0);
  CHECK(c.sum_log_factorial == doctest::Approx(std::log(2.0) + std::log(6.0)));
}

TEST_CASE("softmax in log space") {
  std::vector<double> same{-700.0, -700.0, -700.0};
  for (double p : posterior_normalize(same)) CHECK(p == doctest::Approx(1.0 / 3.0));
  std::vector<double> single{-12345.0};
  CHECK(posterior_normalize(single) == std::vector<double>{1.0});
  std::vector<double> two{std::log(2.0), 0.0};
  auto p = posterior_normalize(two);
  CHECK(p[0] == doctest::Approx(2.0 / 3.0));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0));
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> partial{-inf, 0.0};
  CHECK(posterior_normalize(partial) == std::vector<double>{0.0, 1.0});
  std::vector<double> none{-inf, -inf};
  try {
    posterior_normalize(none);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::all_scores_minus_infinity);
  }
  CHECK(log_sum_exp(std::vector<double>{}) == -inf);
  CHECK(log_mean_exp(std::vector<double>{0.0, 0.0}) == doctest::Approx(0.0));
  CHECK(log_beta(2.0, 2.0) == doctest::Approx(std::log(1.0 / 6.0)));
  CHECK(log_binomial_coefficient(10, 3) == doctest::Approx(std::log(120.0)));
}
