#include "dkn/calibration.hpp"
#include "dkn/rng.hpp"
#include "dkn/simplex.hpp"

#include <doctest.h>

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <cmath>

using namespace dkn;

namespace {

// Monotone LP optimum by enumerating flat extreme points y_m = c for m <= j.
double flat_extreme_oracle(int m_runs, double eta) {
  int t = 0;
  while (t <= m_runs && static_cast<double>(t) / m_runs < eta) ++t;
  double best = 0.0;
  for (int j = 1; j <= m_runs; ++j) {
    const double c = 2.0 * m_runs / (static_cast<double>(j) * (j + 1));
    best = std::max(best, c * std::max(0, j - t + 1));
  }
  return best;
}

std::vector<double> random_pmf(Rng& rng, int size) {
  std::vector<double> pmf(static_cast<std::size_t>(size));
  double total = 0.0;
  for (double& q : pmf) {
    q = rng.uniform() < 0.2 ? 0.0 : -std::log(rng.uniform());
    total += q;
  }
  if (total == 0.0) {
    pmf[0] = 1.0;
    return pmf;
  }
  for (double& q : pmf) q /= total;
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < pmf.size(); ++i) s += pmf[i];
  pmf.back() = std::max(0.0, 1.0 - s);
  return pmf;
}

// P(V in [lo, hi)) for real endpoints, V integer valued.
double mass_real(const std::vector<double>& pmf, double lo, double hi) {
  double total = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    const double x = static_cast<double>(i);
    if (x >= lo && x < hi) total += pmf[i];
  }
  return total;
}

// Integral form of the moment condition with t = 1, by midpoint quadrature.
std::pair<double, double> moment_integrals(const std::vector<double>& pmf, int k, double width) {
  const int steps = 20000;
  const double du = width / steps;
  double left = 0.0;
  double right = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double u = (i + 0.5) * du;
    left += mass_real(pmf, k - u, k) * du;
    right += mass_real(pmf, k, k + u) * du;
  }
  return {left, right};
}

}  // namespace

TEST_CASE("simplex solves a small textbook program") {
  // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6).
  LinearProgram lp;
  lp.objective = {3.0, 5.0};
  lp.constraints = {{{1.0, 0.0}, ConstraintSense::LessEqual, 4.0},
                    {{0.0, 2.0}, ConstraintSense::LessEqual, 12.0},
                    {{3.0, 2.0}, ConstraintSense::LessEqual, 18.0}};
  const SimplexResult r = solve_simplex(lp);
  REQUIRE(r.status == SimplexStatus::Optimal);
  CHECK(r.value == doctest::Approx(36.0).epsilon(1e-12));
  CHECK(r.x[0] == doctest::Approx(2.0));
  CHECK(r.x[1] == doctest::Approx(6.0));
}

TEST_CASE("simplex reports infeasible and unbounded programs") {
  LinearProgram infeasible;
  infeasible.objective = {1.0};
  infeasible.constraints = {{{1.0}, ConstraintSense::GreaterEqual, 2.0}, {{1.0}, ConstraintSense::LessEqual, 1.0}};
  CHECK(solve_simplex(infeasible).status == SimplexStatus::Infeasible);
  LinearProgram unbounded;
  unbounded.objective = {1.0, 0.0};
  unbounded.constraints = {{{0.0, 1.0}, ConstraintSense::LessEqual, 1.0}};
  CHECK(solve_simplex(unbounded).status == SimplexStatus::Unbounded);
  LinearProgram equality;
  equality.objective = {1.0, 1.0};
  equality.constraints = {{{1.0, 2.0}, ConstraintSense::Equal, 4.0}};
  const SimplexResult r = solve_simplex(equality);
  REQUIRE(r.status == SimplexStatus::Optimal);
  CHECK(r.value == doctest::Approx(4.0));
}

TEST_CASE("monotone gamma golden values") {
  CHECK(std::abs(lp_gamma(31, 0.501, LpVariant::Monotone).value - 1.0) <= 1e-9);
  CHECK(std::abs(lp_gamma(31, 0.5, LpVariant::Monotone).value - 1.0) <= 1e-9);
  CHECK(std::abs(lp_gamma(30, 0.81, LpVariant::Monotone).value - 0.39) <= 0.005);
  for (int m = 1; m <= 50; ++m) {
    CHECK(std::abs(lp_gamma(m, 1.0, LpVariant::Monotone, 1.0, LpCheck::CrossCheck).value - 2.0 / (m + 1)) <= 1e-9);
  }
}

TEST_CASE("closed form, simplex and flat extreme points agree") {
  for (int m : {1, 2, 3, 7, 20, 30, 31, 64}) {
    for (double eta : {0.5, 0.501, 0.6, 0.751, 0.81, 0.95, 1.0}) {
      const LpSolution closed = lp_gamma_closed_form(m, eta, LpVariant::Monotone);
      const LpSolution simplex = lp_gamma_simplex(m, eta, LpVariant::Monotone);
      CHECK(std::abs(closed.value - simplex.value) <= 1e-8);
      CHECK(std::abs(closed.value - flat_extreme_oracle(m, eta)) <= 1e-12);
      CHECK(lp_max_violation(closed.y, m, eta, LpVariant::Monotone) <= 1e-9);
      CHECK(std::abs(lp_objective(closed.y, m, eta) - closed.value) <= 1e-9);
    }
  }
}

TEST_CASE("decay and partial-sum nesting") {
  for (int m : {5, 12, 31}) {
    for (double eta : {0.5, 0.7, 0.9}) {
      const double mono = lp_gamma(m, eta, LpVariant::Monotone).value;
      CHECK(lp_gamma(m, eta, LpVariant::Decay, 1.0, LpCheck::CrossCheck).value == doctest::Approx(mono).epsilon(1e-12));
      CHECK(lp_gamma(m, eta, LpVariant::PartialSum).value >= mono - 1e-9);
      double previous = 0.0;
      for (double beta : {0.1, 0.3, 0.5, 0.8, 0.95, 1.0}) {
        const LpSolution d = lp_gamma(m, eta, LpVariant::Decay, beta, LpCheck::CrossCheck);
        CHECK(d.value >= previous - 1e-12);
        CHECK(lp_max_violation(d.y, m, eta, LpVariant::Decay, beta) <= 1e-9);
        previous = d.value;
      }
    }
  }
  CHECK_THROWS_AS(lp_gamma(10, 0.5, LpVariant::Decay, 0.0), Error);
  CHECK_THROWS_AS(lp_gamma(10, 0.5, LpVariant::Decay, 1.5), Error);
  CHECK_THROWS_AS(lp_gamma(0, 0.5, LpVariant::Monotone), Error);
}

TEST_CASE("pfer bounds") {
  CHECK(pfer_bound(1.0, 0.5).value == 2.0);
  CHECK(pfer_bound(1.0, 0.5).kind == BoundKind::PferMarkov);
  CHECK(pfer_bound(1.0, 0.5, 1.0).value == 1.0);
  CHECK(pfer_bound(1.0, 0.5, 1.0).kind == BoundKind::PferLp);
  CHECK(pfer_bound(0.0, 0.5).value == 0.0);
}

TEST_CASE("assumption-free factor") {
  const AssumptionFreeFactor f3 = assumption_free_pfer_factor(3, 0.5);
  CHECK(std::abs(f3.factor - 1.125) <= 1e-6);
  CHECK(std::abs(f3.maximizer - 0.75) <= 1e-4);
  CHECK(std::abs(assumption_free_pfer_factor(1, 1.0).factor - 1.0) <= 1e-9);

  // Brute-force maximization of P(Bin(M, p) >= t) / p on a fine grid.
  auto brute = [](int m, double eta) {
    int t = 0;
    while (static_cast<double>(t) / m < eta) ++t;
    double best = 0.0;
    for (int i = 1; i <= 200000; ++i) {
      const double p = i / 200000.0;
      const double tail = t == 0 ? 1.0 : boost::math::cdf(boost::math::complement(boost::math::binomial(m, p), t - 1));
      best = std::max(best, tail / p);
    }
    // t = 1 peaks in the p -> 0 limit, where the ratio tends to M.
    return t == 1 ? std::max(best, static_cast<double>(m)) : best;
  };
  for (auto [m, eta] : std::vector<std::pair<int, double>>{{2, 0.5}, {5, 0.6}, {10, 0.5}, {31, 0.5}}) {
    const double factor = assumption_free_pfer_factor(m, eta).factor;
    CHECK(std::abs(factor - brute(m, eta)) <= 1e-6);
    CHECK(factor <= 1.0 / eta + 1e-12);
  }
}

TEST_CASE("k-FWER bounds") {
  CHECK(kfwer_bound(0.6, 0.5, 3, 1.0, 1.0).value == doctest::Approx(0.2));
  CHECK(kfwer_bound(0.6, 0.5, 3, 1.0, 0.5).value == doctest::Approx(0.1));
  CHECK(kfwer_bound(1.0, 0.95, 1, 0.1, 1.0).value == doctest::Approx(0.1));
  CHECK(kfwer_bound(0.0, 0.5, 2, 1.0, 1.0).value == 0.0);
}

TEST_CASE("negative binomial bounds") {
  CHECK(kfwer_nb_bound(1, 0.5, 2, PowerLoss{1.0}, 1.0).value == doctest::Approx(1.0).epsilon(1e-10));
  for (int j = 0; j < 40; ++j) CHECK(negative_binomial_pmf(1, j) == doctest::Approx(std::ldexp(1.0, -(j + 1))));
  CHECK(negative_binomial_expectation(1, 1.0, PowerLoss{1.0}) == doctest::Approx(1.0).epsilon(1e-10));
  for (int v : {1, 2, 5}) {
    CHECK(negative_binomial_expectation(v, 1.0, PowerLoss{1.0}) == doctest::Approx(v).epsilon(1e-10));
  }

  // h(x) = x^2, v = 2, eta = 0.5, k = 4 against direct summation over j <= 200.
  double direct = 0.0;
  for (int j = 0; j <= 200; ++j) {
    const double pmf = (j + 1) * std::ldexp(1.0, -(j + 2));  // NB(2, 1/2)
    direct += pmf * (j / 0.5) * (j / 0.5);
  }
  const double value = kfwer_nb_bound(2, 0.5, 4, PowerLoss{2.0}, 1.0).value;
  CHECK(std::abs(value - direct / 16.0) <= 1e-10);

  // Exponential loss: finite below ln 2, rejected at or above.
  double exp_direct = 0.0;
  for (int j = 0; j <= 600; ++j) exp_direct += std::ldexp(1.0, -(j + 1)) * std::exp(0.3 * j / 0.5);
  CHECK(negative_binomial_expectation(1, 0.5, ExponentialLoss{0.3}) == doctest::Approx(exp_direct).epsilon(1e-10));
  CHECK_THROWS_AS(negative_binomial_expectation(1, 0.5, ExponentialLoss{0.35}), Error);
  CHECK_THROWS_AS(negative_binomial_expectation(1, 1.0, ExponentialLoss{0.7}), Error);
}

TEST_CASE("skewness condition examples") {
  const std::vector<double> at_zero{1.0, 0.0, 0.0};
  CHECK(check_skewness_condition(at_zero, 2));
  const std::vector<double> at_k{0.0, 0.0, 1.0};
  CHECK_FALSE(check_skewness_condition(at_k, 2));
  const std::vector<double> hand{0.5, 0.3, 0.15, 0.05};
  CHECK_FALSE(check_skewness_condition(hand, 2));
  const std::vector<double> bad{0.5, 0.4};
  CHECK_THROWS_AS(check_skewness_condition(bad, 2), Error);
}

TEST_CASE("moment conditions reduce to the skewness condition at nu = 1") {
  Rng rng(77);
  int disagreements = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::vector<double> pmf = random_pmf(rng, 2 + static_cast<int>(rng.uniform_index(10)));
    const int k = 1 + static_cast<int>(rng.uniform_index(6));
    if (check_moment_conditions(pmf, k, PowerLoss{1.0}) != check_skewness_condition(pmf, k)) ++disagreements;
  }
  CHECK(disagreements == 0);
  const std::vector<double> at_zero{1.0, 0.0, 0.0, 0.0};
  CHECK(check_moment_conditions(at_zero, 2, PowerLoss{1.7}));
  CHECK(check_moment_conditions(at_zero, 3, ExponentialLoss{0.4}));
}

TEST_CASE("moment conditions agree with the integral form") {
  Rng rng(78);
  int compared = 0;
  for (int rep = 0; rep < 60; ++rep) {
    const std::vector<double> pmf = random_pmf(rng, 3 + static_cast<int>(rng.uniform_index(8)));
    const int k = 1 + static_cast<int>(rng.uniform_index(5));
    const bool power = rep % 2 == 0;
    const double param = power ? 1.0 + 2.0 * rng.uniform() : 0.2 + 0.8 * rng.uniform();
    const double width = power ? k / param : 1.0 / param;
    const auto [left, right] = moment_integrals(pmf, k, width);
    if (std::abs(left - right) < 1e-3) continue;  // too close for quadrature to decide
    const LossSpec h = power ? LossSpec{PowerLoss{param}} : LossSpec{ExponentialLoss{param}};
    CHECK(check_moment_conditions(pmf, k, h) == (left >= right));
    ++compared;
  }
  CHECK(compared > 30);
}

TEST_CASE("smoothing lemmas") {
  // Geometric pmf on {0, 1/M, ..., 1}: decreasing mass satisfies the hypothesis.
  const int m = 10;
  DiscretePmf geometric;
  double total = 0.0;
  for (int i = 0; i <= m; ++i) {
    geometric.values.push_back(static_cast<double>(i) / m);
    geometric.probs.push_back(std::pow(0.5, i));
    total += geometric.probs.back();
  }
  for (double& q : geometric.probs) q /= total;
  const SmoothingLemmaReport r = validate_smoothing_lemmas(geometric, {});
  CHECK(r.markov.hypothesis);
  CHECK(r.markov.bound_holds);
  CHECK_FALSE(r.any_violation());

  // Point mass at eta: the left window is empty.
  const SmoothingLemmaReport point = validate_smoothing_lemmas({{0.5}, {1.0}}, {});
  CHECK(point.markov.left_area == 0.0);
  CHECK_FALSE(point.markov.hypothesis);

  // A flat pmf on {0, 1/2, 1} does not satisfy the Markov-type hypothesis.
  const SmoothingLemmaReport flat = validate_smoothing_lemmas({{0.0, 0.5, 1.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}}, {});
  CHECK_FALSE(flat.markov.hypothesis);
}

TEST_CASE("smoothing lemma areas match quadrature and no lemma is violated") {
  Rng rng(9);
  for (int rep = 0; rep < 40; ++rep) {
    const int m = 4 + static_cast<int>(rng.uniform_index(8));
    const std::vector<double> probs = random_pmf(rng, m + 1);
    DiscretePmf pmf;
    for (int i = 0; i <= m; ++i) pmf.values.push_back(static_cast<double>(i) / m);
    pmf.probs = probs;
    SmoothingLemmaParams params;
    params.eta = 0.3 + 0.5 * rng.uniform();
    params.xi = 0.2 + 0.6 * rng.uniform();
    const SmoothingLemmaReport r = validate_smoothing_lemmas(pmf, params);
    CHECK_FALSE(r.any_violation());

    const int steps = 4000;
    const double dl = params.eta / steps;
    const double dr = params.xi / steps;
    double left = 0.0;
    double right = 0.0;
    for (int i = 0; i < steps; ++i) {
      const double ul = (i + 0.5) * dl;
      const double ur = (i + 0.5) * dr;
      for (int j = 0; j <= m; ++j) {
        const double x = pmf.values[static_cast<std::size_t>(j)];
        const double q = pmf.probs[static_cast<std::size_t>(j)];
        if (x >= params.eta - ul && x < params.eta) left += q * dl;
        if (x >= params.eta && x < params.eta + ur) right += q * dr;
      }
    }
    CHECK(std::abs(r.markov.left_area - left) <= 1e-3);
    CHECK(std::abs(r.markov.right_area - right) <= 1e-3);
  }
}

TEST_CASE("proof chain replay") {
  // Monotone pmfs on {0..31} satisfy the ratio with gamma(31, 0.5) = 1.
  Rng rng(5);
  std::vector<std::vector<double>> pmfs;
  for (int j = 0; j < 20; ++j) {
    std::vector<double> pmf = random_pmf(rng, 32);
    std::sort(pmf.begin(), pmf.end(), std::greater<>());
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < pmf.size(); ++i) s += pmf[i];
    pmf.back() = std::max(0.0, 1.0 - s);
    pmfs.push_back(pmf);
  }
  const PferChainReplay replay = replay_pfer_chain(pmfs, 0.5, lp_gamma(31, 0.5, LpVariant::Monotone).value);
  CHECK(replay.per_null_ratio_ok);
  CHECK(replay.chain_holds);
  CHECK(replay.expected_v <= replay.expected_v1 + 1e-12);
}

TEST_CASE("parameter selection recipes") {
  const ParameterChoice large = select_parameters(3, 0.1, 31, AssumptionTier::Skewed);
  CHECK(large.large_k_rule);
  CHECK(large.config.eta == 0.5);
  CHECK(large.config.m_runs == 31);
  CHECK(large.config.v == doctest::Approx(0.6));

  // The exact threshold at (20, 0.95) needs 19 of 20 runs, giving gamma 4/21 > 0.1,
  // so the smallest admissible grid threshold at M = 20 is 0.96.
  CHECK(lp_gamma(20, 0.95, LpVariant::Monotone).value == doctest::Approx(4.0 / 21.0));
  const ParameterChoice k1 = select_parameters(1, 0.1, 20, AssumptionTier::Markov);
  CHECK(k1.config.m_runs == 20);
  CHECK(k1.config.eta == doctest::Approx(0.96));
  CHECK(k1.config.v == 1.0);
  CHECK(min_count_for(20, k1.config.eta) == 20);
  CHECK(k1.bound.value <= 0.1 + 1e-12);

  const ParameterChoice k2 = select_parameters(2, 0.1, 30, AssumptionTier::Skewed);
  CHECK(k2.config.eta == doctest::Approx(0.81));
  CHECK(k2.config.m_runs == 30);
  CHECK(k2.config.v == 1.0);

  CHECK_THROWS_AS(select_parameters(1, 0.001, 5, AssumptionTier::Markov), Error);
  try {
    select_parameters(1, 0.001, 5, AssumptionTier::Markov);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Calibration);
  }
}

TEST_CASE("admissible pairs respect the certificate") {
  const auto pairs = admissible_pairs(2, 0.1, 1.0, 30, AssumptionTier::Skewed);
  REQUIRE_FALSE(pairs.empty());
  for (const auto& pr : pairs) {
    CHECK(pr.bound <= 0.1 + 1e-12);
    CHECK(pr.m_runs <= 30);
    CHECK(std::abs(pr.bound - kfwer_certificate(1.0, pr.eta, pr.m_runs, 2, AssumptionTier::Skewed)) <= 1e-12);
  }
}
