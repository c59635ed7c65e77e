#include "dkn/calibration.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace dkn {
namespace {

void check_lp_inputs(int m_runs, double eta, LpVariant variant, double beta) {
  if (m_runs < 1) fail(ErrorKind::Argument, "M must be >= 1");
  if (!(eta > 0.0 && eta <= 1.0)) fail(ErrorKind::Argument, "eta must lie in (0, 1]");
  if (variant == LpVariant::Decay && !(beta >= 0.0 && beta <= 1.0)) {
    fail(ErrorKind::Argument, "decay rate beta must lie in [0, 1]");
  }
}

double interval_mass(std::span<const double> pmf, long lo, long hi) {
  // P(V in [lo, hi)) for integer endpoints.
  const long size = static_cast<long>(pmf.size());
  double total = 0.0;
  for (long i = std::max(lo, 0L); i < std::min(hi, size); ++i) total += pmf[static_cast<std::size_t>(i)];
  return total;
}

void check_pmf(std::span<const double> pmf) {
  if (pmf.empty()) fail(ErrorKind::Argument, "pmf must be nonempty");
  double total = 0.0;
  for (double q : pmf) {
    if (!(q >= 0.0)) fail(ErrorKind::Argument, "pmf entries must be nonnegative");
    total += q;
  }
  if (std::abs(total - 1.0) > 1e-12) fail(ErrorKind::Argument, "pmf must sum to 1");
}

}  // namespace

const char* to_string(LpVariant variant) {
  switch (variant) {
    case LpVariant::Monotone: return "monotone";
    case LpVariant::PartialSum: return "partial_sum";
    case LpVariant::Decay: return "decay";
  }
  return "?";
}

LpVariant lp_variant_from_string(const std::string& name) {
  if (name == "monotone") return LpVariant::Monotone;
  if (name == "partial_sum" || name == "partial-sum") return LpVariant::PartialSum;
  if (name == "decay") return LpVariant::Decay;
  fail(ErrorKind::Config, "unknown LP variant '" + name + "'");
}

double lp_objective(std::span<const double> y, int m_runs, double eta) {
  const int t = min_count_for(m_runs, eta);
  double total = 0.0;
  for (int m = t; m <= m_runs; ++m) total += y[static_cast<std::size_t>(m)];
  return total;
}

LinearProgram build_gamma_lp(int m_runs, double eta, LpVariant variant, double beta) {
  check_lp_inputs(m_runs, eta, variant, beta);
  const int n = m_runs + 1;
  const int t = min_count_for(m_runs, eta);
  LinearProgram lp;
  lp.objective.assign(static_cast<std::size_t>(n), 0.0);
  for (int m = t; m <= m_runs; ++m) lp.objective[static_cast<std::size_t>(m)] = 1.0;

  LinearConstraint normalization{std::vector<double>(static_cast<std::size_t>(n)), ConstraintSense::Equal, 1.0};
  for (int m = 0; m <= m_runs; ++m) {
    normalization.coefficients[static_cast<std::size_t>(m)] = static_cast<double>(m) / m_runs;
  }
  lp.constraints.push_back(std::move(normalization));

  if (variant == LpVariant::Monotone || variant == LpVariant::Decay) {
    const double rate = variant == LpVariant::Monotone ? 1.0 : beta;
    for (int m = 1; m <= m_runs; ++m) {
      LinearConstraint row{std::vector<double>(static_cast<std::size_t>(n), 0.0), ConstraintSense::GreaterEqual, 0.0};
      row.coefficients[static_cast<std::size_t>(m - 1)] = rate;
      row.coefficients[static_cast<std::size_t>(m)] = -1.0;
      lp.constraints.push_back(std::move(row));
    }
    return lp;
  }

  LinearConstraint mass{std::vector<double>(static_cast<std::size_t>(n), 1.0), ConstraintSense::GreaterEqual, 2.0};
  lp.constraints.push_back(std::move(mass));

  // sum_{m=1}^{t-1} m y_m >= sum_{i=0}^{floor(2 eta M - 1) - t} (2 eta M - 1 - t - i) y_{t+i}
  LinearConstraint skew{std::vector<double>(static_cast<std::size_t>(n), 0.0), ConstraintSense::GreaterEqual, 0.0};
  for (int m = 1; m <= std::min(t - 1, m_runs); ++m) skew.coefficients[static_cast<std::size_t>(m)] = m;
  const double span = 2.0 * eta * m_runs - 1.0;
  const long last = static_cast<long>(std::floor(span)) - t;
  for (long i = 0; i <= last && t + i <= m_runs; ++i) {
    skew.coefficients[static_cast<std::size_t>(t + i)] -= span - t - static_cast<double>(i);
  }
  lp.constraints.push_back(std::move(skew));
  return lp;
}

double lp_max_violation(std::span<const double> y, int m_runs, double eta, LpVariant variant, double beta) {
  if (static_cast<int>(y.size()) != m_runs + 1) fail(ErrorKind::Argument, "certificate has the wrong length");
  double worst = 0.0;
  for (double v : y) worst = std::max(worst, -v);
  const LinearProgram lp = build_gamma_lp(m_runs, eta, variant, beta);
  for (const auto& row : lp.constraints) {
    double lhs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += row.coefficients[i] * y[i];
    switch (row.sense) {
      case ConstraintSense::Equal: worst = std::max(worst, std::abs(lhs - row.rhs)); break;
      case ConstraintSense::GreaterEqual: worst = std::max(worst, row.rhs - lhs); break;
      case ConstraintSense::LessEqual: worst = std::max(worst, lhs - row.rhs); break;
    }
  }
  return worst;
}

LpSolution lp_gamma_closed_form(int m_runs, double eta, LpVariant variant, double beta) {
  check_lp_inputs(m_runs, eta, variant, beta);
  if (variant == LpVariant::PartialSum) {
    fail(ErrorKind::Argument, "the partial-sum LP has no closed form; use the simplex route");
  }
  const double rate = variant == LpVariant::Monotone ? 1.0 : beta;
  const int t = min_count_for(m_runs, eta);

  // Extreme rays of {y >= 0, rate * y_{m-1} >= y_m} are truncated geometric
  // sequences y_m = rate^m for m <= j. Normalize each and keep the best.
  std::vector<double> powers(static_cast<std::size_t>(m_runs) + 1);
  for (int m = 0; m <= m_runs; ++m) powers[static_cast<std::size_t>(m)] = std::pow(rate, m);

  double best = -1.0;
  int best_j = -1;
  double best_scale = 0.0;
  double first_moment = 0.0;  // sum_{m <= j} m rate^m / M
  double upper_mass = 0.0;    // sum_{t <= m <= j} rate^m
  for (int j = 1; j <= m_runs; ++j) {
    first_moment += j * powers[static_cast<std::size_t>(j)] / m_runs;
    if (j >= t) upper_mass += powers[static_cast<std::size_t>(j)];
    if (!(first_moment > 0.0)) continue;
    const double value = upper_mass / first_moment;
    if (value > best) {
      best = value;
      best_j = j;
      best_scale = 1.0 / first_moment;
    }
  }
  if (best_j < 0) fail(ErrorKind::Calibration, "gamma LP is infeasible (decay rate 0 forces E[Pi] = 0)");

  LpSolution sol;
  sol.variant = variant;
  sol.beta = rate;
  sol.value = best;
  sol.y.assign(static_cast<std::size_t>(m_runs) + 1, 0.0);
  for (int m = 0; m <= best_j; ++m) sol.y[static_cast<std::size_t>(m)] = best_scale * powers[static_cast<std::size_t>(m)];
  return sol;
}

LpSolution lp_gamma_simplex(int m_runs, double eta, LpVariant variant, double beta) {
  const LinearProgram lp = build_gamma_lp(m_runs, eta, variant, beta);
  const SimplexResult res = solve_simplex(lp);
  if (res.status == SimplexStatus::Infeasible) fail(ErrorKind::Calibration, "gamma LP is infeasible");
  if (res.status == SimplexStatus::Unbounded) fail(ErrorKind::Calibration, "gamma LP is unbounded");
  LpSolution sol;
  sol.variant = variant;
  sol.beta = variant == LpVariant::Monotone ? 1.0 : beta;
  sol.value = res.value;
  sol.y = res.x;
  return sol;
}

LpSolution lp_gamma(int m_runs, double eta, LpVariant variant, double beta, LpCheck check) {
  if (variant == LpVariant::PartialSum) return lp_gamma_simplex(m_runs, eta, variant, beta);
  LpSolution sol = lp_gamma_closed_form(m_runs, eta, variant, beta);
  if (check == LpCheck::CrossCheck) {
    const LpSolution other = lp_gamma_simplex(m_runs, eta, variant, beta);
    if (std::abs(other.value - sol.value) > 1e-8) {
      std::ostringstream msg;
      msg << "gamma LP routes disagree: closed form " << sol.value << " vs simplex " << other.value;
      fail(ErrorKind::Numerical, msg.str());
    }
  }
  return sol;
}

// ---------------------------------------------------------------------------

const char* to_string(BoundKind kind) {
  switch (kind) {
    case BoundKind::PferMarkov: return "pfer_markov";
    case BoundKind::PferLp: return "pfer_lp";
    case BoundKind::PferAssumptionFree: return "pfer_assumption_free";
    case BoundKind::KfwerMarkov: return "kfwer_markov";
    case BoundKind::KfwerNb: return "kfwer_nb";
    case BoundKind::KfwerRhoHalf: return "kfwer_rho_half";
  }
  return "?";
}

double rho_for(AssumptionTier tier) { return tier == AssumptionTier::Markov ? 1.0 : 0.5; }

const char* to_string(AssumptionTier tier) { return tier == AssumptionTier::Markov ? "markov" : "skewed"; }

AssumptionTier tier_from_string(const std::string& name) {
  if (name == "markov") return AssumptionTier::Markov;
  if (name == "skewed") return AssumptionTier::Skewed;
  fail(ErrorKind::Config, "unknown assumption tier '" + name + "' (expected markov or skewed)");
}

BoundReport pfer_bound(double v, double eta, std::optional<double> gamma) {
  if (!(v >= 0.0)) fail(ErrorKind::Argument, "v must be >= 0");
  if (!(eta > 0.0 && eta <= 1.0)) fail(ErrorKind::Argument, "eta must lie in (0, 1]");
  BoundReport report;
  report.inputs.v = v;
  report.inputs.eta = eta;
  if (gamma) {
    if (!(*gamma >= 0.0)) fail(ErrorKind::Argument, "gamma must be >= 0");
    report.kind = BoundKind::PferLp;
    report.inputs.gamma = gamma;
    report.value = *gamma * v;
  } else {
    report.kind = BoundKind::PferMarkov;
    report.value = v / eta;
  }
  return report;
}

double assumption_free_ratio(int m_runs, double eta, double p) {
  const int t = min_count_for(m_runs, eta);
  if (p <= 0.0) return t == 1 ? static_cast<double>(m_runs) : 0.0;
  if (p >= 1.0) return 1.0;
  // P(Bin(M, p) >= t) = I_p(t, M - t + 1).
  return boost::math::ibeta(static_cast<double>(t), static_cast<double>(m_runs - t + 1), p) / p;
}

AssumptionFreeFactor assumption_free_pfer_factor(int m_runs, double eta) {
  if (m_runs < 1) fail(ErrorKind::Argument, "M must be >= 1");
  if (!(eta > 0.0 && eta <= 1.0)) fail(ErrorKind::Argument, "eta must lie in (0, 1]");

  constexpr int kGrid = 10000;
  constexpr double kStep = 1.0 / kGrid;
  AssumptionFreeFactor best{assumption_free_ratio(m_runs, eta, 0.0), 0.0};
  int best_i = 0;
  for (int i = 1; i <= kGrid; ++i) {
    const double p = i * kStep;
    const double r = assumption_free_ratio(m_runs, eta, p);
    if (r > best.factor) {
      best = {r, p};
      best_i = i;
    }
  }
  if (best_i == 0) return best;

  const double lo = std::max((best_i - 1) * kStep, 1e-12);
  const double hi = std::min((best_i + 1) * kStep, 1.0);
  auto neg = [&](double p) { return -assumption_free_ratio(m_runs, eta, p); };
  const auto [p_star, neg_val] = boost::math::tools::brent_find_minima(neg, lo, hi, 52);
  if (-neg_val > best.factor) best = {-neg_val, p_star};
  return best;
}

BoundReport kfwer_bound(double v, double eta, int k, double gamma, double rho) {
  if (k < 1) fail(ErrorKind::Argument, "k must be >= 1");
  if (!(rho > 0.0 && rho <= 1.0)) fail(ErrorKind::Argument, "rho must lie in (0, 1]");
  if (!(v >= 0.0) || !(gamma >= 0.0)) fail(ErrorKind::Argument, "v and gamma must be >= 0");
  BoundReport report;
  report.kind = rho < 1.0 ? BoundKind::KfwerRhoHalf : BoundKind::KfwerMarkov;
  report.value = rho * gamma * v / k;
  report.inputs = {v, eta, std::nullopt, k, rho, gamma};
  return report;
}

double evaluate_loss(const LossSpec& h, double x) {
  if (const auto* power = std::get_if<PowerLoss>(&h)) return std::pow(x, power->nu);
  return std::exp(std::get<ExponentialLoss>(h).lambda * x);
}

double negative_binomial_pmf(int v, int j) {
  if (v < 1) fail(ErrorKind::Argument, "negative binomial size must be >= 1");
  if (j < 0) return 0.0;
  const double log_pmf = std::lgamma(j + v) - std::lgamma(j + 1.0) - std::lgamma(static_cast<double>(v)) -
                         (v + j) * std::log(2.0);
  return std::exp(log_pmf);
}

double negative_binomial_expectation(int v, double eta, const LossSpec& h) {
  if (v < 1) fail(ErrorKind::Argument, "v must be an integer >= 1");
  if (!(eta > 0.0 && eta <= 1.0)) fail(ErrorKind::Argument, "eta must lie in (0, 1]");
  if (const auto* power = std::get_if<PowerLoss>(&h)) {
    if (!(power->nu >= 1.0)) fail(ErrorKind::Argument, "power loss needs nu >= 1");
  } else {
    const double lambda = std::get<ExponentialLoss>(h).lambda;
    if (!(lambda > 0.0 && lambda <= 1.0)) fail(ErrorKind::Argument, "exponential loss needs lambda in (0, 1]");
    // E[exp(lambda Z / eta)] is finite iff exp(lambda / eta) / 2 < 1.
    if (lambda / eta >= std::log(2.0)) {
      std::ostringstream msg;
      msg << "E[exp(lambda Z / eta)] diverges for Z ~ NB(v, 1/2) when lambda / eta >= ln 2 (lambda = " << lambda
          << ", eta = " << eta << ")";
      fail(ErrorKind::Argument, msg.str());
    }
  }

  double total = 0.0;
  double prev = 0.0;
  for (int j = 0; j < 10'000'000; ++j) {
    const double term = negative_binomial_pmf(v, j) * evaluate_loss(h, j / eta);
    total += term;
    if (j > v && prev > 0.0) {
      const double ratio = term / prev;
      // Past the peak the terms decay at least geometrically with this ratio.
      if (ratio < 1.0 && term * ratio / (1.0 - ratio) < 1e-12) break;
    }
    prev = term;
  }
  return total;
}

BoundReport kfwer_nb_bound(int v, double eta, int k, const LossSpec& h, double rho) {
  if (k < 1) fail(ErrorKind::Argument, "k must be >= 1");
  if (!(rho > 0.0 && rho <= 1.0)) fail(ErrorKind::Argument, "rho must lie in (0, 1]");
  BoundReport report;
  report.kind = BoundKind::KfwerNb;
  report.value = rho * negative_binomial_expectation(v, eta, h) / evaluate_loss(h, k);
  report.inputs = {static_cast<double>(v), eta, std::nullopt, k, rho, std::nullopt};
  return report;
}

bool check_skewness_condition(std::span<const double> pmf, int k) {
  check_pmf(pmf);
  if (k < 1) fail(ErrorKind::Argument, "k must be >= 1");
  double left = 0.0;
  for (int u = 1; u <= k - 1; ++u) left += interval_mass(pmf, k - u, k);
  double right = 0.0;
  for (int u = 1; u <= k; ++u) right += interval_mass(pmf, k, k + u);
  return left >= right;
}

bool check_moment_conditions(std::span<const double> pmf, int k, const LossSpec& h) {
  check_pmf(pmf);
  if (k < 1) fail(ErrorKind::Argument, "k must be >= 1");
  double width = 0.0;
  if (const auto* power = std::get_if<PowerLoss>(&h)) {
    if (!(power->nu >= 1.0)) fail(ErrorKind::Argument, "power loss needs nu >= 1");
    width = k / power->nu;
  } else {
    const double lambda = std::get<ExponentialLoss>(h).lambda;
    if (!(lambda > 0.0 && lambda <= 1.0)) fail(ErrorKind::Argument, "exponential loss needs lambda in (0, 1]");
    width = 1.0 / lambda;
  }
  const long whole = static_cast<long>(std::floor(width));
  const double frac = width - static_cast<double>(whole);

  double left = 0.0;
  for (long u = 1; u <= whole - 1; ++u) left += interval_mass(pmf, k - u, k);
  left += frac * interval_mass(pmf, k - whole, k);
  double right = 0.0;
  for (long u = 1; u <= whole; ++u) right += interval_mass(pmf, k, k + u);
  right += frac * interval_mass(pmf, k, k + whole + 1);
  return left >= right;
}

SmoothingLemmaReport validate_smoothing_lemmas(const DiscretePmf& pmf, const SmoothingLemmaParams& params) {
  if (pmf.values.size() != pmf.probs.size() || pmf.values.empty()) {
    fail(ErrorKind::Argument, "pmf values and probabilities must be nonempty and of equal length");
  }
  for (double x : pmf.values) {
    if (!(x >= 0.0)) fail(ErrorKind::Argument, "smoothing lemmas need a nonnegative random variable");
  }
  check_pmf(pmf.probs);
  const double eta = params.eta;
  if (!(eta > 0.0) || !(params.xi > 0.0) || !(params.nu >= 1.0) || !(params.lambda > 0.0) || !(params.t > 0.0)) {
    fail(ErrorKind::Argument, "smoothing lemma parameters out of range");
  }

  double tail = 0.0;
  double mean = 0.0;
  double moment = 0.0;
  double mgf = 0.0;
  for (std::size_t i = 0; i < pmf.values.size(); ++i) {
    const double x = pmf.values[i];
    const double q = pmf.probs[i];
    if (x >= eta) tail += q;
    mean += q * x;
    moment += q * std::pow(x, params.nu);
    mgf += q * std::exp(params.lambda * x);
  }

  // For an atom at x the integrals reduce to window overlaps:
  //   left:  int_0^L 1{x in [eta - u, eta)} du = max(0, L - (eta - x)) for x < eta
  //   right: int_0^R 1{x in [eta, eta + u)} du = max(0, R - (x - eta))  for x >= eta
  auto areas = [&](double left_width, double right_width) {
    double left = 0.0;
    double right = 0.0;
    for (std::size_t i = 0; i < pmf.values.size(); ++i) {
      const double x = pmf.values[i];
      const double q = pmf.probs[i];
      if (x < eta) {
        left += q * std::max(0.0, left_width - (eta - x));
      } else {
        right += q * std::max(0.0, right_width - (x - eta));
      }
    }
    return std::pair{left, right};
  };

  auto finish = [&](double left_width, double right_width, double bound) {
    LemmaCheck check;
    std::tie(check.left_area, check.right_area) = areas(left_width, right_width);
    check.hypothesis = check.left_area >= check.right_area;
    check.tail = tail;
    check.bound = bound;
    check.bound_holds = tail <= bound * (1.0 + 1e-12) + 1e-15;
    return check;
  };

  SmoothingLemmaReport report;
  report.markov = finish(eta, params.xi, mean / (eta + params.xi));
  report.chebyshev = finish(eta / params.nu, params.t * eta / params.nu,
                            moment / ((1.0 + params.t) * std::pow(eta, params.nu)));
  report.chernoff = finish(1.0 / params.lambda, params.t / params.lambda,
                           mgf / ((1.0 + params.t) * std::exp(params.lambda * eta)));
  return report;
}

PferChainReplay replay_pfer_chain(const std::vector<std::vector<double>>& null_pmfs, double eta, double gamma) {
  PferChainReplay replay;
  for (const auto& pmf : null_pmfs) {
    check_pmf(pmf);
    const int m_runs = static_cast<int>(pmf.size()) - 1;
    if (m_runs < 1) fail(ErrorKind::Argument, "each pmf must cover {0, ..., M} with M >= 1");
    double tail = 0.0;
    double mean = 0.0;
    for (int m = 0; m <= m_runs; ++m) {
      const double q = pmf[static_cast<std::size_t>(m)];
      if (frequency_meets(m, m_runs, eta)) tail += q;
      mean += q * m / m_runs;
    }
    if (tail > gamma * mean * (1.0 + 1e-12) + 1e-15) replay.per_null_ratio_ok = false;
    replay.expected_v += tail;
    replay.expected_v1 += mean;
  }
  replay.chain_holds = replay.expected_v <= gamma * replay.expected_v1 * (1.0 + 1e-12) + 1e-15;
  return replay;
}

// ---------------------------------------------------------------------------

double kfwer_certificate(double v, double eta, int m_runs, int k, AssumptionTier tier) {
  const double gamma = lp_gamma_closed_form(m_runs, eta, LpVariant::Monotone).value;
  if (k == 1) return gamma * v;
  return rho_for(tier) * gamma * v / k;
}

std::vector<double> default_eta_grid() {
  std::vector<double> grid;
  for (int i = 50; i <= 100; ++i) grid.push_back(i / 100.0);
  return grid;
}

std::vector<AdmissiblePair> admissible_pairs(int k, double alpha, double v, int m_budget, AssumptionTier tier,
                                             const std::vector<double>& eta_grid) {
  std::vector<AdmissiblePair> pairs;
  for (int m = 1; m <= m_budget; ++m) {
    for (double eta : eta_grid) {
      const double gamma = lp_gamma_closed_form(m, eta, LpVariant::Monotone).value;
      const double bound = k == 1 ? gamma * v : rho_for(tier) * gamma * v / k;
      if (bound <= alpha + 1e-12) pairs.push_back({eta, m, gamma, bound});
    }
  }
  return pairs;
}

ParameterChoice select_parameters(int k, double alpha, int m_budget, AssumptionTier tier,
                                  const std::vector<double>& eta_grid) {
  if (k < 1) fail(ErrorKind::Config, "k must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::Config, "alpha must lie in (0, 1)");
  if (m_budget < 2) fail(ErrorKind::Config, "M budget must be >= 2");

  ParameterChoice choice;
  choice.tier = tier;
  const double rho = rho_for(tier);

  if (k >= std::max(1.0 / (4.0 * alpha), 2.0)) {
    choice.large_k_rule = true;
    constexpr double kEta = 0.5;
    int best_m = -1;
    double best_gamma = std::numeric_limits<double>::infinity();
    for (int m = m_budget; m >= 1; --m) {
      const double gamma = lp_gamma_closed_form(m, kEta, LpVariant::Monotone).value;
      if (gamma <= 1.0 + 1e-9) {
        best_m = m;
        best_gamma = gamma;
        break;
      }
      if (gamma < best_gamma) {
        best_gamma = gamma;
        best_m = m;
      }
    }
    // With gamma = 1 this is v = 2 k alpha under the skewed tier.
    const double v = k * alpha / (rho * std::max(best_gamma, 1.0));
    choice.config.eta = kEta;
    choice.config.m_runs = best_m;
    choice.config.v = v;
    choice.gamma = best_gamma;
    choice.bound = kfwer_bound(v, kEta, k, best_gamma, rho);
    choice.bound.inputs.m_runs = best_m;
    return choice;
  }

  constexpr double kV = 1.0;
  double best_bound = std::numeric_limits<double>::infinity();
  for (int m = m_budget; m >= 1; --m) {
    for (double eta : eta_grid) {
      const double gamma = lp_gamma_closed_form(m, eta, LpVariant::Monotone).value;
      const double bound = k == 1 ? gamma * kV : rho * gamma * kV / k;
      best_bound = std::min(best_bound, bound);
      if (bound <= alpha + 1e-12) {
        choice.config.eta = eta;
        choice.config.m_runs = m;
        choice.config.v = kV;
        choice.gamma = gamma;
        // k = 1: P(V >= 1) <= E[V] <= gamma v, so rho stays 1.
        choice.bound = kfwer_bound(kV, eta, k, gamma, k == 1 ? 1.0 : rho);
        choice.bound.inputs.m_runs = m;
        return choice;
      }
    }
  }
  std::ostringstream msg;
  msg << "no (eta, M <= " << m_budget << ") pair certifies " << k << "-FWER <= " << alpha << " under the "
      << to_string(tier) << " tier; best achievable bound is " << best_bound;
  fail(ErrorKind::Calibration, msg.str());
}

}  // namespace dkn
