#pragma once

#include "dkn/core.hpp"
#include "dkn/simplex.hpp"

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace dkn {

// ---------------------------------------------------------------------------
// gamma: the constant in P(Pi_j >= eta) <= gamma * E[Pi_j] under a shape
// assumption on the null pmf of Pi_j. Each assumption gives a small LP over
// y_m = P(Pi_j = m/M) / E[Pi_j], m = 0..M.
// ---------------------------------------------------------------------------

enum class LpVariant {
  Monotone,    ///< y_{m-1} >= y_m
  PartialSum,  ///< sum(y) >= 2 plus the left-skew partial-sum inequality
  Decay,       ///< beta * y_{m-1} >= y_m
};

const char* to_string(LpVariant variant);
LpVariant lp_variant_from_string(const std::string& name);

struct LpSolution {
  double value = 0.0;     ///< optimal gamma
  std::vector<double> y;  ///< optimal point, length M + 1
  LpVariant variant = LpVariant::Monotone;
  double beta = 1.0;
};

enum class LpCheck { None, CrossCheck };

/// Exact optimum. Monotone and decay use the closed form over truncated
/// geometric extreme rays; with LpCheck::CrossCheck the simplex route is run
/// as well and any disagreement above 1e-8 throws. PartialSum always uses the
/// simplex.
LpSolution lp_gamma(int m_runs, double eta, LpVariant variant, double beta = 1.0,
                    LpCheck check = LpCheck::None);

/// Closed-form route (Monotone / Decay only).
LpSolution lp_gamma_closed_form(int m_runs, double eta, LpVariant variant, double beta = 1.0);

/// Generic dense simplex route (all variants).
LpSolution lp_gamma_simplex(int m_runs, double eta, LpVariant variant, double beta = 1.0);

/// The LP itself, in the simplex's input form.
LinearProgram build_gamma_lp(int m_runs, double eta, LpVariant variant, double beta = 1.0);

/// Objective sum_{m : m/M >= eta} y_m.
double lp_objective(std::span<const double> y, int m_runs, double eta);

/// Largest constraint violation of `y` for the given variant (0 when feasible).
double lp_max_violation(std::span<const double> y, int m_runs, double eta, LpVariant variant,
                        double beta = 1.0);

// ---------------------------------------------------------------------------
// Error-rate bounds
// ---------------------------------------------------------------------------

enum class BoundKind { PferMarkov, PferLp, PferAssumptionFree, KfwerMarkov, KfwerNb, KfwerRhoHalf };

const char* to_string(BoundKind kind);

struct BoundInputs {
  std::optional<double> v;
  std::optional<double> eta;
  std::optional<int> m_runs;
  std::optional<int> k;
  std::optional<double> rho;
  std::optional<double> gamma;
};

struct BoundReport {
  BoundKind kind = BoundKind::PferMarkov;
  double value = 0.0;
  BoundInputs inputs;
};

/// Selects which tail inequality P(V >= k) <= rho E[V] / k is assumed.
/// Markov always holds (rho = 1); Skewed (rho = 1/2) needs the left-skew
/// condition on the pmf of V and is never assumed implicitly.
enum class AssumptionTier { Markov, Skewed };

double rho_for(AssumptionTier tier);
const char* to_string(AssumptionTier tier);
AssumptionTier tier_from_string(const std::string& name);

/// gamma * v when gamma is supplied, otherwise the Markov fallback v / eta.
BoundReport pfer_bound(double v, double eta, std::optional<double> gamma = std::nullopt);

struct AssumptionFreeFactor {
  double factor = 0.0;     ///< max_p P(Bin(M, p) >= t) / p
  double maximizer = 0.0;  ///< argmax p (0 stands for the p -> 0 limit)
};

/// Conditionally i.i.d. knockoffs make M * Pi_j binomial given the data, which
/// gives E[V] <= factor * v without any shape assumption.
AssumptionFreeFactor assumption_free_pfer_factor(int m_runs, double eta);

/// P(Bin(M, p) >= t) / p, the curve maximized above.
double assumption_free_ratio(int m_runs, double eta, double p);

/// rho * gamma * v / k.
BoundReport kfwer_bound(double v, double eta, int k, double gamma, double rho);

struct PowerLoss {
  double nu = 1.0;  ///< h(x) = x^nu, nu >= 1
};
struct ExponentialLoss {
  double lambda = 0.5;  ///< h(x) = exp(lambda x), lambda in (0, 1]
};
using LossSpec = std::variant<PowerLoss, ExponentialLoss>;

double evaluate_loss(const LossSpec& h, double x);

/// Negative binomial NB(v, 1/2) pmf: successes before the v-th failure.
double negative_binomial_pmf(int v, int j);

/// rho * E[h(Z / eta)] / h(k) with Z ~ NB(v, 1/2).
BoundReport kfwer_nb_bound(int v, double eta, int k, const LossSpec& h, double rho);

/// E[h(Z / eta)] by series summation.
double negative_binomial_expectation(int v, double eta, const LossSpec& h);

/// Left-skew condition on a pmf of V over {0, 1, ..., L}; true permits rho = 1/2.
bool check_skewness_condition(std::span<const double> pmf, int k);

/// Moment/exponential generalization; with PowerLoss{1} it reduces to the
/// skewness condition.
bool check_moment_conditions(std::span<const double> pmf, int k, const LossSpec& h);

/// Finite pmf on arbitrary nonnegative support points.
struct DiscretePmf {
  std::vector<double> values;
  std::vector<double> probs;
};

struct SmoothingLemmaParams {
  double eta = 0.5;     ///< threshold (k in the moment versions)
  double xi = 0.5;      ///< right window of the Markov-type lemma
  double nu = 2.0;      ///< power for the Chebyshev-type lemma
  double lambda = 0.5;  ///< rate for the Chernoff-type lemma
  double t = 1.0;       ///< right window scale for the moment lemmas
};

struct LemmaCheck {
  bool hypothesis = false;
  double left_area = 0.0;
  double right_area = 0.0;
  double tail = 0.0;   ///< P(X >= eta)
  double bound = 0.0;  ///< the lemma's right-hand side
  bool bound_holds = true;
  bool violated() const { return hypothesis && !bound_holds; }
};

struct SmoothingLemmaReport {
  LemmaCheck markov;
  LemmaCheck chebyshev;
  LemmaCheck chernoff;
  bool any_violation() const { return markov.violated() || chebyshev.violated() || chernoff.violated(); }
};

/// Evaluates each smoothed tail lemma exactly for a discrete pmf: whether the
/// area hypothesis holds and, if so, whether the tail bound does.
SmoothingLemmaReport validate_smoothing_lemmas(const DiscretePmf& pmf, const SmoothingLemmaParams& params);

/// Replays the PFER argument on explicit null pmfs of Pi_j (each over
/// {0..M}): E[V] = sum_j P(Pi_j >= eta) <= gamma * sum_j E[Pi_j] = gamma E[V_1].
struct PferChainReplay {
  double expected_v = 0.0;
  double expected_v1 = 0.0;
  bool per_null_ratio_ok = true;  ///< P(Pi_j >= eta) <= gamma E[Pi_j] for each j
  bool chain_holds = true;        ///< E[V] <= gamma E[V_1]
};

PferChainReplay replay_pfer_chain(const std::vector<std::vector<double>>& null_pmfs, double eta, double gamma);

// ---------------------------------------------------------------------------
// Parameter selection
// ---------------------------------------------------------------------------

struct AdmissiblePair {
  double eta = 0.0;
  int m_runs = 0;
  double gamma = 0.0;
  double bound = 0.0;
};

/// k-FWER certificate for (eta, M) at level v under the monotone assumption:
/// gamma * v for k = 1 (rho cannot be improved there), rho * gamma * v / k
/// otherwise.
double kfwer_certificate(double v, double eta, int m_runs, int k, AssumptionTier tier);

/// Default threshold grid 0.50, 0.51, ..., 1.00.
std::vector<double> default_eta_grid();

/// Every (eta, M <= m_budget) on the grid whose certificate is <= alpha.
std::vector<AdmissiblePair> admissible_pairs(int k, double alpha, double v, int m_budget, AssumptionTier tier,
                                             const std::vector<double>& eta_grid = default_eta_grid());

struct ParameterChoice {
  FilterConfig config;
  double gamma = 0.0;
  AssumptionTier tier = AssumptionTier::Markov;
  BoundReport bound;
  bool large_k_rule = false;
};

/// k-FWER parameter recipes. Large k (k >= max(1/(4 alpha), 2)): eta = 1/2,
/// the largest M within budget with gamma = 1, v = k alpha / rho. Otherwise
/// v = 1 and, taking M as large as the budget allows, the smallest grid eta
/// with certificate <= alpha.
ParameterChoice select_parameters(int k, double alpha, int m_budget, AssumptionTier tier,
                                  const std::vector<double>& eta_grid = default_eta_grid());

}  // namespace dkn
