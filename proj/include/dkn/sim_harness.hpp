#pragma once

#include "dkn/core.hpp"
#include "dkn/knockoff_filter.hpp"
#include "dkn/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dkn {

enum class ResponseModel { GaussianLinear, Logistic };

const char* to_string(ResponseModel model);
ResponseModel response_model_from_string(const std::string& name);
Family family_for(ResponseModel model);

enum class Method { Derandomized, Vanilla, Bonferroni };

const char* to_string(Method method);
Method method_from_string(const std::string& name);

struct ScenarioConfig {
  std::string name = "scenario";
  int n = 200;
  int p = 100;
  double phi = 0.6;  ///< AR(1) correlation, Sigma_ij = phi^|i-j|
  int num_signals = 30;
  std::vector<double> amplitudes{3, 4, 5, 6, 7, 8};
  ResponseModel response = ResponseModel::GaussianLinear;
  std::uint64_t signal_seed = 1;
  int trials = 200;
  std::uint64_t master_seed = 2024;
  std::optional<double> heritability;  ///< rescales beta so Var(X'b) / Var(Y) = h^2 (linear only)

  FilterConfig filter{1.0, 0.5, 31, 0};  ///< master_seed unused; per-trial seeds are derived
  int k = 2;                             ///< k of the reported k-FWER
  double bonferroni_budget = 1.0;
  int cv_folds = 10;
  std::vector<Method> methods{Method::Derandomized, Method::Vanilla, Method::Bonferroni};
  int threads = 1;

  void validate() const;
};

Eigen::MatrixXd ar1_covariance(int p, double phi);

/// Signal locations and signs drawn from signal_seed; magnitudes A / sqrt(n).
Eigen::VectorXd signal_coefficients(const ScenarioConfig& scenario, double amplitude);

struct Trial {
  Dataset data;
  Eigen::VectorXd beta;
  std::vector<char> is_null;  ///< per feature
};

Trial generate_trial(const ScenarioConfig& scenario, double amplitude, std::uint64_t trial_seed);

struct TrialMetrics {
  int v_count = 0;
  int true_positives = 0;
  int selected = 0;
  double power = 0.0;
};

TrialMetrics score_selection(const SelectionSet& selected, const std::vector<char>& is_null);

/// Per-null ratio P(Pi_j >= eta) / E[Pi_j] over trials.
struct RatioDiagnostic {
  int feature = 0;
  int trials = 0;
  double tail = 0.0;  ///< P^(Pi_j >= eta)
  double tail_lo = 0.0;
  double tail_hi = 0.0;  ///< Wilson 95% interval for the tail
  double mean_pi = 0.0;
  std::optional<double> ratio;  ///< empty when mean_pi = 0
  double ratio_se = 0.0;        ///< delta method
};

std::vector<RatioDiagnostic> ratio_diagnostics(const std::vector<std::vector<int>>& null_counts, int m_runs, double eta,
                                               const std::vector<int>& features);

struct MonotonicityDiagnostic {
  std::vector<long> histogram;  ///< pooled counts of Pi = m / M for m = 1..M (index m - 1)
  std::vector<double> p_values; ///< one-sided test of bin m+1 exceeding bin m
  bool monotone = true;
};

/// Pools nonzero counts (each in 1..M) and tests each adjacent pair at `level`.
MonotonicityDiagnostic diagnose_monotonicity(const std::vector<int>& nonzero_counts, int m_runs, double level = 0.01);

struct Quantiles {
  double min = 0, q10 = 0, q25 = 0, q50 = 0, q75 = 0, q90 = 0, max = 0;
};

Quantiles quantiles(std::vector<double> values);

struct MethodSummary {
  Method method = Method::Derandomized;
  double amplitude = 0.0;
  int trials = 0;
  double pfer = 0.0;
  double pfer_se = 0.0;
  double var_v = 0.0;
  double kfwer = 0.0;
  double kfwer_se = 0.0;
  double power = 0.0;
  double power_se = 0.0;
  std::vector<int> v_frequency;  ///< v_frequency[i] = #trials with V = i
  Quantiles v_quantiles;
  Quantiles power_quantiles;
  std::vector<TrialMetrics> per_trial;
};

struct AmplitudeResult {
  double amplitude = 0.0;
  std::vector<MethodSummary> methods;
  MonotonicityDiagnostic null_pi;  ///< derandomized only
  std::vector<RatioDiagnostic> ratios;
};

struct ExperimentResult {
  ScenarioConfig scenario;
  std::vector<AmplitudeResult> amplitudes;
};

MethodSummary summarize(Method method, double amplitude, std::vector<TrialMetrics> trials, int k);

ExperimentResult run_experiment(const ScenarioConfig& scenario);

/// Writes summary.csv, v_frequency.csv, quantiles.csv, null_pi_histogram.csv
/// and ratios.csv under `dir`; returns the paths.
std::vector<std::string> write_experiment_csv(const ExperimentResult& result, const std::string& dir);

/// Coin-flip null statistics fed to the v-knockoffs scan: survival of the
/// false-discovery count against NB(v, 1/2).
struct DominationCheck {
  int v = 1;
  int replicates = 0;
  std::vector<double> empirical_survival;  ///< P^(V >= j), j = 0..
  std::vector<double> nb_survival;
  std::vector<double> se;
  double worst_excess = 0.0;  ///< max_j (empirical - nb) / max(se, floor)
  bool dominated = true;      ///< empirical <= nb + 4 se everywhere
};

DominationCheck check_nb_domination(int p, int num_signals, int v, int replicates, std::uint64_t seed);

}  // namespace dkn
