#include "dkn/sim_harness.hpp"

#include "dkn/baselines.hpp"
#include "dkn/calibration.hpp"
#include "dkn/csv.hpp"
#include "dkn/gaussian_knockoffs.hpp"

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <sstream>
#include <thread>

namespace dkn {
namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Unbiased sample variance.
double var_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

template <typename F>
void parallel_for(int count, int threads, F&& body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(threads, 1, std::max(count, 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

const char* to_string(ResponseModel model) {
  return model == ResponseModel::GaussianLinear ? "gaussian_linear" : "logistic";
}

ResponseModel response_model_from_string(const std::string& name) {
  if (name == "gaussian_linear" || name == "gaussian") return ResponseModel::GaussianLinear;
  if (name == "logistic" || name == "binomial") return ResponseModel::Logistic;
  fail(ErrorKind::Config, "unknown response model '" + name + "' (expected gaussian_linear or logistic)");
}

Family family_for(ResponseModel model) {
  return model == ResponseModel::GaussianLinear ? Family::Gaussian : Family::Binomial;
}

const char* to_string(Method method) {
  switch (method) {
    case Method::Derandomized: return "derandomized";
    case Method::Vanilla: return "vanilla";
    case Method::Bonferroni: return "bonferroni";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "derandomized") return Method::Derandomized;
  if (name == "vanilla") return Method::Vanilla;
  if (name == "bonferroni") return Method::Bonferroni;
  fail(ErrorKind::Config, "unknown method '" + name + "'");
}

void ScenarioConfig::validate() const {
  if (n < 2 || p < 1) fail(ErrorKind::Config, "scenario needs n >= 2 and p >= 1");
  if (!(phi >= 0.0 && phi < 1.0)) fail(ErrorKind::Config, "AR(1) rate must lie in [0, 1)");
  if (num_signals < 0 || num_signals > p) fail(ErrorKind::Config, "num_signals must lie in [0, p]");
  if (amplitudes.empty()) fail(ErrorKind::Config, "scenario needs at least one amplitude");
  for (double a : amplitudes) {
    if (!(a >= 0.0)) fail(ErrorKind::Config, "amplitudes must be >= 0");
  }
  if (trials < 1) fail(ErrorKind::Config, "trials must be >= 1");
  if (heritability && !(*heritability >= 0.0 && *heritability < 1.0)) fail(ErrorKind::Config, "heritability must lie in [0, 1)");
  filter.validate();
  if (k < 1) fail(ErrorKind::Config, "k must be >= 1");
  if (!(bonferroni_budget > 0.0)) fail(ErrorKind::Config, "Bonferroni budget must be > 0");
  if (cv_folds < 2 || cv_folds > n) fail(ErrorKind::Config, "cv_folds must lie in [2, n]");
  if (methods.empty()) fail(ErrorKind::Config, "scenario needs at least one method");
}

Eigen::MatrixXd ar1_covariance(int p, double phi) {
  Eigen::MatrixXd sigma(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) sigma(i, j) = std::pow(phi, std::abs(i - j));
  }
  return sigma;
}

Eigen::VectorXd signal_coefficients(const ScenarioConfig& scenario, double amplitude) {
  Rng rng(scenario.signal_seed);
  const std::vector<int> perm = rng.permutation(scenario.p);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(scenario.p);
  const double magnitude = amplitude / std::sqrt(static_cast<double>(scenario.n));
  for (int i = 0; i < scenario.num_signals; ++i) {
    beta(perm[static_cast<std::size_t>(i)]) = rng.bernoulli(0.5) ? magnitude : -magnitude;
  }
  return beta;
}

Trial generate_trial(const ScenarioConfig& scenario, double amplitude, std::uint64_t trial_seed) {
  const Eigen::MatrixXd sigma = ar1_covariance(scenario.p, scenario.phi);
  const Eigen::MatrixXd chol = sigma.llt().matrixL();
  Rng rng(trial_seed);
  Eigen::MatrixXd z(scenario.n, scenario.p);
  for (int i = 0; i < scenario.n; ++i) {
    for (int j = 0; j < scenario.p; ++j) z(i, j) = rng.normal();
  }
  const Eigen::MatrixXd x = z * chol.transpose();

  Eigen::VectorXd beta = signal_coefficients(scenario, amplitude);
  if (scenario.heritability && scenario.response == ResponseModel::GaussianLinear) {
    const double signal_var = beta.dot(sigma * beta);
    const double h2 = *scenario.heritability;
    if (signal_var > 0.0) beta *= std::sqrt(h2 / (1.0 - h2) / signal_var);
  }
  const Eigen::VectorXd lin = x * beta;
  Eigen::VectorXd y(scenario.n);
  for (int i = 0; i < scenario.n; ++i) {
    if (scenario.response == ResponseModel::GaussianLinear) {
      y(i) = lin(i) + rng.normal();
    } else {
      y(i) = rng.bernoulli(1.0 / (1.0 + std::exp(-lin(i)))) ? 1.0 : 0.0;
    }
  }
  std::vector<char> is_null(static_cast<std::size_t>(scenario.p));
  for (int j = 0; j < scenario.p; ++j) is_null[static_cast<std::size_t>(j)] = beta(j) == 0.0;
  return Trial{Dataset(x, y), beta, std::move(is_null)};
}

TrialMetrics score_selection(const SelectionSet& selected, const std::vector<char>& is_null) {
  TrialMetrics m;
  int signals = 0;
  for (char null : is_null) signals += null ? 0 : 1;
  for (int j : selected.indices()) {
    if (is_null.at(static_cast<std::size_t>(j))) {
      ++m.v_count;
    } else {
      ++m.true_positives;
    }
  }
  m.selected = selected.size();
  m.power = signals > 0 ? static_cast<double>(m.true_positives) / signals : 0.0;
  return m;
}

std::vector<RatioDiagnostic> ratio_diagnostics(const std::vector<std::vector<int>>& null_counts, int m_runs, double eta,
                                               const std::vector<int>& features) {
  if (null_counts.size() != features.size()) fail(ErrorKind::Argument, "one count series per feature is required");
  std::vector<RatioDiagnostic> out;
  constexpr double z = 1.959963984540054;
  for (std::size_t f = 0; f < null_counts.size(); ++f) {
    const auto& counts = null_counts[f];
    RatioDiagnostic d;
    d.feature = features[f];
    d.trials = static_cast<int>(counts.size());
    if (counts.empty()) {
      out.push_back(d);
      continue;
    }
    const double t = static_cast<double>(counts.size());
    std::vector<double> ind;
    std::vector<double> pis;
    for (int c : counts) {
      ind.push_back(frequency_meets(c, m_runs, eta) ? 1.0 : 0.0);
      pis.push_back(static_cast<double>(c) / m_runs);
    }
    d.tail = mean_of(ind);
    d.mean_pi = mean_of(pis);
    const double denom = 1.0 + z * z / t;
    const double centre = (d.tail + z * z / (2.0 * t)) / denom;
    const double half = z * std::sqrt(d.tail * (1.0 - d.tail) / t + z * z / (4.0 * t * t)) / denom;
    d.tail_lo = std::max(0.0, centre - half);
    d.tail_hi = std::min(1.0, centre + half);
    if (d.mean_pi > 0.0) {
      const double r = d.tail / d.mean_pi;
      d.ratio = r;
      // var(r) ~ var(I - r Pi) / (T mean(Pi)^2).
      std::vector<double> lin;
      for (std::size_t i = 0; i < ind.size(); ++i) lin.push_back(ind[i] - r * pis[i]);
      d.ratio_se = std::sqrt(var_of(lin) / t) / d.mean_pi;
    }
    out.push_back(d);
  }
  return out;
}

MonotonicityDiagnostic diagnose_monotonicity(const std::vector<int>& nonzero_counts, int m_runs, double level) {
  if (m_runs < 1) fail(ErrorKind::Argument, "M must be >= 1");
  MonotonicityDiagnostic d;
  d.histogram.assign(static_cast<std::size_t>(m_runs), 0);
  for (int c : nonzero_counts) {
    if (c < 1 || c > m_runs) fail(ErrorKind::Argument, "pooled counts must lie in [1, M]");
    ++d.histogram[static_cast<std::size_t>(c - 1)];
  }
  // Given the pair total N, a flat boundary puts bin m + 1 at Bin(N, 1/2);
  // a large upper tail rejects a non-increasing pmf.
  for (int m = 0; m + 1 < m_runs; ++m) {
    const long lo = d.histogram[static_cast<std::size_t>(m)];
    const long hi = d.histogram[static_cast<std::size_t>(m + 1)];
    const long total = lo + hi;
    double pv = 1.0;
    if (total > 0 && hi > 0) {
      const boost::math::binomial dist(static_cast<double>(total), 0.5);
      pv = boost::math::cdf(boost::math::complement(dist, static_cast<double>(hi - 1)));
    }
    d.p_values.push_back(pv);
    if (pv < level) d.monotone = false;
  }
  return d;
}

Quantiles quantiles(std::vector<double> values) {
  Quantiles q;
  if (values.empty()) return q;
  std::sort(values.begin(), values.end());
  auto at = [&](double prob) {
    const double h = prob * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  q.min = values.front();
  q.q10 = at(0.10);
  q.q25 = at(0.25);
  q.q50 = at(0.50);
  q.q75 = at(0.75);
  q.q90 = at(0.90);
  q.max = values.back();
  return q;
}

MethodSummary summarize(Method method, double amplitude, std::vector<TrialMetrics> trials, int k) {
  MethodSummary s;
  s.method = method;
  s.amplitude = amplitude;
  s.trials = static_cast<int>(trials.size());
  std::vector<double> v;
  std::vector<double> power;
  std::vector<double> hit;
  int max_v = 0;
  for (const auto& t : trials) {
    v.push_back(t.v_count);
    power.push_back(t.power);
    hit.push_back(t.v_count >= k ? 1.0 : 0.0);
    max_v = std::max(max_v, t.v_count);
  }
  const double n = std::max<double>(1.0, static_cast<double>(trials.size()));
  s.pfer = mean_of(v);
  s.var_v = var_of(v);
  s.pfer_se = std::sqrt(s.var_v / n);
  s.kfwer = mean_of(hit);
  s.kfwer_se = std::sqrt(s.kfwer * (1.0 - s.kfwer) / n);
  s.power = mean_of(power);
  s.power_se = std::sqrt(var_of(power) / n);
  s.v_frequency.assign(static_cast<std::size_t>(max_v) + 1, 0);
  for (const auto& t : trials) ++s.v_frequency[static_cast<std::size_t>(t.v_count)];
  s.v_quantiles = quantiles(v);
  s.power_quantiles = quantiles(power);
  s.per_trial = std::move(trials);
  return s;
}

ExperimentResult run_experiment(const ScenarioConfig& scenario) {
  scenario.validate();
  const Family family = family_for(scenario.response);
  const GaussianSampler sampler(fit_equicorrelated(ar1_covariance(scenario.p, scenario.phi), Eigen::VectorXd::Zero(scenario.p)));
  const GroupPartition partition = GroupPartition::trivial(scenario.p);
  const auto wants = [&](Method m) {
    return std::find(scenario.methods.begin(), scenario.methods.end(), m) != scenario.methods.end();
  };
  const bool derandomized = wants(Method::Derandomized);
  const bool vanilla = wants(Method::Vanilla);
  const bool bonferroni = wants(Method::Bonferroni);

  ExperimentResult result;
  result.scenario = scenario;
  LcdOptions lcd;
  lcd.cv_folds = scenario.cv_folds;

  for (std::size_t a = 0; a < scenario.amplitudes.size(); ++a) {
    const double amplitude = scenario.amplitudes[a];
    const int t_count = scenario.trials;
    std::vector<TrialMetrics> der(static_cast<std::size_t>(t_count));
    std::vector<TrialMetrics> van(static_cast<std::size_t>(t_count));
    std::vector<TrialMetrics> bon(static_cast<std::size_t>(t_count));
    std::vector<std::vector<int>> counts(static_cast<std::size_t>(t_count));
    std::vector<char> is_null;

    parallel_for(t_count, scenario.threads, [&](int t) {
      const std::uint64_t trial_seed = derive_seed(derive_seed(scenario.master_seed, a), static_cast<std::uint64_t>(t));
      const Trial trial = generate_trial(scenario, amplitude, trial_seed);
      FilterConfig config = scenario.filter;
      config.master_seed = derive_seed(trial_seed, 1);
      if (derandomized) {
        const SelectionRecord record = derandomized_select(trial.data, sampler, partition, config, family, {lcd, 1});
        der[static_cast<std::size_t>(t)] = score_selection(record.final_set(), trial.is_null);
        counts[static_cast<std::size_t>(t)] = record.counts();
        // Run 0 uses the same stream as a stand-alone M = 1 call.
        van[static_cast<std::size_t>(t)] = score_selection(record.per_run().front(), trial.is_null);
      } else if (vanilla) {
        FilterConfig single = config;
        single.m_runs = 1;
        const SelectionRecord record = derandomized_select(trial.data, sampler, partition, single, family, {lcd, 1});
        van[static_cast<std::size_t>(t)] = score_selection(record.final_set(), trial.is_null);
      }
      if (bonferroni) {
        bon[static_cast<std::size_t>(t)] = score_selection(bonferroni_select(ols_pvalues(trial.data), scenario.bonferroni_budget), trial.is_null);
      }
    });

    AmplitudeResult ar;
    ar.amplitude = amplitude;
    for (Method m : scenario.methods) {
      const auto& src = m == Method::Derandomized ? der : (m == Method::Vanilla ? van : bon);
      ar.methods.push_back(summarize(m, amplitude, src, scenario.k));
    }
    if (derandomized) {
      is_null.resize(static_cast<std::size_t>(scenario.p));
      const Eigen::VectorXd beta = signal_coefficients(scenario, amplitude);
      std::vector<int> nulls;
      for (int j = 0; j < scenario.p; ++j) {
        if (beta(j) == 0.0) nulls.push_back(j);
      }
      std::vector<int> pooled;
      std::vector<std::vector<int>> per_null(nulls.size());
      for (const auto& c : counts) {
        for (std::size_t i = 0; i < nulls.size(); ++i) {
          const int v = c[static_cast<std::size_t>(nulls[i])];
          per_null[i].push_back(v);
          if (v > 0) pooled.push_back(v);
        }
      }
      ar.null_pi = diagnose_monotonicity(pooled, scenario.filter.m_runs);
      ar.ratios = ratio_diagnostics(per_null, scenario.filter.m_runs, scenario.filter.eta, nulls);
    }
    result.amplitudes.push_back(std::move(ar));
  }
  return result;
}

std::vector<std::string> write_experiment_csv(const ExperimentResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  std::vector<std::string> paths;

  CsvTable summary({"amplitude", "method", "trials", "pfer", "pfer_se", "var_v", "kfwer", "kfwer_se", "power", "power_se"});
  CsvTable freq({"amplitude", "method", "v", "trials"});
  CsvTable quant({"amplitude", "method", "metric", "min", "q10", "q25", "q50", "q75", "q90", "max"});
  CsvTable hist({"amplitude", "m", "pi", "count", "p_value_next"});
  CsvTable ratios({"amplitude", "feature", "trials", "tail", "tail_lo", "tail_hi", "mean_pi", "ratio", "ratio_se"});

  for (const auto& ar : result.amplitudes) {
    const std::string amp = format_number(ar.amplitude);
    for (const auto& s : ar.methods) {
      summary.add({amp, to_string(s.method), std::to_string(s.trials), format_number(s.pfer), format_number(s.pfer_se),
                   format_number(s.var_v), format_number(s.kfwer), format_number(s.kfwer_se), format_number(s.power),
                   format_number(s.power_se)});
      for (std::size_t v = 0; v < s.v_frequency.size(); ++v) {
        freq.add({amp, to_string(s.method), std::to_string(v), std::to_string(s.v_frequency[v])});
      }
      for (const auto& [metric, q] : {std::pair{"v", s.v_quantiles}, std::pair{"power", s.power_quantiles}}) {
        quant.add({amp, to_string(s.method), metric, format_number(q.min), format_number(q.q10), format_number(q.q25),
                   format_number(q.q50), format_number(q.q75), format_number(q.q90), format_number(q.max)});
      }
    }
    const int m_runs = result.scenario.filter.m_runs;
    for (std::size_t m = 0; m < ar.null_pi.histogram.size(); ++m) {
      hist.add({amp, std::to_string(m + 1), format_number(static_cast<double>(m + 1) / m_runs),
                std::to_string(ar.null_pi.histogram[m]),
                m < ar.null_pi.p_values.size() ? format_number(ar.null_pi.p_values[m]) : "NA"});
    }
    for (const auto& d : ar.ratios) {
      ratios.add({amp, std::to_string(d.feature), std::to_string(d.trials), format_number(d.tail), format_number(d.tail_lo),
                  format_number(d.tail_hi), format_number(d.mean_pi), d.ratio ? format_number(*d.ratio) : "NA",
                  d.ratio ? format_number(d.ratio_se) : "NA"});
    }
  }
  for (const auto& [name, table] : {std::pair{"summary.csv", &summary}, std::pair{"v_frequency.csv", &freq},
                                    std::pair{"quantiles.csv", &quant}, std::pair{"null_pi_histogram.csv", &hist},
                                    std::pair{"ratios.csv", &ratios}}) {
    const std::string path = (base / name).string();
    write_file_atomic(path, table->str());
    paths.push_back(path);
  }
  return paths;
}

DominationCheck check_nb_domination(int p, int num_signals, int v, int replicates, std::uint64_t seed) {
  if (p < 1 || num_signals < 0 || num_signals > p || v < 1 || replicates < 1) {
    fail(ErrorKind::Argument, "domination check needs p >= 1, 0 <= signals <= p, v >= 1, replicates >= 1");
  }
  DominationCheck out;
  out.v = v;
  out.replicates = replicates;
  std::vector<long> v_hist;
  StatisticVector w;
  w.w.resize(p);
  for (int r = 0; r < replicates; ++r) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(r));
    // Non-nulls: large magnitudes, mostly positive. Nulls: fair coin signs
    // independent of the magnitudes.
    for (int j = 0; j < p; ++j) {
      if (j < num_signals) {
        w.w(j) = (2.0 + rng.uniform()) * (rng.bernoulli(0.9) ? 1.0 : -1.0);
      } else {
        w.w(j) = rng.uniform() * 2.5 * (rng.bernoulli(0.5) ? 1.0 : -1.0);
      }
    }
    const SelectionSet sel = vknockoff_select(w, v, rng);
    int false_count = 0;
    for (int j : sel.indices()) false_count += j >= num_signals ? 1 : 0;
    if (static_cast<int>(v_hist.size()) <= false_count) v_hist.resize(static_cast<std::size_t>(false_count) + 1, 0);
    ++v_hist[static_cast<std::size_t>(false_count)];
  }
  const double reps = static_cast<double>(replicates);
  double tail = reps;
  double nb_tail = 1.0;
  const int span = static_cast<int>(v_hist.size()) + 5;
  for (int j = 0; j < span; ++j) {
    const double emp = tail / reps;
    const double se = std::sqrt(std::max(nb_tail * (1.0 - nb_tail), emp * (1.0 - emp)) / reps);
    out.empirical_survival.push_back(emp);
    out.nb_survival.push_back(nb_tail);
    out.se.push_back(se);
    const double excess = (emp - nb_tail) / std::max(se, 1.0 / reps);
    out.worst_excess = std::max(out.worst_excess, excess);
    if (emp > nb_tail + 4.0 * se) out.dominated = false;
    if (j < static_cast<int>(v_hist.size())) tail -= static_cast<double>(v_hist[static_cast<std::size_t>(j)]);
    nb_tail -= negative_binomial_pmf(v, j);
    nb_tail = std::max(nb_tail, 0.0);
  }
  return out;
}

}  // namespace dkn
