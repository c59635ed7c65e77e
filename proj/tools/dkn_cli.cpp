// dkn: derandomized knockoffs from the command line.
//
//   dkn select    --data X.csv --config select.json --out DIR
//   dkn calibrate --M 31 --eta 0.5 [--variant monotone] [--assumption-free]
//   dkn frontier  --k 2 --alpha 0.1 [--M-budget 30] [--tier markov]
//   dkn simulate  --config scenario.json --out DIR
//   dkn diagnose  --record run.csv [--record ...] --eta 0.5 --out DIR
//
// Exit codes: 0 ok, 2 invalid configuration or arguments, 3 invalid data,
// 4 calibration infeasible, 5 numerical failure, 1 anything else.

#include "dkn/baselines.hpp"
#include "dkn/calibration.hpp"
#include "dkn/config.hpp"
#include "dkn/csv.hpp"
#include "dkn/gaussian_knockoffs.hpp"
#include "dkn/knockoff_filter.hpp"
#include "dkn/markov_knockoffs.hpp"
#include "dkn/sim_harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code(dkn::ErrorKind kind) {
  switch (kind) {
    case dkn::ErrorKind::Argument:
    case dkn::ErrorKind::Config:
      return 2;
    case dkn::ErrorKind::Data:
      return 3;
    case dkn::ErrorKind::Calibration:
      return 4;
    case dkn::ErrorKind::Numerical:
      return 5;
  }
  return 1;
}

std::string version_string() { return std::string(DKN_VERSION) + "+" + DKN_GIT_DESCRIBE; }

class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv)
      : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["argv"] = argv;
    doc_["version"] = version_string();
    doc_["outputs"] = json::array();
  }
  json& operator[](const char* key) { return doc_[key]; }
  void output(const std::string& path) { doc_["outputs"].push_back(path); }
  void write(const std::string& path) {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
    doc_["wall_time_seconds"] = elapsed.count();
    dkn::write_file_atomic(path, doc_.dump(2) + "\n");
  }

 private:
  std::chrono::steady_clock::time_point start_;
  json doc_;
};

json bound_json(const dkn::BoundReport& b) {
  json j;
  j["kind"] = dkn::to_string(b.kind);
  j["value"] = b.value;
  if (b.inputs.v) j["v"] = *b.inputs.v;
  if (b.inputs.eta) j["eta"] = *b.inputs.eta;
  if (b.inputs.m_runs) j["M"] = *b.inputs.m_runs;
  if (b.inputs.k) j["k"] = *b.inputs.k;
  if (b.inputs.rho) j["rho"] = *b.inputs.rho;
  if (b.inputs.gamma) j["gamma"] = *b.inputs.gamma;
  return j;
}

std::string fmt(double x) { return dkn::format_number(x); }

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

struct SelectArgs {
  std::string data;
  std::string config;
  std::string out;
  int threads = 0;
};

int cmd_select(const SelectArgs& args, const std::vector<std::string>& argv) {
  const json raw = dkn::load_json_file(args.config);
  dkn::SelectConfig cfg = dkn::parse_select_config(raw);
  if (args.threads > 0) cfg.threads = args.threads;

  dkn::CsvLoadOptions load;
  load.header = cfg.header;
  load.response = cfg.response;
  const dkn::Dataset data = dkn::load_dataset_csv(args.data, load);

  Manifest manifest("select", argv);
  manifest["config"] = raw;
  manifest["data"] = args.data;

  // Calibration: PFER uses (v, eta, M) as given; k-FWER picks them.
  dkn::FilterConfig filter;
  json certificate;
  if (cfg.target.kind == dkn::TargetKind::Pfer) {
    filter = dkn::FilterConfig{cfg.target.v, cfg.eta, cfg.m_runs, cfg.seed};
    const double gamma = dkn::lp_gamma(cfg.m_runs, cfg.eta, dkn::LpVariant::Monotone).value;
    const dkn::BoundReport lp = dkn::pfer_bound(cfg.target.v, cfg.eta, gamma);
    const dkn::BoundReport markov = dkn::pfer_bound(cfg.target.v, cfg.eta);
    std::ostringstream text;
    text << "E[V] <= " << fmt(lp.value) << " (monotone tier) / <= " << fmt(markov.value)
         << " (assumption-free Markov tier)";
    certificate["target"] = "pfer";
    certificate["monotone"] = bound_json(lp);
    certificate["markov"] = bound_json(markov);
    certificate["text"] = text.str();
  } else {
    const dkn::ParameterChoice choice =
        dkn::select_parameters(cfg.target.k, cfg.target.alpha, cfg.m_budget, cfg.tier);
    filter = choice.config;
    filter.master_seed = cfg.seed;
    std::ostringstream text;
    text << "P(V >= " << cfg.target.k << ") <= " << fmt(choice.bound.value) << " (monotone pmf, "
         << dkn::to_string(cfg.tier) << " tier)";
    certificate["target"] = "kfwer";
    certificate["bound"] = bound_json(choice.bound);
    certificate["tier"] = dkn::to_string(cfg.tier);
    certificate["large_k_rule"] = choice.large_k_rule;
    certificate["text"] = text.str();
  }
  manifest["resolved"] = {{"v", filter.v}, {"eta", filter.eta}, {"M", filter.m_runs}, {"master_seed", filter.master_seed}};
  manifest["certificate"] = certificate;
  manifest["master_seed"] = cfg.seed;

  dkn::GroupPartition partition = dkn::GroupPartition::trivial(data.p());
  std::unique_ptr<dkn::KnockoffSampler> sampler;
  json model;
  if (cfg.knockoff == dkn::KnockoffKind::Gaussian) {
    const dkn::CovarianceEstimate est = dkn::estimate_covariance(data.x());
    if (cfg.group_resolution) {
      const Eigen::VectorXd inv_sd = est.sigma.diagonal().cwiseSqrt().cwiseInverse();
      const Eigen::MatrixXd corr = inv_sd.asDiagonal() * est.sigma * inv_sd.asDiagonal();
      partition = dkn::adjacency_constrained_clustering(corr, *cfg.group_resolution);
    }
    auto g = std::make_unique<dkn::GaussianSampler>(dkn::fit_equicorrelated(est.sigma, est.mu));
    model = {{"model", "gaussian"},
             {"construction", "equicorrelated"},
             {"covariance", "sample covariance; Ledoit-Wolf shrinkage toward the diagonal when p/n > 0.1"},
             {"shrinkage", est.shrinkage},
             {"s", std::vector<double>(g->model().s().data(), g->model().s().data() + g->model().s().size())}};
    sampler = std::move(g);
  } else {
    const dkn::HiddenMarkovModel hmm = dkn::load_hmm(cfg.hmm_file);
    if (hmm.p() != data.p()) dkn::fail(dkn::ErrorKind::Data, "HMM length does not match the number of features");
    if (cfg.group_resolution) {
      Eigen::MatrixXd centered = data.x().rowwise() - data.x().colwise().mean();
      Eigen::MatrixXd cov = centered.transpose() * centered;
      Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
      for (Eigen::Index j = 0; j < sd.size(); ++j) sd(j) = sd(j) > 0.0 ? 1.0 / sd(j) : 0.0;
      Eigen::MatrixXd corr = sd.asDiagonal() * cov * sd.asDiagonal();
      corr.diagonal().setOnes();
      partition = dkn::adjacency_constrained_clustering(corr, *cfg.group_resolution);
    }
    sampler = std::make_unique<dkn::HmmSampler>(hmm, partition);
    model = {{"model", "hmm"}, {"file", cfg.hmm_file}, {"states", hmm.num_states()}, {"symbols", hmm.num_symbols()}};
  }
  manifest["knockoff"] = model;

  dkn::DerandomizedOptions options;
  options.lcd.cv_folds = cfg.cv_folds;
  options.threads = cfg.threads;
  const dkn::SelectionRecord record = dkn::derandomized_select(data, *sampler, partition, filter, cfg.family, options);

  fs::create_directories(args.out);
  const std::string selection_path = (fs::path(args.out) / "selection.csv").string();
  dkn::write_file_atomic(selection_path, dkn::record_csv(record));
  manifest.output(selection_path);

  dkn::CsvTable groups({"group_id", "feature", "name"});
  for (int g = 0; g < partition.num_groups(); ++g) {
    for (int j = partition.group(g).begin; j < partition.group(g).end; ++j) {
      const std::string name = data.feature_names().empty() ? "" : data.feature_names()[static_cast<std::size_t>(j)];
      groups.add({std::to_string(g), std::to_string(j), name});
    }
  }
  const std::string groups_path = (fs::path(args.out) / "groups.csv").string();
  dkn::write_file_atomic(groups_path, groups.str());
  manifest.output(groups_path);

  manifest["family"] = dkn::to_string(cfg.family);
  manifest["num_groups"] = partition.num_groups();
  manifest["selected_groups"] = record.final_set().indices();
  manifest["threads"] = cfg.threads;
  const std::string manifest_path = (fs::path(args.out) / "manifest.json").string();
  manifest.write(manifest_path);

  std::cout << "selected " << record.final_set().size() << " of " << partition.num_groups() << " groups; "
            << certificate["text"].get<std::string>() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// calibrate / frontier
// ---------------------------------------------------------------------------

struct CalibrateArgs {
  int m_runs = 31;
  double eta = 0.5;
  std::string variant = "monotone";
  double beta = 1.0;
  double v = 1.0;
  int k = 0;
  std::string tier = "markov";
  bool assumption_free = false;
};

void table_row(std::ostream& os, const std::string& key, const std::string& value) {
  os << std::left << std::setw(18) << key << value << "\n";
}

int cmd_calibrate(const CalibrateArgs& a) {
  if (a.m_runs < 1) dkn::fail(dkn::ErrorKind::Config, "--M must be >= 1");
  if (!(a.eta > 0.0 && a.eta <= 1.0)) dkn::fail(dkn::ErrorKind::Config, "--eta must lie in (0, 1]");
  std::ostringstream os;
  table_row(os, "M", std::to_string(a.m_runs));
  table_row(os, "eta", fmt(a.eta));
  table_row(os, "min_count", std::to_string(dkn::min_count_for(a.m_runs, a.eta)));
  if (a.assumption_free) {
    const dkn::AssumptionFreeFactor f = dkn::assumption_free_pfer_factor(a.m_runs, a.eta);
    table_row(os, "assumption", "conditionally i.i.d. runs (binomial)");
    table_row(os, "factor", fmt(f.factor));
    table_row(os, "maximizer_p", fmt(f.maximizer));
    table_row(os, "v", fmt(a.v));
    table_row(os, "pfer_bound", fmt(f.factor * a.v));
    std::cout << os.str();
    return 0;
  }
  const dkn::LpVariant variant = dkn::lp_variant_from_string(a.variant);
  const dkn::LpSolution sol = dkn::lp_gamma(a.m_runs, a.eta, variant, a.beta, dkn::LpCheck::CrossCheck);
  table_row(os, "variant", dkn::to_string(variant));
  if (variant == dkn::LpVariant::Decay) table_row(os, "beta", fmt(a.beta));
  table_row(os, "gamma", fmt(sol.value));
  table_row(os, "v", fmt(a.v));
  table_row(os, "pfer_bound", fmt(dkn::pfer_bound(a.v, a.eta, sol.value).value));
  table_row(os, "pfer_markov_bound", fmt(dkn::pfer_bound(a.v, a.eta).value));
  if (a.k > 0) {
    const dkn::AssumptionTier tier = dkn::tier_from_string(a.tier);
    const double rho = a.k == 1 ? 1.0 : dkn::rho_for(tier);
    table_row(os, "k", std::to_string(a.k));
    table_row(os, "tier", dkn::to_string(tier));
    table_row(os, "rho", fmt(rho));
    table_row(os, "kfwer_bound", fmt(dkn::kfwer_bound(a.v, a.eta, a.k, sol.value, rho).value));
  } else {
    table_row(os, "tier", "none (PFER)");
  }
  std::cout << os.str();
  return 0;
}

struct FrontierArgs {
  int k = 1;
  double alpha = 0.1;
  double v = 1.0;
  int m_budget = 31;
  std::string tier = "markov";
  std::string out;
};

int cmd_frontier(const FrontierArgs& a) {
  dkn::ErrorTarget::kfwer(a.k, a.alpha).validate();
  if (a.m_budget < 1) dkn::fail(dkn::ErrorKind::Config, "--M-budget must be >= 1");
  const dkn::AssumptionTier tier = dkn::tier_from_string(a.tier);
  dkn::CsvTable table({"eta", "M", "gamma", "bound"});
  for (const auto& pr : dkn::admissible_pairs(a.k, a.alpha, a.v, a.m_budget, tier)) {
    table.add({fmt(pr.eta), std::to_string(pr.m_runs), fmt(pr.gamma), fmt(pr.bound)});
  }
  if (a.out.empty()) {
    std::cout << table.str();
  } else {
    dkn::write_file_atomic(a.out, table.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out;
  int threads = 0;
};

int cmd_simulate(const SimulateArgs& args, const std::vector<std::string>& argv) {
  const json raw = dkn::load_json_file(args.config);
  dkn::ScenarioConfig scenario = dkn::parse_scenario_config(raw);
  if (args.threads > 0) scenario.threads = args.threads;
  Manifest manifest("simulate", argv);
  manifest["config"] = raw;
  manifest["scenario"] = dkn::scenario_to_json(scenario);
  manifest["master_seed"] = scenario.master_seed;
  manifest["signal_seed"] = scenario.signal_seed;
  manifest["seed_derivation"] =
      "trial_seed = derive_seed(derive_seed(master_seed, amplitude_index), trial); "
      "filter seed = derive_seed(trial_seed, 1); run m uses substream m of the filter seed";
  manifest["threads"] = scenario.threads;

  const dkn::ExperimentResult result = dkn::run_experiment(scenario);
  for (const std::string& path : dkn::write_experiment_csv(result, args.out)) manifest.output(path);

  json summary = json::array();
  for (const auto& ar : result.amplitudes) {
    for (const auto& s : ar.methods) {
      summary.push_back({{"amplitude", ar.amplitude},
                         {"method", dkn::to_string(s.method)},
                         {"pfer", s.pfer},
                         {"pfer_se", s.pfer_se},
                         {"var_v", s.var_v},
                         {"kfwer", s.kfwer},
                         {"power", s.power}});
    }
  }
  manifest["summary"] = summary;
  manifest.write((fs::path(args.out) / "manifest.json").string());
  std::cout << "wrote " << result.amplitudes.size() << " amplitude(s) to " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

struct DiagnoseArgs {
  std::vector<std::string> records;
  double eta = 0.5;
  std::vector<int> nulls;
  std::string out;
};

int cmd_diagnose(const DiagnoseArgs& args, const std::vector<std::string>& argv) {
  if (!(args.eta > 0.0 && args.eta <= 1.0)) dkn::fail(dkn::ErrorKind::Config, "--eta must lie in (0, 1]");
  std::vector<dkn::SelectionRecord> records;
  for (const auto& path : args.records) records.push_back(dkn::parse_record_csv(dkn::read_file(path)));
  const int m_runs = records.front().m_runs();
  const int groups = records.front().num_groups();
  for (const auto& r : records) {
    if (r.m_runs() != m_runs || r.num_groups() != groups) {
      dkn::fail(dkn::ErrorKind::Data, "records must share M and the number of groups");
    }
  }
  std::vector<int> nulls = args.nulls;
  if (nulls.empty()) {
    for (int g = 0; g < groups; ++g) nulls.push_back(g);
  }
  std::vector<std::vector<int>> per_null(nulls.size());
  std::vector<int> pooled;
  for (std::size_t i = 0; i < nulls.size(); ++i) {
    if (nulls[i] < 0 || nulls[i] >= groups) dkn::fail(dkn::ErrorKind::Config, "null group index out of range");
    for (const auto& r : records) {
      const int c = r.counts()[static_cast<std::size_t>(nulls[i])];
      per_null[i].push_back(c);
      if (c > 0) pooled.push_back(c);
    }
  }
  const auto ratios = dkn::ratio_diagnostics(per_null, m_runs, args.eta, nulls);
  const dkn::MonotonicityDiagnostic mono = dkn::diagnose_monotonicity(pooled, m_runs);

  dkn::CsvTable ratio_table({"group_id", "records", "tail", "tail_lo", "tail_hi", "mean_pi", "ratio", "ratio_se"});
  for (const auto& d : ratios) {
    ratio_table.add({std::to_string(d.feature), std::to_string(d.trials), fmt(d.tail), fmt(d.tail_lo), fmt(d.tail_hi),
                     fmt(d.mean_pi), d.ratio ? fmt(*d.ratio) : "NA", d.ratio ? fmt(d.ratio_se) : "NA"});
  }
  dkn::CsvTable hist({"m", "pi", "count", "p_value_next"});
  for (std::size_t m = 0; m < mono.histogram.size(); ++m) {
    hist.add({std::to_string(m + 1), fmt(static_cast<double>(m + 1) / m_runs), std::to_string(mono.histogram[m]),
              m < mono.p_values.size() ? fmt(mono.p_values[m]) : "NA"});
  }

  fs::create_directories(args.out);
  Manifest manifest("diagnose", argv);
  manifest["records"] = args.records;
  manifest["eta"] = args.eta;
  manifest["M"] = m_runs;
  manifest["gamma_monotone"] = dkn::lp_gamma(m_runs, args.eta, dkn::LpVariant::Monotone).value;
  manifest["monotone_histogram"] = mono.monotone;
  const std::string ratio_path = (fs::path(args.out) / "ratios.csv").string();
  const std::string hist_path = (fs::path(args.out) / "null_pi_histogram.csv").string();
  dkn::write_file_atomic(ratio_path, ratio_table.str());
  dkn::write_file_atomic(hist_path, hist.str());
  manifest.output(ratio_path);
  manifest.output(hist_path);
  manifest.write((fs::path(args.out) / "manifest.json").string());
  std::cout << "monotone histogram: " << (mono.monotone ? "yes" : "no") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args_echo(argv, argv + argc);
  CLI::App app{"Derandomized model-X knockoffs"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  SelectArgs select;
  auto* sel = app.add_subcommand("select", "Run derandomized knockoffs on a CSV dataset");
  sel->add_option("--data", select.data, "CSV with features and a response column")->required();
  sel->add_option("--config", select.config, "JSON select configuration")->required();
  sel->add_option("--out", select.out, "Output directory")->required();
  sel->add_option("--threads", select.threads, "Worker cap (overrides the config)")->check(CLI::NonNegativeNumber);

  CalibrateArgs cal;
  auto* calc = app.add_subcommand("calibrate", "Print gamma and the implied error bounds");
  calc->add_option("--M", cal.m_runs, "Number of knockoff runs")->required();
  calc->add_option("--eta", cal.eta, "Selection frequency threshold")->required();
  calc->add_option("--variant", cal.variant, "monotone | partial_sum | decay");
  calc->add_option("--beta", cal.beta, "Decay rate for --variant decay");
  calc->add_option("--v", cal.v, "Base-procedure PFER level");
  calc->add_option("--k", cal.k, "Also report the k-FWER bound");
  calc->add_option("--tier", cal.tier, "markov | skewed");
  calc->add_flag("--assumption-free", cal.assumption_free, "Binomial factor under conditionally i.i.d. runs");

  FrontierArgs fr;
  auto* front = app.add_subcommand("frontier", "Admissible (eta, M) pairs as CSV");
  front->add_option("--k", fr.k)->required();
  front->add_option("--alpha", fr.alpha)->required();
  front->add_option("--v", fr.v);
  front->add_option("--M-budget", fr.m_budget);
  front->add_option("--tier", fr.tier, "markov | skewed");
  front->add_option("--out", fr.out, "CSV path (stdout when omitted)");

  SimulateArgs sim;
  auto* simc = app.add_subcommand("simulate", "Run a simulation scenario");
  simc->add_option("--config", sim.config, "JSON scenario")->required();
  simc->add_option("--out", sim.out, "Output directory")->required();
  simc->add_option("--threads", sim.threads, "Worker cap (overrides the config)")->check(CLI::NonNegativeNumber);

  DiagnoseArgs diag;
  auto* diagc = app.add_subcommand("diagnose", "Null frequency diagnostics from selection records");
  diagc->add_option("--record", diag.records, "selection.csv from `select` (repeatable)")->required();
  diagc->add_option("--eta", diag.eta, "Threshold for the tail ratio");
  diagc->add_option("--nulls", diag.nulls, "Null group ids (default: all)")->delimiter(',');
  diagc->add_option("--out", diag.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sel) return cmd_select(select, args_echo);
    if (*calc) return cmd_calibrate(cal);
    if (*front) return cmd_frontier(fr);
    if (*simc) return cmd_simulate(sim, args_echo);
    if (*diagc) return cmd_diagnose(diag, args_echo);
  } catch (const dkn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
