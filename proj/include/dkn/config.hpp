#pragma once

#include "dkn/calibration.hpp"
#include "dkn/core.hpp"
#include "dkn/sim_harness.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace dkn {

enum class KnockoffKind { Gaussian, Hmm };

/// Settings of `select`. JSON schema (all keys optional unless noted):
///   target: {kind: "pfer", v, eta, M} | {kind: "kfwer", k, alpha, M_budget, tier}
///   family: "gaussian" | "binomial"
///   seed: unsigned integer
///   knockoff: {model: "gaussian"} | {model: "hmm", file: path}
///   group_resolution: fraction in (0, 1]
///   cv_folds, header (bool), response (column name), threads
struct SelectConfig {
  ErrorTarget target;
  double eta = 0.5;
  int m_runs = 31;
  int m_budget = 31;
  AssumptionTier tier = AssumptionTier::Markov;
  Family family = Family::Gaussian;
  std::uint64_t seed = 0;
  KnockoffKind knockoff = KnockoffKind::Gaussian;
  std::string hmm_file;
  std::optional<double> group_resolution;
  int cv_folds = 10;
  bool header = true;
  std::optional<std::string> response;
  int threads = 1;
};

SelectConfig parse_select_config(const nlohmann::json& j);

/// Scenario JSON: name, n, p, phi, num_signals, amplitudes, family
/// ("gaussian_linear" | "logistic"), signal_seed, trials, master_seed,
/// heritability, methods, and method: {v, eta, M, k, bonferroni_budget,
/// cv_folds}.
ScenarioConfig parse_scenario_config(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& s);

nlohmann::json load_json_file(const std::string& path);

}  // namespace dkn
