#include "dkn/config.hpp"

#include "dkn/csv.hpp"

namespace dkn {
namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::Config, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(ErrorKind::Config, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Config, std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

SelectConfig parse_select_config(const json& j) {
  check_keys(j, {"target", "family", "seed", "knockoff", "group_resolution", "cv_folds", "header", "response", "threads"},
             "select config");
  SelectConfig c;
  if (!j.contains("target")) fail(ErrorKind::Config, "select config needs a target");
  const json& t = j.at("target");
  const std::string kind = get_or<std::string>(t, "kind", "");
  if (kind == "pfer") {
    check_keys(t, {"kind", "v", "eta", "M"}, "target");
    c.target = ErrorTarget::pfer(get_or<double>(t, "v", 1.0));
    c.eta = get_or<double>(t, "eta", 0.5);
    c.m_runs = get_or<int>(t, "M", 31);
    FilterConfig{c.target.v, c.eta, c.m_runs, 0}.validate();
  } else if (kind == "kfwer") {
    check_keys(t, {"kind", "k", "alpha", "M_budget", "tier"}, "target");
    c.target = ErrorTarget::kfwer(get_or<int>(t, "k", 1), get_or<double>(t, "alpha", 0.1));
    c.m_budget = get_or<int>(t, "M_budget", 31);
    c.tier = tier_from_string(get_or<std::string>(t, "tier", "markov"));
    if (c.m_budget < 2) fail(ErrorKind::Config, "M_budget must be >= 2");
  } else {
    fail(ErrorKind::Config, "target.kind must be 'pfer' or 'kfwer'");
  }
  c.family = family_from_string(get_or<std::string>(j, "family", "gaussian"));
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  if (j.contains("knockoff")) {
    const json& k = j.at("knockoff");
    check_keys(k, {"model", "file"}, "knockoff");
    const std::string model = get_or<std::string>(k, "model", "gaussian");
    if (model == "gaussian") {
      c.knockoff = KnockoffKind::Gaussian;
    } else if (model == "hmm") {
      c.knockoff = KnockoffKind::Hmm;
      c.hmm_file = get_or<std::string>(k, "file", "");
      if (c.hmm_file.empty()) fail(ErrorKind::Config, "knockoff model 'hmm' needs a file");
    } else {
      fail(ErrorKind::Config, "knockoff.model must be 'gaussian' or 'hmm'");
    }
  }
  if (j.contains("group_resolution")) {
    const double r = get_or<double>(j, "group_resolution", 1.0);
    if (!(r > 0.0 && r <= 1.0)) fail(ErrorKind::Config, "group_resolution must lie in (0, 1]");
    c.group_resolution = r;
  }
  c.cv_folds = get_or<int>(j, "cv_folds", 10);
  if (c.cv_folds < 2) fail(ErrorKind::Config, "cv_folds must be >= 2");
  c.header = get_or<bool>(j, "header", true);
  if (j.contains("response")) c.response = get_or<std::string>(j, "response", "");
  c.threads = get_or<int>(j, "threads", 1);
  return c;
}

ScenarioConfig parse_scenario_config(const json& j) {
  check_keys(j, {"name", "n", "p", "phi", "num_signals", "amplitudes", "family", "signal_seed", "trials", "master_seed",
                 "heritability", "methods", "method", "threads"},
             "scenario");
  ScenarioConfig s;
  s.name = get_or<std::string>(j, "name", s.name);
  s.n = get_or<int>(j, "n", s.n);
  s.p = get_or<int>(j, "p", s.p);
  s.phi = get_or<double>(j, "phi", s.phi);
  s.num_signals = get_or<int>(j, "num_signals", s.num_signals);
  s.amplitudes = get_or<std::vector<double>>(j, "amplitudes", s.amplitudes);
  s.response = response_model_from_string(get_or<std::string>(j, "family", to_string(s.response)));
  s.signal_seed = get_or<std::uint64_t>(j, "signal_seed", s.signal_seed);
  s.trials = get_or<int>(j, "trials", s.trials);
  s.master_seed = get_or<std::uint64_t>(j, "master_seed", s.master_seed);
  if (j.contains("heritability")) s.heritability = get_or<double>(j, "heritability", 0.0);
  s.threads = get_or<int>(j, "threads", s.threads);
  if (j.contains("methods")) {
    s.methods.clear();
    for (const auto& m : get_or<std::vector<std::string>>(j, "methods", {})) s.methods.push_back(method_from_string(m));
  }
  if (j.contains("method")) {
    const json& m = j.at("method");
    check_keys(m, {"v", "eta", "M", "k", "bonferroni_budget", "cv_folds"}, "method");
    s.filter.v = get_or<double>(m, "v", s.filter.v);
    s.filter.eta = get_or<double>(m, "eta", s.filter.eta);
    s.filter.m_runs = get_or<int>(m, "M", s.filter.m_runs);
    s.k = get_or<int>(m, "k", s.k);
    s.bonferroni_budget = get_or<double>(m, "bonferroni_budget", s.bonferroni_budget);
    s.cv_folds = get_or<int>(m, "cv_folds", s.cv_folds);
  }
  s.validate();
  return s;
}

json scenario_to_json(const ScenarioConfig& s) {
  json j;
  j["name"] = s.name;
  j["n"] = s.n;
  j["p"] = s.p;
  j["phi"] = s.phi;
  j["num_signals"] = s.num_signals;
  j["amplitudes"] = s.amplitudes;
  j["family"] = to_string(s.response);
  j["signal_seed"] = s.signal_seed;
  j["trials"] = s.trials;
  j["master_seed"] = s.master_seed;
  if (s.heritability) j["heritability"] = *s.heritability;
  std::vector<std::string> methods;
  for (Method m : s.methods) methods.emplace_back(to_string(m));
  j["methods"] = methods;
  j["method"] = {{"v", s.filter.v}, {"eta", s.filter.eta}, {"M", s.filter.m_runs}, {"k", s.k},
                 {"bonferroni_budget", s.bonferroni_budget}, {"cv_folds", s.cv_folds}};
  return j;
}

json load_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, "cannot parse '" + path + "': " + e.what());
  }
}

}  // namespace dkn
