#include "dkn/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dkn {

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

const char* to_string(Family family) {
  return family == Family::Gaussian ? "gaussian" : "binomial";
}

Family family_from_string(const std::string& name) {
  if (name == "gaussian") return Family::Gaussian;
  if (name == "binomial" || name == "logistic") return Family::Binomial;
  fail(ErrorKind::Config, "unknown family '" + name + "' (expected gaussian or binomial)");
}

Dataset::Dataset(Eigen::MatrixXd x, Eigen::VectorXd y, std::vector<std::string> feature_names)
    : x_(std::move(x)), y_(std::move(y)), feature_names_(std::move(feature_names)) {
  if (x_.rows() < 2) fail(ErrorKind::Data, "dataset needs at least 2 rows");
  if (x_.cols() < 1) fail(ErrorKind::Data, "dataset needs at least 1 feature");
  if (y_.size() != x_.rows()) {
    std::ostringstream msg;
    msg << "response length " << y_.size() << " does not match row count " << x_.rows();
    fail(ErrorKind::Data, msg.str());
  }
  if (!x_.allFinite() || !y_.allFinite()) fail(ErrorKind::Data, "dataset contains missing or non-finite values");
  if (!feature_names_.empty() && static_cast<Eigen::Index>(feature_names_.size()) != x_.cols()) {
    fail(ErrorKind::Data, "feature name count does not match column count");
  }
}

bool Dataset::binary_response() const {
  return std::all_of(y_.data(), y_.data() + y_.size(), [](double v) { return v == 0.0 || v == 1.0; });
}

GroupPartition::GroupPartition(std::vector<GroupRange> groups) : groups_(std::move(groups)) {
  if (groups_.empty()) fail(ErrorKind::Argument, "partition must contain at least one group");
  int expected_begin = 0;
  for (const auto& g : groups_) {
    if (g.begin != expected_begin || g.end <= g.begin) {
      fail(ErrorKind::Argument, "partition groups must be contiguous, ordered, nonempty and cover [0, p)");
    }
    expected_begin = g.end;
  }
  feature_to_group_.resize(static_cast<std::size_t>(expected_begin));
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    for (int j = groups_[g].begin; j < groups_[g].end; ++j) {
      feature_to_group_[static_cast<std::size_t>(j)] = static_cast<int>(g);
    }
  }
}

GroupPartition GroupPartition::trivial(int p) {
  if (p < 1) fail(ErrorKind::Argument, "trivial partition needs p >= 1");
  std::vector<GroupRange> groups;
  groups.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) groups.push_back({j, j + 1});
  return GroupPartition(std::move(groups));
}

GroupPartition GroupPartition::from_sizes(const std::vector<int>& sizes) {
  std::vector<GroupRange> groups;
  int begin = 0;
  for (int s : sizes) {
    groups.push_back({begin, begin + s});
    begin += s;
  }
  return GroupPartition(std::move(groups));
}

GroupPartition make_trivial_partition(int p) { return GroupPartition::trivial(p); }

SelectionSet::SelectionSet(std::vector<int> indices, int universe)
    : indices_(std::move(indices)), universe_(universe) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
  if (!indices_.empty() && (indices_.front() < 0 || indices_.back() >= universe_)) {
    fail(ErrorKind::Argument, "selection index out of range");
  }
}

bool SelectionSet::contains(int index) const {
  return std::binary_search(indices_.begin(), indices_.end(), index);
}

bool frequency_meets(int count, int m_runs, double eta) {
  return static_cast<double>(count) / static_cast<double>(m_runs) >= eta;
}

int min_count_for(int m_runs, double eta) {
  // Monotone in count, so the first hit is the answer.
  for (int m = 0; m <= m_runs; ++m) {
    if (frequency_meets(m, m_runs, eta)) return m;
  }
  return m_runs + 1;
}

SelectionRecord::SelectionRecord(std::vector<SelectionSet> per_run, int num_groups, double eta)
    : per_run_(std::move(per_run)),
      counts_(static_cast<std::size_t>(num_groups), 0),
      m_runs_(static_cast<int>(per_run_.size())),
      eta_(eta) {
  if (per_run_.empty()) fail(ErrorKind::Argument, "selection record needs at least one run");
  if (!(eta > 0.0 && eta <= 1.0)) fail(ErrorKind::Argument, "eta must lie in (0, 1]");
  for (const auto& run : per_run_) {
    if (run.universe() != num_groups) fail(ErrorKind::Argument, "run universe does not match group count");
    for (int g : run.indices()) ++counts_[static_cast<std::size_t>(g)];
  }
  final_ = threshold(eta_);
}

SelectionRecord SelectionRecord::from_counts(std::vector<int> counts, int m_runs, double eta) {
  if (m_runs < 1) fail(ErrorKind::Argument, "m_runs must be positive");
  if (!(eta > 0.0 && eta <= 1.0)) fail(ErrorKind::Argument, "eta must lie in (0, 1]");
  for (int c : counts) {
    if (c < 0 || c > m_runs) fail(ErrorKind::Argument, "selection count outside [0, M]");
  }
  SelectionRecord record;
  record.counts_ = std::move(counts);
  record.m_runs_ = m_runs;
  record.eta_ = eta;
  record.final_ = record.threshold(eta);
  return record;
}

double SelectionRecord::frequency(int g) const {
  return static_cast<double>(counts_.at(static_cast<std::size_t>(g))) / static_cast<double>(m_runs_);
}

SelectionSet SelectionRecord::threshold(double eta) const {
  std::vector<int> selected;
  for (std::size_t g = 0; g < counts_.size(); ++g) {
    if (frequency_meets(counts_[g], m_runs_, eta)) selected.push_back(static_cast<int>(g));
  }
  return SelectionSet(std::move(selected), num_groups());
}

ErrorTarget ErrorTarget::pfer(double v) {
  ErrorTarget t;
  t.kind = TargetKind::Pfer;
  t.v = v;
  t.validate();
  return t;
}

ErrorTarget ErrorTarget::kfwer(int k, double alpha) {
  ErrorTarget t;
  t.kind = TargetKind::KFwer;
  t.k = k;
  t.alpha = alpha;
  t.validate();
  return t;
}

void ErrorTarget::validate() const {
  if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::Config, "PFER budget v must be a finite value >= 0");
  if (k < 1) fail(ErrorKind::Config, "k must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::Config, "alpha must lie in (0, 1)");
}

void FilterConfig::validate() const {
  if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::Config, "v must be a finite value >= 0");
  if (!(eta > 0.0 && eta <= 1.0)) fail(ErrorKind::Config, "eta must lie in (0, 1]");
  if (m_runs < 1) fail(ErrorKind::Config, "M must be >= 1");
}

}  // namespace dkn
