#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dkn {

/// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind { Argument, Config, Data, Calibration, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

enum class Family { Gaussian, Binomial };

const char* to_string(Family family);
Family family_from_string(const std::string& name);

/// n x p covariates plus a length-n response.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd x, Eigen::VectorXd y, std::vector<std::string> feature_names = {});

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  int n() const { return static_cast<int>(x_.rows()); }
  int p() const { return static_cast<int>(x_.cols()); }

  /// True when every response value is 0 or 1.
  bool binary_response() const;

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  std::vector<std::string> feature_names_;
};

/// Half-open column range [begin, end).
struct GroupRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool operator==(const GroupRange&) const = default;
};

/// Ordered partition of the columns into contiguous, nonempty groups. Groups
/// are the unit of selection everywhere; ungrouped analysis uses the trivial
/// partition.
class GroupPartition {
 public:
  explicit GroupPartition(std::vector<GroupRange> groups);

  static GroupPartition trivial(int p);
  static GroupPartition from_sizes(const std::vector<int>& sizes);

  int num_groups() const { return static_cast<int>(groups_.size()); }
  int num_features() const { return groups_.empty() ? 0 : groups_.back().end; }
  const GroupRange& group(int g) const { return groups_.at(static_cast<std::size_t>(g)); }
  const std::vector<GroupRange>& groups() const { return groups_; }
  int group_of(int feature) const { return feature_to_group_.at(static_cast<std::size_t>(feature)); }
  bool is_trivial() const { return num_groups() == num_features(); }

  bool operator==(const GroupPartition& other) const { return groups_ == other.groups_; }

 private:
  std::vector<GroupRange> groups_;
  std::vector<int> feature_to_group_;
};

GroupPartition make_trivial_partition(int p);

/// Sorted set of group indices drawn from [0, universe).
class SelectionSet {
 public:
  SelectionSet() = default;
  SelectionSet(std::vector<int> indices, int universe);

  const std::vector<int>& indices() const { return indices_; }
  int universe() const { return universe_; }
  int size() const { return static_cast<int>(indices_.size()); }
  bool empty() const { return indices_.empty(); }
  bool contains(int index) const;

  bool operator==(const SelectionSet&) const = default;

 private:
  std::vector<int> indices_;
  int universe_ = 0;
};

/// Whether a selection count out of `m_runs` reaches the threshold eta, i.e.
/// count / m_runs >= eta. The quotient is a correctly rounded double, so a
/// decimal eta equal to a rational count / m_runs compares as equal.
bool frequency_meets(int count, int m_runs, double eta);

/// Smallest count in [0, m_runs] meeting eta, or m_runs + 1 when none does.
int min_count_for(int m_runs, double eta);

/// Per-run selections, integer counts, and the thresholded final set.
class SelectionRecord {
 public:
  SelectionRecord(std::vector<SelectionSet> per_run, int num_groups, double eta);

  /// Record rebuilt from stored counts; per-run sets are not available.
  static SelectionRecord from_counts(std::vector<int> counts, int m_runs, double eta);

  int m_runs() const { return m_runs_; }
  int num_groups() const { return static_cast<int>(counts_.size()); }
  double eta() const { return eta_; }
  const std::vector<SelectionSet>& per_run() const { return per_run_; }
  const std::vector<int>& counts() const { return counts_; }
  double frequency(int g) const;
  const SelectionSet& final_set() const { return final_; }

  /// Final set recomputed at a different threshold.
  SelectionSet threshold(double eta) const;

 private:
  SelectionRecord() = default;

  std::vector<SelectionSet> per_run_;
  std::vector<int> counts_;
  int m_runs_ = 0;
  double eta_ = 0.5;
  SelectionSet final_;
};

enum class TargetKind { Pfer, KFwer };

/// The error rate a user wants controlled.
struct ErrorTarget {
  TargetKind kind = TargetKind::Pfer;
  double v = 1.0;
  int k = 1;
  double alpha = 0.1;

  static ErrorTarget pfer(double v);
  static ErrorTarget kfwer(int k, double alpha);
  void validate() const;
};

/// Parameters of one derandomized knockoff call.
struct FilterConfig {
  double v = 1.0;
  double eta = 0.5;
  int m_runs = 31;
  std::uint64_t master_seed = 0;

  void validate() const;
};

}  // namespace dkn
