#include "dkn/knockoff_filter.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace dkn {
namespace {

SelectionSet scan(const StatisticVector& w, int v, std::vector<int> order) {
  if (v < 0) fail(ErrorKind::Argument, "v must be >= 0");
  const Eigen::VectorXd& vals = w.w;
  if (!vals.allFinite()) fail(ErrorKind::Numerical, "feature statistics must be finite");
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(vals(a)) > std::abs(vals(b)); });
  std::vector<int> selected;
  if (v == 0) return SelectionSet({}, static_cast<int>(vals.size()));
  int negatives = 0;
  for (int g : order) {
    if (vals(g) < 0.0 && ++negatives == v) break;
    if (vals(g) > 0.0) selected.push_back(g);
  }
  return SelectionSet(std::move(selected), static_cast<int>(vals.size()));
}

}  // namespace

SelectionSet vknockoff_select(const StatisticVector& w, int v, Rng& rng) {
  return scan(w, v, rng.permutation(static_cast<int>(w.w.size())));
}

SelectionSet vknockoff_select(const StatisticVector& w, int v) {
  std::vector<int> order(static_cast<std::size_t>(w.w.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  return scan(w, v, std::move(order));
}

SelectionSet randomized_v_select(const StatisticVector& w, double v, Rng& rng) {
  if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::Argument, "v must be a finite value >= 0");
  const double whole = std::floor(v);
  int level = static_cast<int>(whole);
  if (v > whole && rng.bernoulli(v - whole)) ++level;
  return vknockoff_select(w, level, rng);
}

HmmSampler::HmmSampler(HiddenMarkovModel hmm, GroupPartition partition)
    : hmm_(std::move(hmm)), partition_(std::move(partition)) {
  hmm_.validate();
  if (partition_.num_features() != hmm_.p()) fail(ErrorKind::Argument, "partition does not match the HMM length");
}

Eigen::MatrixXd HmmSampler::sample(const Eigen::MatrixXd& x, Rng& rng) const {
  if (x.cols() != hmm_.p()) fail(ErrorKind::Argument, "column count does not match the HMM");
  Eigen::MatrixXd out(x.rows(), x.cols());
  std::vector<int> row(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double s = x(i, j);
      if (s != std::floor(s)) fail(ErrorKind::Data, "HMM features must be integer symbols");
      row[static_cast<std::size_t>(j)] = static_cast<int>(s);
    }
    const std::vector<int> tilde = sample_hmm_knockoff(hmm_, row, partition_, rng);
    for (Eigen::Index j = 0; j < x.cols(); ++j) out(i, j) = tilde[static_cast<std::size_t>(j)];
  }
  return out;
}

SelectionRecord aggregate_runs(int m_runs, int num_groups, double eta, const std::function<SelectionSet(int)>& run,
                               int threads) {
  if (m_runs < 1) fail(ErrorKind::Argument, "M must be >= 1");
  std::vector<SelectionSet> sets(static_cast<std::size_t>(m_runs));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(m_runs));
  std::atomic<int> next{0};
  // Runs below the lowest failure so far still execute, so the rethrown
  // error does not depend on scheduling.
  std::atomic<int> first_failed{m_runs};
  auto worker = [&]() {
    for (int m = next++; m < m_runs; m = next++) {
      if (m > first_failed) break;
      try {
        sets[static_cast<std::size_t>(m)] = run(m);
      } catch (...) {
        errors[static_cast<std::size_t>(m)] = std::current_exception();
        int seen = first_failed;
        while (m < seen && !first_failed.compare_exchange_weak(seen, m)) {
        }
      }
    }
  };
  const int workers = std::clamp(threads, 1, m_runs);
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
  return SelectionRecord(std::move(sets), num_groups, eta);
}

SelectionSet knockoff_run(const Dataset& dataset, const KnockoffSampler& sampler, const GroupPartition& partition,
                          double v, Family family, Rng& rng, const LcdOptions& options) {
  const Eigen::MatrixXd knockoff = sampler.sample(dataset.x(), rng);
  const StatisticVector w = lcd_statistic(dataset, knockoff, partition, family, rng, options);
  return randomized_v_select(w, v, rng);
}

SelectionRecord derandomized_select(const Dataset& dataset, const KnockoffSampler& sampler,
                                    const GroupPartition& partition, const FilterConfig& config, Family family,
                                    const DerandomizedOptions& options) {
  config.validate();
  if (partition.num_features() != dataset.p()) fail(ErrorKind::Argument, "partition does not cover the features");
  if (family == Family::Binomial && !dataset.binary_response()) fail(ErrorKind::Data, "binomial family needs a 0/1 response");
  return aggregate_runs(
      config.m_runs, partition.num_groups(), config.eta,
      [&](int m) {
        Rng rng = Rng::substream(config.master_seed, static_cast<std::uint64_t>(m));
        return knockoff_run(dataset, sampler, partition, config.v, family, rng, options.lcd);
      },
      options.threads);
}

}  // namespace dkn
