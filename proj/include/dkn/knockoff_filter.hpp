#pragma once

#include "dkn/core.hpp"
#include "dkn/feature_statistics.hpp"
#include "dkn/gaussian_knockoffs.hpp"
#include "dkn/markov_knockoffs.hpp"
#include "dkn/rng.hpp"

#include <Eigen/Dense>

#include <functional>

namespace dkn {

/// Scan groups by decreasing |W| and stop at the v-th negative sign; select
/// the positive groups seen before it. Zeros are neither selected nor
/// counted. Ties in |W| follow a random permutation drawn from `rng`.
SelectionSet vknockoff_select(const StatisticVector& w, int v, Rng& rng);

/// Same scan with ties broken by index.
SelectionSet vknockoff_select(const StatisticVector& w, int v);

/// Non-integer v: run the (floor(v) + 1)-knockoffs with probability
/// v - floor(v), the floor(v)-knockoffs otherwise (0-knockoffs select nothing).
SelectionSet randomized_v_select(const StatisticVector& w, double v, Rng& rng);

/// Draws knockoff copies of X. Samplers see only X, never the response.
class KnockoffSampler {
 public:
  virtual ~KnockoffSampler() = default;
  virtual Eigen::MatrixXd sample(const Eigen::MatrixXd& x, Rng& rng) const = 0;
};

class GaussianSampler : public KnockoffSampler {
 public:
  explicit GaussianSampler(GaussianKnockoffModel model) : model_(std::move(model)) {}
  Eigen::MatrixXd sample(const Eigen::MatrixXd& x, Rng& rng) const override { return model_.sample_matrix(x, rng); }
  const GaussianKnockoffModel& model() const { return model_; }

 private:
  GaussianKnockoffModel model_;
};

/// HMM group knockoffs; X holds integer symbols stored as reals.
class HmmSampler : public KnockoffSampler {
 public:
  HmmSampler(HiddenMarkovModel hmm, GroupPartition partition);
  Eigen::MatrixXd sample(const Eigen::MatrixXd& x, Rng& rng) const override;

 private:
  HiddenMarkovModel hmm_;
  GroupPartition partition_;
};

struct DerandomizedOptions {
  LcdOptions lcd;
  int threads = 1;
};

/// Runs `run(m)` for m = 0..M-1 on up to `threads` workers and aggregates.
/// Any failing run aborts the whole call; the error of the lowest failing
/// index is rethrown.
SelectionRecord aggregate_runs(int m_runs, int num_groups, double eta, const std::function<SelectionSet(int)>& run,
                               int threads = 1);

/// One base-procedure run with stream `rng`: knockoff, LCD, v-knockoffs.
SelectionSet knockoff_run(const Dataset& dataset, const KnockoffSampler& sampler, const GroupPartition& partition,
                          double v, Family family, Rng& rng, const LcdOptions& options = {});

/// Derandomized knockoffs: run m uses Rng::substream(master_seed, m).
SelectionRecord derandomized_select(const Dataset& dataset, const KnockoffSampler& sampler,
                                    const GroupPartition& partition, const FilterConfig& config, Family family,
                                    const DerandomizedOptions& options = {});

}  // namespace dkn
