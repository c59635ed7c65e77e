#pragma once

#include "dkn/core.hpp"
#include "dkn/rng.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace dkn {

/// Inhomogeneous chain over K states: init is the law of position 0 and
/// trans[j] is the K x K kernel from position j to j + 1.
struct DiscreteMarkovChain {
  Eigen::VectorXd init;
  std::vector<Eigen::MatrixXd> trans;

  int p() const { return static_cast<int>(trans.size()) + 1; }
  int num_states() const { return static_cast<int>(init.size()); }

  void validate() const;
  /// Law of H_j.
  Eigen::VectorXd marginal(int j) const;
  /// P(H = h).
  double probability(const std::vector<int>& h) const;
  /// Chain restricted to positions [begin, end], started from its marginal.
  DiscreteMarkovChain restrict(int begin, int end) const;
};

/// Latent chain plus per-position K x E emission matrices.
struct HiddenMarkovModel {
  DiscreteMarkovChain chain;
  std::vector<Eigen::MatrixXd> emission;

  int p() const { return chain.p(); }
  int num_states() const { return chain.num_states(); }
  int num_symbols() const { return emission.empty() ? 0 : static_cast<int>(emission.front().cols()); }

  void validate() const;
};

/// Exact posterior draw of the latent chain given observed symbols.
std::vector<int> sample_posterior_chain(const HiddenMarkovModel& hmm, const std::vector<int>& x_row, Rng& rng);

/// Group knockoff of a chain path: groups are drawn in order, each from the
/// law of H_g given H_{-g} and the knockoffs already drawn, by exact dynamic
/// programming.
std::vector<int> sample_chain_knockoff(const DiscreteMarkovChain& chain, const std::vector<int>& h_row,
                                       const GroupPartition& partition, Rng& rng);

/// Probability that sample_chain_knockoff returns `h_tilde` given `h_row`.
double chain_knockoff_probability(const DiscreteMarkovChain& chain, const std::vector<int>& h_row,
                                  const std::vector<int>& h_tilde, const GroupPartition& partition);

/// Unconditional HMM knockoff of every feature: posterior chain, chain
/// knockoff, then emission.
std::vector<int> sample_hmm_knockoff(const HiddenMarkovModel& hmm, const std::vector<int>& x_row,
                                     const GroupPartition& partition, Rng& rng);

/// A maximal run of consecutive candidate groups and its flanking positions.
struct Clip {
  int first_group = 0;
  int last_group = 0;  ///< inclusive
  int begin = 0;       ///< first feature
  int end = 0;         ///< one past the last feature
  std::optional<int> left_flank;
  std::optional<int> right_flank;
};

struct ClipDecomposition {
  GroupPartition partition{std::vector<GroupRange>{{0, 1}}};
  std::vector<int> candidate_groups;  ///< sorted
  std::vector<int> members;           ///< E, sorted
  std::vector<int> adjacent;          ///< A(E), sorted
  std::vector<Clip> clips;
};

ClipDecomposition build_clips(const GroupPartition& partition, const std::vector<int>& candidates);

/// Knockoff latent states for the clip members only (aligned with
/// clips.members), given the full latent path h_row. Each clip is sampled on
/// the sub-chain spanning its flanks; flank copies are discarded.
std::vector<int> sample_clip_knockoff(const DiscreteMarkovChain& chain, const std::vector<int>& h_row,
                                      const ClipDecomposition& clips, Rng& rng);

/// Probability of `h_tilde_members` under sample_clip_knockoff.
double clip_knockoff_probability(const DiscreteMarkovChain& chain, const std::vector<int>& h_row,
                                 const std::vector<int>& h_tilde_members, const ClipDecomposition& clips);

/// Conditional HMM knockoff symbols for the clip members (aligned with
/// clips.members).
std::vector<int> sample_conditional_hmm_knockoff(const HiddenMarkovModel& hmm, const std::vector<int>& x_row,
                                                 const ClipDecomposition& clips, Rng& rng);

/// Contiguous clustering into ceil(resolution * p) groups by greedy merging
/// of the adjacent pair with the largest average absolute correlation.
GroupPartition adjacency_constrained_clustering(const Eigen::MatrixXd& corr, double resolution);

struct HmmLimits {
  int max_states = 16;
  int max_length = 5000;
};

/// Text format, whitespace separated, '#' starts a comment:
///   p K E
///   init (K values)
///   p - 1 transition matrices, K x K, row-major
///   p emission matrices, K x E, row-major
HiddenMarkovModel load_hmm(const std::string& path, const HmmLimits& limits = {});
HiddenMarkovModel parse_hmm(const std::string& text, const HmmLimits& limits = {});

}  // namespace dkn
