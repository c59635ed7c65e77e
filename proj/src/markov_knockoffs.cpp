#include "dkn/markov_knockoffs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace dkn {
namespace {

constexpr double kRowTol = 1e-12;

void check_stochastic(const Eigen::MatrixXd& m, const char* what) {
  if ((m.array() < 0.0).any() || !m.allFinite()) fail(ErrorKind::Argument, std::string(what) + " has negative or non-finite entries");
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (std::abs(m.row(r).sum() - 1.0) > kRowTol) fail(ErrorKind::Argument, std::string(what) + " rows must sum to 1");
  }
}

void check_path(const DiscreteMarkovChain& chain, const std::vector<int>& h) {
  if (static_cast<int>(h.size()) != chain.p()) fail(ErrorKind::Argument, "path length does not match the chain");
  for (int s : h) {
    if (s < 0 || s >= chain.num_states()) fail(ErrorKind::Argument, "latent state out of range");
  }
}

// Group-by-group conditional laws of the chain knockoff. Group l with
// columns [a, b) has unnormalized weight
//   start(z_a) * prod_{i=a}^{b-2} Q_{i+1}(z_i, z_{i+1}) * Q_b(z_{b-1}, h_b)
// with start(z) = Q_a(h_{a-1}, z) * Q_a(h~_{a-1}, z) / N_{l-1}(z) (init in
// place of Q_a at a = 0, no bracket for the first group, no closing factor
// for the last one). N_l(w) is the same sum with h_b replaced by w. Scale
// factors common to all entries of N_l cancel in the next group's law.
class GroupRecursion {
 public:
  GroupRecursion(const DiscreteMarkovChain& chain, const std::vector<int>& h, const GroupPartition& partition)
      : chain_(chain), h_(h), partition_(partition), tilde_(h.size(), -1) {
    check_path(chain, h);
    if (partition.num_features() != chain.p()) fail(ErrorKind::Argument, "partition does not cover the chain");
  }

  // Samples group l into tilde_.
  void sample(int l, Rng& rng) {
    const auto [a, b] = bounds(l);
    const Eigen::VectorXd start = start_weights(l);
    finish_normalizer(l, start);

    std::vector<Eigen::VectorXd> beta(static_cast<std::size_t>(b - a));
    beta.back() = closing(b);
    for (int i = b - 2; i >= a; --i) {
      Eigen::VectorXd next = chain_.trans[static_cast<std::size_t>(i)] * beta[static_cast<std::size_t>(i + 1 - a)];
      const double s = next.sum();
      if (s > 0.0) next /= s;
      beta[static_cast<std::size_t>(i - a)] = next;
    }
    Eigen::VectorXd w = start.cwiseProduct(beta.front());
    tilde_[static_cast<std::size_t>(a)] = draw(w, rng);
    for (int i = a + 1; i < b; ++i) {
      const int prev = tilde_[static_cast<std::size_t>(i - 1)];
      w = chain_.trans[static_cast<std::size_t>(i - 1)].row(prev).transpose().cwiseProduct(beta[static_cast<std::size_t>(i - a)]);
      tilde_[static_cast<std::size_t>(i)] = draw(w, rng);
    }
  }

  // Probability of the given group values; writes them into tilde_.
  double evaluate(int l, const std::vector<int>& values) {
    const auto [a, b] = bounds(l);
    const Eigen::VectorXd start = start_weights(l);
    const double log_norm = finish_normalizer(l, start);
    for (int i = a; i < b; ++i) tilde_[static_cast<std::size_t>(i)] = values[static_cast<std::size_t>(i)];

    double weight = start(values[static_cast<std::size_t>(a)]);
    for (int i = a + 1; i < b; ++i) {
      weight *= chain_.trans[static_cast<std::size_t>(i - 1)](values[static_cast<std::size_t>(i - 1)], values[static_cast<std::size_t>(i)]);
    }
    weight *= closing(b)(values[static_cast<std::size_t>(b - 1)]);
    if (weight == 0.0) return 0.0;
    return std::exp(std::log(weight) - log_norm);
  }

  const std::vector<int>& tilde() const { return tilde_; }

 private:
  std::pair<int, int> bounds(int l) const {
    const GroupRange& g = partition_.group(l);
    return {g.begin, g.end};
  }

  Eigen::VectorXd start_weights(int l) const {
    const int a = partition_.group(l).begin;
    Eigen::VectorXd start = a == 0 ? chain_.init
                                   : Eigen::VectorXd(chain_.trans[static_cast<std::size_t>(a - 1)].row(h_[static_cast<std::size_t>(a - 1)]).transpose());
    if (l > 0) {
      const Eigen::VectorXd into = chain_.trans[static_cast<std::size_t>(a - 1)].row(tilde_[static_cast<std::size_t>(a - 1)]).transpose();
      for (Eigen::Index z = 0; z < start.size(); ++z) {
        start(z) = prev_norm_(z) > 0.0 ? start(z) * into(z) / prev_norm_(z) : 0.0;
      }
    }
    return start;
  }

  // Closing factor Q_b(z, h_b) on the group's last state (ones at the end).
  Eigen::VectorXd closing(int b) const {
    if (b >= chain_.p()) return Eigen::VectorXd::Ones(chain_.num_states());
    return chain_.trans[static_cast<std::size_t>(b - 1)].col(h_[static_cast<std::size_t>(b)]);
  }

  // Computes N_l for the next group; returns log of the normalizer at the
  // actual h_b, on the true scale.
  double finish_normalizer(int l, const Eigen::VectorXd& start) {
    const auto [a, b] = bounds(l);
    Eigen::VectorXd alpha = start;
    double log_scale = 0.0;
    for (int i = a; i < b - 1; ++i) {
      alpha = chain_.trans[static_cast<std::size_t>(i)].transpose() * alpha;
      const double s = alpha.sum();
      if (!(s > 0.0)) fail(ErrorKind::Numerical, "knockoff recursion hit a zero-probability state");
      alpha /= s;
      log_scale += std::log(s);
    }
    double at_h = 0.0;
    if (b < chain_.p()) {
      prev_norm_ = chain_.trans[static_cast<std::size_t>(b - 1)].transpose() * alpha;
      at_h = prev_norm_(h_[static_cast<std::size_t>(b)]);
    } else {
      at_h = alpha.sum();
    }
    if (!(at_h > 0.0)) fail(ErrorKind::Numerical, "knockoff recursion hit a zero-probability state");
    return std::log(at_h) + log_scale;
  }

  static int draw(const Eigen::VectorXd& w, Rng& rng) {
    return static_cast<int>(rng.categorical(std::span<const double>(w.data(), static_cast<std::size_t>(w.size()))));
  }

  const DiscreteMarkovChain& chain_;
  const std::vector<int>& h_;
  const GroupPartition& partition_;
  std::vector<int> tilde_;
  Eigen::VectorXd prev_norm_;
};

std::vector<int> sub_sizes(const ClipDecomposition& clips, const Clip& clip) {
  std::vector<int> sizes;
  if (clip.left_flank) sizes.push_back(1);
  for (int g = clip.first_group; g <= clip.last_group; ++g) sizes.push_back(clips.partition.group(g).size());
  if (clip.right_flank) sizes.push_back(1);
  return sizes;
}

int sub_begin(const Clip& clip) { return clip.left_flank ? *clip.left_flank : clip.begin; }
int sub_end(const Clip& clip) { return clip.right_flank ? *clip.right_flank + 1 : clip.end; }

}  // namespace

void DiscreteMarkovChain::validate() const {
  if (init.size() < 1) fail(ErrorKind::Argument, "chain needs at least one state");
  if ((init.array() < 0.0).any() || std::abs(init.sum() - 1.0) > kRowTol) {
    fail(ErrorKind::Argument, "initial distribution must be a probability vector");
  }
  for (const auto& t : trans) {
    if (t.rows() != init.size() || t.cols() != init.size()) fail(ErrorKind::Argument, "transition matrix must be K x K");
    check_stochastic(t, "transition matrix");
  }
}

Eigen::VectorXd DiscreteMarkovChain::marginal(int j) const {
  if (j < 0 || j >= p()) fail(ErrorKind::Argument, "position out of range");
  Eigen::VectorXd m = init;
  for (int i = 0; i < j; ++i) m = trans[static_cast<std::size_t>(i)].transpose() * m;
  return m;
}

double DiscreteMarkovChain::probability(const std::vector<int>& h) const {
  check_path(*this, h);
  double prob = init(h[0]);
  for (int j = 1; j < p(); ++j) prob *= trans[static_cast<std::size_t>(j - 1)](h[static_cast<std::size_t>(j - 1)], h[static_cast<std::size_t>(j)]);
  return prob;
}

DiscreteMarkovChain DiscreteMarkovChain::restrict(int begin, int end) const {
  if (begin < 0 || end >= p() || begin > end) fail(ErrorKind::Argument, "sub-chain bounds out of range");
  DiscreteMarkovChain sub;
  sub.init = marginal(begin);
  sub.trans.assign(trans.begin() + begin, trans.begin() + end);
  return sub;
}

void HiddenMarkovModel::validate() const {
  chain.validate();
  if (static_cast<int>(emission.size()) != chain.p()) fail(ErrorKind::Argument, "need one emission matrix per position");
  for (const auto& e : emission) {
    if (e.rows() != chain.num_states() || e.cols() != emission.front().cols() || e.cols() < 1) {
      fail(ErrorKind::Argument, "emission matrices must all be K x E");
    }
    check_stochastic(e, "emission matrix");
  }
}

std::vector<int> sample_posterior_chain(const HiddenMarkovModel& hmm, const std::vector<int>& x_row, Rng& rng) {
  const int p = hmm.p();
  if (static_cast<int>(x_row.size()) != p) fail(ErrorKind::Argument, "observation length does not match the HMM");
  for (int s : x_row) {
    if (s < 0 || s >= hmm.num_symbols()) fail(ErrorKind::Data, "observed symbol out of range");
  }
  // beta[j](h) is proportional to P(x_{j+1..p-1} | H_j = h).
  std::vector<Eigen::VectorXd> beta(static_cast<std::size_t>(p));
  beta.back() = Eigen::VectorXd::Ones(hmm.num_states());
  for (int j = p - 2; j >= 0; --j) {
    const Eigen::VectorXd next = hmm.emission[static_cast<std::size_t>(j + 1)].col(x_row[static_cast<std::size_t>(j + 1)]).cwiseProduct(beta[static_cast<std::size_t>(j + 1)]);
    Eigen::VectorXd b = hmm.chain.trans[static_cast<std::size_t>(j)] * next;
    const double s = b.sum();
    if (!(s > 0.0)) fail(ErrorKind::Data, "observation sequence has zero likelihood under the HMM");
    beta[static_cast<std::size_t>(j)] = b / s;
  }
  std::vector<int> h(static_cast<std::size_t>(p));
  Eigen::VectorXd w = hmm.chain.init.cwiseProduct(hmm.emission[0].col(x_row[0])).cwiseProduct(beta[0]);
  if (!(w.sum() > 0.0)) fail(ErrorKind::Data, "observation sequence has zero likelihood under the HMM");
  h[0] = static_cast<int>(rng.categorical(std::span<const double>(w.data(), static_cast<std::size_t>(w.size()))));
  for (int j = 1; j < p; ++j) {
    w = hmm.chain.trans[static_cast<std::size_t>(j - 1)].row(h[static_cast<std::size_t>(j - 1)]).transpose()
            .cwiseProduct(hmm.emission[static_cast<std::size_t>(j)].col(x_row[static_cast<std::size_t>(j)]))
            .cwiseProduct(beta[static_cast<std::size_t>(j)]);
    h[static_cast<std::size_t>(j)] = static_cast<int>(rng.categorical(std::span<const double>(w.data(), static_cast<std::size_t>(w.size()))));
  }
  return h;
}

std::vector<int> sample_chain_knockoff(const DiscreteMarkovChain& chain, const std::vector<int>& h_row,
                                       const GroupPartition& partition, Rng& rng) {
  GroupRecursion rec(chain, h_row, partition);
  for (int l = 0; l < partition.num_groups(); ++l) rec.sample(l, rng);
  return rec.tilde();
}

double chain_knockoff_probability(const DiscreteMarkovChain& chain, const std::vector<int>& h_row,
                                  const std::vector<int>& h_tilde, const GroupPartition& partition) {
  check_path(chain, h_tilde);
  GroupRecursion rec(chain, h_row, partition);
  double prob = 1.0;
  for (int l = 0; l < partition.num_groups() && prob > 0.0; ++l) prob *= rec.evaluate(l, h_tilde);
  return prob;
}

std::vector<int> sample_hmm_knockoff(const HiddenMarkovModel& hmm, const std::vector<int>& x_row,
                                     const GroupPartition& partition, Rng& rng) {
  const std::vector<int> h = sample_posterior_chain(hmm, x_row, rng);
  const std::vector<int> h_tilde = sample_chain_knockoff(hmm.chain, h, partition, rng);
  std::vector<int> x_tilde(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) {
    const Eigen::VectorXd row = hmm.emission[j].row(h_tilde[j]).transpose();
    x_tilde[j] = static_cast<int>(rng.categorical(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
  }
  return x_tilde;
}

ClipDecomposition build_clips(const GroupPartition& partition, const std::vector<int>& candidates) {
  ClipDecomposition out;
  out.partition = partition;
  out.candidate_groups = candidates;
  std::sort(out.candidate_groups.begin(), out.candidate_groups.end());
  out.candidate_groups.erase(std::unique(out.candidate_groups.begin(), out.candidate_groups.end()), out.candidate_groups.end());
  for (int g : out.candidate_groups) {
    if (g < 0 || g >= partition.num_groups()) fail(ErrorKind::Argument, "candidate group index out of range");
  }
  const int p = partition.num_features();
  std::vector<bool> in_e(static_cast<std::size_t>(p), false);
  for (int g : out.candidate_groups) {
    for (int j = partition.group(g).begin; j < partition.group(g).end; ++j) {
      in_e[static_cast<std::size_t>(j)] = true;
      out.members.push_back(j);
    }
  }
  for (int j = 0; j < p; ++j) {
    if (in_e[static_cast<std::size_t>(j)]) continue;
    const bool left = j > 0 && in_e[static_cast<std::size_t>(j - 1)];
    const bool right = j + 1 < p && in_e[static_cast<std::size_t>(j + 1)];
    if (left || right) out.adjacent.push_back(j);
  }
  for (std::size_t i = 0; i < out.candidate_groups.size();) {
    std::size_t k = i;
    while (k + 1 < out.candidate_groups.size() && out.candidate_groups[k + 1] == out.candidate_groups[k] + 1) ++k;
    Clip clip;
    clip.first_group = out.candidate_groups[i];
    clip.last_group = out.candidate_groups[k];
    clip.begin = partition.group(clip.first_group).begin;
    clip.end = partition.group(clip.last_group).end;
    if (clip.begin > 0) clip.left_flank = clip.begin - 1;
    if (clip.end < p) clip.right_flank = clip.end;
    out.clips.push_back(clip);
    i = k + 1;
  }
  return out;
}

std::vector<int> sample_clip_knockoff(const DiscreteMarkovChain& chain, const std::vector<int>& h_row,
                                      const ClipDecomposition& clips, Rng& rng) {
  check_path(chain, h_row);
  if (clips.partition.num_features() != chain.p()) fail(ErrorKind::Argument, "clip partition does not cover the chain");
  std::vector<int> out;
  out.reserve(clips.members.size());
  for (const Clip& clip : clips.clips) {
    const int s = sub_begin(clip);
    const int e = sub_end(clip);
    const DiscreteMarkovChain sub = chain.restrict(s, e - 1);
    const std::vector<int> sub_h(h_row.begin() + s, h_row.begin() + e);
    const std::vector<int> tilde = sample_chain_knockoff(sub, sub_h, GroupPartition::from_sizes(sub_sizes(clips, clip)), rng);
    for (int j = clip.begin; j < clip.end; ++j) out.push_back(tilde[static_cast<std::size_t>(j - s)]);
  }
  return out;
}

double clip_knockoff_probability(const DiscreteMarkovChain& chain, const std::vector<int>& h_row,
                                 const std::vector<int>& h_tilde_members, const ClipDecomposition& clips) {
  check_path(chain, h_row);
  if (h_tilde_members.size() != clips.members.size()) fail(ErrorKind::Argument, "knockoff length does not match the members");
  double prob = 1.0;
  std::size_t offset = 0;
  for (const Clip& clip : clips.clips) {
    const int s = sub_begin(clip);
    const int e = sub_end(clip);
    const DiscreteMarkovChain sub = chain.restrict(s, e - 1);
    const std::vector<int> sub_h(h_row.begin() + s, h_row.begin() + e);
    const GroupPartition part = GroupPartition::from_sizes(sub_sizes(clips, clip));
    const int first_clip_group = clip.left_flank ? 1 : 0;
    const int last_clip_group = first_clip_group + (clip.last_group - clip.first_group);

    // Flank copies are discarded: sum over the left one; the right one is
    // drawn last and sums to 1.
    const int k = chain.num_states();
    double clip_prob = 0.0;
    for (int flank = 0; flank < (clip.left_flank ? k : 1); ++flank) {
      std::vector<int> values(sub_h.size(), 0);
      if (clip.left_flank) values[0] = flank;
      for (int j = clip.begin; j < clip.end; ++j) values[static_cast<std::size_t>(j - s)] = h_tilde_members[offset + static_cast<std::size_t>(j - clip.begin)];
      GroupRecursion rec(sub, sub_h, part);
      double pr = 1.0;
      for (int l = 0; l <= last_clip_group && pr > 0.0; ++l) pr *= rec.evaluate(l, values);
      clip_prob += pr;
    }
    prob *= clip_prob;
    offset += static_cast<std::size_t>(clip.end - clip.begin);
  }
  return prob;
}

std::vector<int> sample_conditional_hmm_knockoff(const HiddenMarkovModel& hmm, const std::vector<int>& x_row,
                                                 const ClipDecomposition& clips, Rng& rng) {
  const std::vector<int> h = sample_posterior_chain(hmm, x_row, rng);
  const std::vector<int> h_tilde = sample_clip_knockoff(hmm.chain, h, clips, rng);
  std::vector<int> x_tilde(h_tilde.size());
  for (std::size_t i = 0; i < h_tilde.size(); ++i) {
    const Eigen::VectorXd row = hmm.emission[static_cast<std::size_t>(clips.members[i])].row(h_tilde[i]).transpose();
    x_tilde[i] = static_cast<int>(rng.categorical(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
  }
  return x_tilde;
}

GroupPartition adjacency_constrained_clustering(const Eigen::MatrixXd& corr, double resolution) {
  const Eigen::Index p = corr.rows();
  if (p < 1 || corr.cols() != p) fail(ErrorKind::Argument, "correlation matrix must be square");
  if (!(resolution > 0.0 && resolution <= 1.0)) fail(ErrorKind::Argument, "resolution must lie in (0, 1]");
  // Guard against ceil(2.0000000000000004).
  const int target = std::max(1, static_cast<int>(std::ceil(resolution * static_cast<double>(p) - 1e-9)));

  std::vector<GroupRange> groups;
  for (int j = 0; j < p; ++j) groups.push_back({j, j + 1});
  const Eigen::MatrixXd abs_corr = corr.cwiseAbs();
  auto linkage = [&](const GroupRange& x, const GroupRange& y) {
    return abs_corr.block(x.begin, y.begin, x.size(), y.size()).sum() / (static_cast<double>(x.size()) * y.size());
  };
  std::vector<double> link;  // link[i]: groups i and i + 1
  for (std::size_t i = 0; i + 1 < groups.size(); ++i) link.push_back(linkage(groups[i], groups[i + 1]));

  while (static_cast<int>(groups.size()) > target) {
    const std::size_t i = static_cast<std::size_t>(std::max_element(link.begin(), link.end()) - link.begin());
    groups[i].end = groups[i + 1].end;
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(i) + 1);
    link.erase(link.begin() + static_cast<std::ptrdiff_t>(i));
    if (i > 0) link[i - 1] = linkage(groups[i - 1], groups[i]);
    if (i < link.size()) link[i] = linkage(groups[i], groups[i + 1]);
  }
  return GroupPartition(std::move(groups));
}

HiddenMarkovModel parse_hmm(const std::string& text, const HmmLimits& limits) {
  std::istringstream lines(text);
  std::ostringstream stripped;
  std::string line;
  while (std::getline(lines, line)) stripped << line.substr(0, line.find('#')) << '\n';
  std::istringstream in(stripped.str());

  long p = 0;
  long k = 0;
  long e = 0;
  if (!(in >> p >> k >> e)) fail(ErrorKind::Data, "HMM file must start with 'p K E'");
  if (p < 1 || k < 1 || e < 1) fail(ErrorKind::Data, "HMM dimensions must be positive");
  if (k > limits.max_states || p > limits.max_length) {
    std::ostringstream msg;
    msg << "HMM exceeds configured limits (K <= " << limits.max_states << ", p <= " << limits.max_length << ")";
    fail(ErrorKind::Config, msg.str());
  }
  auto read = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(in >> m(r, c))) fail(ErrorKind::Data, "HMM file ended early or holds a non-numeric value");
      }
    }
    return m;
  };
  HiddenMarkovModel hmm;
  hmm.chain.init = read(k, 1).col(0);
  for (long j = 0; j + 1 < p; ++j) hmm.chain.trans.push_back(read(k, k));
  for (long j = 0; j < p; ++j) hmm.emission.push_back(read(k, e));
  std::string extra;
  if (in >> extra) fail(ErrorKind::Data, "HMM file has trailing content");
  try {
    hmm.validate();
  } catch (const Error& err) {
    fail(ErrorKind::Data, std::string("invalid HMM: ") + err.what());
  }
  return hmm;
}

HiddenMarkovModel load_hmm(const std::string& path, const HmmLimits& limits) {
  std::ifstream file(path);
  if (!file) fail(ErrorKind::Data, "cannot open HMM file '" + path + "'");
  std::ostringstream buf;
  buf << file.rdbuf();
  return parse_hmm(buf.str(), limits);
}

}  // namespace dkn
