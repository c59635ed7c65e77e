#include "dkn/markov_knockoffs.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace dkn;

namespace {

Eigen::MatrixXd random_stochastic(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = 0.1 + rng.uniform();
    m.row(r) /= m.row(r).sum();
  }
  return m;
}

DiscreteMarkovChain random_chain(int p, int k, Rng& rng) {
  DiscreteMarkovChain chain;
  chain.init = random_stochastic(1, k, rng).row(0).transpose();
  for (int j = 0; j + 1 < p; ++j) chain.trans.push_back(random_stochastic(k, k, rng));
  return chain;
}

HiddenMarkovModel random_hmm(int p, int k, int e, Rng& rng) {
  HiddenMarkovModel hmm;
  hmm.chain = random_chain(p, k, rng);
  for (int j = 0; j < p; ++j) hmm.emission.push_back(random_stochastic(k, e, rng));
  return hmm;
}

// All length-p sequences over {0..k-1}.
std::vector<std::vector<int>> all_paths(int p, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> h(static_cast<std::size_t>(p), 0);
  while (true) {
    out.push_back(h);
    int j = p - 1;
    while (j >= 0 && h[static_cast<std::size_t>(j)] == k - 1) h[static_cast<std::size_t>(j--)] = 0;
    if (j < 0) break;
    ++h[static_cast<std::size_t>(j)];
  }
  return out;
}

// Joint law of the observed row, by brute force over latent paths.
double hmm_row_probability(const HiddenMarkovModel& hmm, const std::vector<int>& x) {
  double total = 0.0;
  for (const auto& h : all_paths(hmm.p(), hmm.num_states())) {
    double w = hmm.chain.probability(h);
    for (int j = 0; j < hmm.p(); ++j) w *= hmm.emission[static_cast<std::size_t>(j)](h[static_cast<std::size_t>(j)], x[static_cast<std::size_t>(j)]);
    total += w;
  }
  return total;
}

// Exact total variation between the joint law of (H, H~) and its swap over
// each group, for a chain small enough to enumerate.
double worst_swap_tv(const DiscreteMarkovChain& chain, const GroupPartition& partition) {
  const auto paths = all_paths(chain.p(), chain.num_states());
  std::map<std::pair<std::vector<int>, std::vector<int>>, double> joint;
  for (const auto& h : paths) {
    double norm = 0.0;
    for (const auto& t : paths) {
      const double q = chain_knockoff_probability(chain, h, t, partition);
      norm += q;
      joint[{h, t}] = chain.probability(h) * q;
    }
    CHECK(std::abs(norm - 1.0) <= 1e-12);
  }
  double worst = 0.0;
  for (int g = 0; g < partition.num_groups(); ++g) {
    double tv = 0.0;
    for (const auto& [key, prob] : joint) {
      auto [h, t] = key;
      for (int j = partition.group(g).begin; j < partition.group(g).end; ++j) {
        std::swap(h[static_cast<std::size_t>(j)], t[static_cast<std::size_t>(j)]);
      }
      tv += std::abs(prob - joint.at({h, t}));
    }
    worst = std::max(worst, 0.5 * tv);
  }
  return worst;
}

}  // namespace

TEST_CASE("chain basics") {
  Rng rng(1);
  const DiscreteMarkovChain chain = random_chain(4, 3, rng);
  double total = 0.0;
  for (const auto& h : all_paths(4, 3)) total += chain.probability(h);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(3);
  for (const auto& h : all_paths(4, 3)) m2(h[2]) += chain.probability(h);
  CHECK((chain.marginal(2) - m2).cwiseAbs().maxCoeff() <= 1e-12);
  const DiscreteMarkovChain sub = chain.restrict(1, 3);
  CHECK(sub.p() == 3);
  CHECK((sub.init - chain.marginal(1)).cwiseAbs().maxCoeff() <= 1e-12);

  DiscreteMarkovChain bad = chain;
  bad.trans[0](0, 0) += 0.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("posterior with identity emission returns the observation") {
  Rng rng(2);
  HiddenMarkovModel hmm;
  hmm.chain = random_chain(5, 3, rng);
  for (int j = 0; j < 5; ++j) hmm.emission.push_back(Eigen::MatrixXd::Identity(3, 3));
  const std::vector<int> x{0, 2, 1, 1, 0};
  for (int rep = 0; rep < 20; ++rep) CHECK(sample_posterior_chain(hmm, x, rng) == x);
}

TEST_CASE("posterior at p = 1 and by enumeration") {
  Rng rng(3);
  const HiddenMarkovModel one = random_hmm(1, 3, 2, rng);
  Eigen::VectorXd post(3);
  for (int h = 0; h < 3; ++h) post(h) = one.chain.init(h) * one.emission[0](h, 1);
  post /= post.sum();
  const int draws = 100000;
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < draws; ++i) freq(sample_posterior_chain(one, {1}, rng)[0]) += 1.0 / draws;
  for (int h = 0; h < 3; ++h) CHECK(std::abs(freq(h) - post(h)) <= 4.0 * std::sqrt(post(h) * (1 - post(h)) / draws));

  const HiddenMarkovModel hmm = random_hmm(3, 2, 3, rng);
  const std::vector<int> x{2, 0, 1};
  std::map<std::vector<int>, double> exact;
  double z = 0.0;
  for (const auto& h : all_paths(3, 2)) {
    double w = hmm.chain.probability(h);
    for (int j = 0; j < 3; ++j) w *= hmm.emission[static_cast<std::size_t>(j)](h[static_cast<std::size_t>(j)], x[static_cast<std::size_t>(j)]);
    exact[h] = w;
    z += w;
  }
  std::map<std::vector<int>, int> counts;
  for (int i = 0; i < draws; ++i) ++counts[sample_posterior_chain(hmm, x, rng)];
  for (const auto& [h, w] : exact) {
    const double prob = w / z;
    const double freq_h = static_cast<double>(counts[h]) / draws;
    CHECK(std::abs(freq_h - prob) <= 4.0 * std::sqrt(prob * (1 - prob) / draws) + 1e-12);
  }
}

TEST_CASE("chain knockoffs are exchangeable by exhaustive enumeration") {
  Rng rng(4);
  CHECK(worst_swap_tv(random_chain(3, 2, rng), GroupPartition::trivial(3)) <= 1e-10);
  CHECK(worst_swap_tv(random_chain(3, 3, rng), GroupPartition::trivial(3)) <= 1e-10);
  CHECK(worst_swap_tv(random_chain(4, 2, rng), GroupPartition::from_sizes({2, 2})) <= 1e-10);
  CHECK(worst_swap_tv(random_chain(4, 2, rng), GroupPartition::from_sizes({1, 3})) <= 1e-10);
  CHECK(worst_swap_tv(random_chain(4, 3, rng), GroupPartition::from_sizes({4})) <= 1e-10);
}

TEST_CASE("sampler frequencies match the exact knockoff law") {
  Rng rng(5);
  const DiscreteMarkovChain chain = random_chain(4, 2, rng);
  const GroupPartition part = GroupPartition::from_sizes({2, 2});
  const std::vector<int> h{1, 0, 0, 1};
  const int draws = 100000;
  std::map<std::vector<int>, int> counts;
  for (int i = 0; i < draws; ++i) ++counts[sample_chain_knockoff(chain, h, part, rng)];
  for (const auto& t : all_paths(4, 2)) {
    const double prob = chain_knockoff_probability(chain, h, t, part);
    const double freq = static_cast<double>(counts[t]) / draws;
    CHECK(std::abs(freq - prob) <= 4.0 * std::sqrt(prob * (1 - prob) / draws) + 1e-12);
  }
}

TEST_CASE("independent positions give a fresh draw") {
  Rng rng(6);
  DiscreteMarkovChain chain;
  chain.init = Eigen::Vector3d(0.2, 0.5, 0.3);
  Eigen::MatrixXd rows(3, 3);
  rows << 0.6, 0.3, 0.1, 0.6, 0.3, 0.1, 0.6, 0.3, 0.1;
  chain.trans = {rows, rows};
  const std::vector<int> h{2, 0, 1};
  for (const auto& t : all_paths(3, 3)) {
    const double fresh = chain.init(t[0]) * rows(0, t[1]) * rows(0, t[2]);
    CHECK(chain_knockoff_probability(chain, h, t, GroupPartition::trivial(3)) == doctest::Approx(fresh).epsilon(1e-12));
  }
}

TEST_CASE("clip decomposition of a grouped example") {
  const GroupPartition part = GroupPartition::from_sizes({2, 2, 3, 2, 2, 2});
  const ClipDecomposition d = build_clips(part, {4, 1, 3});
  CHECK(d.candidate_groups == std::vector<int>{1, 3, 4});
  CHECK(d.members == std::vector<int>{2, 3, 7, 8, 9, 10});
  CHECK(d.adjacent == std::vector<int>{1, 4, 6, 11});
  REQUIRE(d.clips.size() == 2);
  CHECK(d.clips[0].begin == 2);
  CHECK(d.clips[0].end == 4);
  CHECK(d.clips[0].left_flank == 1);
  CHECK(d.clips[0].right_flank == 4);
  CHECK(d.clips[1].first_group == 3);
  CHECK(d.clips[1].last_group == 4);
  CHECK(d.clips[1].left_flank == 6);
  CHECK(d.clips[1].right_flank == 11);

  const ClipDecomposition all = build_clips(part, {0, 1, 2, 3, 4, 5});
  REQUIRE(all.clips.size() == 1);
  CHECK(all.adjacent.empty());
  CHECK_FALSE(all.clips[0].left_flank.has_value());
  CHECK_FALSE(all.clips[0].right_flank.has_value());
  const ClipDecomposition none = build_clips(part, {});
  CHECK(none.clips.empty());
  CHECK(none.members.empty());
  CHECK_THROWS_AS(build_clips(part, {6}), Error);
}

TEST_CASE("clip knockoffs depend on the path only through the flanks and swap correctly") {
  Rng rng(7);
  const DiscreteMarkovChain chain = random_chain(4, 3, rng);
  const ClipDecomposition d = build_clips(GroupPartition::trivial(4), {1});
  REQUIRE(d.adjacent == std::vector<int>{0, 2});
  for (const auto& h : all_paths(4, 3)) {
    // P(H_1 = a | H_0, H_2) by enumeration over the full joint.
    auto cond = [&](int a) {
      double num = 0.0;
      double den = 0.0;
      for (int z = 0; z < 3; ++z) {
        for (int w = 0; w < 3; ++w) {
          const std::vector<int> g{h[0], z, h[2], w};
          den += chain.probability(g);
          if (z == a) num += chain.probability(g);
        }
      }
      return num / den;
    };
    double total = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double q = clip_knockoff_probability(chain, h, {a}, d);
      total += q;
      std::vector<int> other = h;
      other[3] = (h[3] + 1) % 3;
      CHECK(q == doctest::Approx(clip_knockoff_probability(chain, other, {a}, d)).epsilon(1e-12));
      std::vector<int> swapped = h;
      swapped[1] = a;
      const double lhs = cond(h[1]) * q;
      const double rhs = cond(a) * clip_knockoff_probability(chain, swapped, {h[1]}, d);
      CHECK(std::abs(lhs - rhs) <= 1e-12);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("separate clips factorize") {
  Rng rng(8);
  const DiscreteMarkovChain chain = random_chain(6, 2, rng);
  const GroupPartition part = GroupPartition::trivial(6);
  const ClipDecomposition both = build_clips(part, {1, 4});
  const ClipDecomposition first = build_clips(part, {1});
  const ClipDecomposition second = build_clips(part, {4});
  for (const auto& h : all_paths(6, 2)) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const double joint = clip_knockoff_probability(chain, h, {a, b}, both);
        const double product = clip_knockoff_probability(chain, h, {a}, first) * clip_knockoff_probability(chain, h, {b}, second);
        CHECK(joint == doctest::Approx(product).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("conditional HMM knockoffs are exchangeable on the observed scale") {
  Rng rng(9);
  const HiddenMarkovModel hmm = random_hmm(3, 2, 2, rng);
  const ClipDecomposition d = build_clips(GroupPartition::trivial(3), {1});
  // Law of the knockoff symbol at position 1 given the observed row.
  auto knock = [&](const std::vector<int>& x, int symbol) {
    double z = 0.0;
    double total = 0.0;
    for (const auto& h : all_paths(3, 2)) {
      double w = hmm.chain.probability(h);
      for (int j = 0; j < 3; ++j) w *= hmm.emission[static_cast<std::size_t>(j)](h[static_cast<std::size_t>(j)], x[static_cast<std::size_t>(j)]);
      z += w;
      for (int a = 0; a < 2; ++a) total += w * clip_knockoff_probability(hmm.chain, h, {a}, d) * hmm.emission[1](a, symbol);
    }
    return total / z;
  };
  for (const auto& x : all_paths(3, 2)) {
    for (int s = 0; s < 2; ++s) {
      std::vector<int> xs = x;
      xs[1] = s;
      CHECK(std::abs(hmm_row_probability(hmm, x) * knock(x, s) - hmm_row_probability(hmm, xs) * knock(xs, x[1])) <= 1e-12);
    }
  }

  const std::vector<int> x{1, 0, 1};
  const int draws = 100000;
  int ones = 0;
  for (int i = 0; i < draws; ++i) ones += sample_conditional_hmm_knockoff(hmm, x, d, rng)[0];
  const double prob = knock(x, 1);
  CHECK(std::abs(static_cast<double>(ones) / draws - prob) <= 4.0 * std::sqrt(prob * (1 - prob) / draws));
}

TEST_CASE("full HMM knockoff sampler has the right symbol law") {
  Rng rng(10);
  const HiddenMarkovModel hmm = random_hmm(2, 2, 2, rng);
  const std::vector<int> x{0, 1};
  const GroupPartition part = GroupPartition::trivial(2);
  std::map<std::vector<int>, double> exact;
  double z = 0.0;
  for (const auto& h : all_paths(2, 2)) {
    const double w = hmm.chain.probability(h) * hmm.emission[0](h[0], x[0]) * hmm.emission[1](h[1], x[1]);
    z += w;
    for (const auto& t : all_paths(2, 2)) {
      const double q = chain_knockoff_probability(hmm.chain, h, t, part);
      for (const auto& s : all_paths(2, 2)) exact[s] += w * q * hmm.emission[0](t[0], s[0]) * hmm.emission[1](t[1], s[1]);
    }
  }
  const int draws = 100000;
  std::map<std::vector<int>, int> counts;
  for (int i = 0; i < draws; ++i) ++counts[sample_hmm_knockoff(hmm, x, part, rng)];
  for (const auto& [s, w] : exact) {
    const double prob = w / z;
    CHECK(std::abs(static_cast<double>(counts[s]) / draws - prob) <= 4.0 * std::sqrt(prob * (1 - prob) / draws));
  }
}

TEST_CASE("adjacency-constrained clustering") {
  Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(6, 6, 0.1);
  corr.block(0, 0, 3, 3).setConstant(0.8);
  corr.block(3, 3, 3, 3).setConstant(0.8);
  corr.diagonal().setOnes();
  const GroupPartition two = adjacency_constrained_clustering(corr, 1.0 / 3.0);
  CHECK(two == GroupPartition::from_sizes({3, 3}));
  CHECK(adjacency_constrained_clustering(corr, 1.0).is_trivial());
  CHECK(adjacency_constrained_clustering(corr, 1.0 / 6.0).num_groups() == 1);
  CHECK_THROWS_AS(adjacency_constrained_clustering(corr, 0.0), Error);
}

TEST_CASE("HMM text parsing") {
  const std::string good =
      "# two positions, two states, two symbols\n"
      "2 2 2\n"
      "0.5 0.5\n"
      "0.9 0.1  0.2 0.8\n"
      "1 0  0 1\n"
      "0.7 0.3  0.4 0.6  # trailing comment\n";
  const HiddenMarkovModel hmm = parse_hmm(good);
  CHECK(hmm.p() == 2);
  CHECK(hmm.num_states() == 2);
  CHECK(hmm.num_symbols() == 2);
  CHECK(hmm.chain.trans[0](1, 1) == 0.8);
  CHECK(hmm.emission[1](0, 1) == 0.3);

  auto kind_of = [](const std::string& text, const HmmLimits& limits = {}) {
    try {
      parse_hmm(text, limits);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Argument;
  };
  CHECK(kind_of("x y z") == ErrorKind::Data);
  CHECK(kind_of("2 2 2\n0.5 0.5\n0.9 0.1 0.2") == ErrorKind::Data);
  CHECK(kind_of(good + "1\n") == ErrorKind::Data);
  CHECK(kind_of("1 2 2\n0.5 0.6\n1 0 0 1\n") == ErrorKind::Data);
  CHECK(kind_of(good, HmmLimits{1, 5000}) == ErrorKind::Config);
  CHECK(kind_of(good, HmmLimits{16, 1}) == ErrorKind::Config);
  CHECK_THROWS_AS(load_hmm("/nonexistent/file.hmm"), Error);
}
