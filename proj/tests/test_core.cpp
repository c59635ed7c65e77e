#include "dkn/core.hpp"
#include "dkn/rng.hpp"

#include <doctest.h>

#include <set>

using namespace dkn;

TEST_CASE("trivial partitions are singletons in column order") {
  for (int p : {1, 3, 5}) {
    const GroupPartition part = make_trivial_partition(p);
    CHECK(part.num_groups() == p);
    CHECK(part.num_features() == p);
    CHECK(part.is_trivial());
    std::set<int> covered;
    for (int g = 0; g < p; ++g) {
      CHECK(part.group(g) == GroupRange{g, g + 1});
      CHECK(part.group_of(g) == g);
      covered.insert(part.group(g).begin);
    }
    CHECK(static_cast<int>(covered.size()) == p);
  }
  CHECK_THROWS_AS(make_trivial_partition(0), Error);
}

TEST_CASE("partitions must be contiguous and cover the columns") {
  const GroupPartition part = GroupPartition::from_sizes({2, 1, 3});
  CHECK(part.num_groups() == 3);
  CHECK(part.num_features() == 6);
  CHECK(part.group_of(4) == 2);
  CHECK_FALSE(part.is_trivial());
  CHECK_THROWS_AS(GroupPartition({{0, 2}, {3, 4}}), Error);
  CHECK_THROWS_AS(GroupPartition({{0, 2}, {2, 2}}), Error);
  CHECK_THROWS_AS(GroupPartition(std::vector<GroupRange>{}), Error);
}

TEST_CASE("dataset validation") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 2);
  CHECK_NOTHROW(Dataset(x, Eigen::VectorXd::Zero(3)));
  CHECK_THROWS_AS(Dataset(x, Eigen::VectorXd::Zero(2)), Error);
  CHECK_THROWS_AS(Dataset(Eigen::MatrixXd::Ones(1, 2), Eigen::VectorXd::Zero(1)), Error);
  x(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(Dataset(x, Eigen::VectorXd::Zero(3)), Error);
  const Dataset d(Eigen::MatrixXd::Ones(3, 2), Eigen::Vector3d(0, 1, 1));
  CHECK(d.binary_response());
}

TEST_CASE("frequency threshold is exact at rational boundaries") {
  CHECK(frequency_meets(1, 2, 0.5));
  CHECK_FALSE(frequency_meets(15, 31, 0.5));
  CHECK(frequency_meets(16, 31, 0.5));
  CHECK(frequency_meets(19, 20, 0.95));
  CHECK(min_count_for(20, 0.95) == 19);
  CHECK(min_count_for(31, 0.5) == 16);
  CHECK(min_count_for(31, 0.501) == 16);
  CHECK(min_count_for(30, 0.81) == 25);
  CHECK(min_count_for(7, 1.0) == 7);
  // 81/100 is not exactly representable; the quotient comparison still agrees.
  CHECK(frequency_meets(81, 100, 0.81));
  CHECK_FALSE(frequency_meets(80, 100, 0.81));
}

TEST_CASE("selection record counts and thresholds") {
  const std::vector<SelectionSet> runs{SelectionSet({1, 2}, 5), SelectionSet({1}, 5), SelectionSet({1, 3}, 5)};
  const SelectionRecord rec(runs, 5, 0.5);
  CHECK(rec.m_runs() == 3);
  CHECK(rec.counts() == std::vector<int>{0, 3, 1, 1, 0});
  CHECK(rec.frequency(1) == 1.0);
  CHECK(rec.frequency(2) == doctest::Approx(1.0 / 3.0));
  CHECK(rec.final_set().indices() == std::vector<int>{1});
  // M * Pi is an integer in [0, M].
  for (int g = 0; g < rec.num_groups(); ++g) {
    const double scaled = rec.frequency(g) * rec.m_runs();
    CHECK(scaled == doctest::Approx(std::round(scaled)));
  }
  // Raising eta never adds an index.
  SelectionSet previous = rec.threshold(0.01);
  for (double eta : {0.2, 0.34, 0.5, 0.67, 1.0}) {
    const SelectionSet current = rec.threshold(eta);
    for (int g : current.indices()) CHECK(previous.contains(g));
    previous = current;
  }
  CHECK_THROWS_AS(SelectionRecord(runs, 5, 0.0), Error);
  CHECK_THROWS_AS(SelectionRecord({}, 5, 0.5), Error);
  CHECK_THROWS_AS(SelectionRecord::from_counts({4}, 3, 0.5), Error);
}

TEST_CASE("selection sets are sorted and bounded") {
  const SelectionSet s({3, 1, 3}, 4);
  CHECK(s.indices() == std::vector<int>{1, 3});
  CHECK(s.contains(3));
  CHECK_FALSE(s.contains(2));
  CHECK_THROWS_AS(SelectionSet({4}, 4), Error);
}

TEST_CASE("error targets and filter configs validate ranges") {
  CHECK_NOTHROW(ErrorTarget::pfer(0.0));
  CHECK_THROWS_AS(ErrorTarget::pfer(-1.0), Error);
  CHECK_THROWS_AS(ErrorTarget::kfwer(0, 0.1), Error);
  CHECK_THROWS_AS(ErrorTarget::kfwer(2, 1.0), Error);
  FilterConfig c;
  CHECK_NOTHROW(c.validate());
  c.eta = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.eta = 1.0;
  c.m_runs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("substreams are a pure function of seed and index") {
  Rng a = Rng::substream(11, 4);
  Rng b = Rng::substream(11, 4);
  Rng c = Rng::substream(11, 5);
  const double ua = a.uniform();
  CHECK(ua == b.uniform());
  CHECK(ua != c.uniform());
  std::vector<int> perm = Rng(3).permutation(10);
  std::sort(perm.begin(), perm.end());
  for (int i = 0; i < 10; ++i) CHECK(perm[static_cast<std::size_t>(i)] == i);
}
