#include "dkn/baselines.hpp"
#include "dkn/rng.hpp"

#include <doctest.h>

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>

using namespace dkn;

namespace {

Eigen::MatrixXd normal_matrix(int n, int p, Rng& rng) {
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
  return x;
}

// Normal equations route.
Eigen::VectorXd reference_pvalues(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd d(n, p + 1);
  d << Eigen::VectorXd::Ones(n), x;
  const Eigen::MatrixXd inv = (d.transpose() * d).inverse();
  const Eigen::VectorXd beta = inv * d.transpose() * y;
  const double s2 = (y - d * beta).squaredNorm() / static_cast<double>(n - p - 1);
  const boost::math::students_t dist(static_cast<double>(n - p - 1));
  Eigen::VectorXd out(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double t = beta(j + 1) / std::sqrt(s2 * inv(j + 1, j + 1));
    out(j) = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return out;
}

}  // namespace

TEST_CASE("OLS p-values agree with the normal equations") {
  Rng rng(1);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::MatrixXd x = normal_matrix(50, 7, rng);
    Eigen::VectorXd y = 0.4 * x.col(1) - 0.2 * x.col(5);
    y += normal_matrix(50, 1, rng).col(0);
    const Eigen::VectorXd ours = ols_pvalues(Dataset(x, y)).p_values;
    const Eigen::VectorXd ref = reference_pvalues(x, y);
    for (int j = 0; j < 7; ++j) CHECK(std::abs(ours(j) - ref(j)) <= 1e-9 * std::max(1.0, ref(j)));
  }
}

TEST_CASE("orthonormal design closed form") {
  Rng rng(2);
  const int n = 30;
  Eigen::MatrixXd raw = normal_matrix(n, 3, rng);
  raw = raw.rowwise() - raw.colwise().mean();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, 3);
  const Eigen::VectorXd y = q * Eigen::Vector3d(3.0, 0.0, -1.0) + 0.5 * normal_matrix(n, 1, rng).col(0);
  // With centered orthonormal columns, beta_j = q_j'y and se_j = sigma.
  const Eigen::VectorXd b = q.transpose() * y;
  const Eigen::VectorXd resid = y - q * b - Eigen::VectorXd::Constant(n, y.mean());
  const double sigma = std::sqrt(resid.squaredNorm() / (n - 4));
  const boost::math::students_t dist(n - 4);
  const Eigen::VectorXd pv = ols_pvalues(Dataset(q, y)).p_values;
  for (int j = 0; j < 3; ++j) {
    const double expected = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(b(j) / sigma)));
    CHECK(pv(j) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("Bonferroni selection") {
  PValueVector pv;
  pv.p_values = Eigen::Vector4d(0.001, 0.5, 0.01, 0.03);
  CHECK(bonferroni_select(pv, 0.1).indices() == std::vector<int>{0, 2});
  CHECK(bonferroni_select(pv, 0.12).indices() == std::vector<int>{0, 2, 3});
  CHECK(bonferroni_select(pv, 1e-6).empty());
  CHECK_THROWS_AS(bonferroni_select(pv, 0.0), Error);
  pv.p_values(1) = 1.5;
  CHECK_THROWS_AS(bonferroni_select(pv, 0.1), Error);
}

TEST_CASE("degenerate designs are rejected") {
  Rng rng(3);
  Eigen::MatrixXd x = normal_matrix(20, 3, rng);
  x.col(2) = x.col(0) + x.col(1);
  const Eigen::VectorXd y = normal_matrix(20, 1, rng).col(0);
  CHECK_THROWS_AS(ols_pvalues(Dataset(x, y)), Error);
  CHECK_THROWS_AS(ols_pvalues(Dataset(normal_matrix(4, 3, rng), Eigen::VectorXd::Zero(4))), Error);
}

TEST_CASE("null p-values are uniform and Bonferroni has E[V] <= budget") {
  Rng rng(4);
  const int reps = 500;
  const int p = 5;
  std::vector<double> first;
  double total_v = 0.0;
  double total_v2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const Eigen::MatrixXd x = normal_matrix(40, p, rng);
    const Eigen::VectorXd y = normal_matrix(40, 1, rng).col(0);
    const PValueVector pv = ols_pvalues(Dataset(x, y));
    first.push_back(pv.p_values(0));
    const double v = bonferroni_select(pv, 1.0).size();
    total_v += v;
    total_v2 += v * v;
  }
  std::sort(first.begin(), first.end());
  double ks = 0.0;
  for (int i = 0; i < reps; ++i) {
    ks = std::max({ks, std::abs((i + 1.0) / reps - first[static_cast<std::size_t>(i)]),
                   std::abs(static_cast<double>(i) / reps - first[static_cast<std::size_t>(i)])});
  }
  CHECK(ks <= 1.628 / std::sqrt(static_cast<double>(reps)));
  const double mean_v = total_v / reps;
  const double se = std::sqrt((total_v2 / reps - mean_v * mean_v) / reps);
  CHECK(mean_v <= 1.0 + 4.0 * se);
  CHECK(mean_v >= 1.0 - 4.0 * se);
}
