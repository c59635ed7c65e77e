#include "dkn/baselines.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>

namespace dkn {

PValueVector ols_pvalues(const Dataset& dataset) {
  const int n = dataset.n();
  const int p = dataset.p();
  if (n <= p + 1) fail(ErrorKind::Data, "OLS p-values need n > p + 1");
  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = dataset.x();

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p + 1) fail(ErrorKind::Data, "design matrix is rank deficient");
  const Eigen::VectorXd beta = qr.solve(dataset.y());
  const Eigen::VectorXd resid = dataset.y() - design * beta;
  const int dof = n - p - 1;
  const double sigma2 = resid.squaredNorm() / dof;

  // diag((D'D)^{-1}) from R of the pivoted QR.
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p + 1, p + 1).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p + 1, p + 1));
  const Eigen::VectorXd diag_perm = r_inv.rowwise().squaredNorm();
  Eigen::VectorXd diag(p + 1);
  for (int i = 0; i < p + 1; ++i) diag(qr.colsPermutation().indices()(i)) = diag_perm(i);

  const boost::math::students_t dist(dof);
  PValueVector out;
  out.p_values.resize(p);
  for (int j = 0; j < p; ++j) {
    const double se = std::sqrt(sigma2 * diag(j + 1));
    const double t = se > 0.0 ? beta(j + 1) / se : (beta(j + 1) == 0.0 ? 0.0 : INFINITY);
    out.p_values(j) = std::isinf(t) ? 0.0 : 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return out;
}

SelectionSet bonferroni_select(const PValueVector& p_values, double budget) {
  if (!(budget > 0.0)) fail(ErrorKind::Argument, "Bonferroni budget must be > 0");
  const Eigen::Index p = p_values.p_values.size();
  const double cut = budget / static_cast<double>(p);
  std::vector<int> selected;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double pv = p_values.p_values(j);
    if (!(pv >= 0.0 && pv <= 1.0)) fail(ErrorKind::Argument, "p-values must lie in [0, 1]");
    if (pv <= cut) selected.push_back(static_cast<int>(j));
  }
  return SelectionSet(std::move(selected), static_cast<int>(p));
}

}  // namespace dkn
