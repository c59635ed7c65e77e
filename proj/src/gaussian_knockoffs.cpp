#include "dkn/gaussian_knockoffs.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dkn {

GaussianKnockoffModel::GaussianKnockoffModel(Eigen::VectorXd mu, Eigen::MatrixXd sigma, Eigen::VectorXd s)
    : mu_(std::move(mu)), sigma_(std::move(sigma)), s_(std::move(s)) {
  const Eigen::Index p = sigma_.rows();
  if (p < 1 || sigma_.cols() != p || mu_.size() != p || s_.size() != p) {
    fail(ErrorKind::Argument, "knockoff model dimensions do not agree");
  }
  if (!sigma_.allFinite() || (sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + sigma_.cwiseAbs().maxCoeff())) {
    fail(ErrorKind::Argument, "covariance must be finite and symmetric");
  }
  if ((s_.array() < 0.0).any()) fail(ErrorKind::Argument, "s must be nonnegative");

  const Eigen::LLT<Eigen::MatrixXd> sigma_llt(sigma_);
  if (sigma_llt.info() != Eigen::Success) fail(ErrorKind::Numerical, "covariance is not positive definite");

  // Sigma^{-1} D, then the conditional law of X~ given X.
  const Eigen::MatrixXd sinv_d = sigma_llt.solve(Eigen::MatrixXd(s_.asDiagonal()));
  cond_mean_map_ = Eigen::MatrixXd::Identity(p, p) - sinv_d;
  cond_cov_ = 2.0 * Eigen::MatrixXd(s_.asDiagonal()) - s_.asDiagonal() * sinv_d;
  cond_cov_ = 0.5 * (cond_cov_ + cond_cov_.transpose());

  // PD conditional covariance is the Schur complement test for the joint
  // matrix being PD.
  const Eigen::LLT<Eigen::MatrixXd> cond_llt(cond_cov_);
  if (cond_llt.info() != Eigen::Success) {
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cond_cov_, Eigen::EigenvaluesOnly).eigenvalues()(0);
    std::ostringstream msg;
    msg << "joint knockoff covariance is not positive definite (conditional covariance lambda_min = " << lmin << ")";
    fail(ErrorKind::Numerical, msg.str());
  }
  cond_cov_factor_ = cond_llt.matrixL();
}

Eigen::MatrixXd GaussianKnockoffModel::joint_covariance() const {
  const Eigen::Index p = sigma_.rows();
  Eigen::MatrixXd joint(2 * p, 2 * p);
  const Eigen::MatrixXd off = sigma_ - Eigen::MatrixXd(s_.asDiagonal());
  joint << sigma_, off, off, sigma_;
  return joint;
}

Eigen::VectorXd GaussianKnockoffModel::sample(const Eigen::VectorXd& x_row, Rng& rng) const {
  if (x_row.size() != mu_.size()) fail(ErrorKind::Argument, "row length does not match the knockoff model");
  Eigen::VectorXd z(mu_.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
  return mu_ + cond_mean_map_.transpose() * (x_row - mu_) + cond_cov_factor_ * z;
}

Eigen::MatrixXd GaussianKnockoffModel::sample_matrix(const Eigen::MatrixXd& x, Rng& rng) const {
  if (x.cols() != mu_.size()) fail(ErrorKind::Argument, "column count does not match the knockoff model");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd z(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) z(i, j) = rng.normal();
  }
  Eigen::MatrixXd out = (x.rowwise() - mu_.transpose()) * cond_mean_map_ + z * cond_cov_factor_.transpose();
  out.rowwise() += mu_.transpose();
  return out;
}

GaussianKnockoffModel fit_equicorrelated(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& mu, double slack) {
  const Eigen::Index p = sigma.rows();
  if (p < 1 || sigma.cols() != p) fail(ErrorKind::Argument, "covariance must be square");
  if (mu.size() != p) fail(ErrorKind::Argument, "mean length does not match covariance");
  if (!(slack > 0.0 && slack < 1.0)) fail(ErrorKind::Argument, "slack must lie in (0, 1)");
  if ((sigma.diagonal().array() <= 0.0).any()) fail(ErrorKind::Argument, "covariance diagonal must be positive");

  const Eigen::VectorXd scale = sigma.diagonal().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd corr = scale.asDiagonal() * sigma * scale.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) fail(ErrorKind::Numerical, "eigendecomposition of the correlation matrix failed");
  const double lambda_min = eig.eigenvalues()(0);
  if (!(lambda_min > 0.0)) fail(ErrorKind::Argument, "covariance is not positive definite");

  const double factor = std::min(1.0, 2.0 * lambda_min) * (1.0 - slack);
  const Eigen::VectorXd s = factor * sigma.diagonal();
  return GaussianKnockoffModel(mu, sigma, s);
}

Eigen::VectorXd sample_knockoff(const GaussianKnockoffModel& model, const Eigen::VectorXd& x_row, Rng& rng) {
  return model.sample(x_row, rng);
}

Eigen::MatrixXd swap_joint_covariance(const Eigen::MatrixXd& joint, const std::vector<int>& swapped) {
  const Eigen::Index p = joint.rows() / 2;
  Eigen::VectorXi perm = Eigen::VectorXi::LinSpaced(2 * p, 0, static_cast<int>(2 * p - 1));
  for (int j : swapped) {
    if (j < 0 || j >= p) fail(ErrorKind::Argument, "swap index out of range");
    std::swap(perm(j), perm(j + p));
  }
  Eigen::MatrixXd out(2 * p, 2 * p);
  for (Eigen::Index a = 0; a < 2 * p; ++a) {
    for (Eigen::Index b = 0; b < 2 * p; ++b) out(a, b) = joint(perm(a), perm(b));
  }
  return out;
}

CovarianceEstimate estimate_covariance(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 2) fail(ErrorKind::Data, "covariance estimate needs at least 2 rows");
  CovarianceEstimate est;
  est.mu = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - est.mu.transpose();
  const Eigen::MatrixXd s = centered.transpose() * centered / static_cast<double>(n);
  est.sigma = s * (static_cast<double>(n) / (n - 1));

  if (static_cast<double>(p) / n > 0.1) {
    // Ledoit-Wolf weight for the diagonal target: estimated variance of the
    // off-diagonal sample entries over their squared size.
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index a = 0; a < p; ++a) {
      for (Eigen::Index b = 0; b < p; ++b) {
        if (a == b) continue;
        den += s(a, b) * s(a, b);
        const Eigen::ArrayXd prod = centered.col(a).array() * centered.col(b).array();
        num += (prod - s(a, b)).square().sum() / (static_cast<double>(n) * n);
      }
    }
    est.shrinkage = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 1.0;
    Eigen::MatrixXd target = Eigen::MatrixXd(est.sigma.diagonal().asDiagonal());
    est.sigma = (1.0 - est.shrinkage) * est.sigma + est.shrinkage * target;
  }
  if ((est.sigma.diagonal().array() <= 0.0).any()) fail(ErrorKind::Data, "a feature has zero variance");
  return est;
}

}  // namespace dkn
