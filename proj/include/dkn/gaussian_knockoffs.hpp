#pragma once

#include "dkn/core.hpp"
#include "dkn/rng.hpp"

#include <Eigen/Dense>

namespace dkn {

/// Shrink factor applied to the equicorrelated s so the conditional
/// covariance stays strictly positive definite.
inline constexpr double kEquicorrelatedSlack = 1e-3;

/// Gaussian model-X knockoffs: given X ~ N(mu, Sigma), X~ | X is
/// N(mu + (I - Sigma^{-1} D)^T (x - mu), 2D - D Sigma^{-1} D), D = diag(s).
class GaussianKnockoffModel {
 public:
  GaussianKnockoffModel(Eigen::VectorXd mu, Eigen::MatrixXd sigma, Eigen::VectorXd s);

  int p() const { return static_cast<int>(mu_.size()); }
  const Eigen::VectorXd& mu() const { return mu_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }
  const Eigen::VectorXd& s() const { return s_; }
  /// I - Sigma^{-1} diag(s); the conditional mean is mu + map^T (x - mu).
  const Eigen::MatrixXd& cond_mean_map() const { return cond_mean_map_; }
  const Eigen::MatrixXd& cond_cov() const { return cond_cov_; }
  /// Lower Cholesky factor of cond_cov.
  const Eigen::MatrixXd& cond_cov_factor() const { return cond_cov_factor_; }

  /// [[Sigma, Sigma - D], [Sigma - D, Sigma]].
  Eigen::MatrixXd joint_covariance() const;

  Eigen::VectorXd sample(const Eigen::VectorXd& x_row, Rng& rng) const;

  /// One knockoff row per row of x.
  Eigen::MatrixXd sample_matrix(const Eigen::MatrixXd& x, Rng& rng) const;

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd sigma_;
  Eigen::VectorXd s_;
  Eigen::MatrixXd cond_mean_map_;
  Eigen::MatrixXd cond_cov_;
  Eigen::MatrixXd cond_cov_factor_;
};

/// s_j = min(1, 2 lambda_min(corr)) * Sigma_jj * (1 - slack).
GaussianKnockoffModel fit_equicorrelated(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& mu,
                                         double slack = kEquicorrelatedSlack);

Eigen::VectorXd sample_knockoff(const GaussianKnockoffModel& model, const Eigen::VectorXd& x_row, Rng& rng);

/// Sigma with columns j and p + j of the joint law exchanged (swap check).
Eigen::MatrixXd swap_joint_covariance(const Eigen::MatrixXd& joint, const std::vector<int>& swapped);

struct CovarianceEstimate {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double shrinkage = 0.0;  ///< weight on the diagonal target
};

/// Sample mean and covariance; when p / n > 0.1 the covariance is shrunk
/// toward its diagonal with the Ledoit-Wolf weight.
CovarianceEstimate estimate_covariance(const Eigen::MatrixXd& x);

}  // namespace dkn
