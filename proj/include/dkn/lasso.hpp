#pragma once

#include "dkn/core.hpp"
#include "dkn/rng.hpp"

#include <Eigen/Dense>

#include <vector>

namespace dkn {

struct LassoOptions {
  double tol = 1e-7;        ///< max coordinate change (standardized scale) ending a sweep loop
  int max_sweeps = 100000;  ///< per lambda
  bool early_stop = true;   ///< stop the path once the deviance ratio saturates
  /// cv_lasso stops once the CV error has stayed above its minimum for this
  /// many grid points; 0 fits the whole grid.
  int cv_patience = 15;
  double cv_tol = 1e-4;  ///< convergence tolerance of the fold fits inside cv_lasso
};

/// Solutions along a descending lambda grid. Columns are standardized
/// internally; coefficients are reported on the original scale.
struct LassoPath {
  std::vector<double> lambdas;        ///< fitted prefix of the requested grid
  Eigen::MatrixXd beta;               ///< p x lambdas.size()
  Eigen::VectorXd intercept;          ///< lambdas.size()
  std::vector<double> kkt_residual;   ///< per lambda, standardized scale
  std::vector<double> dev_ratio;      ///< fraction of null deviance explained
};

/// max_j |x_j' (y - mean(y))| / n on standardized columns.
double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// `count` log-spaced values from lambda_max down to lambda_max * ratio.
std::vector<double> lasso_lambda_grid(double lambda_max, int count = 100, double ratio = 1e-3);

/// Gaussian: (1/2n)||y - b0 - X b||^2 + lambda ||b||_1. Binomial: mean
/// negative log-likelihood plus the same penalty, by IRLS with inner
/// coordinate descent. Warm starts along the grid.
LassoPath lasso_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Family family,
                     const std::vector<double>& lambdas, const LassoOptions& options = {});

struct CvLassoResult {
  LassoPath path;               ///< full-data fit, grid prefix ending at lambda_min
  std::vector<double> cv_mean;  ///< mean held-out deviance per lambda
  std::vector<double> cv_se;
  int best = 0;
  double lambda_min = 0.0;
  Eigen::VectorXd beta;  ///< original-scale coefficients at lambda_min
};

/// K-fold cross-validation over the default grid; picks the lambda with the
/// smallest mean held-out deviance. Fold paths advance together and stop
/// cv_patience points past the running minimum.
CvLassoResult cv_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Family family, int folds, Rng& rng,
                       const LassoOptions& options = {});

}  // namespace dkn
