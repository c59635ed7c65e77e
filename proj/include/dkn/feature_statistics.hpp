#pragma once

#include "dkn/core.hpp"
#include "dkn/lasso.hpp"
#include "dkn/rng.hpp"

#include <Eigen/Dense>

#include <optional>

namespace dkn {

/// Signed importance per group; W_g > 0 favors the original features.
struct StatisticVector {
  Eigen::VectorXd w;
  double lambda_used = 0.0;
};

struct LcdOptions {
  int cv_folds = 10;
  LassoOptions lasso;
  /// Skip cross-validation and fit at this lambda (standardized scale).
  std::optional<double> fixed_lambda;
};

/// Group sums of |beta| minus group sums of |beta~|.
StatisticVector group_lcd(const Eigen::VectorXd& beta_original, const Eigen::VectorXd& beta_knockoff,
                          const GroupPartition& partition, double lambda_used = 0.0);

/// Lasso coefficient difference on the augmented design [X, X~]. The column
/// order is shuffled with `rng` before fitting and restored afterwards.
StatisticVector lcd_statistic(const Dataset& dataset, const Eigen::MatrixXd& knockoff, const GroupPartition& partition,
                              Family family, Rng& rng, const LcdOptions& options = {});

}  // namespace dkn
