#include "dkn/feature_statistics.hpp"

namespace dkn {

StatisticVector group_lcd(const Eigen::VectorXd& beta_original, const Eigen::VectorXd& beta_knockoff,
                          const GroupPartition& partition, double lambda_used) {
  if (beta_original.size() != partition.num_features() || beta_knockoff.size() != partition.num_features()) {
    fail(ErrorKind::Argument, "coefficient length does not match the partition");
  }
  StatisticVector out;
  out.lambda_used = lambda_used;
  out.w.resize(partition.num_groups());
  for (int g = 0; g < partition.num_groups(); ++g) {
    const GroupRange& r = partition.group(g);
    out.w(g) = beta_original.segment(r.begin, r.size()).cwiseAbs().sum() -
               beta_knockoff.segment(r.begin, r.size()).cwiseAbs().sum();
  }
  return out;
}

StatisticVector lcd_statistic(const Dataset& dataset, const Eigen::MatrixXd& knockoff, const GroupPartition& partition,
                              Family family, Rng& rng, const LcdOptions& options) {
  const int n = dataset.n();
  const int p = dataset.p();
  if (knockoff.rows() != n || knockoff.cols() != p) fail(ErrorKind::Argument, "knockoff matrix dimensions do not match X");
  if (partition.num_features() != p) fail(ErrorKind::Argument, "partition does not cover the features");

  const std::vector<int> perm = rng.permutation(2 * p);
  Eigen::MatrixXd design(n, 2 * p);
  for (int k = 0; k < 2 * p; ++k) {
    const int src = perm[static_cast<std::size_t>(k)];
    design.col(k) = src < p ? dataset.x().col(src) : knockoff.col(src - p);
  }

  Eigen::VectorXd fitted;
  double lambda = 0.0;
  if (options.fixed_lambda) {
    lambda = *options.fixed_lambda;
    const LassoPath path = lasso_path(design, dataset.y(), family, {lambda}, options.lasso);
    fitted = path.beta.col(0);
  } else {
    const CvLassoResult cv = cv_lasso(design, dataset.y(), family, options.cv_folds, rng, options.lasso);
    fitted = cv.beta;
    lambda = cv.lambda_min;
  }

  Eigen::VectorXd beta(2 * p);
  for (int k = 0; k < 2 * p; ++k) beta(perm[static_cast<std::size_t>(k)]) = fitted(k);
  return group_lcd(beta.head(p), beta.tail(p), partition, lambda);
}

}  // namespace dkn
