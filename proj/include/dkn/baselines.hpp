#pragma once

#include "dkn/core.hpp"

#include <Eigen/Dense>

namespace dkn {

struct PValueVector {
  Eigen::VectorXd p_values;
};

/// Two-sided t-test p-values of each slope in the OLS fit with intercept.
PValueVector ols_pvalues(const Dataset& dataset);

/// {j : p_j <= budget / p}; E[V] <= budget for valid p-values.
SelectionSet bonferroni_select(const PValueVector& p_values, double budget);

}  // namespace dkn
