#pragma once

#include <vector>

namespace dkn {

enum class ConstraintSense { LessEqual, Equal, GreaterEqual };

struct LinearConstraint {
  std::vector<double> coefficients;
  ConstraintSense sense = ConstraintSense::LessEqual;
  double rhs = 0.0;
};

/// maximize c'x subject to the rows and x >= 0.
struct LinearProgram {
  std::vector<double> objective;
  std::vector<LinearConstraint> constraints;
};

enum class SimplexStatus { Optimal, Infeasible, Unbounded };

struct SimplexResult {
  SimplexStatus status = SimplexStatus::Infeasible;
  double value = 0.0;
  std::vector<double> x;
};

/// Dense two-phase tableau simplex with Bland's anti-cycling rule. Meant for
/// the small calibration programs (a few hundred rows at most).
SimplexResult solve_simplex(const LinearProgram& lp, double tol = 1e-11);

}  // namespace dkn
