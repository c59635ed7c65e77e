#include "dkn/simplex.hpp"

#include "dkn/core.hpp"

#include <cmath>
#include <limits>

namespace dkn {
namespace {

// Tableau: rows_ x (cols_ + 1); last column is the right-hand side.
class Tableau {
 public:
  Tableau(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * (cols + 1), 0.0) {}

  double& at(int r, int c) { return a_[static_cast<std::size_t>(r) * (cols_ + 1) + c]; }
  double at(int r, int c) const { return a_[static_cast<std::size_t>(r) * (cols_ + 1) + c]; }
  double& rhs(int r) { return at(r, cols_); }
  double rhs(int r) const { return at(r, cols_); }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  void pivot(int pr, int pc) {
    const double inv = 1.0 / at(pr, pc);
    for (int c = 0; c <= cols_; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (int r = 0; r < rows_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (int c = 0; c <= cols_; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
  }

  void erase_row(int r) {
    a_.erase(a_.begin() + static_cast<std::ptrdiff_t>(r) * (cols_ + 1),
             a_.begin() + static_cast<std::ptrdiff_t>(r + 1) * (cols_ + 1));
    --rows_;
  }

 private:
  int rows_;
  int cols_;
  std::vector<double> a_;
};

enum class PhaseResult { Optimal, Unbounded };

// Maximizes cost'x over the current basis. Columns flagged in `blocked` never
// enter. Bland: lowest-index improving column, lowest-index basic variable on
// ratio ties.
PhaseResult run_phase(Tableau& t, std::vector<int>& basis, const std::vector<double>& cost,
                      const std::vector<bool>& blocked, double tol) {
  const int n = t.cols();
  for (int iter = 0; iter < 100000; ++iter) {
    int entering = -1;
    for (int c = 0; c < n && entering < 0; ++c) {
      if (blocked[static_cast<std::size_t>(c)]) continue;
      double reduced = -cost[static_cast<std::size_t>(c)];
      for (int r = 0; r < t.rows(); ++r) reduced += cost[static_cast<std::size_t>(basis[static_cast<std::size_t>(r)])] * t.at(r, c);
      if (reduced < -tol) entering = c;
    }
    if (entering < 0) return PhaseResult::Optimal;

    int leaving = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < t.rows(); ++r) {
      const double coef = t.at(r, entering);
      if (coef <= tol) continue;
      const double ratio = t.rhs(r) / coef;
      if (ratio < best - tol) {
        best = ratio;
        leaving = r;
      } else if (ratio <= best + tol &&
                 basis[static_cast<std::size_t>(r)] < basis[static_cast<std::size_t>(leaving)]) {
        leaving = r;
      }
    }
    if (leaving < 0) return PhaseResult::Unbounded;
    t.pivot(leaving, entering);
    basis[static_cast<std::size_t>(leaving)] = entering;
  }
  fail(ErrorKind::Numerical, "simplex exceeded its iteration limit");
}

}  // namespace

SimplexResult solve_simplex(const LinearProgram& lp, double tol) {
  const int n = static_cast<int>(lp.objective.size());
  const int m = static_cast<int>(lp.constraints.size());

  // Column layout: structural | slack/surplus | artificial.
  int num_slack = 0;
  int num_artificial = 0;
  for (const auto& row : lp.constraints) {
    if (static_cast<int>(row.coefficients.size()) != n) {
      fail(ErrorKind::Argument, "constraint width does not match objective length");
    }
    const bool flip = row.rhs < 0.0;
    ConstraintSense sense = row.sense;
    if (flip && sense != ConstraintSense::Equal) {
      sense = sense == ConstraintSense::LessEqual ? ConstraintSense::GreaterEqual : ConstraintSense::LessEqual;
    }
    if (sense != ConstraintSense::Equal) ++num_slack;
    if (sense != ConstraintSense::LessEqual) ++num_artificial;
  }
  const int total = n + num_slack + num_artificial;
  Tableau t(m, total);
  std::vector<int> basis(static_cast<std::size_t>(m), -1);
  std::vector<bool> artificial(static_cast<std::size_t>(total), false);

  int slack_col = n;
  int art_col = n + num_slack;
  for (int r = 0; r < m; ++r) {
    const auto& row = lp.constraints[static_cast<std::size_t>(r)];
    const double sign = row.rhs < 0.0 ? -1.0 : 1.0;
    ConstraintSense sense = row.sense;
    if (sign < 0.0 && sense != ConstraintSense::Equal) {
      sense = sense == ConstraintSense::LessEqual ? ConstraintSense::GreaterEqual : ConstraintSense::LessEqual;
    }
    for (int c = 0; c < n; ++c) t.at(r, c) = sign * row.coefficients[static_cast<std::size_t>(c)];
    t.rhs(r) = sign * row.rhs;
    if (sense == ConstraintSense::LessEqual) {
      t.at(r, slack_col) = 1.0;
      basis[static_cast<std::size_t>(r)] = slack_col++;
    } else {
      if (sense == ConstraintSense::GreaterEqual) t.at(r, slack_col++) = -1.0;
      t.at(r, art_col) = 1.0;
      artificial[static_cast<std::size_t>(art_col)] = true;
      basis[static_cast<std::size_t>(r)] = art_col++;
    }
  }

  // Phase 1: maximize -sum(artificials).
  if (num_artificial > 0) {
    std::vector<double> phase1(static_cast<std::size_t>(total), 0.0);
    for (int c = 0; c < total; ++c) {
      if (artificial[static_cast<std::size_t>(c)]) phase1[static_cast<std::size_t>(c)] = -1.0;
    }
    std::vector<bool> none(static_cast<std::size_t>(total), false);
    run_phase(t, basis, phase1, none, tol);
    double infeasibility = 0.0;
    for (int r = 0; r < t.rows(); ++r) {
      if (artificial[static_cast<std::size_t>(basis[static_cast<std::size_t>(r)])]) infeasibility += t.rhs(r);
    }
    if (infeasibility > 1e-9) return {SimplexStatus::Infeasible, 0.0, {}};

    // Drive zero-level artificials out of the basis; drop redundant rows.
    for (int r = 0; r < t.rows();) {
      if (!artificial[static_cast<std::size_t>(basis[static_cast<std::size_t>(r)])]) {
        ++r;
        continue;
      }
      int pc = -1;
      for (int c = 0; c < total; ++c) {
        if (!artificial[static_cast<std::size_t>(c)] && std::abs(t.at(r, c)) > 1e-9) {
          pc = c;
          break;
        }
      }
      if (pc >= 0) {
        t.pivot(r, pc);
        basis[static_cast<std::size_t>(r)] = pc;
        ++r;
      } else {
        t.erase_row(r);
        basis.erase(basis.begin() + r);
      }
    }
  }

  std::vector<double> cost(static_cast<std::size_t>(total), 0.0);
  for (int c = 0; c < n; ++c) cost[static_cast<std::size_t>(c)] = lp.objective[static_cast<std::size_t>(c)];
  if (run_phase(t, basis, cost, artificial, tol) == PhaseResult::Unbounded) {
    return {SimplexStatus::Unbounded, std::numeric_limits<double>::infinity(), {}};
  }

  SimplexResult result;
  result.status = SimplexStatus::Optimal;
  result.x.assign(static_cast<std::size_t>(n), 0.0);
  for (int r = 0; r < t.rows(); ++r) {
    const int b = basis[static_cast<std::size_t>(r)];
    if (b < n) result.x[static_cast<std::size_t>(b)] = t.rhs(r);
  }
  for (int c = 0; c < n; ++c) result.value += lp.objective[static_cast<std::size_t>(c)] * result.x[static_cast<std::size_t>(c)];
  return result;
}

}  // namespace dkn
