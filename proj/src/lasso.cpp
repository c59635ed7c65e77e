#include "dkn/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace dkn {
namespace {

constexpr double kMinSd = 1e-12;
constexpr double kMinWeight = 1e-5;
constexpr double kProbClamp = 1e-5;

double soft(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Sufficient statistics of a row subset; training sums are totals minus the
// held-out fold.
struct RawSums {
  Eigen::MatrixXd xtx;
  Eigen::VectorXd sx;
  Eigen::VectorXd sxy;
  double sy = 0.0;
  double syy = 0.0;
  double n = 0.0;

  RawSums operator-(const RawSums& o) const {
    return {xtx - o.xtx, sx - o.sx, sxy - o.sxy, sy - o.sy, syy - o.syy, n - o.n};
  }
};

RawSums raw_sums(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  RawSums s;
  s.xtx = Eigen::MatrixXd(x.cols(), x.cols());
  s.xtx.setZero();
  s.xtx.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  s.xtx = s.xtx.selfadjointView<Eigen::Lower>();
  s.sx = x.colwise().sum().transpose();
  s.sxy = x.transpose() * y;
  s.sy = y.sum();
  s.syy = y.squaredNorm();
  s.n = static_cast<double>(x.rows());
  return s;
}

struct Scaling {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  std::vector<char> usable;
};

// Standardized Gaussian problem: G = corr(X), c = cov(X, y) / sd.
struct GaussianProblem {
  Eigen::MatrixXd g;
  Eigen::VectorXd c;
  Scaling scaling;
  double ymean = 0.0;
  double yvar = 0.0;
};

GaussianProblem gaussian_problem(const RawSums& s) {
  GaussianProblem prob;
  const double n = s.n;
  const Eigen::Index q = s.sx.size();
  prob.scaling.mean = s.sx / n;
  prob.ymean = s.sy / n;
  prob.yvar = std::max(0.0, s.syy / n - prob.ymean * prob.ymean);
  Eigen::MatrixXd cov = s.xtx / n - prob.scaling.mean * prob.scaling.mean.transpose();
  prob.scaling.sd = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  prob.scaling.usable.assign(static_cast<std::size_t>(q), 0);
  Eigen::VectorXd inv(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const bool ok = prob.scaling.sd(j) > kMinSd * (1.0 + std::abs(prob.scaling.mean(j)));
    prob.scaling.usable[static_cast<std::size_t>(j)] = ok;
    inv(j) = ok ? 1.0 / prob.scaling.sd(j) : 0.0;
  }
  prob.g = inv.asDiagonal() * cov * inv.asDiagonal();
  for (Eigen::Index j = 0; j < q; ++j) {
    if (prob.scaling.usable[static_cast<std::size_t>(j)]) prob.g(j, j) = 1.0;
  }
  prob.c = inv.cwiseProduct(s.sxy / n - prob.scaling.mean * prob.ymean);
  return prob;
}

Scaling column_scaling(const Eigen::MatrixXd& x) {
  Scaling sc;
  const double n = static_cast<double>(x.rows());
  sc.mean = x.colwise().mean().transpose();
  sc.sd = ((x.rowwise() - sc.mean.transpose()).colwise().squaredNorm().transpose() / n).cwiseSqrt();
  sc.usable.resize(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    sc.usable[static_cast<std::size_t>(j)] = sc.sd(j) > kMinSd * (1.0 + std::abs(sc.mean(j)));
  }
  return sc;
}

void store(LassoPath& path, int l, double lambda, const Eigen::VectorXd& beta_std, double b0_std,
           const Scaling& sc, double kkt, double dev_ratio) {
  Eigen::VectorXd beta(beta_std.size());
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    beta(j) = sc.usable[static_cast<std::size_t>(j)] ? beta_std(j) / sc.sd(j) : 0.0;
  }
  path.lambdas.push_back(lambda);
  path.beta.col(l) = beta;
  path.intercept(l) = b0_std - sc.mean.dot(beta);
  path.kkt_residual.push_back(kkt);
  path.dev_ratio.push_back(dev_ratio);
}

void trim(LassoPath& path) {
  const Eigen::Index l = static_cast<Eigen::Index>(path.lambdas.size());
  path.beta.conservativeResize(Eigen::NoChange, l);
  path.intercept.conservativeResize(l);
}

bool saturated(const LassoPath& path, const LassoOptions& options) {
  if (!options.early_stop || path.dev_ratio.size() < 2) return false;
  const double cur = path.dev_ratio.back();
  const double prev = path.dev_ratio[path.dev_ratio.size() - 2];
  return cur > 0.999 || cur - prev < 1e-5 * cur;
}

[[noreturn]] void no_convergence(double lambda, double kkt) {
  std::ostringstream msg;
  msg << "lasso did not converge at lambda = " << lambda << " (KKT residual " << kkt << ")";
  fail(ErrorKind::Numerical, msg.str());
}

double kkt_residual(const Eigen::VectorXd& beta, const Eigen::VectorXd& grad, double lam, const std::vector<char>& usable) {
  double kkt = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (!usable[static_cast<std::size_t>(j)]) continue;
    kkt = std::max(kkt, beta(j) == 0.0 ? std::max(0.0, std::abs(grad(j)) - lam)
                                       : std::abs(grad(j) - lam * (beta(j) > 0.0 ? 1.0 : -1.0)));
  }
  return kkt;
}

// Incremental solvers: step(lambda) extends the path by one warm-started fit.
class GaussianSolver {
 public:
  GaussianSolver(GaussianProblem prob, const LassoOptions& options, std::size_t capacity)
      : prob_(std::move(prob)), options_(options) {
    const Eigen::Index q = prob_.c.size();
    beta_ = Eigen::VectorXd::Zero(q);
    grad_ = prob_.c;
    in_active_.assign(static_cast<std::size_t>(q), 0);
    path_.beta.resize(q, static_cast<Eigen::Index>(capacity));
    path_.intercept.resize(static_cast<Eigen::Index>(capacity));
  }

  void step(double lam) {
    const Eigen::Index q = prob_.c.size();
    if (path_.lambdas.empty()) prev_lambda_ = lam;
    bool grew = false;
    for (Eigen::Index j = 0; j < q; ++j) {
      if (prob_.scaling.usable[static_cast<std::size_t>(j)] && !in_active_[static_cast<std::size_t>(j)] &&
          std::abs(grad_(j)) > 2.0 * lam - prev_lambda_) {
        activate(j);
        grew = true;
      }
    }
    if (grew) rebuild();
    int sweeps = 0;
    for (;;) {
      // Sweeps touch only the active block of the gradient.
      Eigen::VectorXd ga(static_cast<Eigen::Index>(active_.size()));
      Eigen::VectorXd ba(static_cast<Eigen::Index>(active_.size()));
      for (std::size_t k = 0; k < active_.size(); ++k) {
        ga(static_cast<Eigen::Index>(k)) = grad_(active_[k]);
        ba(static_cast<Eigen::Index>(k)) = beta_(active_[k]);
      }
      const Eigen::VectorXd ba_start = ba;
      for (;;) {
        if (++sweeps > options_.max_sweeps) break;
        double max_delta = 0.0;
        for (Eigen::Index k = 0; k < ba.size(); ++k) {
          const double old = ba(k);
          const double updated = soft(ga(k) + old, lam);
          const double d = updated - old;
          if (d != 0.0) {
            ga.noalias() -= gaa_.col(k) * d;
            ba(k) = updated;
            max_delta = std::max(max_delta, std::abs(d));
          }
        }
        if (max_delta < options_.tol) break;
      }
      const Eigen::VectorXd delta = ba - ba_start;
      for (std::size_t k = 0; k < active_.size(); ++k) {
        const double d = delta(static_cast<Eigen::Index>(k));
        if (d != 0.0) grad_.noalias() -= prob_.g.col(active_[k]) * d;
        beta_(active_[k]) = ba(static_cast<Eigen::Index>(k));
      }
      bool added = false;
      for (Eigen::Index j = 0; j < q; ++j) {
        if (prob_.scaling.usable[static_cast<std::size_t>(j)] && !in_active_[static_cast<std::size_t>(j)] &&
            std::abs(grad_(j)) > lam) {
          activate(j);
          added = true;
        }
      }
      if (added) rebuild();
      if (!added || sweeps > options_.max_sweeps) break;
    }
    const double kkt = kkt_residual(beta_, grad_, lam, prob_.scaling.usable);
    if (sweeps > options_.max_sweeps) no_convergence(lam, kkt);

    // RSS / n = var(y) - 2 c'b + b'Gb and b'Gb = b'(c - grad).
    const double rss = prob_.yvar - prob_.c.dot(beta_) - beta_.dot(grad_);
    const double dev_ratio = prob_.yvar > 0.0 ? 1.0 - rss / prob_.yvar : 0.0;
    store(path_, static_cast<int>(path_.lambdas.size()), lam, beta_, prob_.ymean, prob_.scaling, kkt, dev_ratio);
    prev_lambda_ = lam;
  }

  LassoPath& path() { return path_; }

 private:
  void activate(Eigen::Index j) {
    in_active_[static_cast<std::size_t>(j)] = 1;
    active_.push_back(static_cast<int>(j));
  }

  void rebuild() {
    const Eigen::Index a = static_cast<Eigen::Index>(active_.size());
    gaa_.resize(a, a);
    for (Eigen::Index r = 0; r < a; ++r) {
      for (Eigen::Index c = 0; c < a; ++c) gaa_(r, c) = prob_.g(active_[static_cast<std::size_t>(r)], active_[static_cast<std::size_t>(c)]);
    }
  }

  GaussianProblem prob_;
  LassoOptions options_;
  Eigen::VectorXd beta_;
  Eigen::VectorXd grad_;  // c - G beta
  std::vector<char> in_active_;
  std::vector<int> active_;
  Eigen::MatrixXd gaa_;
  double prev_lambda_ = 0.0;
  LassoPath path_;
};

double binomial_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pr = std::clamp(sigmoid(eta(i)), kProbClamp, 1.0 - kProbClamp);
    dev -= 2.0 * (y(i) * std::log(pr) + (1.0 - y(i)) * std::log(1.0 - pr));
  }
  return dev;
}

class BinomialSolver {
 public:
  BinomialSolver(const Eigen::MatrixXd& x, Eigen::VectorXd y, const LassoOptions& options, std::size_t capacity)
      : y_(std::move(y)), options_(options), sc_(column_scaling(x)) {
    const Eigen::Index n = x.rows();
    const Eigen::Index q = x.cols();
    xs_ = x.rowwise() - sc_.mean.transpose();
    for (Eigen::Index j = 0; j < q; ++j) {
      if (sc_.usable[static_cast<std::size_t>(j)]) {
        xs_.col(j) /= sc_.sd(j);
      } else {
        xs_.col(j).setZero();
      }
    }
    const double ybar = y_.mean();
    if (ybar <= 0.0 || ybar >= 1.0) fail(ErrorKind::Data, "binomial response is constant");
    beta_ = Eigen::VectorXd::Zero(q);
    b0_ = std::log(ybar / (1.0 - ybar));
    eta_ = Eigen::VectorXd::Constant(n, b0_);
    null_dev_ = binomial_deviance(y_, eta_);
    in_active_.assign(static_cast<std::size_t>(q), 0);
    path_.beta.resize(q, static_cast<Eigen::Index>(capacity));
    path_.intercept.resize(static_cast<Eigen::Index>(capacity));
  }

  void step(double lam) {
    const Eigen::Index n = xs_.rows();
    const Eigen::Index q = xs_.cols();
    const double nd = static_cast<double>(n);
    if (path_.lambdas.empty()) prev_lambda_ = lam;
    Eigen::VectorXd g = gradient();
    for (Eigen::Index j = 0; j < q; ++j) {
      if (sc_.usable[static_cast<std::size_t>(j)] && !in_active_[static_cast<std::size_t>(j)] &&
          std::abs(g(j)) > 2.0 * lam - prev_lambda_) {
        activate(j);
      }
    }
    int sweeps = 0;
    for (int outer = 0; outer < 1000; ++outer) {
      Eigen::VectorXd w(n);
      Eigen::VectorXd res(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double pr = sigmoid(eta_(i));
        w(i) = std::max(pr * (1.0 - pr), kMinWeight);
        res(i) = (y_(i) - pr) / w(i);
      }
      const double wsum = w.sum();
      const Eigen::VectorXd beta_old = beta_;
      const double b0_old = b0_;
      std::vector<double> xwx(static_cast<std::size_t>(q), -1.0);
      auto curvature = [&](int j) {
        double& v = xwx[static_cast<std::size_t>(j)];
        if (v < 0.0) v = w.dot(xs_.col(j).cwiseAbs2()) / nd;
        return v;
      };
      for (;;) {
        for (;;) {
          if (++sweeps > options_.max_sweeps) break;
          double max_delta = 0.0;
          for (int j : active_) {
            const double h = curvature(j);
            const double old = beta_(j);
            const double z = xs_.col(j).dot(w.cwiseProduct(res)) / nd + h * old;
            const double updated = soft(z, lam) / h;
            const double d = updated - old;
            if (d != 0.0) {
              res.noalias() -= xs_.col(j) * d;
              beta_(j) = updated;
              max_delta = std::max(max_delta, std::abs(d) * std::sqrt(h));
            }
          }
          const double d0 = w.dot(res) / wsum;
          res.array() -= d0;
          b0_ += d0;
          max_delta = std::max(max_delta, std::abs(d0));
          if (max_delta < options_.tol) break;
        }
        bool added = false;
        const Eigen::VectorXd wr = w.cwiseProduct(res);
        for (Eigen::Index j = 0; j < q; ++j) {
          if (sc_.usable[static_cast<std::size_t>(j)] && !in_active_[static_cast<std::size_t>(j)] &&
              std::abs(xs_.col(j).dot(wr) / nd) > lam) {
            activate(j);
            added = true;
          }
        }
        if (!added || sweeps > options_.max_sweeps) break;
      }
      eta_ = (xs_ * beta_).array() + b0_;
      const double change = std::max((beta_ - beta_old).cwiseAbs().maxCoeff(), std::abs(b0_ - b0_old));
      g = gradient();
      bool violated = false;
      for (Eigen::Index j = 0; j < q; ++j) {
        if (sc_.usable[static_cast<std::size_t>(j)] && !in_active_[static_cast<std::size_t>(j)] && std::abs(g(j)) > lam) {
          activate(j);
          violated = true;
        }
      }
      if ((change < options_.tol && !violated) || sweeps > options_.max_sweeps) break;
    }
    const double kkt = kkt_residual(beta_, g, lam, sc_.usable);
    if (sweeps > options_.max_sweeps) no_convergence(lam, kkt);
    const double dev_ratio = 1.0 - binomial_deviance(y_, eta_) / null_dev_;
    store(path_, static_cast<int>(path_.lambdas.size()), lam, beta_, b0_, sc_, kkt, dev_ratio);
    prev_lambda_ = lam;
  }

  LassoPath& path() { return path_; }

 private:
  Eigen::VectorXd gradient() const {
    Eigen::VectorXd resid(y_.size());
    for (Eigen::Index i = 0; i < y_.size(); ++i) resid(i) = y_(i) - sigmoid(eta_(i));
    return xs_.transpose() * resid / static_cast<double>(y_.size());
  }

  void activate(Eigen::Index j) {
    in_active_[static_cast<std::size_t>(j)] = 1;
    active_.push_back(static_cast<int>(j));
  }

  Eigen::VectorXd y_;
  LassoOptions options_;
  Scaling sc_;
  Eigen::MatrixXd xs_;
  Eigen::VectorXd beta_;
  double b0_ = 0.0;
  Eigen::VectorXd eta_;
  double null_dev_ = 0.0;
  std::vector<char> in_active_;
  std::vector<int> active_;
  double prev_lambda_ = 0.0;
  LassoPath path_;
};

// Either solver behind one interface.
class PathSolver {
 public:
  PathSolver(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Family family, const LassoOptions& options,
             std::size_t capacity) {
    if (family == Family::Gaussian) {
      gaussian_ = std::make_unique<GaussianSolver>(gaussian_problem(raw_sums(x, y)), options, capacity);
    } else {
      binomial_ = std::make_unique<BinomialSolver>(x, y, options, capacity);
    }
  }
  PathSolver(GaussianProblem prob, const LassoOptions& options, std::size_t capacity)
      : gaussian_(std::make_unique<GaussianSolver>(std::move(prob), options, capacity)) {}

  void step(double lam) { gaussian_ ? gaussian_->step(lam) : binomial_->step(lam); }
  LassoPath& path() { return gaussian_ ? gaussian_->path() : binomial_->path(); }

 private:
  std::unique_ptr<GaussianSolver> gaussian_;
  std::unique_ptr<BinomialSolver> binomial_;
};

void check_grid(const std::vector<double>& lambdas) {
  if (lambdas.empty()) fail(ErrorKind::Argument, "lambda grid is empty");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] >= 0.0)) fail(ErrorKind::Argument, "lambdas must be nonnegative");
    if (i > 0 && !(lambdas[i] < lambdas[i - 1])) fail(ErrorKind::Argument, "lambdas must be strictly descending");
  }
}


}  // namespace

double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size() || x.rows() < 2) fail(ErrorKind::Argument, "design and response sizes do not agree");
  const Scaling sc = column_scaling(x);
  const Eigen::VectorXd yc = y.array() - y.mean();
  const Eigen::VectorXd score = (x.transpose() * yc) / static_cast<double>(x.rows());
  double best = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (sc.usable[static_cast<std::size_t>(j)]) best = std::max(best, std::abs(score(j)) / sc.sd(j));
  }
  return best;
}

std::vector<double> lasso_lambda_grid(double lambda_max, int count, double ratio) {
  if (count < 1 || !(ratio > 0.0 && ratio < 1.0) || !(lambda_max > 0.0)) {
    fail(ErrorKind::Argument, "lambda grid needs lambda_max > 0, count >= 1 and ratio in (0, 1)");
  }
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid[static_cast<std::size_t>(i)] = lambda_max * std::pow(ratio, frac);
  }
  return grid;
}

LassoPath lasso_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Family family,
                     const std::vector<double>& lambdas, const LassoOptions& options) {
  if (x.rows() != y.size() || x.rows() < 2 || x.cols() < 1) fail(ErrorKind::Argument, "design and response sizes do not agree");
  check_grid(lambdas);
  PathSolver solver(x, y, family, options, lambdas.size());
  for (double lam : lambdas) {
    solver.step(lam);
    if (saturated(solver.path(), options)) break;
  }
  trim(solver.path());
  return std::move(solver.path());
}

CvLassoResult cv_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Family family, int folds, Rng& rng,
                       const LassoOptions& options) {
  const Eigen::Index n = x.rows();
  if (n != y.size() || x.cols() < 1) fail(ErrorKind::Argument, "design and response sizes do not agree");
  if (folds < 2 || folds > n) fail(ErrorKind::Argument, "fold count must lie in [2, n]");
  if (family == Family::Binomial) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (y(i) != 0.0 && y(i) != 1.0) fail(ErrorKind::Data, "binomial response must be 0/1");
    }
  }

  CvLassoResult out;
  const double lmax = lasso_lambda_max(x, y);
  if (!(lmax > 0.0)) {
    // Constant response or constant columns: the null model everywhere.
    if (family == Family::Binomial) fail(ErrorKind::Data, "binomial response is constant");
    out.path.lambdas = {0.0};
    out.path.beta = Eigen::MatrixXd::Zero(x.cols(), 1);
    out.path.intercept = Eigen::VectorXd::Constant(1, y.mean());
    out.path.kkt_residual = {0.0};
    out.path.dev_ratio = {0.0};
    out.cv_mean = {0.0};
    out.cv_se = {0.0};
    out.beta = Eigen::VectorXd::Zero(x.cols());
    return out;
  }
  const std::vector<double> grid = lasso_lambda_grid(lmax);

  std::vector<int> fold_of(static_cast<std::size_t>(n));
  const std::vector<int> perm = rng.permutation(static_cast<int>(n));
  for (Eigen::Index i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = static_cast<int>(i % folds);
  std::vector<std::vector<int>> fold_rows(static_cast<std::size_t>(folds));
  for (Eigen::Index i = 0; i < n; ++i) fold_rows[static_cast<std::size_t>(fold_of[static_cast<std::size_t>(i)])].push_back(static_cast<int>(i));

  auto gather = [&](const std::vector<int>& rows) {
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(rows.size()), x.cols());
    Eigen::VectorXd ys(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      xs.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
      ys(static_cast<Eigen::Index>(r)) = y(rows[r]);
    }
    return std::pair{xs, ys};
  };

  std::vector<Eigen::MatrixXd> held_x;
  std::vector<Eigen::VectorXd> held_y;
  for (int f = 0; f < folds; ++f) {
    auto [xf, yf] = gather(fold_rows[static_cast<std::size_t>(f)]);
    held_x.push_back(std::move(xf));
    held_y.push_back(std::move(yf));
  }

  // Fold fits only estimate the CV curve and run at the looser cv_tol.
  LassoOptions fold_options = options;
  fold_options.tol = std::max(options.tol, options.cv_tol);
  std::vector<std::unique_ptr<PathSolver>> fold_solvers;
  if (family == Family::Gaussian) {
    // Training sums are the total minus the held-out fold.
    const RawSums total = raw_sums(x, y);
    for (int f = 0; f < folds; ++f) {
      fold_solvers.push_back(std::make_unique<PathSolver>(
          gaussian_problem(total - raw_sums(held_x[static_cast<std::size_t>(f)], held_y[static_cast<std::size_t>(f)])),
          fold_options, grid.size()));
    }
  } else {
    for (int f = 0; f < folds; ++f) {
      std::vector<int> train;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (fold_of[static_cast<std::size_t>(i)] != f) train.push_back(static_cast<int>(i));
      }
      const auto [xt, yt] = gather(train);
      const double ybar = yt.mean();
      if (ybar <= 0.0 || ybar >= 1.0) fail(ErrorKind::Data, "a cross-validation training fold has a constant response");
      fold_solvers.push_back(std::make_unique<PathSolver>(xt, yt, family, fold_options, grid.size()));
    }
  }

  // Lock-step along the grid; stop when a fold path saturates or the CV error
  // has stayed above its running minimum for cv_patience grid points.
  int best = 0;
  for (std::size_t l = 0; l < grid.size(); ++l) {
    std::vector<double> fold_loss(static_cast<std::size_t>(folds));
    bool stop = false;
    double total_loss = 0.0;
    for (int f = 0; f < folds; ++f) {
      PathSolver& fs = *fold_solvers[static_cast<std::size_t>(f)];
      fs.step(grid[l]);
      stop = stop || saturated(fs.path(), options);
      const LassoPath& fp = fs.path();
      const Eigen::VectorXd eta = (held_x[static_cast<std::size_t>(f)] * fp.beta.col(static_cast<Eigen::Index>(l))).array() +
                                  fp.intercept(static_cast<Eigen::Index>(l));
      const Eigen::VectorXd& yf = held_y[static_cast<std::size_t>(f)];
      fold_loss[static_cast<std::size_t>(f)] = family == Family::Gaussian ? (yf - eta).squaredNorm() : binomial_deviance(yf, eta);
      total_loss += fold_loss[static_cast<std::size_t>(f)];
    }
    const double mean = total_loss / static_cast<double>(n);
    double ss = 0.0;
    for (int f = 0; f < folds; ++f) {
      const double fm = fold_loss[static_cast<std::size_t>(f)] / static_cast<double>(fold_rows[static_cast<std::size_t>(f)].size());
      ss += (fm - mean) * (fm - mean);
    }
    out.cv_mean.push_back(mean);
    out.cv_se.push_back(std::sqrt(ss / (folds - 1) / folds));
    if (mean < out.cv_mean[static_cast<std::size_t>(best)]) best = static_cast<int>(l);
    if (options.cv_patience > 0 && static_cast<int>(l) - best >= options.cv_patience) stop = true;
    if (stop) break;
  }

  // The full-data path at full precision, down to the selected lambda.
  PathSolver full(x, y, family, options, static_cast<std::size_t>(best) + 1);
  for (int l = 0; l <= best; ++l) {
    full.step(grid[static_cast<std::size_t>(l)]);
    if (l < best && saturated(full.path(), options)) break;
  }
  trim(full.path());
  out.path = std::move(full.path());
  out.best = static_cast<int>(out.path.lambdas.size()) - 1;
  out.lambda_min = out.path.lambdas.back();
  out.beta = out.path.beta.col(out.best);
  return out;
}

}  // namespace dkn
