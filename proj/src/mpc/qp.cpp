#include "ac2mpc/mpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ac2mpc::mpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One inequality n' x >= b. `source` indexes the box entry or C row it came
// from; `sign` is +1 for a lower bound and -1 for an upper bound.
struct Inequality {
  bool is_box = true;
  int source = 0;
  double sign = 1.0;
  double rhs = 0.0;
};

class DualActiveSet {
 public:
  DualActiveSet(const QpProblem& p, double tol) : p_(p), n_(static_cast<int>(p.g.size())), tol_(tol) {
    for (int i = 0; i < n_; ++i) {
      if (std::isfinite(p.lb[i])) cons_.push_back({true, i, 1.0, p.lb[i]});
      if (std::isfinite(p.ub[i])) cons_.push_back({true, i, -1.0, -p.ub[i]});
    }
    for (int i = 0; i < p.C.rows(); ++i) {
      if (std::isfinite(p.lc[i])) cons_.push_back({false, i, 1.0, p.lc[i]});
      if (std::isfinite(p.uc[i])) cons_.push_back({false, i, -1.0, -p.uc[i]});
    }
  }

  QpResult run() {
    QpResult res;
    res.x = Vector::Zero(n_);
    res.box_multipliers = Vector::Zero(n_);
    res.row_multipliers = Vector::Zero(p_.C.rows());

    Eigen::LLT<Matrix> llt(p_.H);
    if (llt.info() != Eigen::Success) {
      res.status = QpStatus::NotConvex;
      return res;
    }
    // J = L^{-T}, so that J J' = H^{-1}.
    J_ = llt.matrixU().solve(Matrix::Identity(n_, n_));
    R_ = Matrix::Zero(n_, n_);
    x_ = llt.solve(-p_.g);

    const int max_iter = 10 * (n_ + static_cast<int>(cons_.size())) + 10;
    int iter = 0;
    for (; iter < max_iter; ++iter) {
      int p = -1;
      double worst = 0.0;
      for (int i = 0; i < static_cast<int>(cons_.size()); ++i) {
        if (is_active(i)) continue;
        const double s = slack(i);
        if (s < -tol_ * (1.0 + std::abs(cons_[i].rhs)) && s < worst) {
          worst = s;
          p = i;
        }
      }
      if (p < 0) break;
      if (!add_violated(p)) {
        res.status = QpStatus::Infeasible;
        break;
      }
    }
    if (iter == max_iter) res.status = QpStatus::MaxIterations;

    res.x = x_;
    res.iterations = iter;
    for (std::size_t k = 0; k < active_.size(); ++k) {
      const Inequality& c = cons_[active_[k]];
      (c.is_box ? res.box_multipliers : res.row_multipliers)[c.source] += c.sign * u_[k];
    }
    res.objective = 0.5 * x_.dot(p_.H * x_) + p_.g.dot(x_);
    res.kkt_residual = qp_kkt_residual(p_, res.x, res.box_multipliers, res.row_multipliers);
    return res;
  }

 private:
  bool is_active(int i) const { return std::find(active_.begin(), active_.end(), i) != active_.end(); }

  Vector normal(int i) const {
    const Inequality& c = cons_[i];
    if (c.is_box) {
      Vector e = Vector::Zero(n_);
      e[c.source] = c.sign;
      return e;
    }
    return c.sign * p_.C.row(c.source).transpose();
  }

  double slack(int i) const {
    const Inequality& c = cons_[i];
    const double lhs = c.is_box ? x_[c.source] : p_.C.row(c.source).dot(x_);
    return c.sign * lhs - c.rhs;
  }

  // Brings constraint p into the active set, dropping blocking constraints on
  // the way. Returns false when the problem is primal infeasible.
  bool add_violated(int p) {
    const Vector np = normal(p);
    double u_new = 0.0;
    for (;;) {
      const int q = static_cast<int>(active_.size());
      const Vector d = J_.transpose() * np;
      const Vector z = J_.rightCols(n_ - q) * d.tail(n_ - q);
      Vector r = Vector::Zero(q);
      if (q > 0) r = R_.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));

      double t_partial = kInf;
      int drop = -1;
      for (int j = 0; j < q; ++j) {
        if (r[j] > 0.0 && u_[j] / r[j] < t_partial) {
          t_partial = u_[j] / r[j];
          drop = j;
        }
      }
      const double curvature = z.dot(np);
      const double t_full =
          (z.lpNorm<Eigen::Infinity>() > 1e-14 && curvature > 0.0) ? -slack(p) / curvature : kInf;
      const double t = std::min(t_partial, t_full);
      if (!std::isfinite(t)) return false;

      if (std::isfinite(t_full)) x_ += t * z;
      for (int j = 0; j < q; ++j) u_[j] -= t * r[j];
      u_new += t;

      if (t_full <= t_partial) {
        append(p, d, u_new);
        return true;
      }
      remove(drop);
    }
  }

  void append(int p, Vector d, double multiplier) {
    const int q = static_cast<int>(active_.size());
    for (int j = n_ - 1; j > q; --j) {
      const double h = std::hypot(d[j - 1], d[j]);
      if (h == 0.0) continue;
      const double c = d[j - 1] / h;
      const double s = d[j] / h;
      d[j - 1] = h;
      d[j] = 0.0;
      rotate_columns(j - 1, j, c, s);
    }
    R_.col(q).head(q + 1) = d.head(q + 1);
    active_.push_back(p);
    u_.push_back(multiplier);
  }

  void remove(int l) {
    const int q = static_cast<int>(active_.size());
    for (int k = l; k + 1 < q; ++k) R_.col(k) = R_.col(k + 1);
    R_.col(q - 1).setZero();
    active_.erase(active_.begin() + l);
    u_.erase(u_.begin() + l);
    for (int j = l; j + 1 < q; ++j) {
      const double a = R_(j, j);
      const double b = R_(j + 1, j);
      const double h = std::hypot(a, b);
      if (h == 0.0) continue;
      const double c = a / h;
      const double s = b / h;
      for (int k = j; k < q - 1; ++k) {
        const double rj = R_(j, k);
        const double rj1 = R_(j + 1, k);
        R_(j, k) = c * rj + s * rj1;
        R_(j + 1, k) = -s * rj + c * rj1;
      }
      R_(j + 1, j) = 0.0;
      rotate_columns(j, j + 1, c, s);
    }
  }

  void rotate_columns(int a, int b, double c, double s) {
    const Vector ca = J_.col(a);
    J_.col(a) = c * ca + s * J_.col(b);
    J_.col(b) = -s * ca + c * J_.col(b);
  }

  const QpProblem& p_;
  int n_;
  double tol_;
  std::vector<Inequality> cons_;
  std::vector<int> active_;
  std::vector<double> u_;
  Matrix J_;
  Matrix R_;
  Vector x_;
};

}  // namespace

QpProblem QpProblem::box(Matrix H, Vector g, Vector lb, Vector ub) {
  const auto n = g.size();
  return {std::move(H), std::move(g), std::move(lb), std::move(ub), Matrix(0, n), Vector(0), Vector(0)};
}

QpResult solve_qp(const QpProblem& problem, double feasibility_tol) {
  const auto n = problem.g.size();
  if (problem.H.rows() != n || problem.H.cols() != n || problem.lb.size() != n || problem.ub.size() != n ||
      problem.C.cols() != n || problem.lc.size() != problem.C.rows() || problem.uc.size() != problem.C.rows()) {
    throw std::invalid_argument("solve_qp: inconsistent problem dimensions");
  }
  return DualActiveSet(problem, feasibility_tol).run();
}

double qp_kkt_residual(const QpProblem& problem, const Vector& x, const Vector& box_multipliers,
                       const Vector& row_multipliers) {
  const Vector stationarity =
      problem.H * x + problem.g - box_multipliers - problem.C.transpose() * row_multipliers;
  double res = stationarity.lpNorm<Eigen::Infinity>();

  auto check = [&res](double value, double lo, double hi, double lambda) {
    if (std::isfinite(lo)) res = std::max(res, lo - value);
    if (std::isfinite(hi)) res = std::max(res, value - hi);
    // Positive multipliers belong to the lower bound, negative to the upper.
    if (lambda > 0.0) {
      res = std::max(res, std::isfinite(lo) ? std::abs(lambda * (value - lo)) : lambda);
    } else if (lambda < 0.0) {
      res = std::max(res, std::isfinite(hi) ? std::abs(lambda * (hi - value)) : -lambda);
    }
  };
  for (Eigen::Index i = 0; i < x.size(); ++i) check(x[i], problem.lb[i], problem.ub[i], box_multipliers[i]);
  const Vector cx = problem.C * x;
  for (Eigen::Index i = 0; i < cx.size(); ++i) check(cx[i], problem.lc[i], problem.uc[i], row_multipliers[i]);
  return res;
}

}  // namespace ac2mpc::mpc
