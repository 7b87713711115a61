#ifndef AC2MPC_MPC_QP_HPP
#define AC2MPC_MPC_QP_HPP

#include "ac2mpc/types.hpp"

namespace ac2mpc::mpc {

/// Strictly convex QP
///
///   minimize    1/2 x' H x + g' x
///   subject to  lb <= x <= ub,  lc <= C x <= uc
///
/// Infinite bounds are ignored. `C` may have zero rows.
struct QpProblem {
  Matrix H;
  Vector g;
  Vector lb;
  Vector ub;
  Matrix C;
  Vector lc;
  Vector uc;

  /// Box-only problem with no general rows.
  static QpProblem box(Matrix H, Vector g, Vector lb, Vector ub);
};

enum class QpStatus { Optimal, Infeasible, NotConvex, MaxIterations };

struct QpResult {
  Vector x;
  /// Signed multipliers: positive on an active lower bound, negative on an active upper bound.
  Vector box_multipliers;
  Vector row_multipliers;
  double objective = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
  QpStatus status = QpStatus::Optimal;
};

/// Dual active-set method (Goldfarb-Idnani). Starts from the unconstrained
/// minimizer and adds the most violated bound each iteration, so no feasible
/// starting point is required.
QpResult solve_qp(const QpProblem& problem, double feasibility_tol = 1e-12);

/// Infinity norm of the KKT conditions (stationarity, primal feasibility,
/// dual sign and complementarity) at a candidate primal/dual point.
double qp_kkt_residual(const QpProblem& problem, const Vector& x, const Vector& box_multipliers,
                       const Vector& row_multipliers);

}  // namespace ac2mpc::mpc

#endif  // AC2MPC_MPC_QP_HPP
