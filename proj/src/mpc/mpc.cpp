#include "ac2mpc/mpc/mpc.hpp"

#include "ac2mpc/mpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ac2mpc::mpc {

namespace {

constexpr int nx = kStateSize;
constexpr int nu = kInputSize;

using StateMatrix = Eigen::Matrix<double, nx, nx>;
using InputMatrix = Eigen::Matrix<double, nx, nu>;

StateVector tracking_error(const StateVector& x, const StateVector& ref) {
  StateVector e = x - ref;
  e[kPhi] = wrap_angle(e[kPhi]);
  return e;
}

// Quadratic model of the cost attached to one state: value, gradient, GN Hessian.
struct StateCost {
  double value = 0.0;
  StateVector gradient = StateVector::Zero();
  StateMatrix hessian = StateMatrix::Zero();
};

StateCost state_cost(const StateVector& x, const StateVector& ref, const StateVector& weights, bool lateral,
                     const MpcConfig& config, const BicycleGeometry& geom) {
  StateCost c;
  const StateVector e = tracking_error(x, ref);
  c.value = e.dot(weights.cwiseProduct(e));
  c.gradient = 2.0 * weights.cwiseProduct(e);
  c.hessian = (2.0 * weights).asDiagonal();
  if (lateral) {
    const double al = lateral_accel(x, geom);
    const double excess = std::abs(al) - config.lateral_accel_bound;
    if (excess > 0.0) {
      const double w = config.lateral_penalty_weight;
      const double sign = al > 0.0 ? 1.0 : -1.0;
      StateVector grad = StateVector::Zero();
      const double t = std::tan(x[kTheta]);
      grad[kV] = 2.0 * x[kV] * t / geom.wheelbase_L;
      grad[kTheta] = x[kV] * x[kV] * (1.0 + t * t) / geom.wheelbase_L;
      c.value += w * excess * excess;
      c.gradient += 2.0 * w * excess * sign * grad;
      c.hessian += 2.0 * w * grad * grad.transpose();
    }
  }
  return c;
}

StateCost stage_state_cost(int k, const StateVector& x, const References& refs, const MpcConfig& config,
                           const BicycleGeometry& geom) {
  const int N = config.stages_N;
  const StateVector& w = k == N ? config.terminal_weight_P : config.state_weight_Q;
  return state_cost(x, refs.states[k], w, k > 0, config, geom);
}

struct Linearization {
  StateVector next;
  StateMatrix A;
  InputMatrix B;
};

Linearization linearize(const StateVector& x, const InputVector& u, double dt, double h,
                        const BicycleGeometry& geom) {
  Linearization lin;
  lin.next = integrate<double>(x, u, dt, geom);
  for (int j = 0; j < nx; ++j) {
    StateVector xp = x;
    xp[j] += h;
    lin.A.col(j) = (integrate<double>(xp, u, dt, geom) - lin.next) / h;
  }
  for (int j = 0; j < nu; ++j) {
    InputVector up = u;
    up[j] += h;
    lin.B.col(j) = (integrate<double>(x, up, dt, geom) - lin.next) / h;
  }
  return lin;
}

// Condensed QP data for one SQP iteration around (X, U), gaps included.
struct CondensedQp {
  QpProblem qp;
  std::vector<Matrix> sens;         // dX_k / dU, 5 x 2N
  std::vector<StateVector> offset;  // X_k increment at dU = 0 (accumulated gaps)
};

CondensedQp condense(const std::vector<StateVector>& X, const std::vector<InputVector>& U, const References& refs,
                     const MpcConfig& config, const BicycleGeometry& geom) {
  const int N = config.stages_N;
  const int nv = nu * N;
  const double dt = config.stage_dt();

  CondensedQp out;
  out.sens.assign(N + 1, Matrix::Zero(nx, nv));
  out.offset.assign(N + 1, StateVector::Zero());

  for (int k = 0; k < N; ++k) {
    const Linearization lin = linearize(X[k], U[k], dt, config.jacobian_step, geom);
    out.sens[k + 1] = lin.A * out.sens[k];
    out.sens[k + 1].middleCols(nu * k, nu) += lin.B;
    out.offset[k + 1] = lin.A * out.offset[k] + (lin.next - X[k + 1]);
  }

  Matrix H = Matrix::Zero(nv, nv);
  Vector g = Vector::Zero(nv);
  for (int k = 1; k <= N; ++k) {
    const StateCost c = stage_state_cost(k, X[k], refs, config, geom);
    const Matrix& S = out.sens[k];
    H.noalias() += S.transpose() * c.hessian * S;
    g.noalias() += S.transpose() * (c.hessian * out.offset[k] + c.gradient);
  }
  Vector lb(nv), ub(nv);
  for (int k = 0; k < N; ++k) {
    const InputVector du = U[k] - refs.inputs[k];
    for (int j = 0; j < nu; ++j) {
      H(nu * k + j, nu * k + j) += 2.0 * config.input_weight_R[j];
      g[nu * k + j] += 2.0 * config.input_weight_R[j] * du[j];
    }
    lb[nu * k + kThrottle] = -config.accel_bound - U[k][kThrottle];
    ub[nu * k + kThrottle] = config.accel_bound - U[k][kThrottle];
    lb[nu * k + kSteerRate] = -config.steer_rate_bound - U[k][kSteerRate];
    ub[nu * k + kSteerRate] = config.steer_rate_bound - U[k][kSteerRate];
  }

  // State bounds on x_1..x_N: v >= 0 and |theta| <= bound, as rows in dU.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Matrix C(2 * N, nv);
  Vector lc(2 * N), uc(2 * N);
  for (int k = 1; k <= N; ++k) {
    const int r = 2 * (k - 1);
    const StateVector base = X[k] + out.offset[k];
    C.row(r) = out.sens[k].row(kV);
    lc[r] = -base[kV];
    uc[r] = kInf;
    C.row(r + 1) = out.sens[k].row(kTheta);
    lc[r + 1] = -config.steering_bound - base[kTheta];
    uc[r + 1] = config.steering_bound - base[kTheta];
  }
  out.qp = {std::move(H), std::move(g), std::move(lb), std::move(ub), std::move(C), std::move(lc), std::move(uc)};
  return out;
}

bool all_finite(const QpProblem& p) {
  return p.H.allFinite() && p.g.allFinite() && p.C.allFinite() && !p.lb.hasNaN() && !p.ub.hasNaN() &&
         !p.lc.hasNaN() && !p.uc.hasNaN();
}

void project_controls(std::vector<InputVector>& U, const MpcConfig& config) {
  for (auto& u : U) {
    u[kThrottle] = std::clamp(u[kThrottle], -config.accel_bound, config.accel_bound);
    u[kSteerRate] = std::clamp(u[kSteerRate], -config.steer_rate_bound, config.steer_rate_bound);
  }
}

}  // namespace

void MpcConfig::validate() const {
  if (stages_N < 1) throw ValidationError("mpc.stages_N: must be >= 1");
  if (!(horizon_T > 0.0)) throw ValidationError("mpc.horizon_T: must be > 0");
  if (!(input_weight_R.minCoeff() > 0.0)) throw ValidationError("mpc.input_weight_R: entries must be > 0");
  if (!(state_weight_Q.minCoeff() >= 0.0)) throw ValidationError("mpc.state_weight_Q: entries must be >= 0");
  if (!(terminal_weight_P.minCoeff() >= 0.0)) throw ValidationError("mpc.terminal_weight_P: entries must be >= 0");
  if (!(lateral_penalty_weight > 0.0)) throw ValidationError("mpc.lateral_penalty_weight: must be > 0");
  if (sqp_max_iters < 1) throw ValidationError("mpc.sqp_max_iters: must be >= 1");
  if (!(sqp_tol > 0.0)) throw ValidationError("mpc.sqp_tol: must be > 0");
  if (!(jacobian_step > 0.0)) throw ValidationError("mpc.jacobian_step: must be > 0");
}

ControlInput MpcSolution::first_input(const MpcConfig& config) const {
  if (controls.empty()) return {};
  const InputVector& u = controls.front();
  auto clamp = [](double v, double b) { return std::isfinite(v) ? std::clamp(v, -b, b) : 0.0; };
  return {clamp(u[kThrottle], config.accel_bound), clamp(u[kSteerRate], config.steer_rate_bound)};
}

double trajectory_objective(const std::vector<StateVector>& states, const std::vector<InputVector>& controls,
                            const References& refs, const MpcConfig& config, const BicycleGeometry& geom) {
  double J = 0.0;
  for (int k = 0; k <= config.stages_N; ++k) J += stage_state_cost(k, states[k], refs, config, geom).value;
  for (int k = 0; k < config.stages_N; ++k) {
    const InputVector du = controls[k] - refs.inputs[k];
    J += du.dot(config.input_weight_R.cwiseProduct(du));
  }
  return J;
}

std::vector<StateVector> rollout(const StateVector& x0, const std::vector<InputVector>& controls,
                                 const MpcConfig& config, const BicycleGeometry& geom) {
  std::vector<StateVector> X;
  X.reserve(controls.size() + 1);
  X.push_back(x0);
  for (const auto& u : controls) X.push_back(integrate<double>(X.back(), u, config.stage_dt(), geom));
  return X;
}

CondensedModel condensed_model(const StateVector& x0, const std::vector<InputVector>& controls,
                               const References& refs, const MpcConfig& config, const BicycleGeometry& geom) {
  const CondensedQp c = condense(rollout(x0, controls, config, geom), controls, refs, config, geom);
  return {c.qp.H, c.qp.g};
}

MpcSolution solve(const VehicleState& x0, const References& refs, const MpcConfig& config,
                  const BicycleGeometry& geom, const MpcSolution* warm_start) {
  const int N = config.stages_N;
  if (static_cast<int>(refs.states.size()) != N + 1 || static_cast<int>(refs.inputs.size()) != N) {
    throw ValidationError("mpc.solve: reference length does not match the number of stages");
  }
  const StateVector xinit = x0.vector();

  MpcSolution sol;
  const bool warm = warm_start && static_cast<int>(warm_start->controls.size()) == N &&
                    static_cast<int>(warm_start->states.size()) == N + 1 &&
                    warm_start->status != MpcStatus::Degenerate;
  std::vector<InputVector> U = warm ? warm_start->controls : refs.inputs;
  project_controls(U, config);
  std::vector<StateVector> X;
  if (warm && config.rti_mode) {
    X = warm_start->states;
    X[0] = xinit;
  } else {
    X = rollout(xinit, U, config, geom);
  }

  const int max_iters = config.rti_mode ? 1 : config.sqp_max_iters;
  double J = trajectory_objective(X, U, refs, config, geom);
  sol.status = config.rti_mode ? MpcStatus::Converged : MpcStatus::MaxIters;

  for (int it = 0; it < max_iters; ++it) {
    const CondensedQp c = condense(X, U, refs, config, geom);
    if (!all_finite(c.qp) || !std::isfinite(J)) {
      sol.status = MpcStatus::Degenerate;
      break;
    }
    const QpResult qp = solve_qp(c.qp);
    sol.iterations = it + 1;
    sol.kkt_residual = qp.kkt_residual;
    if (qp.status != QpStatus::Optimal || !qp.x.allFinite()) {
      sol.status = MpcStatus::Degenerate;
      break;
    }
    const Vector& du = qp.x;

    if (config.rti_mode) {
      for (int k = 0; k < N; ++k) U[k] += du.segment<nu>(nu * k);
      for (int k = 1; k <= N; ++k) X[k] += c.sens[k] * du + c.offset[k];
      sol.step_norm = du.lpNorm<Eigen::Infinity>();
      J = trajectory_objective(X, U, refs, config, geom);
      break;
    }

    // Step-halving line search on the objective of the simulated trajectory.
    const double slope = c.qp.g.dot(du);
    double alpha = 1.0;
    bool accepted = false;
    std::vector<InputVector> Ucand(N);
    std::vector<StateVector> Xcand;
    double Jcand = J;
    for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
      for (int k = 0; k < N; ++k) Ucand[k] = U[k] + alpha * du.segment<nu>(nu * k);
      project_controls(Ucand, config);
      Xcand = rollout(xinit, Ucand, config, geom);
      Jcand = trajectory_objective(Xcand, Ucand, refs, config, geom);
      if (std::isfinite(Jcand) && Jcand <= J + 1e-4 * alpha * std::min(0.0, slope)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      sol.status = MpcStatus::Converged;
      sol.step_norm = 0.0;
      break;
    }
    U = std::move(Ucand);
    X = std::move(Xcand);
    J = Jcand;
    sol.step_norm = alpha * du.lpNorm<Eigen::Infinity>();
    if (sol.step_norm < config.sqp_tol) {
      sol.status = MpcStatus::Converged;
      break;
    }
  }

  if (!std::isfinite(J)) sol.status = MpcStatus::Degenerate;
  project_controls(U, config);
  sol.states = std::move(X);
  sol.controls = std::move(U);
  sol.objective = J;
  return sol;
}

MpcSolution shift_warm_start(const MpcSolution& prev) {
  MpcSolution next = prev;
  if (next.states.size() > 1) {
    std::rotate(next.states.begin(), next.states.begin() + 1, next.states.end());
    next.states.back() = next.states[next.states.size() - 2];
  }
  if (next.controls.size() > 1) {
    std::rotate(next.controls.begin(), next.controls.begin() + 1, next.controls.end());
    next.controls.back() = next.controls[next.controls.size() - 2];
  }
  return next;
}

MpcController::MpcController(MpcConfig config, BicycleGeometry geom) : config_(std::move(config)), geom_(geom) {
  config_.validate();
}

const MpcSolution& MpcController::solve(const VehicleState& state, const ReferencePath& path) {
  const References refs = generate_references(path, state, config_);
  std::optional<MpcSolution> warm;
  if (last_) warm = shift_warm_start(*last_);
  last_ = mpc::solve(state, refs, config_, geom_, warm ? &*warm : nullptr);
  return *last_;
}

}  // namespace ac2mpc::mpc
