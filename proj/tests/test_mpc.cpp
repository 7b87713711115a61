#include "ac2mpc/mpc/mpc.hpp"
#include "ac2mpc/mpc/qp.hpp"
#include "ac2mpc/terrain/plant.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace ac2mpc;
using namespace ac2mpc::mpc;

namespace {

const BicycleGeometry kGeom{};

StateVector state(double sx, double sy, double phi, double theta, double v) {
  return (StateVector() << sx, sy, phi, theta, v).finished();
}

ReferencePath circle_path(double radius, double speed, int vertices) {
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i <= vertices; ++i) {
    const double a = 2.0 * M_PI * i / vertices - M_PI / 2.0;
    pts.emplace_back(radius * std::cos(a), radius + radius * std::sin(a));
  }
  return ReferencePath(pts, {{0.0, speed}});
}

}  // namespace

TEST_SUITE("mpc") {

TEST_CASE("kinematic bicycle rates") {
  const StateVector coast = dynamics_rhs(state(0, 0, 0, 0, 5), InputVector(0, 0), kGeom);
  CHECK((coast - state(5, 0, 0, 0, 0)).norm() == 0.0);

  oracle::Gen g(21);
  for (int i = 0; i < 50; ++i) {
    const double v = g.uniform(0.0, 20.0);
    const StateVector d = dynamics_rhs(state(1, 2, 0, 0, v), InputVector(g.uniform(-1, 1), 0.01), kGeom);
    CHECK(d[kSy] == 0.0);
    CHECK(d[kPhi] == 0.0);
  }

  const double beta = std::atan(1.75 / 2.75 * std::tan(0.1));
  CHECK(beta == doctest::Approx(0.063766).epsilon(1e-5));
  CHECK(slip_angle(0.1, kGeom) == doctest::Approx(beta).epsilon(1e-14));
  const StateVector d = dynamics_rhs(state(0, 0, 0, 0.1, 5), InputVector(0.4, 0.02), kGeom);
  CHECK(d[kPhi] == doctest::Approx(0.11615).epsilon(1e-4));
  CHECK(d[kPhi] == doctest::Approx(5.0 / 2.75 * std::tan(beta)).epsilon(1e-14));
  CHECK(d[kSx] == doctest::Approx(5.0 * std::cos(beta)).epsilon(1e-14));
  CHECK(d[kTheta] == 0.02);
  CHECK(d[kV] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("rates are generic in the scalar type") {
  const StateVec<long double> xl = state(0, 0, 0.3, 0.1, 5).cast<long double>();
  const StateVec<float> xf = state(0, 0, 0.3, 0.1, 5).cast<float>();
  const StateVector ref = dynamics_rhs(state(0, 0, 0.3, 0.1, 5), InputVector(0.2, 0.01), kGeom);
  const auto dl = dynamics_rhs(xl, InputVec<long double>(0.2L, 0.01L), kGeom);
  const auto df = dynamics_rhs(xf, InputVec<float>(0.2f, 0.01f), kGeom);
  CHECK((dl.cast<double>() - ref).norm() < 1e-14);
  CHECK((df.cast<double>() - ref).norm() < 1e-5);
}

TEST_CASE("lateral acceleration") {
  CHECK(lateral_accel(state(0, 0, 0, 0, 10), kGeom) == 0.0);
  CHECK(lateral_accel(state(0, 0, 0, 0.1, 5), kGeom) == doctest::Approx(0.91213).epsilon(1e-5));
  oracle::Gen g(22);
  for (int i = 0; i < 100; ++i) {
    const double th = g.uniform(-0.57, 0.57), v = g.uniform(0.1, 20);
    const double a = lateral_accel(state(0, 0, 0, th, v), kGeom);
    CHECK(a == doctest::Approx(-lateral_accel(state(0, 0, 0, -th, v), kGeom)));
    CHECK((a > 0) == (th > 0));
  }
}

TEST_CASE("one-step integrator: exact on constant acceleration, fixed point at rest, fourth order") {
  const StateVector x = integrate<double>(state(1, 0, 0, 0, 4), InputVector(0.6, 0.0), 0.5, kGeom);
  CHECK(x[kSx] == doctest::Approx(1.0 + 4.0 * 0.5 + 0.5 * 3.0 * 0.25).epsilon(1e-14));
  CHECK(x[kV] == doctest::Approx(5.5).epsilon(1e-14));
  const StateVector rest = state(3, 4, 0.7, 0.2, 0);
  CHECK(integrate<double>(rest, InputVector(0, 0), 0.5, kGeom) == rest);

  auto run = [&](double dt) {
    StateVector s = state(0, 0, 0.1, 0.1, 5);
    const int n = static_cast<int>(std::lround(2.0 / dt));
    for (int i = 0; i < n; ++i) s = integrate<double>(s, InputVector(0.3, 0.05), dt, kGeom);
    return s;
  };
  const StateVector ref = run(1e-4);
  const double ratio = (run(0.1) - ref).norm() / (run(0.05) - ref).norm();
  CAPTURE(ratio);
  CHECK(ratio >= 12.0);
  CHECK(ratio <= 20.0);
}

TEST_CASE("projection onto a polyline") {
  const ReferencePath straight = ReferencePath::straight(100.0, 10.0);
  const PathProjection p = project_to_path(straight, {3.0, 4.0});
  CHECK(p.arc_length == doctest::Approx(3.0));
  CHECK(p.distance == doctest::Approx(4.0));
  CHECK(p.signed_offset == doctest::Approx(4.0));
  CHECK(project_to_path(straight, {42.0, 0.0}).distance == 0.0);

  // Equidistant from both ends of a U-turn: the smaller arc length wins.
  const ReferencePath uturn({{0, 0}, {10, 0}, {10, 2}, {0, 2}}, {{0.0, 5.0}});
  CHECK(project_to_path(uturn, {2.0, 1.0}).arc_length == doctest::Approx(2.0));

  // Brute-force oracle on a gently curving path, own arc-length sampling.
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i <= 100; ++i) pts.emplace_back(2.0 * i, 10.0 * std::sin(2.0 * i / 40.0));
  const ReferencePath wavy(pts, {{0.0, 5.0}});
  std::vector<double> cum = {0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) cum.push_back(cum.back() + (pts[i] - pts[i - 1]).norm());
  const double total = cum.back();
  auto point = [&](double s) {
    std::size_t k = 1;
    while (k + 1 < cum.size() && cum[k] < s) ++k;
    const double t = (s - cum[k - 1]) / (cum[k] - cum[k - 1]);
    return Eigen::Vector2d(pts[k - 1] + t * (pts[k] - pts[k - 1]));
  };
  const int samples = 10000;
  const double pitch = total / samples;
  std::vector<Eigen::Vector2d> dense;
  for (int i = 0; i <= samples; ++i) dense.push_back(point(i * pitch));

  oracle::Gen g(23);
  for (int trial = 0; trial < 100; ++trial) {
    const double s = g.uniform(5.0, total - 5.0);
    const Eigen::Vector2d tangent = (point(s + 1e-3) - point(s - 1e-3)).normalized();
    const Eigen::Vector2d pos = point(s) + g.uniform(-3.0, 3.0) * Eigen::Vector2d(-tangent.y(), tangent.x());
    int best = 0;
    for (int i = 1; i <= samples; ++i)
      if ((dense[i] - pos).squaredNorm() < (dense[best] - pos).squaredNorm()) best = i;
    const PathProjection fast = project_to_path(wavy, pos);
    CHECK(std::abs(fast.arc_length - best * pitch) <= pitch);
    CHECK(fast.distance <= (dense[best] - pos).norm() + 1e-12);
  }
}

TEST_CASE("references advance along the path from the current position only") {
  const ReferencePath path = ReferencePath::straight(200.0, 10.0);
  const References r = generate_references(path, VehicleState{0, 0, 0, 0, 10, 0}, 10, 0.5);
  REQUIRE(r.states.size() == 11);
  REQUIRE(r.inputs.size() == 10);
  for (int k = 0; k <= 10; ++k) {
    CHECK(r.states[k][kSx] == doctest::Approx(5.0 * k));
    CHECK(r.states[k][kSy] == 0.0);
    CHECK(r.states[k][kTheta] == 0.0);
    CHECK(r.states[k][kV] == 10.0);
  }
  for (const auto& mu : r.inputs) CHECK(mu.isZero());

  // Laterally offset vehicle: the first reference sits on the path.
  const References off = generate_references(path, VehicleState{12, 3, 0.2, 0.1, 4, 9}, 10, 0.5);
  CHECK(off.states[0][kSx] == doctest::Approx(12.0));
  CHECK(off.states[0][kSy] == 0.0);

  // Memoryless: an unrelated call in between changes nothing.
  const VehicleState a{30, 1, 0, 0, 8, 3}, b{150, -2, 0.1, 0, 2, 20};
  const References first = generate_references(path, a, 10, 0.5);
  (void)generate_references(path, b, 10, 0.5);
  const References again = generate_references(path, a, 10, 0.5);
  CHECK(first.states == again.states);
  CHECK(first.arc_lengths == again.arc_lengths);
  // Elapsed time is not an input.
  VehicleState late = a;
  late.sim_time = 1000.0;
  CHECK(generate_references(path, late, 10, 0.5).states == first.states);

  // Past the end: clamp to the final waypoint.
  const References end = generate_references(path, VehicleState{195, 0, 0, 0, 10, 0}, 10, 0.5);
  CHECK(end.states.back()[kSx] == doctest::Approx(200.0));
}

TEST_CASE("an already optimal state yields zero input") {
  MpcConfig cfg;
  for (bool rti : {true, false}) {
    cfg.rti_mode = rti;
    const ReferencePath path = ReferencePath::straight(500.0, 10.0);
    const VehicleState x0{0, 0, 0, 0, 10, 0};
    const MpcSolution sol = solve(x0, generate_references(path, x0, cfg), cfg, kGeom);
    const ControlInput u = sol.first_input(cfg);
    CHECK(std::abs(u.throttle_a) < 1e-6);
    CHECK(std::abs(u.steer_rate_omega) < 1e-6);
  }
}

TEST_CASE("two-stage longitudinal problem matches a dense grid search") {
  MpcConfig cfg;
  cfg.stages_N = 2;
  cfg.horizon_T = 1.0;
  cfg.terminal_weight_P = 10.0 * cfg.state_weight_Q;
  cfg.rti_mode = false;
  cfg.sqp_max_iters = 50;
  cfg.sqp_tol = 1e-10;
  const ReferencePath path = ReferencePath::straight(500.0, 10.0);
  const VehicleState x0{0, 0, 0, 0, 5, 0};
  const MpcSolution sol = solve(x0, generate_references(path, x0, cfg), cfg, kGeom);

  // Straight line, steering frozen at zero: closed-form positions and speeds.
  const double dt = 0.5, k = kGeom.max_accel_scale;
  const auto& Q = cfg.state_weight_Q;
  const auto& P = cfg.terminal_weight_P;
  const double Ra = cfg.input_weight_R[0];
  auto cost = [&](double a0, double a1) {
    const double s1 = 5.0 * dt + 0.5 * k * a0 * dt * dt, v1 = 5.0 + k * a0 * dt;
    const double s2 = s1 + v1 * dt + 0.5 * k * a1 * dt * dt, v2 = v1 + k * a1 * dt;
    return Q[kSx] * (s1 - 5.0) * (s1 - 5.0) + Q[kV] * (v1 - 10.0) * (v1 - 10.0) + Ra * (a0 * a0 + a1 * a1) +
           P[kSx] * (s2 - 10.0) * (s2 - 10.0) + P[kV] * (v2 - 10.0) * (v2 - 10.0);
  };
  double best = INFINITY, best_a0 = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    for (int j = 0; j <= 2000; ++j) {
      const double a0 = -1.0 + 1e-3 * i, a1 = -1.0 + 1e-3 * j;
      const double c = cost(a0, a1);
      if (c < best) best = c, best_a0 = a0;
    }
  }
  CAPTURE(best_a0);
  CHECK(std::abs(sol.first_input(cfg).throttle_a - best_a0) <= 2e-3);
  CHECK(std::abs(sol.first_input(cfg).steer_rate_omega) < 1e-6);
}

TEST_CASE("Gauss-Newton gradient matches central differences of the objective") {
  MpcConfig cfg;
  oracle::Gen g(24);
  const ReferencePath path = circle_path(60.0, 8.0, 400);
  for (int trial = 0; trial < 20; ++trial) {
    const VehicleState x0{g.uniform(-2, 2), g.uniform(-2, 2), g.uniform(-0.3, 0.3), g.uniform(-0.3, 0.3),
                          g.uniform(1, 12), 0};
    const References refs = generate_references(path, x0, cfg);
    std::vector<InputVector> U(cfg.stages_N);
    for (auto& u : U) u = InputVector(g.uniform(-1, 1), g.uniform(-0.05, 0.05));
    const CondensedModel m = condensed_model(x0.vector(), U, refs, cfg, kGeom);
    auto J = [&](const std::vector<InputVector>& W) {
      return trajectory_objective(rollout(x0.vector(), W, cfg, kGeom), W, refs, cfg, kGeom);
    };
    Vector fd(2 * cfg.stages_N);
    const double h = 1e-6;
    for (int i = 0; i < fd.size(); ++i) {
      auto up = U, dn = U;
      up[i / 2][i % 2] += h;
      dn[i / 2][i % 2] -= h;
      fd[i] = (J(up) - J(dn)) / (2 * h);
    }
    const double rel = (m.gradient - fd).norm() / fd.norm();
    CAPTURE(rel);
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("below the reference speed the first throttle is positive and bounded") {
  MpcConfig cfg;
  const ReferencePath path = ReferencePath::straight(500.0, 10.0);
  for (bool rti : {true, false}) {
    cfg.rti_mode = rti;
    const VehicleState x0{0, 0, 0, 0, 5, 0};
    const ControlInput u = solve(x0, generate_references(path, x0, cfg), cfg, kGeom).first_input(cfg);
    CHECK(u.throttle_a > 0.0);
    CHECK(u.throttle_a <= 1.0);
  }
}

TEST_CASE("first input respects the actuator box for random states") {
  MpcConfig cfg;
  oracle::Gen g(25);
  const ReferencePath path = circle_path(25.0, 12.0, 300);
  for (int trial = 0; trial < 40; ++trial) {
    cfg.rti_mode = trial % 2 == 0;
    const VehicleState x0{g.uniform(-10, 10), g.uniform(-5, 30), g.uniform(-3, 3), g.uniform(-0.57, 0.57),
                          g.uniform(0, 25), 0};
    const MpcSolution sol = solve(x0, generate_references(path, x0, cfg), cfg, kGeom);
    const ControlInput u = sol.first_input(cfg);
    CHECK(std::abs(u.throttle_a) <= 1.0);
    CHECK(std::abs(u.steer_rate_omega) <= 0.05);
  }
}

TEST_CASE("full SQP: monotone objective, consistent dynamics, warm start no slower") {
  MpcConfig cfg;
  cfg.rti_mode = false;
  const ReferencePath path = circle_path(40.0, 10.0, 300);
  const VehicleState x0{1.0, -1.0, 0.2, 0.0, 3.0, 0};
  const References refs = generate_references(path, x0, cfg);

  double prev = INFINITY;
  for (int iters = 1; iters <= 8; ++iters) {
    cfg.sqp_max_iters = iters;
    const double J = solve(x0, refs, cfg, kGeom).objective;
    CHECK(J <= prev * (1.0 + 1e-12));
    prev = J;
  }

  cfg.sqp_max_iters = 50;
  const MpcSolution cold = solve(x0, refs, cfg, kGeom);
  for (int k = 0; k < cfg.stages_N; ++k) {
    const StateVector next = integrate<double>(cold.states[k], cold.controls[k], cfg.stage_dt(), kGeom);
    CHECK((next - cold.states[k + 1]).cwiseAbs().maxCoeff() <= cfg.sqp_tol);
  }
  const MpcSolution warm = solve(x0, refs, cfg, kGeom, &cold);
  CHECK(warm.iterations <= cold.iterations);
}

TEST_CASE("warm-start shifting") {
  MpcConfig cfg;
  const ReferencePath path = ReferencePath::straight(500.0, 10.0);
  const VehicleState x0{0, 0, 0, 0, 2, 0};
  const MpcSolution sol = solve(x0, generate_references(path, x0, cfg), cfg, kGeom);
  const MpcSolution one = shift_warm_start(sol), two = shift_warm_start(one);
  const int N = cfg.stages_N;
  REQUIRE(two.controls.size() == static_cast<std::size_t>(N));
  REQUIRE(two.states.size() == static_cast<std::size_t>(N + 1));
  for (int k = 0; k < N - 2; ++k) CHECK(two.controls[k] == sol.controls[k + 2]);
  CHECK(two.controls[N - 2] == sol.controls[N - 1]);
  CHECK(two.controls[N - 1] == sol.controls[N - 1]);
  CHECK(two.states[N - 2] == sol.states[N]);
  CHECK(two.states[N] == sol.states[N]);
  for (const auto& u : two.controls) {
    CHECK(std::abs(u[kThrottle]) <= 1.0);
    CHECK(std::abs(u[kSteerRate]) <= 0.05);
  }
}

TEST_CASE("receding horizon on the matched plant settles within 0.1 m/s after 5 s") {
  const terrain::Plant plant(terrain::VehicleParams{}, terrain::Matched{});
  MpcController ctrl(MpcConfig{}, plant.geometry());
  const ReferencePath path = ReferencePath::straight(500.0, 10.0);
  VehicleState s{};
  double worst = 0.0;
  for (int i = 0; i < 300; ++i) {
    s = plant.run_with_zoh(s, ctrl.solve(s, path).first_input(ctrl.config()));
    if (s.sim_time > 5.0) worst = std::max(worst, std::abs(s.speed_v - 10.0));
  }
  CAPTURE(worst);
  CHECK(worst < 0.1);
}

TEST_CASE("soft lateral bound holds on a tight circle") {
  const terrain::Plant plant(terrain::VehicleParams{}, terrain::Matched{});
  MpcController ctrl(MpcConfig{}, plant.geometry());
  const ReferencePath path = circle_path(20.0, 10.0, 400);
  VehicleState s{0, 0, 0, 0, 0, 0};
  double worst = 0.0;
  for (int i = 0; i < 300; ++i) {
    s = plant.run_with_zoh(s, ctrl.solve(s, path).first_input(ctrl.config()));
    worst = std::max(worst, std::abs(lateral_accel(s.vector(), plant.geometry())));
  }
  CAPTURE(worst);
  CHECK(worst <= 1.5 + 0.1);
}

TEST_CASE("configuration validation") {
  MpcConfig cfg;
  cfg.input_weight_R[0] = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = MpcConfig{};
  cfg.stages_N = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK_NOTHROW(MpcConfig{}.validate());
}

}  // TEST_SUITE

TEST_SUITE("qp") {

namespace {

double qp_objective(const QpProblem& p, const Vector& x) { return 0.5 * x.dot(p.H * x) + p.g.dot(x); }

bool feasible(const QpProblem& p, const Vector& x, double tol) {
  for (int i = 0; i < x.size(); ++i)
    if (x[i] < p.lb[i] - tol || x[i] > p.ub[i] + tol) return false;
  const Vector cx = p.C * x;
  for (int i = 0; i < cx.size(); ++i)
    if (cx[i] < p.lc[i] - tol || cx[i] > p.uc[i] + tol) return false;
  return true;
}

// Enumerates every active-set assignment and keeps the best feasible stationary point.
Vector enumerate_qp(const QpProblem& p) {
  const int n = static_cast<int>(p.g.size()), m = static_cast<int>(p.C.rows());
  const int total = n + m;
  int combos = 1;
  for (int i = 0; i < total; ++i) combos *= 3;
  Vector best;
  double best_val = INFINITY;
  for (int c = 0; c < combos; ++c) {
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    int code = c;
    bool usable = true;
    for (int i = 0; i < total && usable; ++i, code /= 3) {
      const int which = code % 3;
      if (which == 0) continue;
      Eigen::RowVectorXd a = i < n ? Eigen::RowVectorXd::Unit(n, i) : Eigen::RowVectorXd(p.C.row(i - n));
      const double b = i < n ? (which == 1 ? p.lb[i] : p.ub[i]) : (which == 1 ? p.lc[i - n] : p.uc[i - n]);
      usable = std::isfinite(b);
      rows.push_back(a);
      rhs.push_back(b);
    }
    const int k = static_cast<int>(rows.size());
    if (!usable || k > n) continue;
    {
      Matrix K = Matrix::Zero(n + k, n + k);
      Vector r(n + k);
      K.topLeftCorner(n, n) = p.H;
      r.head(n) = -p.g;
      for (int j = 0; j < k; ++j) {
        K.block(n + j, 0, 1, n) = rows[j];
        K.block(0, n + j, n, 1) = rows[j].transpose();
        r[n + j] = rhs[j];
      }
      Eigen::FullPivLU<Matrix> lu(K);
      if (lu.rank() < n + k) continue;
      const Vector x = lu.solve(r).head(n);
      if (feasible(p, x, 1e-10) && qp_objective(p, x) < best_val) best_val = qp_objective(p, x), best = x;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("dual active-set solver matches active-set enumeration") {
  oracle::Gen g(31);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = g.integer(1, 4), m = g.integer(0, 2);
    Matrix A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = g.normal();
    QpProblem p;
    p.H = A * A.transpose() + 0.1 * Matrix::Identity(n, n);
    p.g = Vector::NullaryExpr(n, [&] { return 3.0 * g.normal(); });
    p.lb = Vector::NullaryExpr(n, [&] { return g.uniform(-2.0, -0.1); });
    p.ub = Vector::NullaryExpr(n, [&] { return g.uniform(0.1, 2.0); });
    if (n > 1) p.ub[0] = INFINITY;
    p.C = Matrix::NullaryExpr(m, n, [&] { return g.normal(); });
    p.lc = Vector::NullaryExpr(m, [&] { return g.uniform(-1.0, 0.0); });
    p.uc = Vector::NullaryExpr(m, [&] { return g.uniform(0.0, 1.0); });
    const QpResult r = solve_qp(p);
    REQUIRE(r.status == QpStatus::Optimal);
    const Vector want = enumerate_qp(p);
    REQUIRE(want.size() == n);
    CHECK((r.x - want).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(r.kkt_residual <= 1e-8);
    CHECK(qp_kkt_residual(p, r.x, r.box_multipliers, r.row_multipliers) <= 1e-8);
  }
}

TEST_CASE("unconstrained minimizer is returned when no bound is active") {
  QpProblem p = QpProblem::box(Matrix::Identity(2, 2) * 2.0, Vector::Constant(2, -1.0), Vector::Constant(2, -5.0),
                               Vector::Constant(2, 5.0));
  const QpResult r = solve_qp(p);
  CHECK(r.status == QpStatus::Optimal);
  CHECK((r.x - Vector::Constant(2, 0.5)).norm() < 1e-14);
  CHECK(r.box_multipliers.isZero());
}

TEST_CASE("infeasible and non-convex problems are reported") {
  QpProblem p = QpProblem::box(Matrix::Identity(2, 2), Vector::Zero(2), Vector::Constant(2, -1.0),
                               Vector::Constant(2, 1.0));
  p.C = Matrix::Ones(2, 2);
  p.lc = Vector::Constant(2, -INFINITY);
  p.uc = Vector::Constant(2, INFINITY);
  p.lc[0] = 1.5;   // x0 + x1 >= 1.5
  p.uc[1] = -1.5;  // x0 + x1 <= -1.5
  CHECK(solve_qp(p).status == QpStatus::Infeasible);

  QpProblem indefinite = QpProblem::box((Matrix(2, 2) << 1, 0, 0, -1).finished(), Vector::Zero(2),
                                        Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
  CHECK(solve_qp(indefinite).status == QpStatus::NotConvex);
}

}  // TEST_SUITE
