#include "homog/pde.hpp"

#include <cmath>
#include <ostream>

#include "homog/common.hpp"
#include "homog/fem.hpp"

namespace homog {

TimeGrid TimeGrid::make(double T, double dt) {
  if (!(dt > 0)) config_error("time step must be positive");
  if (!(T > 0)) config_error("final time must be positive");
  int steps = static_cast<int>(std::lround(T / dt));
  if (steps < 1 || std::abs(steps * dt - T) > 1e-9 * T)
    config_error("time grid must satisfy steps * dt = T exactly (T = " + fmt_g(T) +
                 ", dt = " + fmt_g(dt) + ")");
  return TimeGrid{T, dt, steps};
}

bool Trajectory::monitors_clean() const {
  for (const auto& e : energy)
    if (!e.apriori_ok || !e.growth_ok) return false;
  return true;
}

SparseMatrix assemble_block_matrix(const Mesh& mesh, int N, const BlockCoeffFn& coeff) {
  SparseMatrix A(mesh.n_nodes() * N, mesh.n_nodes() * N);
  for (int e = 0; e < mesh.n_tris(); ++e) {
    const auto& t = mesh.tris[e];
    auto qp = mesh.quad_points(e);
    const double w = mesh.element_areas[e] / 3.0;
    for (int q = 0; q < 3; ++q) {
      BlockCoeffs cq = coeff(e, q, qp[q]);
      // P1 basis at the edge-q midpoint: 1/2 on its endpoints
      const int qa = q, qb = (q + 1) % 3;
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) {
          double mass = w * cq.M(a, b);
          if (mass != 0.0) {
            A.add(t[qa] * N + a, t[qa] * N + b, 0.25 * mass);
            A.add(t[qa] * N + a, t[qb] * N + b, 0.25 * mass);
            A.add(t[qb] * N + a, t[qa] * N + b, 0.25 * mass);
            A.add(t[qb] * N + a, t[qb] * N + b, 0.25 * mass);
          }
        }
      for (int ta = 0; ta < 3; ++ta) {
        // drift: (grad phi_a)^T D_i phi_b V
        for (int a = 0; a < N; ++a)
          for (int b = 0; b < N; ++b) {
            double drift = 0;
            for (int i = 0; i < 2; ++i)
              drift += mesh.shape_grads[e][ta][i] * cq.D[i](a, b);
            if (drift != 0.0) {
              A.add(t[ta] * N + a, t[qa] * N + b, w * 0.5 * drift);
              A.add(t[ta] * N + a, t[qb] * N + b, w * 0.5 * drift);
            }
          }
        // stiffness: (grad phi_a)^T E grad phi_b, component diagonal
        for (int tb = 0; tb < 3; ++tb) {
          double stiff = w * mesh.shape_grads[e][ta].dot(cq.E * mesh.shape_grads[e][tb]);
          for (int a = 0; a < N; ++a) A.add(t[ta] * N + a, t[tb] * N + a, stiff);
        }
      }
    }
  }
  return A;
}

Eigen::VectorXd assemble_block_rhs(const Mesh& mesh, int N, const BlockRhsFn& rhs) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.n_nodes() * N);
  for (int e = 0; e < mesh.n_tris(); ++e) {
    const auto& t = mesh.tris[e];
    auto qp = mesh.quad_points(e);
    const double w = mesh.element_areas[e] / 3.0;
    for (int q = 0; q < 3; ++q) {
      Eigen::VectorXd f = rhs(e, q, qp[q]);
      const int qa = q, qb = (q + 1) % 3;
      for (int a = 0; a < N; ++a) {
        b[t[qa] * N + a] += w * 0.5 * f[a];
        b[t[qb] * N + a] += w * 0.5 * f[a];
      }
    }
  }
  return b;
}

std::vector<int> dirichlet_block_rows(const Mesh& mesh, int N) {
  std::vector<int> rows;
  for (int v : mesh.external_boundary_nodes())
    for (int a = 0; a < N; ++a) rows.push_back(v * N + a);
  return rows;
}

namespace {

// Nodal values and element gradients of a block field, interpolated to a
// quadrature point.
struct FieldAtQ {
  Eigen::VectorXd value;              // N
  std::array<Eigen::VectorXd, 2> grad;  // per direction, N (element-constant)
};

FieldAtQ field_at_q(const Mesh& mesh, int N, const Eigen::VectorXd& field, int e, int q) {
  FieldAtQ out;
  out.value = Eigen::VectorXd::Zero(N);
  out.grad = {Eigen::VectorXd::Zero(N), Eigen::VectorXd::Zero(N)};
  const auto& t = mesh.tris[e];
  const int qa = q, qb = (q + 1) % 3;
  for (int a = 0; a < N; ++a)
    out.value[a] = 0.5 * (field[t[qa] * N + a] + field[t[qb] * N + a]);
  for (int k = 0; k < 3; ++k)
    for (int a = 0; a < N; ++a) {
      out.grad[0][a] += field[t[k] * N + a] * mesh.shape_grads[e][k][0];
      out.grad[1][a] += field[t[k] * N + a] * mesh.shape_grads[e][k][1];
    }
  return out;
}

struct EllipticCache {
  std::unique_ptr<LinearSolver> solver;
  bool matrix_time_dependent = true;
  bool v_constant = false;  // rhs independent of both t and U
  Eigen::VectorXd v_cached;
  double assembled_at = 0;
};

Eigen::VectorXd fine_rhs(const FineProblem& p, const Eigen::VectorXd& U, double t) {
  const CoefficientSet& c = *p.coeffs;
  const double eps = p.epsilon;
  return assemble_block_rhs(*p.mesh, c.N, [&](int e, int q, const Vec2& x) {
    Vec2 y = x / eps;
    Eigen::VectorXd f = c.evalH(t, x, y);
    FieldAtQ u = field_at_q(*p.mesh, c.N, U, e, q);
    f += c.evalK(t, x, y) * u.value;
    for (int i = 0; i < 2; ++i) f += eps * c.evalJ(i, t, x, y) * u.grad[i];
    return f;
  });
}

Eigen::VectorXd solve_fine_slice(const FineProblem& p, const Eigen::VectorXd& U, double t,
                                 EllipticCache* cache) {
  const CoefficientSet& c = *p.coeffs;
  EllipticCache local;
  EllipticCache& cc = cache ? *cache : local;

  if (!cc.solver || (cc.matrix_time_dependent && cc.assembled_at != t)) {
    SparseMatrix A = assemble_block_matrix(*p.mesh, c.N, [&](int, int, const Vec2& x) {
      Vec2 y = x / p.epsilon;
      BlockCoeffs bc;
      bc.M = c.evalM(t, x, y);
      bc.E = c.evalE(t, x, y);
      bc.D = {c.evalD(0, t, x, y), c.evalD(1, t, x, y)};
      return bc;
    });
    A.finalize();
    Constraint constraint;
    constraint.kind = ConstraintKind::dirichlet;
    constraint.nodes = dirichlet_block_rows(*p.mesh, c.N);
    cc.solver = std::make_unique<LinearSolver>(A, constraint, p.solver);
    cc.matrix_time_dependent = c.time_dependent();
    cc.assembled_at = t;
    std::uint32_t kj_mask = c.K.var_mask() | c.J[0].var_mask() | c.J[1].var_mask();
    bool has_coupling = false;
    for (const Expr& entry : c.K.entries)
      has_coupling |= !entry.is_constant() || entry.eval({}) != 0.0;
    for (int i = 0; i < 2; ++i)
      for (const Expr& entry : c.J[i].entries)
        has_coupling |= !entry.is_constant() || entry.eval({}) != 0.0;
    (void)kj_mask;
    bool h_time_dep = false;
    for (const Expr& entry : c.H) h_time_dep |= entry.uses(Var::t);
    cc.v_constant = !cc.matrix_time_dependent && !has_coupling && !h_time_dep;
  }
  if (cc.v_constant && cc.v_cached.size()) return cc.v_cached;

  Eigen::VectorXd b = fine_rhs(p, U, t);
  Eigen::VectorXd v = cc.solver->solve(b);
  if (cc.v_constant) cc.v_cached = v;
  return v;
}

EnergyRecord log_energy(const Mesh& mesh, int N, double t, const Eigen::VectorXd& U,
                        const Eigen::VectorXd& V, const BoundConstants* monitors,
                        double u0_h1_sq) {
  EnergyRecord rec;
  rec.t = t;
  rec.U_l2 = std::sqrt(l2_norm_sq_block(mesh, U, N));
  double u_semi = h1_semi_norm_sq_block(mesh, U, N);
  rec.U_h1 = std::sqrt(rec.U_l2 * rec.U_l2 + u_semi);
  rec.V_l2 = std::sqrt(l2_norm_sq_block(mesh, V, N));
  rec.V_semi = std::sqrt(h1_semi_norm_sq_block(mesh, V, N));

  if (monitors) {
    // a priori row: sum m~ ||V_a||^2 + sum e~_i ||dV/dx_i||^2
    //            <= H~ + sum K~_a ||U_a||^2 + sum J~_ia ||dU_a/dx_i||^2
    double lhs = 0, rhs = monitors->H_tilde;
    for (int a = 0; a < N; ++a) {
      Eigen::VectorXd va(mesh.n_nodes()), ua(mesh.n_nodes());
      for (int i = 0; i < mesh.n_nodes(); ++i) {
        va[i] = V[i * N + a];
        ua[i] = U[i * N + a];
      }
      lhs += monitors->m_tilde[a] * l2_norm_sq(mesh, va);
      rhs += monitors->K_tilde[a] * l2_norm_sq(mesh, ua);
      double dva[2] = {0, 0}, dua[2] = {0, 0};
      for (int e = 0; e < mesh.n_tris(); ++e) {
        Vec2 gv = element_gradient(mesh, e, va), gu = element_gradient(mesh, e, ua);
        for (int i = 0; i < 2; ++i) {
          dva[i] += mesh.element_areas[e] * gv[i] * gv[i];
          dua[i] += mesh.element_areas[e] * gu[i] * gu[i];
        }
      }
      for (int i = 0; i < 2; ++i) {
        lhs += monitors->e_tilde[i] * dva[i];
        rhs += monitors->J_tilde[i][a] * dua[i];
      }
    }
    rec.apriori_lhs = lhs;
    rec.apriori_rhs = rhs;
    rec.apriori_ok = lhs <= rhs * 1.02 + 1e-12;

    double u_env = monitors->u_h1_bound_sq(u0_h1_sq, t);
    double v_env = monitors->v_bound_sq(u_env);
    rec.growth_ok = rec.U_h1 * rec.U_h1 <= u_env * 1.02 + 1e-12 &&
                    rec.V_semi * rec.V_semi <= v_env * 1.02 + 1e-12;
  }
  return rec;
}

Eigen::VectorXd initial_state(const Mesh& mesh, const CoefficientSet& c) {
  Eigen::VectorXd U(mesh.n_nodes() * c.N);
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    Eigen::VectorXd u = c.evalUstar(mesh.nodes[i]);
    for (int a = 0; a < c.N; ++a) U[i * c.N + a] = u[a];
  }
  return U;
}

}  // namespace

Eigen::VectorXd elliptic_solve_fine(const FineProblem& p, const Eigen::VectorXd& U, double t) {
  return solve_fine_slice(p, U, t, nullptr);
}

Eigen::VectorXd rothe_step(const Mesh& mesh, const CoefficientSet& coeffs,
                           const Eigen::VectorXd& U_prev, const Eigen::VectorXd& V_prev,
                           double dt, double t_k, double t_km1) {
  const int N = coeffs.N;
  Eigen::VectorXd U(mesh.n_nodes() * N);
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    Eigen::MatrixXd A =
        Eigen::MatrixXd::Identity(N, N) + dt * coeffs.evalL(t_k, mesh.nodes[i]);
    Eigen::VectorXd rhs = U_prev.segment(i * N, N) +
                          dt * (coeffs.evalG(t_km1, mesh.nodes[i]) * V_prev.segment(i * N, N));
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd u = lu.solve(rhs);
    if (!u.allFinite() || (A * u - rhs).norm() > 1e-10 * (1.0 + rhs.norm()))
      numeric_error("implicit update is singular at node (" + fmt_g(mesh.nodes[i].x()) + ", " +
                    fmt_g(mesh.nodes[i].y()) + "): I + dt L is not invertible");
    U.segment(i * N, N) = u;
  }
  return U;
}

Trajectory run_fine(const FineProblem& p, const TimeGrid& grid, const BoundConstants* monitors) {
  const CoefficientSet& c = *p.coeffs;
  Trajectory tr;
  tr.mesh = p.mesh;
  tr.N = c.N;
  tr.grid = grid;

  EllipticCache cache;
  Eigen::VectorXd U = initial_state(*p.mesh, c);
  Eigen::VectorXd V = solve_fine_slice(p, U, 0.0, &cache);
  double u0_h1_sq = l2_norm_sq_block(*p.mesh, U, c.N) + h1_semi_norm_sq_block(*p.mesh, U, c.N);
  tr.U.push_back(U);
  tr.V.push_back(V);
  tr.energy.push_back(log_energy(*p.mesh, c.N, 0.0, U, V, monitors, u0_h1_sq));

  for (int k = 1; k <= grid.steps; ++k) {
    double t_k = grid.time(k), t_km1 = grid.time(k - 1);
    Eigen::VectorXd U_next = rothe_step(*p.mesh, c, U, V, grid.dt, t_k, t_km1);
    Eigen::VectorXd V_next = solve_fine_slice(p, U, t_k, &cache);  // elliptic slice from U_{k-1}
    U.swap(U_next);
    V.swap(V_next);
    tr.U.push_back(U);
    tr.V.push_back(V);
    tr.energy.push_back(log_energy(*p.mesh, c.N, t_k, U, V, monitors, u0_h1_sq));
  }
  return tr;
}

Trajectory run_macro(const MacroProblem& p, const TimeGrid& grid, const BoundConstants* monitors) {
  const CoefficientSet& c = *p.coeffs;
  const EffectiveTensorField& field = *p.tensors;
  const int N = c.N;
  Trajectory tr;
  tr.mesh = p.mesh;
  tr.N = N;
  tr.grid = grid;

  bool tdep = c.time_dependent();
  std::unique_ptr<LinearSolver> solver;
  double assembled_at = -1;
  auto ensure_solver = [&](double t) {
    if (solver && (!tdep || assembled_at == t)) return;
    SparseMatrix A = assemble_block_matrix(*p.mesh, N, [&](int, int, const Vec2& x) {
      const auto& v = field.at(t, x);
      BlockCoeffs bc;
      bc.M = v.Mbar;
      bc.E = v.Estar;
      bc.D = v.Dstar;
      return bc;
    });
    A.finalize();
    Constraint constraint;
    constraint.kind = ConstraintKind::dirichlet;
    constraint.nodes = dirichlet_block_rows(*p.mesh, N);
    solver = std::make_unique<LinearSolver>(A, constraint, p.solver);
    assembled_at = t;
  };
  auto solve_slice = [&](const Eigen::VectorXd& U, double t) {
    ensure_solver(t);
    Eigen::VectorXd b = assemble_block_rhs(*p.mesh, N, [&](int e, int q, const Vec2& x) {
      const auto& v = field.at(t, x);
      Eigen::VectorXd f = v.Hbar;
      f += v.Kbar * field_at_q(*p.mesh, N, U, e, q).value;
      return f;
    });
    return solver->solve(b);
  };

  Eigen::VectorXd U = initial_state(*p.mesh, c);
  Eigen::VectorXd V = solve_slice(U, 0.0);
  double u0_h1_sq = l2_norm_sq_block(*p.mesh, U, N) + h1_semi_norm_sq_block(*p.mesh, U, N);
  tr.U.push_back(U);
  tr.V.push_back(V);
  tr.energy.push_back(log_energy(*p.mesh, N, 0.0, U, V, monitors, u0_h1_sq));

  for (int k = 1; k <= grid.steps; ++k) {
    double t_k = grid.time(k), t_km1 = grid.time(k - 1);
    Eigen::VectorXd U_next = rothe_step(*p.mesh, c, U, V, grid.dt, t_k, t_km1);
    Eigen::VectorXd V_next = solve_slice(U, t_k);
    U.swap(U_next);
    V.swap(V_next);
    tr.U.push_back(U);
    tr.V.push_back(V);
    tr.energy.push_back(log_energy(*p.mesh, N, t_k, U, V, monitors, u0_h1_sq));
  }
  return tr;
}

void write_trajectory_csv(std::ostream& out, const Mesh& mesh, int N, const Eigen::VectorXd& U,
                          const Eigen::VectorXd& V) {
  out << "x1,x2";
  for (int a = 0; a < N; ++a) out << ",U" << a + 1;
  for (int a = 0; a < N; ++a) out << ",V" << a + 1;
  out << "\n";
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    out << fmt_g(mesh.nodes[i].x()) << "," << fmt_g(mesh.nodes[i].y());
    for (int a = 0; a < N; ++a) out << "," << fmt_g(U[i * N + a]);
    for (int a = 0; a < N; ++a) out << "," << fmt_g(V[i * N + a]);
    out << "\n";
  }
}

void write_energy_report(std::ostream& out, const Trajectory& tr) {
  out << "t,U_l2,U_h1,V_l2,V_semi,apriori_lhs,apriori_rhs,apriori_ok,growth_ok\n";
  for (const auto& e : tr.energy)
    out << fmt_g(e.t) << "," << fmt_g(e.U_l2) << "," << fmt_g(e.U_h1) << "," << fmt_g(e.V_l2)
        << "," << fmt_g(e.V_semi) << "," << fmt_g(e.apriori_lhs) << "," << fmt_g(e.apriori_rhs)
        << "," << (e.apriori_ok ? 1 : 0) << "," << (e.growth_ok ? 1 : 0) << "\n";
}

}  // namespace homog
