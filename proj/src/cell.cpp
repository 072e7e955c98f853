#include "homog/cell.hpp"

#include <cmath>
#include <random>

#include "homog/common.hpp"
#include "homog/tensors.hpp"

namespace homog {

namespace {

// P1 value at the q-th quadrature point (midpoint of local edge q).
inline double qvalue(const Mesh& m, int e, int q, const Eigen::VectorXd& nodal) {
  const auto& t = m.tris[e];
  return 0.5 * (nodal[t[q]] + nodal[t[(q + 1) % 3]]);
}

// central finite differences of coefficient tensors in x (step per the
// smooth-coefficient convention)
constexpr double kCoeffFdStep = 1e-6;
constexpr double kResolveFdStep = 1e-5;

}  // namespace

CellWorkspace::CellWorkspace(const Mesh& cell, MatFun A, SolveOptions opts)
    : mesh_(&cell), A_(std::move(A)), opts_(opts) {
  dofs_ = DofMap::periodic(cell);
  weights_ = phi_weights(cell, dofs_);
  area_ = cell.total_area();

  K_ = SparseMatrix(dofs_.n_dofs, dofs_.n_dofs);
  for (int e = 0; e < cell.n_tris(); ++e) {
    const auto& t = cell.tris[e];
    auto qp = cell.quad_points(e);
    double w = cell.element_areas[e] / 3.0;
    Eigen::Matrix2d Aq[3] = {A_(qp[0]), A_(qp[1]), A_(qp[2])};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        double v = 0;
        for (int q = 0; q < 3; ++q)
          v += w * cell.shape_grads[e][a].dot(Aq[q] * cell.shape_grads[e][b]);
        K_.add(dofs_.dof[t[a]], dofs_.dof[t[b]], v);
      }
  }
  K_.finalize();

  Constraint c;
  c.kind = ConstraintKind::zero_mean;
  c.weights = weights_;
  solver_ = std::make_unique<LinearSolver>(K_, c, opts_);
}

Eigen::VectorXd CellWorkspace::assemble(const CellLoad& load) const {
  const Mesh& m = *mesh_;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dofs_.n_dofs);
  for (int e = 0; e < m.n_tris(); ++e) {
    const auto& t = m.tris[e];
    auto qp = m.quad_points(e);
    double w = m.element_areas[e] / 3.0;
    for (int q = 0; q < 3; ++q) {
      double vol = load.vol ? load.vol(e, q, qp[q]) : 0.0;
      Vec2 flx = load.flux ? load.flux(e, q, qp[q]) : Vec2(0, 0);
      // phi values at midpoint q: 1/2 on the edge's endpoints, 0 opposite
      if (vol != 0.0) {
        b[dofs_.dof[t[q]]] += w * 0.5 * vol;
        b[dofs_.dof[t[(q + 1) % 3]]] += w * 0.5 * vol;
      }
      if (flx.squaredNorm() != 0.0)
        for (int a = 0; a < 3; ++a) b[dofs_.dof[t[a]]] -= w * flx.dot(m.shape_grads[e][a]);
    }
  }
  if (load.hole_g) {
    const double gp = 0.5 / std::sqrt(3.0);
    for (const auto& be : m.boundary_edges) {
      if (be.tag != EdgeTag::internal) continue;
      const Vec2 &p = m.nodes[be.a], &q = m.nodes[be.b];
      double len = (q - p).norm();
      for (double s : {0.5 - gp, 0.5 + gp}) {
        Vec2 x = p + s * (q - p);
        double g = load.hole_g(x);
        b[dofs_.dof[be.a]] += 0.5 * len * (1 - s) * g;
        b[dofs_.dof[be.b]] += 0.5 * len * s * g;
      }
    }
  }
  return b;
}

Eigen::VectorXd CellWorkspace::solve_mean_zero(Eigen::VectorXd load, double expected_defect,
                                               double defect_tol, bool project,
                                               double* defect_out) const {
  double defect = load.sum();
  if (defect_out) *defect_out = defect;
  if (std::abs(defect - expected_defect) > defect_tol)
    numeric_error("cell problem compatibility violated: load defect " + fmt_g(defect) +
                  " vs expected " + fmt_g(expected_defect) +
                  " (volume and boundary data are inconsistent)");
  if (project) load -= (defect / area_) * weights_;
  Eigen::VectorXd u = solver_->solve(load);
  return expand(dofs_, u);
}

double CellWorkspace::weak_residual(const Eigen::VectorXd& nodal_solution,
                                    const Eigen::VectorXd& load, unsigned seed,
                                    int n_tests) const {
  Eigen::VectorXd u(dofs_.n_dofs);
  for (int i = 0; i < mesh_->n_nodes(); ++i) u[dofs_.dof[i]] = nodal_solution[i];
  Eigen::VectorXd r = K_.compressed() * u - load;
  // remove the (constant-shift) multiplier component before testing
  r -= (r.dot(weights_) / weights_.squaredNorm()) * weights_;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  double worst = 0;
  for (int k = 0; k < n_tests; ++k) {
    Eigen::VectorXd v(dofs_.n_dofs);
    for (int i = 0; i < dofs_.n_dofs; ++i) v[i] = gauss(rng);
    worst = std::max(worst, std::abs(v.dot(r)) / v.norm());
  }
  return worst;
}

Eigen::VectorXd solve_generic(const CellProblem& cp, SolveOptions opts, CellSolveReport* report,
                              unsigned seed) {
  if (!cp.mesh) config_error("solve_generic: missing mesh");
  MatFun A = cp.A;
  if (!A) A = [](const Vec2&) { return Eigen::Matrix2d::Identity(); };
  CellWorkspace ws(*cp.mesh, A, opts);

  CellLoad load;
  if (cp.F) load.vol = [&](int, int, const Vec2& y) { return cp.F(y); };
  if (cp.g) load.hole_g = [&](const Vec2& y) { return -cp.g(y); };
  Eigen::VectorXd b = ws.assemble(load);

  double volume = cp.F ? integrate(*cp.mesh, [&](const Vec2& y) { return cp.F(y); }) : 0.0;
  double boundary = 0;
  if (cp.g) {
    for (const auto& be : cp.mesh->boundary_edges) {
      if (be.tag != EdgeTag::internal) continue;
      const Vec2 &p = cp.mesh->nodes[be.a], &q = cp.mesh->nodes[be.b];
      double len = (q - p).norm();
      const double gp = 0.5 / std::sqrt(3.0);
      boundary += 0.5 * len * (cp.g(p + (0.5 - gp) * (q - p)) + cp.g(p + (0.5 + gp) * (q - p)));
    }
  }
  double scale = 1.0 + std::abs(volume) + std::abs(boundary);
  if (std::abs(volume - boundary) > cp.compat_tol * scale)
    numeric_error("cell problem is incompatible: volume integral " + fmt_g(volume) +
                  " != hole-boundary integral " + fmt_g(boundary));

  double defect = 0;
  Eigen::VectorXd u =
      ws.solve_mean_zero(b, 0.0, cp.compat_tol * scale + 1e-12, true, &defect);
  if (report) {
    report->volume_integral = volume;
    report->boundary_integral = boundary;
    report->defect = defect;
    report->weak_residual = ws.weak_residual(u, ws.assemble(load), seed);
  }
  return u;
}

std::vector<Eigen::VectorXd> solve_W(CellWorkspace& ws, const CoefficientSet& coeffs,
                                     const MacroPoint& at) {
  std::vector<Eigen::VectorXd> W(CoefficientSet::d);
  for (int k = 0; k < CoefficientSet::d; ++k) {
    CellLoad load;
    load.flux = [&, k](int, int, const Vec2& y) -> Vec2 {
      return coeffs.evalE(at.t, at.x, y).col(k);
    };
    Eigen::VectorXd b = ws.assemble(load);
    W[k] = ws.solve_mean_zero(std::move(b), 0.0, 1e-8, true);
  }
  return W;
}

std::vector<Eigen::VectorXd> solve_Z(CellWorkspace& ws, const CoefficientSet& coeffs,
                                     const MacroPoint& at) {
  const int N = coeffs.N;
  std::vector<Eigen::VectorXd> Z(static_cast<size_t>(N) * N);
  for (int a = 0; a < N; ++a)
    for (int bcol = 0; bcol < N; ++bcol) {
      CellLoad load;
      load.flux = [&, a, bcol](int, int, const Vec2& y) -> Vec2 {
        Vec2 v;
        for (int i = 0; i < 2; ++i) v[i] = coeffs.evalD(i, at.t, at.x, y)(a, bcol);
        return v;
      };
      Eigen::VectorXd b = ws.assemble(load);
      Z[static_cast<size_t>(a) * N + bcol] = ws.solve_mean_zero(std::move(b), 0.0, 1e-8, true);
    }
  return Z;
}

namespace {

// Per-element gradients of a family of nodal fields.
std::vector<std::vector<Vec2>> element_gradients(const Mesh& m,
                                                 const std::vector<Eigen::VectorXd>& fields) {
  std::vector<std::vector<Vec2>> g(fields.size());
  for (size_t f = 0; f < fields.size(); ++f) {
    g[f].resize(m.n_tris());
    for (int e = 0; e < m.n_tris(); ++e) g[f][e] = element_gradient(m, e, fields[f]);
  }
  return g;
}

struct FrozenMicro {
  const CoefficientSet* c;
  MacroPoint at;

  Eigen::Matrix2d E(const Vec2& y) const { return c->evalE(at.t, at.x, y); }
  Eigen::MatrixXd D(int i, const Vec2& y) const { return c->evalD(i, at.t, at.x, y); }
  Eigen::MatrixXd M(const Vec2& y) const { return c->evalM(at.t, at.x, y); }
  Eigen::MatrixXd Kc(const Vec2& y) const { return c->evalK(at.t, at.x, y); }
  Eigen::VectorXd H(const Vec2& y) const { return c->evalH(at.t, at.x, y); }

  Eigen::Matrix2d dE(int j, const Vec2& y) const {
    Vec2 xp = at.x, xm = at.x;
    xp[j] += kCoeffFdStep;
    xm[j] -= kCoeffFdStep;
    return (c->evalE(at.t, xp, y) - c->evalE(at.t, xm, y)) / (2 * kCoeffFdStep);
  }
  Eigen::MatrixXd dD(int j, int i, const Vec2& y) const {
    Vec2 xp = at.x, xm = at.x;
    xp[j] += kCoeffFdStep;
    xm[j] -= kCoeffFdStep;
    return (c->evalD(i, at.t, xp, y) - c->evalD(i, at.t, xm, y)) / (2 * kCoeffFdStep);
  }
};

}  // namespace

void solve_second_order(CellWorkspace& ws, const CoefficientSet& coeffs, const MacroPoint& at,
                        const SecondOrderInputs& in, CellFunctions& out) {
  const Mesh& m = ws.mesh();
  const int N = coeffs.N;
  const int d = CoefficientSet::d;
  const double hole_fraction = 1.0 - ws.material_area();
  const bool xdep = coeffs.micro_x_dependent();
  FrozenMicro micro{&coeffs, at};

  auto gradW = element_gradients(m, out.W);
  auto gradZ = element_gradients(m, out.Z);
  std::vector<std::vector<Vec2>> grad_dW[2], grad_dZ[2];
  if (in.dW)
    for (int j = 0; j < d; ++j) grad_dW[j] = element_gradients(m, (*in.dW)[j]);
  if (in.dZ)
    for (int j = 0; j < d; ++j) grad_dZ[j] = element_gradients(m, (*in.dZ)[j]);

  // P: volume data H - Hbar, zero hole flux
  out.P.resize(N);
  for (int a = 0; a < N; ++a) {
    CellLoad load;
    load.vol = [&, a](int, int, const Vec2& y) { return micro.H(y)[a] - in.Hbar[a]; };
    Eigen::VectorXd b = ws.assemble(load);
    out.P[a] = ws.solve_mean_zero(std::move(b), hole_fraction * in.Hbar[a], in.defect_tol, true);
  }

  // R0: volume data K - Kbar
  out.R0.resize(static_cast<size_t>(N) * N);
  for (int a = 0; a < N; ++a)
    for (int bc = 0; bc < N; ++bc) {
      CellLoad load;
      load.vol = [&, a, bc](int, int, const Vec2& y) { return micro.Kc(y)(a, bc) - in.Kbar(a, bc); };
      Eigen::VectorXd b = ws.assemble(load);
      out.R0[static_cast<size_t>(a) * N + bc] =
          ws.solve_mean_zero(std::move(b), hole_fraction * in.Kbar(a, bc), in.defect_tol, true);
    }

  // Q0: drift/mass block of the second-order expansion
  out.Q0.resize(static_cast<size_t>(N) * N);
  for (int a = 0; a < N; ++a)
    for (int bc = 0; bc < N; ++bc) {
      CellLoad load;
      load.vol = [&, a, bc](int e, int q, const Vec2& y) {
        double v = in.Mbar(a, bc) - micro.M(y)(a, bc);
        if (xdep) {
          for (int i = 0; i < d; ++i) {
            v += micro.dD(i, i, y)(a, bc);                       // div_x D
            v -= in.dDstar[i][i](a, bc);                         // div_x D*
          }
          // div_x (E grad_y Z): coefficient and re-solve contributions
          for (int i = 0; i < d; ++i) {
            Eigen::Matrix2d dEi = micro.dE(i, y);
            const Vec2 gz = gradZ[static_cast<size_t>(a) * N + bc][e];
            for (int k = 0; k < d; ++k) v += dEi(i, k) * gz[k];
            if (in.dZ) {
              const Vec2 gdz = grad_dZ[i][static_cast<size_t>(a) * N + bc][e];
              Eigen::Matrix2d Ey = micro.E(y);
              for (int k = 0; k < d; ++k) v += Ey(i, k) * gdz[k];
            }
          }
        }
        (void)q;
        return v;
      };
      load.flux = [&, a, bc](int e, int q, const Vec2& y) -> Vec2 {
        Vec2 f = Vec2::Zero();
        // D Z (matrix product in the component indices)
        for (int i = 0; i < d; ++i) {
          Eigen::MatrixXd Di = micro.D(i, y);
          for (int g = 0; g < N; ++g)
            f[i] += Di(a, g) * qvalue(m, e, q, out.Z[static_cast<size_t>(g) * N + bc]);
        }
        if (xdep && in.dZ) {  // E . grad_x Z
          Eigen::Matrix2d Ey = micro.E(y);
          for (int j = 0; j < d; ++j) {
            double dz = qvalue(m, e, q, (*in.dZ)[j][static_cast<size_t>(a) * N + bc]);
            for (int i = 0; i < d; ++i) f[i] += Ey(i, j) * dz;
          }
        }
        return f;
      };
      Eigen::VectorXd b = ws.assemble(load);
      double expected = -hole_fraction * in.Mbar(a, bc);
      if (xdep)
        for (int i = 0; i < d; ++i) expected += hole_fraction * in.dDstar[i][i](a, bc);
      out.Q0[static_cast<size_t>(a) * N + bc] =
          ws.solve_mean_zero(std::move(b), expected, in.defect_tol, true);
    }

  // Q1: gradient block
  out.Q1.resize(static_cast<size_t>(d) * N * N);
  for (int i = 0; i < d; ++i)
    for (int a = 0; a < N; ++a)
      for (int bc = 0; bc < N; ++bc) {
        CellLoad load;
        load.vol = [&, i, a, bc](int e, int q, const Vec2& y) {
          double v = 0;
          Eigen::Matrix2d Ey = micro.E(y);
          // (E grad_y Z)_i
          const Vec2 gz = gradZ[static_cast<size_t>(a) * N + bc][e];
          for (int k = 0; k < d; ++k) v += Ey(i, k) * gz[k];
          // D - D*
          v += micro.D(i, y)(a, bc) - in.Dstar[i](a, bc);
          if (xdep && a == bc) {
            // div_x(E) e_i and div_x(E grad_y W_i), minus the E* part
            for (int j = 0; j < d; ++j) {
              Eigen::Matrix2d dEj = micro.dE(j, y);
              v += dEj(j, i) - in.dEstar[j](j, i);
              const Vec2 gw = gradW[i][e];
              for (int k = 0; k < d; ++k) v += dEj(j, k) * gw[k];
              if (in.dW) {
                const Vec2 gdw = grad_dW[j][i][e];
                for (int k = 0; k < d; ++k) v += Ey(j, k) * gdw[k];
              }
            }
          }
          (void)q;
          return v;
        };
        load.flux = [&, i, a, bc](int e, int q, const Vec2& y) -> Vec2 {
          Eigen::Matrix2d Ey = micro.E(y);
          Vec2 f = Ey.col(i) * qvalue(m, e, q, out.Z[static_cast<size_t>(a) * N + bc]);
          double wi = qvalue(m, e, q, out.W[i]);
          for (int k = 0; k < d; ++k) f[k] += micro.D(k, y)(a, bc) * wi;
          if (xdep && a == bc && in.dW)
            for (int j = 0; j < d; ++j) {
              double dw = qvalue(m, e, q, (*in.dW)[j][i]);
              for (int k = 0; k < d; ++k) f[k] += Ey(k, j) * dw;
            }
          return f;
        };
        Eigen::VectorXd b = ws.assemble(load);
        double expected = hole_fraction * in.Dstar[i](a, bc);
        if (xdep && a == bc)
          for (int j = 0; j < d; ++j) expected += hole_fraction * in.dEstar[j](j, i);
        out.Q1[(static_cast<size_t>(i) * N + a) * N + bc] =
            ws.solve_mean_zero(std::move(b), expected, in.defect_tol, true);
      }

  // R1 vanishes identically (zero data, zero flux)
  out.R1.assign(static_cast<size_t>(d) * N * N, Eigen::VectorXd::Zero(m.n_nodes()));

  // Q2: Hessian block
  out.Q2.resize(static_cast<size_t>(d) * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      CellLoad load;
      load.vol = [&, i, j](int e, int q, const Vec2& y) {
        Eigen::Matrix2d Ey = micro.E(y);
        const Vec2 gw = gradW[j][e];
        double v = Ey(i, j) - in.Estar(i, j);
        for (int k = 0; k < d; ++k) v += Ey(i, k) * gw[k];
        (void)q;
        return v;
      };
      load.flux = [&, i, j](int e, int q, const Vec2& y) -> Vec2 {
        return micro.E(y).col(i) * qvalue(m, e, q, out.W[j]);
      };
      Eigen::VectorXd b = ws.assemble(load);
      out.Q2[static_cast<size_t>(i) * d + j] =
          ws.solve_mean_zero(std::move(b), hole_fraction * in.Estar(i, j), in.defect_tol, true);
    }
}

CellFunctions solve_cell_functions(const Mesh& cell, const CoefficientSet& coeffs,
                                   const MacroPoint& at, SolveOptions opts,
                                   EffectiveTensors* tensors_out) {
  CellFunctions cf;
  cf.at = at;
  cf.N = coeffs.N;

  auto Efun = [&](const Vec2& y) { return coeffs.evalE(at.t, at.x, y); };
  CellWorkspace ws(cell, Efun, opts);
  cf.W = solve_W(ws, coeffs, at);
  cf.Z = solve_Z(ws, coeffs, at);

  EffectiveTensors eff = compute_effective(cell, coeffs, at, cf.W, cf.Z);

  SecondOrderInputs in;
  in.N = coeffs.N;
  in.Estar = eff.Estar;
  in.Dstar = eff.Dstar;
  in.Mbar = eff.Mbar;
  in.Kbar = eff.Kbar;
  in.Hbar = eff.Hbar;
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) in.dDstar[j][i] = Eigen::MatrixXd::Zero(coeffs.N, coeffs.N);

  if (coeffs.micro_x_dependent()) {
    // x-derivatives of the first-order solves and effective tensors by
    // central differences of the whole solve
    SolveOptions tight = opts;
    tight.tol = std::min(opts.tol, 1e-12);
    std::array<std::vector<Eigen::VectorXd>, 2> dW, dZ;
    for (int j = 0; j < 2; ++j) {
      MacroPoint plus = at, minus = at;
      plus.x[j] += kResolveFdStep;
      minus.x[j] -= kResolveFdStep;
      auto Ep = [&](const Vec2& y) { return coeffs.evalE(plus.t, plus.x, y); };
      auto Em = [&](const Vec2& y) { return coeffs.evalE(minus.t, minus.x, y); };
      CellWorkspace wp(cell, Ep, tight), wm(cell, Em, tight);
      auto Wp = solve_W(wp, coeffs, plus), Wm = solve_W(wm, coeffs, minus);
      auto Zp = solve_Z(wp, coeffs, plus), Zm = solve_Z(wm, coeffs, minus);
      EffectiveTensors ep = compute_effective(cell, coeffs, plus, Wp, Zp);
      EffectiveTensors em = compute_effective(cell, coeffs, minus, Wm, Zm);
      dW[j].resize(Wp.size());
      for (size_t k = 0; k < Wp.size(); ++k) dW[j][k] = (Wp[k] - Wm[k]) / (2 * kResolveFdStep);
      dZ[j].resize(Zp.size());
      for (size_t k = 0; k < Zp.size(); ++k) dZ[j][k] = (Zp[k] - Zm[k]) / (2 * kResolveFdStep);
      in.dEstar[j] = (ep.Estar - em.Estar) / (2 * kResolveFdStep);
      for (int i = 0; i < 2; ++i)
        in.dDstar[j][i] = (ep.Dstar[i] - em.Dstar[i]) / (2 * kResolveFdStep);
    }
    in.dW = std::move(dW);
    in.dZ = std::move(dZ);
    in.defect_tol = 1e-4 * (1.0 + in.Hbar.cwiseAbs().maxCoeff() + in.Mbar.cwiseAbs().maxCoeff() +
                            in.Estar.cwiseAbs().maxCoeff());
  } else {
    double scale = 1.0 + in.Hbar.cwiseAbs().maxCoeff() + in.Mbar.cwiseAbs().maxCoeff() +
                   in.Kbar.cwiseAbs().maxCoeff() + in.Estar.cwiseAbs().maxCoeff();
    in.defect_tol = 1e-6 * scale;
  }

  solve_second_order(ws, coeffs, at, in, cf);
  if (tensors_out) *tensors_out = eff;
  return cf;
}

}  // namespace homog
