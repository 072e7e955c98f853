#include "homog/tensors.hpp"

#include <cmath>
#include <ostream>

#include "homog/common.hpp"

namespace homog {

double average(const Mesh& cell, const ScalFun& f) { return integrate(cell, f); }

namespace {

inline double qval(const Mesh& m, int e, int q, const Eigen::VectorXd& nodal) {
  const auto& t = m.tris[e];
  return 0.5 * (nodal[t[q]] + nodal[t[(q + 1) % 3]]);
}

}  // namespace

Eigen::Matrix2d compute_Estar(const Mesh& cell, const CoefficientSet& coeffs,
                              const MacroPoint& at, const std::vector<Eigen::VectorXd>& W,
                              Eigen::Matrix2d* gram_form) {
  Eigen::Matrix2d direct = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d gram = Eigen::Matrix2d::Zero();
  for (int e = 0; e < cell.n_tris(); ++e) {
    auto qp = cell.quad_points(e);
    double w = cell.element_areas[e] / 3.0;
    Vec2 gW[2] = {element_gradient(cell, e, W[0]), element_gradient(cell, e, W[1])};
    for (int q = 0; q < 3; ++q) {
      Eigen::Matrix2d Ey = coeffs.evalE(at.t, at.x, qp[q]);
      Eigen::Matrix2d corr;  // corrector matrix 1 + grad_y W, column j = e_j + grad W_j
      corr.col(0) = Vec2(1, 0) + gW[0];
      corr.col(1) = Vec2(0, 1) + gW[1];
      direct += w * (Ey * corr);
      gram += w * (corr.transpose() * Ey * corr);
    }
  }
  if (gram_form) *gram_form = gram;
  return direct;
}

std::array<Eigen::MatrixXd, 2> compute_Dstar(const Mesh& cell, const CoefficientSet& coeffs,
                                             const MacroPoint& at,
                                             const std::vector<Eigen::VectorXd>& Z,
                                             const std::vector<Eigen::VectorXd>& W,
                                             std::array<Eigen::MatrixXd, 2>* alt_form) {
  const int N = coeffs.N;
  std::array<Eigen::MatrixXd, 2> direct, alt;
  for (int i = 0; i < 2; ++i) {
    direct[i] = Eigen::MatrixXd::Zero(N, N);
    alt[i] = Eigen::MatrixXd::Zero(N, N);
  }
  for (int e = 0; e < cell.n_tris(); ++e) {
    auto qp = cell.quad_points(e);
    double w = cell.element_areas[e] / 3.0;
    Vec2 gW[2] = {element_gradient(cell, e, W[0]), element_gradient(cell, e, W[1])};
    std::vector<Vec2> gZ(static_cast<size_t>(N) * N);
    for (size_t k = 0; k < gZ.size(); ++k) gZ[k] = element_gradient(cell, e, Z[k]);
    for (int q = 0; q < 3; ++q) {
      Eigen::Matrix2d Ey = coeffs.evalE(at.t, at.x, qp[q]);
      Eigen::MatrixXd Dy[2] = {coeffs.evalD(0, at.t, at.x, qp[q]),
                               coeffs.evalD(1, at.t, at.x, qp[q])};
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) {
          const Vec2& gz = gZ[static_cast<size_t>(a) * N + b];
          for (int i = 0; i < 2; ++i) {
            // direct: D + E grad_y Z
            double v = Dy[i](a, b);
            for (int k = 0; k < 2; ++k) v += Ey(i, k) * gz[k];
            direct[i](a, b) += w * v;
            // transposed corrector route: (1 + grad_y W)^T . D
            double v2 = Dy[i](a, b);
            for (int k = 0; k < 2; ++k) v2 += gW[i][k] * Dy[k](a, b);
            alt[i](a, b) += w * v2;
          }
        }
    }
  }
  if (alt_form) *alt_form = alt;
  return direct;
}

EffectiveTensors compute_effective(const Mesh& cell, const CoefficientSet& coeffs,
                                   const MacroPoint& at, const std::vector<Eigen::VectorXd>& W,
                                   const std::vector<Eigen::VectorXd>& Z) {
  EffectiveTensors eff;
  eff.porosity = cell.total_area();
  eff.Estar = compute_Estar(cell, coeffs, at, W, &eff.Estar_gram);
  eff.Estar_discrepancy = (eff.Estar - eff.Estar_gram).cwiseAbs().maxCoeff();
  eff.Dstar = compute_Dstar(cell, coeffs, at, Z, W, &eff.Dstar_alt);
  eff.Dstar_discrepancy = 0;
  for (int i = 0; i < 2; ++i)
    eff.Dstar_discrepancy =
        std::max(eff.Dstar_discrepancy, (eff.Dstar[i] - eff.Dstar_alt[i]).cwiseAbs().maxCoeff());

  const int N = coeffs.N;
  eff.Mbar = Eigen::MatrixXd::Zero(N, N);
  eff.Kbar = Eigen::MatrixXd::Zero(N, N);
  eff.Hbar = Eigen::VectorXd::Zero(N);
  for (int e = 0; e < cell.n_tris(); ++e) {
    auto qp = cell.quad_points(e);
    double w = cell.element_areas[e] / 3.0;
    for (int q = 0; q < 3; ++q) {
      eff.Mbar += w * coeffs.evalM(at.t, at.x, qp[q]);
      eff.Kbar += w * coeffs.evalK(at.t, at.x, qp[q]);
      eff.Hbar += w * coeffs.evalH(at.t, at.x, qp[q]);
    }
  }

  double scale = 1.0 + eff.Estar.cwiseAbs().maxCoeff();
  eff.consistent = eff.Estar_discrepancy < 0.05 * scale && eff.Dstar_discrepancy < 0.05 * scale;
  return eff;
}

void EffectiveTensors::require_consistent(double threshold) const {
  double scale = 1.0 + Estar.cwiseAbs().maxCoeff();
  if (Estar_discrepancy > threshold * scale || Dstar_discrepancy > threshold * scale)
    numeric_error("effective tensor cross-check failed: the two computation routes disagree (" +
                  fmt_g(Estar_discrepancy) + ", " + fmt_g(Dstar_discrepancy) + ")");
}

void wd_identity(const Mesh& cell, const CoefficientSet& coeffs, const MacroPoint& at,
                 const std::vector<Eigen::VectorXd>& W, const std::vector<Eigen::VectorXd>& Z,
                 Eigen::MatrixXd& lhs, Eigen::MatrixXd& rhs) {
  const int N = coeffs.N;
  lhs = Eigen::MatrixXd::Zero(2, N * N);
  rhs = Eigen::MatrixXd::Zero(2, N * N);
  for (int e = 0; e < cell.n_tris(); ++e) {
    auto qp = cell.quad_points(e);
    double w = cell.element_areas[e] / 3.0;
    Vec2 gW[2] = {element_gradient(cell, e, W[0]), element_gradient(cell, e, W[1])};
    for (int q = 0; q < 3; ++q) {
      Eigen::MatrixXd Dy[2] = {coeffs.evalD(0, at.t, at.x, qp[q]),
                               coeffs.evalD(1, at.t, at.x, qp[q])};
      Eigen::Matrix2d Ey = coeffs.evalE(at.t, at.x, qp[q]);
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) {
          Vec2 gz = element_gradient(cell, e, Z[static_cast<size_t>(a) * N + b]);
          for (int i = 0; i < 2; ++i) {
            double l = 0, r = 0;
            for (int k = 0; k < 2; ++k) {
              l += gW[i][k] * Dy[k](a, b);
              r += Ey(i, k) * gz[k];
            }
            lhs(i, a * N + b) += w * l;
            rhs(i, a * N + b) += w * r;
          }
        }
    }
  }
}

EffectiveTensorField::EffectiveTensorField(const Mesh& cell, const CoefficientSet& coeffs,
                                           SolveOptions opts)
    : cell_(cell), coeffs_(coeffs), opts_(opts) {
  micro_t_ = coeffs.micro_t_dependent();
  micro_x_ = coeffs.micro_x_dependent();
  std::uint32_t avg_mask = coeffs.M.var_mask() | coeffs.K.var_mask();
  for (const Expr& e : coeffs.H) avg_mask |= e.var_mask();
  avg_t_ = avg_mask & (1u << static_cast<int>(Var::t));
  avg_x_ = avg_mask & ((1u << static_cast<int>(Var::x1)) | (1u << static_cast<int>(Var::x2)));
}

EffectiveTensorField::Value EffectiveTensorField::compute(double t, const Vec2& x) const {
  MacroPoint at{t, x};
  auto Efun = [&](const Vec2& y) { return coeffs_.evalE(at.t, at.x, y); };
  CellWorkspace ws(cell_, Efun, opts_);
  auto W = solve_W(ws, coeffs_, at);
  auto Z = solve_Z(ws, coeffs_, at);
  ++n_solves_;
  EffectiveTensors eff = compute_effective(cell_, coeffs_, at, W, Z);
  eff.require_consistent(0.25);
  return Value{eff.Estar, eff.Dstar, eff.Mbar, eff.Kbar, eff.Hbar};
}

const EffectiveTensorField::Value& EffectiveTensorField::at(double t, const Vec2& x) const {
  bool tdep = micro_t_ || avg_t_;
  bool xdep = micro_x_ || avg_x_;
  std::array<long long, 3> key{tdep ? std::llround(t * 1e12) : 0,
                               xdep ? std::llround(x.x() * 1e12) : 0,
                               xdep ? std::llround(x.y() * 1e12) : 0};
  for (const auto& kv : cache_)
    if (kv.first == key) return kv.second;
  cache_.emplace_back(key, compute(t, xdep ? x : Vec2(0.5, 0.5)));
  return cache_.back().second;
}

void write_effective_csv(std::ostream& out, const std::vector<MacroPoint>& points,
                         const std::vector<EffectiveTensorField::Value>& values, int N) {
  out << "t,x1,x2";
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out << ",Estar" << i + 1 << j + 1;
  for (int i = 0; i < 2; ++i)
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) out << ",Dstar" << i + 1 << "." << a + 1 << b + 1;
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) out << ",Mbar" << a + 1 << b + 1;
  for (int a = 0; a < N; ++a) out << ",Hbar" << a + 1;
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) out << ",Kbar" << a + 1 << b + 1;
  out << "\n";
  for (size_t r = 0; r < points.size(); ++r) {
    const auto& v = values[r];
    out << fmt_g(points[r].t) << "," << fmt_g(points[r].x.x()) << "," << fmt_g(points[r].x.y());
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) out << "," << fmt_g(v.Estar(i, j));
    for (int i = 0; i < 2; ++i)
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) out << "," << fmt_g(v.Dstar[i](a, b));
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) out << "," << fmt_g(v.Mbar(a, b));
    for (int a = 0; a < N; ++a) out << "," << fmt_g(v.Hbar[a]);
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) out << "," << fmt_g(v.Kbar(a, b));
    out << "\n";
  }
}

}  // namespace homog
