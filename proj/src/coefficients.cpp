#include "homog/coefficients.hpp"

#include <cmath>
#include <sstream>

#include "homog/common.hpp"

namespace homog {

TensorExpr TensorExpr::identity(int n) {
  TensorExpr t(n, n);
  for (int i = 0; i < n; ++i) t.at(i, i) = Expr::constant(1.0);
  return t;
}

TensorExpr TensorExpr::constant(const Eigen::MatrixXd& m) {
  TensorExpr t(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int r = 0; r < t.rows; ++r)
    for (int c = 0; c < t.cols; ++c) t.at(r, c) = Expr::constant(m(r, c));
  return t;
}

Eigen::MatrixXd TensorExpr::eval(const EvalPoint& p) const {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = at(r, c).eval(p);
  return m;
}

std::uint32_t TensorExpr::var_mask() const {
  std::uint32_t m = 0;
  for (const Expr& e : entries) m |= e.var_mask();
  return m;
}

CoefficientSet CoefficientSet::zero(int N) {
  CoefficientSet c;
  c.N = N;
  c.M = TensorExpr(N, N);
  c.E = TensorExpr(d, d);
  c.D = {TensorExpr(N, N), TensorExpr(N, N)};
  c.H.assign(N, Expr::constant(0.0));
  c.K = TensorExpr(N, N);
  c.J = {TensorExpr(N, N), TensorExpr(N, N)};
  c.L = TensorExpr(N, N);
  c.G = TensorExpr(N, N);
  c.Ustar.assign(N, Expr::constant(0.0));
  return c;
}

EvalPoint CoefficientSet::point(double t, const Vec2& x, const Vec2& y) const {
  return EvalPoint{t, x.x(), x.y(), y.x(), y.y()};
}

Eigen::MatrixXd CoefficientSet::evalM(double t, const Vec2& x, const Vec2& y) const {
  return M.eval(point(t, x, y));
}
Eigen::Matrix2d CoefficientSet::evalE(double t, const Vec2& x, const Vec2& y) const {
  return E.eval(point(t, x, y));
}
Eigen::MatrixXd CoefficientSet::evalD(int i, double t, const Vec2& x, const Vec2& y) const {
  return D[i].eval(point(t, x, y));
}
Eigen::VectorXd CoefficientSet::evalH(double t, const Vec2& x, const Vec2& y) const {
  EvalPoint p = point(t, x, y);
  Eigen::VectorXd v(N);
  for (int a = 0; a < N; ++a) v[a] = H[a].eval(p);
  return v;
}
Eigen::MatrixXd CoefficientSet::evalK(double t, const Vec2& x, const Vec2& y) const {
  return K.eval(point(t, x, y));
}
Eigen::MatrixXd CoefficientSet::evalJ(int i, double t, const Vec2& x, const Vec2& y) const {
  return J[i].eval(point(t, x, y));
}
Eigen::MatrixXd CoefficientSet::evalL(double t, const Vec2& x) const {
  return L.eval(point(t, x, Vec2::Zero()));
}
Eigen::MatrixXd CoefficientSet::evalG(double t, const Vec2& x) const {
  return G.eval(point(t, x, Vec2::Zero()));
}
Eigen::VectorXd CoefficientSet::evalUstar(const Vec2& x) const {
  EvalPoint p = point(0, x, Vec2::Zero());
  Eigen::VectorXd v(N);
  for (int a = 0; a < N; ++a) v[a] = Ustar[a].eval(p);
  return v;
}

std::uint32_t CoefficientSet::var_mask() const {
  std::uint32_t m = M.var_mask() | E.var_mask() | K.var_mask() | L.var_mask() | G.var_mask();
  for (int i = 0; i < d; ++i) m |= D[i].var_mask() | J[i].var_mask();
  for (const Expr& e : H) m |= e.var_mask();
  for (const Expr& e : Ustar) m |= e.var_mask();
  return m;
}

bool CoefficientSet::time_dependent() const {
  return (var_mask() >> static_cast<int>(Var::t)) & 1u;
}

bool CoefficientSet::micro_x_dependent() const {
  std::uint32_t m = E.var_mask() | D[0].var_mask() | D[1].var_mask();
  return m & ((1u << static_cast<int>(Var::x1)) | (1u << static_cast<int>(Var::x2)));
}

bool CoefficientSet::micro_t_dependent() const {
  std::uint32_t m = E.var_mask() | D[0].var_mask() | D[1].var_mask();
  return m & (1u << static_cast<int>(Var::t));
}

namespace {

// Sample extrema of an expression over an axis-reduced tensor grid: only
// the axes the expression actually references are iterated, so constant
// entries cost a single evaluation.
struct Extrema {
  double min = 1e300, max = -1e300;
  bool finite = true;
};

Extrema sample_extrema(const Expr& e, const SampleGrid& g) {
  Extrema out;
  int nt = e.uses(Var::t) ? g.nt : 1;
  int nx1 = e.uses(Var::x1) ? g.nx : 1;
  int nx2 = e.uses(Var::x2) ? g.nx : 1;
  int ny1 = e.uses(Var::y1) ? g.ny : 1;
  int ny2 = e.uses(Var::y2) ? g.ny : 1;
  auto coord = [](int k, int n) { return n == 1 ? 0.0 : static_cast<double>(k) / (n - 1); };
  for (int it = 0; it < nt; ++it)
    for (int i1 = 0; i1 < nx1; ++i1)
      for (int i2 = 0; i2 < nx2; ++i2)
        for (int j1 = 0; j1 < ny1; ++j1)
          for (int j2 = 0; j2 < ny2; ++j2) {
            EvalPoint p{coord(it, nt) * g.T, coord(i1, nx1), coord(i2, nx2), coord(j1, ny1),
                        coord(j2, ny2)};
            double v = e.eval(p);
            if (!std::isfinite(v)) {
              out.finite = false;
              continue;
            }
            out.min = std::min(out.min, v);
            out.max = std::max(out.max, v);
          }
  return out;
}

double sup_abs(const Expr& e, const SampleGrid& g, bool* finite) {
  Extrema ex = sample_extrema(e, g);
  if (!ex.finite && finite) *finite = false;
  if (ex.max < ex.min) return 0;
  return std::max(std::abs(ex.min), std::abs(ex.max));
}

// Continuity across the periodic seam: with the modulo-1 evaluation
// convention f(y) == f(y+1) identically, so aperiodic usage shows up as a
// jump between y -> 1^- and y = 0.
bool seam_continuous(const Expr& e, const SampleGrid& g) {
  if (!e.uses_any_y()) return true;
  const double lo = 1e-9;
  double scale = 1.0;
  for (int k = 0; k < g.ny; ++k) {
    double s = static_cast<double>(k) / (g.ny - 1);
    EvalPoint a{0.5 * g.T, 0.3, 0.7, 1.0 - lo, s};
    EvalPoint b{0.5 * g.T, 0.3, 0.7, 0.0, s};
    scale = std::max({scale, std::abs(e.eval(a)), std::abs(e.eval(b))});
    if (std::abs(e.eval(a) - e.eval(b)) > 1e-6 * scale) return false;
    EvalPoint c{0.5 * g.T, 0.3, 0.7, s, 1.0 - lo};
    EvalPoint d{0.5 * g.T, 0.3, 0.7, s, 0.0};
    if (std::abs(e.eval(c) - e.eval(d)) > 1e-6 * scale) return false;
  }
  return true;
}

}  // namespace

ValidationReport validate_assumptions(const CoefficientSet& c, const SampleGrid& g) {
  ValidationReport rep;
  const int N = c.N, d = CoefficientSet::d;
  std::ostringstream detail;

  // (A2): sampled positivity of the diagonal parts of M and E, and the
  // reciprocal-norm constants m_alpha = inf M_alpha, e_i = inf E_i.
  rep.m_alpha.resize(N);
  rep.min_M_diag = 1e300;
  for (int a = 0; a < N; ++a) {
    Extrema ex = sample_extrema(c.M.at(a, a), g);
    rep.finite &= ex.finite;
    rep.m_alpha[a] = ex.min;
    rep.min_M_diag = std::min(rep.min_M_diag, ex.min);
  }
  rep.e_i.resize(d);
  rep.min_E_diag = 1e300;
  for (int i = 0; i < d; ++i) {
    Extrema ex = sample_extrema(c.E.at(i, i), g);
    rep.finite &= ex.finite;
    rep.e_i[i] = ex.min;
    rep.min_E_diag = std::min(rep.min_E_diag, ex.min);
  }
  rep.a2_ok = rep.min_M_diag > 0 && rep.min_E_diag > 0;
  if (!rep.a2_ok)
    detail << "diagonal positivity failed: min diag(M) = " << fmt_g(rep.min_M_diag)
           << ", min diag(E) = " << fmt_g(rep.min_E_diag) << "\n";

  // (A3): strict drift-smallness inequality per (i, beta, alpha).
  bool a3_ok = true;
  for (int i = 0; i < d; ++i)
    for (int b = 0; b < N; ++b)
      for (int a = 0; a < N; ++a) {
        ValidationReport::A3Entry ent;
        ent.i = i;
        ent.beta = b;
        ent.alpha = a;
        ent.D_sup = sup_abs(c.D[i].at(b, a), g, &rep.finite);
        ent.bound = 4.0 * rep.m_alpha[a] * rep.e_i[i] / (d * double(N) * N);
        ent.ok = ent.D_sup * ent.D_sup < ent.bound;
        a3_ok &= ent.ok;
        if (!ent.ok)
          detail << "A3 violated at (i=" << i + 1 << ", beta=" << b + 1 << ", alpha=" << a + 1
                 << "): sup|D|^2 = " << fmt_g(ent.D_sup * ent.D_sup)
                 << " >= " << fmt_g(ent.bound) << "\n";
        rep.a3.push_back(ent);
      }

  // regularity classes: L, G, Ustar live on Omega only
  std::uint32_t ymask =
      (1u << static_cast<int>(Var::y1)) | (1u << static_cast<int>(Var::y2));
  std::uint32_t lg = c.L.var_mask() | c.G.var_mask();
  for (const Expr& e : c.Ustar) lg |= e.var_mask();
  rep.LG_y_independent = (lg & ymask) == 0;
  if (!rep.LG_y_independent) detail << "L, G or U* references cell variables y\n";

  // y-periodicity of the micro coefficients (continuity across the seam)
  rep.y_periodic = true;
  auto check_tensor = [&](const TensorExpr& t, const char* name) {
    for (const Expr& e : t.entries)
      if (!seam_continuous(e, g)) {
        rep.y_periodic = false;
        detail << name << " is discontinuous across the periodic seam in y\n";
        return;
      }
  };
  check_tensor(c.M, "M");
  check_tensor(c.E, "E");
  check_tensor(c.K, "K");
  for (int i = 0; i < d; ++i) {
    check_tensor(c.D[i], "D");
    check_tensor(c.J[i], "J");
  }
  for (const Expr& e : c.H)
    if (!seam_continuous(e, g)) {
      rep.y_periodic = false;
      detail << "H is discontinuous across the periodic seam in y\n";
      break;
    }

  if (!rep.finite) detail << "non-finite coefficient evaluations encountered\n";
  rep.pass = rep.a2_ok && a3_ok && rep.LG_y_independent && rep.y_periodic && rep.finite;
  rep.detail = detail.str();
  return rep;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << ": A2 " << (a2_ok ? "ok" : "FAIL") << ", A3 ";
  int bad = 0;
  for (const auto& e : a3) bad += !e.ok;
  os << (bad == 0 ? "ok" : std::to_string(bad) + " violations") << ", L/G/U* y-independence "
     << (LG_y_independent ? "ok" : "FAIL") << ", y-periodicity " << (y_periodic ? "ok" : "FAIL");
  if (!detail.empty()) os << "\n" << detail;
  return os.str();
}

void CorrosionParams::validate() const {
  if (std::abs(phi.sum() - 1.0) > 1e-12)
    config_error("volume fractions must sum to 1 (got " + fmt_g(phi.sum()) + ")");
  for (int k = 0; k < 3; ++k)
    if (!(phi[k] > 0)) config_error("volume fractions must be positive");
  if (!(gamma1 < 0 && gamma2 < 0)) config_error("gamma1 and gamma2 must be negative");
  // the determinant of the friction block is (gamma1^2 - gamma2^2) phi3,
  // so invertibility with positive sign needs |gamma1| > |gamma2|
  if (!(std::abs(gamma1) > std::abs(gamma2)))
    config_error("|gamma1| > |gamma2| is required for an invertible friction block");
}

CorrosionMatrices corrosion_matrices(const CorrosionParams& p) {
  p.validate();
  const double phi1 = p.phi[0], phi2 = p.phi[1], phi3 = p.phi[2];

  CorrosionMatrices out;
  out.Mtilde << p.chi[0] * (phi1 + phi3) / phi3, p.chi[0] * phi2 / phi3,
      p.chi[1] * phi1 / phi3, p.chi[1] * (phi2 + phi3) / phi3;
  out.F << p.mu[0] * (phi2 + phi3), -p.mu[1] * phi1,
      -p.mu[0] * phi2, p.mu[1] * (phi1 + phi3);

  // friction matrix gamma_{ab}: gamma's 2x2 block with gamma_{3b} = 0
  Eigen::Matrix2d gamma;
  gamma << p.gamma1, p.gamma2, p.gamma2, p.gamma1;
  double colsum[2] = {p.gamma1 + p.gamma2, p.gamma1 + p.gamma2};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) out.Gtilde(a, b) = -gamma(a, b) + p.phi[a] * colsum[b];

  out.detG = out.Gtilde.determinant();
  double expected = (p.gamma1 * p.gamma1 - p.gamma2 * p.gamma2) * phi3;
  if (std::abs(out.detG - expected) > 1e-10 * std::max(1.0, std::abs(expected)))
    numeric_error("corrosion preset: determinant check failed (" + fmt_g(out.detG) + " vs " +
                  fmt_g(expected) + ")");
  if (std::abs(out.detG) < 1e-14)
    config_error("corrosion preset: friction matrix is singular (phi3 = 0 or gamma1 = gamma2)");
  out.Ginv = out.Gtilde.inverse();
  return out;
}

CoefficientSet corrosion_preset(const CorrosionParams& p) {
  CorrosionMatrices mats = corrosion_matrices(p);

  Eigen::Matrix2d Mmat = mats.Mtilde * mats.Ginv;
  Eigen::Matrix2d Lmat = mats.Ginv * mats.F;
  Eigen::Matrix2d Gmat = mats.Ginv;
  Eigen::Matrix2d Kmat = -mats.Mtilde * mats.Ginv * mats.F;

  // positive definiteness of M via the symmetric-part eigenvalues
  Eigen::Matrix2d Msym = 0.5 * (Mmat + Mmat.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(Msym);
  if (es.eigenvalues().minCoeff() <= 0)
    numeric_error("corrosion preset: M is not positive definite (min eigenvalue " +
                  fmt_g(es.eigenvalues().minCoeff()) + ")");

  CoefficientSet c = CoefficientSet::zero(2);
  c.M = TensorExpr::constant(Mmat);
  c.E = TensorExpr::identity(2);
  c.K = TensorExpr::constant(Kmat);
  c.L = TensorExpr::constant(Lmat);
  c.G = TensorExpr::constant(Gmat);
  double ksum = p.kappa_rates.sum();
  for (int a = 0; a < 2; ++a)
    c.H[a] = Expr::constant(p.chi[a] / p.phi[2] * p.F_value * ksum);
  return c;
}

}  // namespace homog
