#include <cmath>
#include <map>

#include "doctest.h"
#include "homog/cell.hpp"
#include "homog/common.hpp"
#include "homog/tensors.hpp"

using namespace homog;

namespace {

CellSpec disk_spec(int res, double r = 0.25) {
  CellSpec s;
  s.hole_shape = HoleShape::disk;
  s.hole_radius = r;
  s.resolution = res;
  return s;
}
CellSpec plain_spec(int res) {
  CellSpec s;
  s.hole_shape = HoleShape::none;
  s.resolution = res;
  return s;
}

CoefficientSet scalar_set(const std::string& E11, const std::string& E22) {
  CoefficientSet c = CoefficientSet::zero(1);
  c.M = TensorExpr::identity(1);
  c.E.at(0, 0) = Expr::parse(E11);
  c.E.at(1, 1) = Expr::parse(E22);
  return c;
}

double mean_over_cell(const Mesh& m, const Eigen::VectorXd& f) {
  return integrate(m, f) / m.total_area();
}

}  // namespace

TEST_CASE("generic cell problem: zero data gives the zero solution") {
  Mesh m = build_cell_mesh(disk_spec(16));
  CellProblem cp;
  cp.mesh = &m;
  Eigen::VectorXd w = solve_generic(cp);
  CHECK(w.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("generic cell problem recovers a periodic eigenfunction") {
  Mesh m = build_cell_mesh(plain_spec(32));
  CellProblem cp;
  cp.mesh = &m;
  cp.F = [](const Vec2& y) {
    return 4 * M_PI * M_PI * std::sin(2 * M_PI * y.x());
  };
  CellSolveReport rep;
  Eigen::VectorXd w = solve_generic(cp, {}, &rep, 7);
  double err = 0;
  for (int i = 0; i < m.n_nodes(); ++i)
    err = std::max(err, std::abs(w[i] - std::sin(2 * M_PI * m.nodes[i].x())));
  CHECK(err < 0.02);  // second-order accurate interpolation of the eigenfunction
  CHECK(rep.weak_residual < 1e-8);
  CHECK(std::abs(rep.defect) < 1e-10);
}

TEST_CASE("incompatible data is rejected with both integrals") {
  Mesh m = build_cell_mesh(disk_spec(16));
  CellProblem cp;
  cp.mesh = &m;
  cp.F = [](const Vec2&) { return 1.0; };  // integral |Y*| != 0 = boundary integral
  CHECK_THROWS_WITH_AS(solve_generic(cp), doctest::Contains("incompatible"), Error);
}

TEST_CASE("W vanishes for constant E") {
  for (auto spec : {plain_spec(8)}) {
    Mesh m = build_cell_mesh(spec);
    CoefficientSet c = scalar_set("2", "1");  // constant diag(2,1)
    CellWorkspace ws(m, [&](const Vec2& y) { return c.evalE(0, Vec2(0, 0), y); });
    auto W = solve_W(ws, c, {});
    CHECK(W[0].cwiseAbs().maxCoeff() < 1e-10);
    CHECK(W[1].cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("W on the perforated cell: nonzero, mean-zero, periodic, symmetric") {
  Mesh m = build_cell_mesh(disk_spec(32));
  CoefficientSet c = scalar_set("1", "1");
  CellWorkspace ws(m, [&](const Vec2& y) { return c.evalE(0, Vec2(0, 0), y); });
  auto W = solve_W(ws, c, {});

  CHECK(W[0].cwiseAbs().maxCoeff() > 1e-3);
  CHECK(std::abs(mean_over_cell(m, W[0])) < 1e-9);
  CHECK(std::abs(mean_over_cell(m, W[1])) < 1e-9);

  // paired periodic nodes carry equal values
  for (int i = 0; i < m.n_nodes(); ++i)
    if (m.periodic_master[i] >= 0) {
      CHECK(W[0][i] == doctest::Approx(W[0][m.periodic_master[i]]).epsilon(1e-12));
    }

  // reflection symmetry across the diagonal: W_1(y1,y2) = W_2(y2,y1).
  // The structured mesh maps onto itself under the swap, so the discrete
  // problems are identical up to renumbering.
  std::map<std::pair<long long, long long>, int> index;
  for (int i = 0; i < m.n_nodes(); ++i)
    index[{std::llround(m.nodes[i].x() * 1e9), std::llround(m.nodes[i].y() * 1e9)}] = i;
  double worst = 0;
  for (int i = 0; i < m.n_nodes(); ++i) {
    auto it = index.find({std::llround(m.nodes[i].y() * 1e9), std::llround(m.nodes[i].x() * 1e9)});
    REQUIRE(it != index.end());
    worst = std::max(worst, std::abs(W[0][i] - W[1][it->second]));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("Z behavior mirrors the drift data") {
  SUBCASE("D = 0 gives Z = 0") {
    Mesh m = build_cell_mesh(disk_spec(16));
    CoefficientSet c = scalar_set("1", "1");
    CellWorkspace ws(m, [&](const Vec2& y) { return c.evalE(0, Vec2(0, 0), y); });
    auto Z = solve_Z(ws, c, {});
    CHECK(Z[0].cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("constant D, no hole: Z = 0") {
    Mesh m = build_cell_mesh(plain_spec(8));
    CoefficientSet c = scalar_set("1", "1");
    c.D[0].at(0, 0) = Expr::constant(0.3);
    CellWorkspace ws(m, [&](const Vec2& y) { return c.evalE(0, Vec2(0, 0), y); });
    auto Z = solve_Z(ws, c, {});
    CHECK(Z[0].cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("constant D with a hole: nonzero and mean-zero") {
    Mesh m = build_cell_mesh(disk_spec(32));
    CoefficientSet c = scalar_set("1", "1");
    c.D[0].at(0, 0) = Expr::constant(0.3);
    CellWorkspace ws(m, [&](const Vec2& y) { return c.evalE(0, Vec2(0, 0), y); });
    auto Z = solve_Z(ws, c, {});
    CHECK(Z[0].cwiseAbs().maxCoeff() > 1e-4);
    CHECK(std::abs(mean_over_cell(m, Z[0])) < 1e-9);
  }
}

TEST_CASE("first-order duality identity holds at the discrete level") {
  // symmetric y-dependent E and constant D on the perforated cell
  Mesh m = build_cell_mesh(disk_spec(32));
  CoefficientSet c = scalar_set("1 + 0.5*sin(2*pi*y1)", "1 + 0.5*sin(2*pi*y1)");
  c.D[0].at(0, 0) = Expr::constant(0.4);
  c.D[1].at(0, 0) = Expr::constant(-0.2);
  MacroPoint at;
  CellWorkspace ws(m, [&](const Vec2& y) { return c.evalE(0, at.x, y); });
  auto W = solve_W(ws, c, at);
  auto Z = solve_Z(ws, c, at);

  Eigen::MatrixXd lhs, rhs;
  wd_identity(m, c, at, W, Z, lhs, rhs);
  // Galerkin + shared quadrature make the identity hold to solver accuracy
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("second-order cell functions: degenerate cascades") {
  MacroPoint at;
  SUBCASE("constant data on the perforated cell") {
    Mesh m = build_cell_mesh(disk_spec(16));
    CoefficientSet c = scalar_set("1", "1");
    c.H[0] = Expr::constant(2.0);   // constant H -> P = 0
    c.K.at(0, 0) = Expr::constant(0.7);  // constant K -> R0 = 0
    EffectiveTensors eff;
    CellFunctions cf = solve_cell_functions(m, c, at, {}, &eff);
    CHECK(cf.P[0].cwiseAbs().maxCoeff() < 1e-10);
    CHECK(cf.R0[0].cwiseAbs().maxCoeff() < 1e-10);
    CHECK(cf.Q0[0].cwiseAbs().maxCoeff() < 1e-10);  // M constant, D = 0
    CHECK(cf.Q1[0].cwiseAbs().maxCoeff() < 1e-10);  // D = 0, x-constant E
    CHECK(cf.R1[0].cwiseAbs().maxCoeff() == 0.0);
    // Q2 does not vanish on the perforated cell
    CHECK(cf.Q2[0].cwiseAbs().maxCoeff() > 1e-3);
    for (const auto& f : cf.Q2) CHECK(std::abs(mean_over_cell(m, f)) < 1e-9);
  }
  SUBCASE("unperforated with constant coefficients: everything vanishes") {
    Mesh m = build_cell_mesh(plain_spec(8));
    CoefficientSet c = scalar_set("1", "1");
    c.H[0] = Expr::constant(1.0);
    CellFunctions cf = solve_cell_functions(m, c, at, {});
    for (const auto& fam : {cf.W, cf.Z, cf.P, cf.Q0, cf.R0, cf.Q1, cf.Q2})
      for (const auto& f : fam) CHECK(f.cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("upstream inconsistency is caught by the compatibility check") {
  Mesh m = build_cell_mesh(disk_spec(16));
  CoefficientSet c = scalar_set("1", "1");
  MacroPoint at;
  CellWorkspace ws(m, [&](const Vec2& y) { return c.evalE(0, at.x, y); });
  CellFunctions cf;
  cf.N = 1;
  cf.W = solve_W(ws, c, at);
  cf.Z = solve_Z(ws, c, at);
  EffectiveTensors eff = compute_effective(m, c, at, cf.W, cf.Z);

  SecondOrderInputs in;
  in.N = 1;
  in.Estar = eff.Estar;
  in.Dstar = eff.Dstar;
  in.Mbar = eff.Mbar;
  in.Kbar = eff.Kbar;
  in.Hbar = eff.Hbar;
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) in.dDstar[j][i] = Eigen::MatrixXd::Zero(1, 1);
  in.defect_tol = 1e-6;

  SUBCASE("consistent inputs pass") { solve_second_order(ws, c, at, in, cf); }
  SUBCASE("porosity-scaled E* (a wrong effective tensor) is refused") {
    in.Estar = m.total_area() * Eigen::Matrix2d::Identity();
    CHECK_THROWS_WITH_AS(solve_second_order(ws, c, at, in, cf),
                         doctest::Contains("compatibility"), Error);
  }
}

TEST_CASE("x-dependent micro coefficients: full second-order pipeline") {
  // smooth x-dependence in E; compatibility of every subproblem is the
  // correctness signal for the finite-difference derivative terms
  Mesh m = build_cell_mesh(disk_spec(8, 0.2));
  CoefficientSet c = scalar_set("1 + 0.25*sin(2*pi*x1) + 0.25*cos(2*pi*y1)",
                                "1 + 0.25*sin(2*pi*x1) + 0.25*cos(2*pi*y1)");
  c.H[0] = Expr::parse("1 + x1");
  MacroPoint at{0.0, Vec2(0.3, 0.6)};
  CellFunctions cf = solve_cell_functions(m, c, at, {});
  for (const auto& fam : {cf.W, cf.P, cf.Q0, cf.Q1, cf.Q2})
    for (const auto& f : fam) {
      CHECK(f.allFinite());
      CHECK(std::abs(mean_over_cell(m, f)) < 1e-8);
    }
}
