#include <cmath>

#include "doctest.h"
#include "homog/common.hpp"
#include "homog/corrector.hpp"
#include "homog/fem.hpp"

using namespace homog;

namespace {

CellSpec plain_spec(int res) {
  CellSpec s;
  s.hole_shape = HoleShape::none;
  s.resolution = res;
  return s;
}
CellSpec disk_spec(int res, double r = 0.25) {
  CellSpec s;
  s.hole_shape = HoleShape::disk;
  s.hole_radius = r;
  s.resolution = res;
  return s;
}
CoefficientSet scalar_base() {
  CoefficientSet c = CoefficientSet::zero(1);
  c.M = TensorExpr::identity(1);
  c.E = TensorExpr::identity(2);
  return c;
}
Mesh domain_mesh(double eps, const CellSpec& cell) {
  DomainSpec d;
  d.epsilon = eps;
  return build_perforated_domain_mesh(d, cell);
}

}  // namespace

TEST_CASE("cutoff ramp values") {
  Mesh m = domain_mesh(0.1, plain_spec(2));  // 20x20 grid: nodes at multiples of 0.05
  CutoffField f = build_cutoff(m, 0.1);
  for (int i = 0; i < m.n_nodes(); ++i) {
    const Vec2& p = m.nodes[i];
    double d = std::min(std::min(p.x(), 1 - p.x()), std::min(p.y(), 1 - p.y()));
    if ((p - Vec2(0.5, 0.5)).norm() < 1e-12) CHECK(f.values[i] == 1.0);
    if (std::abs(d - 0.15) < 1e-12) CHECK(f.values[i] == doctest::Approx(0.5));
    if (d <= 0.1 + 1e-12) CHECK(f.values[i] == 0.0);
    if (d >= 0.2 - 1e-12) CHECK(f.values[i] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("cutoff gradient scale is epsilon-uniform") {
  std::vector<double> grads;
  for (double eps : {0.25, 0.125, 0.0625}) {
    Mesh m = domain_mesh(eps, plain_spec(8));
    grads.push_back(build_cutoff(m, eps).max_eps_grad);
  }
  for (double g : grads) CHECK(g == doctest::Approx(grads[0]).epsilon(0.1));
}

TEST_CASE("cutoff rejects a mask that would vanish everywhere") {
  Mesh m = domain_mesh(0.5, plain_spec(8));
  CHECK_THROWS_AS(build_cutoff(m, 0.5), Error);        // eps at the inradius
  CHECK_THROWS_AS(build_cutoff(m, 0.25, 2.01), Error); // multiplier pushes past it
  CHECK_NOTHROW(build_cutoff(m, 0.25));                // the coarsest sweep point is legal
}

TEST_CASE("error norms") {
  Mesh m = domain_mesh(1.0, plain_spec(8));
  int n = m.n_nodes();
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  SUBCASE("identical fields") {
    ErrorNorms en = error_norms(m, 1, zero, zero, zero, zero);
    CHECK(en.phi_semi == 0.0);
    CHECK(en.psi_h1 == 0.0);
  }
  SUBCASE("unit-gradient difference on the unperforated square") {
    Eigen::VectorXd lin(n);
    for (int i = 0; i < n; ++i) lin[i] = m.nodes[i].x();
    ErrorNorms en = error_norms(m, 1, lin, zero, zero, zero);
    CHECK(en.phi_semi == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("hand quadrature of a known linear difference") {
    Eigen::VectorXd lin(n);
    for (int i = 0; i < n; ++i) lin[i] = 2 * m.nodes[i].x() - m.nodes[i].y();
    ErrorNorms en = error_norms(m, 1, zero, lin, zero, zero);
    // ||u||_L2^2 = int (2x - y)^2 = 4/3 - 1 + 1/3 + ... evaluate directly: 1
    double l2sq = 4.0 / 3 - 1.0 + 1.0 / 3;
    CHECK(en.psi_l2 == doctest::Approx(std::sqrt(l2sq)).epsilon(1e-12));
    CHECK(en.psi_h1 == doctest::Approx(std::sqrt(l2sq + 5.0)).epsilon(1e-12));
  }
  SUBCASE("size mismatch is rejected") {
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(error_norms(m, 1, bad, zero, zero, zero), Error);
  }
}

TEST_CASE("oscillation lemma quadratures") {
  SUBCASE("x-only integrand matches the target to quadrature accuracy") {
    Expr f = Expr::parse("x1*x1 + x2");
    auto rows = oscillation_check(f, {0.5, 0.25, 0.125});
    for (const auto& r : rows) CHECK(r.difference < 1e-12);
  }
  SUBCASE("pure oscillation at aligned eps integrates to zero") {
    Expr f = Expr::parse("sin(2*pi*y1)");
    auto rows = oscillation_check(f, {1.0 / 8, 1.0 / 16, 1.0 / 32});
    for (const auto& r : rows) {
      CHECK(std::abs(r.target) < 1e-12);
      CHECK(r.difference < 1e-10);  // exactly zero up to quadrature
    }
    OrderFit fit = fit_order({1.0 / 8, 1.0 / 16, 1.0 / 32},
                             {rows[0].difference, rows[1].difference, rows[2].difference});
    CHECK(fit.exact);  // converged below the floor: faster than any rate
  }
  SUBCASE("incommensurate eps shows the first-order decay") {
    Expr f = Expr::parse("sin(2*pi*y1)");
    std::vector<double> eps = {1 / 4.5, 1 / 8.5, 1 / 16.5, 1 / 32.5};
    auto rows = oscillation_check(f, eps);
    std::vector<double> diffs;
    for (const auto& r : rows) {
      // 1-D analytic oracle: integral of sin(2 pi x / eps) over (0,1)
      double exact = (1.0 - std::cos(2 * M_PI / r.eps)) * r.eps / (2 * M_PI);
      CHECK(r.integral == doctest::Approx(exact).epsilon(1e-9));
      diffs.push_back(r.difference);
    }
    OrderFit fit = fit_order(eps, diffs);
    REQUIRE(fit.valid);
    CHECK(fit.slope > 0.9);
  }
  SUBCASE("zero-mean in y with x modulation") {
    Expr f = Expr::parse("x1 * cos(2*pi*y2)");
    auto rows = oscillation_check(f, {1.0 / 8});
    CHECK(std::abs(rows[0].target) < 1e-12);
    CHECK(rows[0].difference < 1e-10);
  }
}

TEST_CASE("degenerate sweep: unperforated constant coefficients") {
  SweepConfig cfg;
  cfg.cell = plain_spec(4);
  cfg.cell_resolution = 8;
  cfg.fine_resolution = 4;
  cfg.eps_list = {1.0 / 4, 1.0 / 8};
  cfg.grid = TimeGrid::make(0.1, 0.05);
  cfg.coeffs = scalar_base();
  cfg.coeffs.H[0] = Expr::constant(1.0);
  cfg.coeffs.G = TensorExpr::identity(1);
  cfg.self_check = false;

  CorrectorReport rep = run_sweep(cfg);
  REQUIRE(rep.rows.size() == 2);
  for (const auto& row : rep.rows) {
    REQUIRE(row.ok);
    CHECK(row.phi < 2e-6);  // expansion reproduces the solution up to macro interpolation
    CHECK(row.phi_boundary_zero);
    CHECK(row.psi_transfer_ok);
  }
}

TEST_CASE("small perforated sweep produces a rate and honors the invariants") {
  SweepConfig cfg;
  cfg.cell = disk_spec(8);
  cfg.cell_resolution = 16;
  cfg.fine_resolution = 8;
  cfg.eps_list = {1.0 / 2, 1.0 / 4, 1.0 / 8};  // the 1/2 row must fail (cutoff empty)
  cfg.grid = TimeGrid::make(0.1, 0.02);
  cfg.coeffs = scalar_base();
  cfg.coeffs.H[0] = Expr::constant(1.0);
  cfg.coeffs.G = TensorExpr::identity(1);
  cfg.self_check = true;

  CorrectorReport rep = run_sweep(cfg);
  REQUIRE(rep.rows.size() == 3);
  CHECK(!rep.rows[0].ok);  // isolated failure, remaining rows intact
  CHECK(rep.rows[0].error.find("cutoff") != std::string::npos);
  REQUIRE(rep.rows[1].ok);
  REQUIRE(rep.rows[2].ok);
  CHECK(rep.rows[1].phi > 0);
  CHECK(rep.rows[2].phi < rep.rows[1].phi);  // decay with eps
  CHECK(rep.rows[1].phi_boundary_zero);
  CHECK(rep.rows[2].phi_boundary_zero);
  CHECK(rep.rows[2].psi_transfer_ok);
  CHECK(rep.rows[2].self_error >= 0);  // halving check ran on the smallest row

  // two successful rows: not enough for a slope
  CHECK(!rep.slope_valid);
  CHECK(rep.note.find("insufficient") != std::string::npos);
  // calibration anchors the coarsest successful row at ratio 1
  CHECK(rep.rows[1].ratio == doctest::Approx(1.0));
  CHECK(rep.rows[2].pair_rate > 0);

  // bound envelope: nondecreasing in t, bounded against sqrt(eps)
  const BoundConstants& bc = rep.constants;
  auto shape = [&](double e, double t) {
    double tl = bc.l > 0 ? std::min(1.0 / bc.l, t) : t;
    return (std::sqrt(e) + std::pow(e, 1.5)) *
           (1 + std::sqrt(e) * (1 + (bc.kappa + bc.kappa_tilde) * std::exp(bc.lambda * t)) *
                    (1 + bc.kappa * (1 + tl * std::exp(bc.l * t)))) *
           std::exp(bc.mu * tl * std::exp(bc.l * t));
  };
  for (double e : {0.25, 0.125, 0.0625}) {
    CHECK(shape(e, 0.2) >= shape(e, 0.1));           // nondecreasing in t
    CHECK(shape(e, 0.1) / std::sqrt(e) < 10.0);      // sqrt(eps) envelope stays bounded
    CHECK(shape(e, 0.1) / std::sqrt(e) > 0.1);
  }
}

TEST_CASE("x/t-dependent micro coefficients are rejected by the sweep") {
  SweepConfig cfg;
  cfg.cell = disk_spec(8);
  cfg.eps_list = {1.0 / 4};
  cfg.grid = TimeGrid::make(0.1, 0.05);
  cfg.coeffs = scalar_base();
  cfg.coeffs.E.at(0, 0) = Expr::parse("1 + 0.1*x1");
  CHECK_THROWS_AS(run_sweep(cfg), Error);
}

TEST_CASE("expansion reconstruction invariants") {
  double eps = 0.25;
  Mesh fine = domain_mesh(eps, disk_spec(8));
  Mesh cell = build_cell_mesh(disk_spec(16));
  Mesh macro = build_cell_mesh(plain_spec(16));

  CoefficientSet c = scalar_base();
  c.H[0] = Expr::constant(1.0);
  c.G = TensorExpr::identity(1);
  c.Ustar[0] = Expr::parse("x1 + x2");

  CellFunctions cf = solve_cell_functions(cell, c, {}, {});
  CutoffField cutoff = build_cutoff(fine, eps);
  ExpansionBuilder builder(fine, eps, macro, cell, cf, c, cutoff);

  // macro states: U0 = Ustar nodal, V0 arbitrary smooth field
  Eigen::VectorXd U0(macro.n_nodes()), V0(macro.n_nodes());
  for (int i = 0; i < macro.n_nodes(); ++i) {
    U0[i] = macro.nodes[i].x() + macro.nodes[i].y();
    V0[i] = std::sin(M_PI * macro.nodes[i].x()) * std::sin(M_PI * macro.nodes[i].y());
  }

  auto fields = builder.reconstruct(V0, U0, true);
  // at t = 0 the expansion reproduces the initial state exactly
  for (int i = 0; i < fine.n_nodes(); ++i)
    CHECK(fields.U_exp[i] ==
          doctest::Approx(fine.nodes[i].x() + fine.nodes[i].y()).epsilon(1e-14));
  // V_exp vanishes on the outer boundary (Dirichlet + cutoff)
  for (int v : fine.external_boundary_nodes()) CHECK(fields.V_exp[v] == 0.0);
  // correctors are nontrivial in the interior
  CHECK(fields.V1.cwiseAbs().maxCoeff() > 1e-4);
}
