#include <cmath>

#include "doctest.h"
#include "homog/common.hpp"
#include "homog/constants.hpp"

using namespace homog;

namespace {
CoefficientSet base_set(int N) {
  CoefficientSet c = CoefficientSet::zero(N);
  c.M = TensorExpr::identity(N);
  c.E = TensorExpr::identity(2);
  return c;
}
}  // namespace

TEST_CASE("sampled norms: identity L has L_min = -1") {
  CoefficientSet c = base_set(2);
  c.L = TensorExpr::identity(2);
  NormBundle n = sample_norms(c);
  CHECK(n.L_min == doctest::Approx(-1.0).epsilon(1e-12));  // -1 x smallest positive eigenvalue
  CHECK(n.L_min_full == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("sampled norms: diagonal constant G") {
  CoefficientSet c = base_set(2);
  c.G.at(0, 0) = Expr::constant(2.0);
  c.G.at(1, 1) = Expr::constant(3.0);
  NormBundle n = sample_norms(c);
  CHECK(n.G_max == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(n.grad_G_norm == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(n.G_op == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("sampled norms: reciprocal mass infimum") {
  CoefficientSet c = base_set(1);
  c.M.at(0, 0) = Expr::parse("0.25 + (1 - cos(2*pi*y1))");  // 1/M peaks at 4
  NormBundle n = sample_norms(c);
  CHECK(n.m_alpha[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("K = J = 0 collapses the growth constants") {
  CoefficientSet c = base_set(2);
  c.L = TensorExpr::identity(2);
  c.G = TensorExpr::identity(2);
  NormBundle n = sample_norms(c);
  BoundConstants bc = compute_constants(n, EtaChoices::defaults(n));
  CHECK(bc.kappa == 0.0);
  CHECK(bc.mu == 0.0);
  CHECK(bc.kappa_tilde == 0.0);
  CHECK(bc.K_tilde.maxCoeff() == 0.0);
  CHECK(bc.lambda == doctest::Approx(0.5 * bc.I));
}

TEST_CASE("D = 0 and small free weights recover the raw coercivity") {
  CoefficientSet c = base_set(2);
  NormBundle n = sample_norms(c);
  EtaChoices eta = EtaChoices::defaults(n);
  const double delta = 1e-6;
  eta.eta_H.setConstant(delta);
  eta.eta_K.setConstant(delta);
  for (int i = 0; i < 2; ++i) eta.eta_J[i].setConstant(delta);
  BoundConstants bc = compute_constants(n, eta);
  // m~_a -> m_a as the free weights vanish (D = 0 contributes nothing)
  CHECK(std::abs(bc.m_tilde[0] - n.m_alpha[0]) < 1e-4);
  CHECK(std::abs(bc.e_tilde[0] - n.e_i[0]) < 1e-12);
}

TEST_CASE("drift weight feasibility interval") {
  // N=1, d=2, M=E=1, D~=0.5: interval (dND/(2m), 2e/(ND)) = (0.5, 4)
  CoefficientSet c = base_set(1);
  c.D[0].at(0, 0) = Expr::constant(0.5);
  c.D[1].at(0, 0) = Expr::constant(0.5);
  NormBundle n = sample_norms(c);

  EtaChoices eta = EtaChoices::defaults(n);
  CHECK(eta.eta_D[0](0, 0) == doctest::Approx(std::sqrt(0.5 * 4.0)));  // geometric mean
  compute_constants(n, eta);  // interior choice accepted

  eta.eta_D[0](0, 0) = 0.4;  // below the interval
  CHECK_THROWS_WITH_AS(compute_constants(n, eta), doctest::Contains("admissible interval"),
                       Error);
  eta.eta_D[0](0, 0) = 4.1;  // above
  CHECK_THROWS_AS(compute_constants(n, eta), Error);
}

TEST_CASE("feasibility is algebraically equivalent to the drift-smallness inequality") {
  const int N = 2, d = 2;
  for (double Dt : {0.05, 0.2, 0.35, 0.5, 0.9}) {
    for (double me : {0.5, 1.0, 2.0}) {
      double lo = d * N * Dt / (2 * me);
      double hi = 2 * me / (N * Dt);
      bool interval_nonempty = lo < hi;
      bool a3 = Dt * Dt < 4 * me * me / (d * N * N);
      CHECK(interval_nonempty == a3);
    }
  }
}

TEST_CASE("scaling coherence: doubling K doubles kappa and quadruples mu") {
  CoefficientSet c = base_set(1);
  c.G = TensorExpr::identity(1);
  c.K.at(0, 0) = Expr::parse("0.5 + 0.25*sin(2*pi*y1)");
  NormBundle n1 = sample_norms(c);
  BoundConstants b1 = compute_constants(n1, EtaChoices::defaults(n1));

  CoefficientSet c2 = c;
  c2.K.at(0, 0) = Expr::parse("2*(0.5 + 0.25*sin(2*pi*y1))");
  NormBundle n2 = sample_norms(c2);
  BoundConstants b2 = compute_constants(n2, EtaChoices::defaults(n2));

  CHECK(b2.kappa == doctest::Approx(2 * b1.kappa).epsilon(1e-9));
  CHECK(b2.mu == doctest::Approx(4 * b1.mu).epsilon(1e-9));
  CHECK(b1.l >= 0);
  CHECK(b1.lambda >= 0);
}

TEST_CASE("optimizer") {
  SUBCASE("kappa = 0 returns immediately with mu = 0") {
    CoefficientSet c = base_set(1);
    c.G = TensorExpr::identity(1);
    NormBundle n = sample_norms(c);
    EtaChoices eta = optimize_eta(n, EtaObjective::min_mu);
    BoundConstants bc = compute_constants(n, eta);
    CHECK(bc.mu == 0.0);
  }
  SUBCASE("positive definite L admits l = 0") {
    CoefficientSet c = base_set(2);
    c.L = TensorExpr::identity(2);
    c.G = TensorExpr::identity(2);
    NormBundle n = sample_norms(c);
    // analytic check: L_N = 2 L_min + eta G_max = eta - 2 vanishes at eta = 2 > 0
    CHECK((-2 * n.L_min) / n.G_max == doctest::Approx(2.0));
    EtaChoices eta = optimize_eta(n, EtaObjective::min_lambda_plus_mu, 3);
    BoundConstants bc = compute_constants(n, eta);
    CHECK(bc.l == 0.0);
    CHECK(bc.lambda == 0.0);
  }
  SUBCASE("enlarging a nested grid never worsens the optimum") {
    CoefficientSet c = base_set(1);
    c.L = TensorExpr::identity(1);
    c.G = TensorExpr::identity(1);
    c.K.at(0, 0) = Expr::constant(0.5);
    NormBundle n = sample_norms(c);
    BoundConstants b3 = compute_constants(n, optimize_eta(n, EtaObjective::min_mu, 3));
    BoundConstants b7 = compute_constants(n, optimize_eta(n, EtaObjective::min_mu, 7));
    CHECK(b7.mu <= b3.mu + 1e-15);
    BoundConstants l3 =
        compute_constants(n, optimize_eta(n, EtaObjective::min_lambda_plus_mu, 3));
    BoundConstants l7 =
        compute_constants(n, optimize_eta(n, EtaObjective::min_lambda_plus_mu, 7));
    CHECK(l7.lambda + l7.mu <= l3.lambda + l3.mu + 1e-15);
  }
}

TEST_CASE("rescaled-time rate table") {
  CoefficientSet c = base_set(1);  // L = 0, so L_N = eta * G_max > 0
  c.G = TensorExpr::identity(1);
  c.K.at(0, 0) = Expr::constant(0.5);
  NormBundle n = sample_norms(c);
  BoundConstants bc = compute_constants(n, EtaChoices::defaults(n));
  REQUIRE(bc.l > 0);
  REQUIRE(bc.mu > 0);

  SUBCASE("l > 0: the exponent approaches 1/2 as tau -> 0") {
    RateTable tab = theorem4_rates(bc, 0.25, std::nullopt, 1000);
    CHECK(tab.branch == "l>0");
    // analytic admissible endpoint
    CHECK(tab.tau_max == doctest::Approx(bc.l * (0.5 - 0.25) / bc.mu).epsilon(1e-12));
    double tau0 = tab.rows.front().tau;
    CHECK(tab.rows.front().phi_exponent ==
          doctest::Approx(0.5 - bc.mu / bc.l * tau0).epsilon(1e-12));
    CHECK(std::abs(tab.rows.front().phi_exponent - 0.5) < 1e-3);  // tau near 0
    CHECK(tab.eps_threshold ==
          doctest::Approx(std::exp(-2 * bc.mu / ((1 - 2 * 0.25) * bc.l))).epsilon(1e-12));
    // boundary excluded: all rows strictly inside
    for (const auto& r : tab.rows) {
      CHECK(r.tau > 0);
      CHECK(r.tau < tab.tau_max);
      CHECK(r.psi_exponent == doctest::Approx(r.phi_exponent - 0.25));
    }
  }

  SUBCASE("l = 0, kappa = 0: min formula on the grid") {
    BoundConstants z = bc;
    z.l = 0;
    z.kappa = 0;
    z.mu = 0;
    z.lambda = 2.0;
    RateTable tab = theorem4_rates(z, 0.1, std::nullopt, 100);
    CHECK(tab.branch == "l=0,kappa=0");
    REQUIRE(tab.rows.size() == 100);
    for (const auto& r : tab.rows)
      CHECK(r.phi_exponent == doctest::Approx(std::min(0.5, 1.0 - 2.0 * r.tau)).epsilon(1e-12));
    // lambda tau = 1/4 -> exponent min(1/2, 3/4) = 1/2
    BoundConstants z2 = z;
    z2.lambda = 0.5;
    RateTable t2 = theorem4_rates(z2, 0.1, std::nullopt, 100);
    bool found = false;
    for (const auto& r : t2.rows)
      if (std::abs(r.tau - 0.5) < 1e-9) {  // lambda*tau = 1/4
        CHECK(r.phi_exponent == doctest::Approx(0.5).epsilon(1e-12));
        found = true;
      }
    CHECK(found);
  }

  SUBCASE("l = 0 with kappa > 0 needs p; empty ranges are reported") {
    BoundConstants z = bc;
    z.l = 0;
    CHECK_THROWS_AS(theorem4_rates(z, 0.25, std::nullopt), Error);
    RateTable tab = theorem4_rates(z, 0.25, 0.25, 50);
    CHECK(tab.branch == "l=0");
    CHECK(!tab.empty_range);
    for (const auto& r : tab.rows) {
      double v = std::max(z.mu * r.tau, (z.lambda + z.mu) * r.tau + 0.25 - 0.5);
      CHECK(v > 0);
      CHECK(v < 0.25);
    }
    // push lambda so high that nothing is admissible below the scan cap
    BoundConstants big = z;
    big.mu = 1e9;
    RateTable empty = theorem4_rates(big, 0.49, 0.49, 50);
    CHECK(empty.empty_range);
  }

  SUBCASE("q outside (0, 1/2) is rejected") {
    CHECK_THROWS_AS(theorem4_rates(bc, 0.5, std::nullopt), Error);
    CHECK_THROWS_AS(theorem4_rates(bc, 0.0, std::nullopt), Error);
  }
}

TEST_CASE("monitor envelopes") {
  CoefficientSet c = base_set(1);
  c.G = TensorExpr::identity(1);
  c.H[0] = Expr::constant(1.0);
  NormBundle n = sample_norms(c);
  BoundConstants bc = compute_constants(n, EtaChoices::defaults(n));
  // envelopes are nondecreasing in time and in the seed norm
  CHECK(bc.u_h1_bound_sq(1.0, 0.0) >= 1.0);
  CHECK(bc.u_h1_bound_sq(1.0, 2.0) >= bc.u_h1_bound_sq(1.0, 1.0));
  CHECK(bc.v_bound_sq(2.0) >= bc.v_bound_sq(1.0));
}
