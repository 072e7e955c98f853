#include "homog/constants.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "homog/common.hpp"

namespace homog {

namespace {

constexpr double kFdStep = 1e-6;

struct Extrema {
  double min = 1e300, max = -1e300;
  bool finite = true;
  void feed(double v) {
    if (!std::isfinite(v)) {
      finite = false;
      return;
    }
    min = std::min(min, v);
    max = std::max(max, v);
  }
};

// Iterate a sampling grid over exactly the axes the mask references.
template <typename F>
void for_grid(std::uint32_t mask, const SampleGrid& g, F&& body) {
  auto n_of = [&](Var v, int n) { return (mask >> static_cast<int>(v)) & 1u ? n : 1; };
  int nt = n_of(Var::t, g.nt), nx1 = n_of(Var::x1, g.nx), nx2 = n_of(Var::x2, g.nx),
      ny1 = n_of(Var::y1, g.ny), ny2 = n_of(Var::y2, g.ny);
  auto coord = [](int k, int n) { return n == 1 ? 0.0 : static_cast<double>(k) / (n - 1); };
  for (int it = 0; it < nt; ++it)
    for (int i1 = 0; i1 < nx1; ++i1)
      for (int i2 = 0; i2 < nx2; ++i2)
        for (int j1 = 0; j1 < ny1; ++j1)
          for (int j2 = 0; j2 < ny2; ++j2)
            body(EvalPoint{coord(it, nt) * g.T, coord(i1, nx1), coord(i2, nx2), coord(j1, ny1),
                           coord(j2, ny2)});
}

Extrema extrema_of(const Expr& e, const SampleGrid& g) {
  Extrema out;
  for_grid(e.var_mask(), g, [&](const EvalPoint& p) { out.feed(e.eval(p)); });
  return out;
}

double sup_abs(const Expr& e, const SampleGrid& g, bool* finite) {
  Extrema ex = extrema_of(e, g);
  if (!ex.finite) *finite = false;
  if (ex.max < ex.min) return 0;
  return std::max(std::abs(ex.min), std::abs(ex.max));
}

// sup of |central difference| of e in variable v (and optionally a second
// variable w for the mixed derivative)
double sup_abs_fd(const Expr& e, const SampleGrid& g, Var v, const Var* w, bool* finite) {
  Extrema out;
  std::uint32_t mask = e.var_mask() | (1u << static_cast<int>(v));
  if (w) mask |= 1u << static_cast<int>(*w);
  for_grid(mask, g, [&](const EvalPoint& p) {
    auto shift = [&](EvalPoint q, Var var, double dd) {
      switch (var) {
        case Var::t: q.t += dd; break;
        case Var::x1: q.x1 += dd; break;
        case Var::x2: q.x2 += dd; break;
        case Var::y1: q.y1 += dd; break;
        case Var::y2: q.y2 += dd; break;
      }
      return q;
    };
    double val;
    if (!w) {
      val = (e.eval(shift(p, v, kFdStep)) - e.eval(shift(p, v, -kFdStep))) / (2 * kFdStep);
    } else {
      double pp = e.eval(shift(shift(p, v, kFdStep), *w, kFdStep));
      double pm = e.eval(shift(shift(p, v, kFdStep), *w, -kFdStep));
      double mp = e.eval(shift(shift(p, v, -kFdStep), *w, kFdStep));
      double mm = e.eval(shift(shift(p, v, -kFdStep), *w, -kFdStep));
      val = (pp - pm - mp + mm) / (4 * kFdStep * kFdStep);
    }
    out.feed(std::abs(val));
  });
  if (!out.finite) *finite = false;
  return out.max >= out.min ? out.max : 0.0;
}

}  // namespace

NormBundle sample_norms(const CoefficientSet& c, const SampleGrid& g) {
  NormBundle n;
  n.N = c.N;
  n.d = CoefficientSet::d;
  const int N = c.N;

  // eigenvalue quantities of L and G over their (t, x) grid
  std::uint32_t lg_mask = c.L.var_mask() | c.G.var_mask();
  double sup_neg_symL = -1e300, sup_neg_fullL = -1e300;
  double sup_max_symG = -1e300, sup_max_fullG = -1e300, sup_op_G = 0;
  for_grid(lg_mask, g, [&](const EvalPoint& p) {
    Eigen::MatrixXd L = c.L.eval(p), G = c.G.eval(p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esl(0.5 * (L + L.transpose()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esg(0.5 * (G + G.transpose()));
    sup_neg_symL = std::max(sup_neg_symL, -esl.eigenvalues().minCoeff());
    sup_max_symG = std::max(sup_max_symG, esg.eigenvalues().maxCoeff());
    Eigen::EigenSolver<Eigen::MatrixXd> efl(L, false), efg(G, false);
    sup_neg_fullL = std::max(sup_neg_fullL, -efl.eigenvalues().real().minCoeff());
    sup_max_fullG = std::max(sup_max_fullG, efg.eigenvalues().real().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esn(G.transpose() * G);
    sup_op_G = std::max(sup_op_G, std::sqrt(std::max(0.0, esn.eigenvalues().maxCoeff())));
  });
  n.L_min = sup_neg_symL;
  n.L_min_full = sup_neg_fullL;
  n.G_max = sup_max_symG;
  n.G_max_full = sup_max_fullG;
  n.G_op = sup_op_G;

  // componentwise gradient sup-norms of L and G
  n.grad_L_norm = 0;
  n.grad_G_norm = 0;
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      for (Var v : {Var::x1, Var::x2}) {
        n.grad_L_norm = std::max(n.grad_L_norm, sup_abs_fd(c.L.at(a, b), g, v, nullptr, &n.finite));
        n.grad_G_norm = std::max(n.grad_G_norm, sup_abs_fd(c.G.at(a, b), g, v, nullptr, &n.finite));
      }

  n.m_alpha.resize(N);
  for (int a = 0; a < N; ++a) {
    Extrema ex = extrema_of(c.M.at(a, a), g);
    if (!ex.finite) n.finite = false;
    n.m_alpha[a] = ex.min;
  }
  n.e_i.resize(2);
  for (int i = 0; i < 2; ++i) {
    Extrema ex = extrema_of(c.E.at(i, i), g);
    if (!ex.finite) n.finite = false;
    n.e_i[i] = ex.min;
  }

  for (int i = 0; i < 2; ++i) {
    n.D_sup[i] = Eigen::MatrixXd::Zero(N, N);
    n.J_sup[i] = Eigen::MatrixXd::Zero(N, N);
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) {
        n.D_sup[i](a, b) = sup_abs(c.D[i].at(a, b), g, &n.finite);
        n.J_sup[i](a, b) = sup_abs(c.J[i].at(a, b), g, &n.finite);
      }
  }
  n.H_sup = Eigen::VectorXd::Zero(N);
  for (int a = 0; a < N; ++a) n.H_sup[a] = sup_abs(c.H[a], g, &n.finite);
  n.K_sup = Eigen::MatrixXd::Zero(N, N);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) n.K_sup(a, b) = sup_abs(c.K.at(a, b), g, &n.finite);

  // kappa: the K entries measured with their first x- and y-derivatives
  // and the mixed x-y terms
  n.kappa = n.K_sup.size() ? n.K_sup.cwiseAbs().maxCoeff() : 0.0;
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) {
      const Expr& e = c.K.at(a, b);
      if (e.is_constant()) continue;
      for (Var v : {Var::x1, Var::x2, Var::y1, Var::y2})
        n.kappa = std::max(n.kappa, sup_abs_fd(e, g, v, nullptr, &n.finite));
      for (Var vx : {Var::x1, Var::x2})
        for (Var vy : {Var::y1, Var::y2})
          n.kappa = std::max(n.kappa, sup_abs_fd(e, g, vx, &vy, &n.finite));
    }

  if (!n.finite) numeric_error("sample_norms: non-finite coefficient evaluations on the grid");
  return n;
}

EtaChoices EtaChoices::defaults(const NormBundle& n) {
  EtaChoices eta;
  const int N = n.N, d = n.d;
  for (int i = 0; i < 2; ++i) {
    eta.eta_D[i] = Eigen::MatrixXd::Ones(N, N);
    for (int b = 0; b < N; ++b)
      for (int a = 0; a < N; ++a) {
        double Dt = n.D_sup[i](b, a);
        if (Dt <= 0) continue;
        double lo = d * N * Dt / (2 * n.m_alpha[a]);
        double hi = 2 * n.e_i[i] / (N * Dt);
        if (!(lo < hi))
          numeric_error("drift-smallness assumption violated at (i=" + std::to_string(i + 1) +
                        ", beta=" + std::to_string(b + 1) + ", alpha=" + std::to_string(a + 1) +
                        "): the admissible weight interval (" + fmt_g(lo) + ", " + fmt_g(hi) +
                        ") is empty");
        eta.eta_D[i](b, a) = std::sqrt(lo * hi);  // scale-free interior choice
      }
  }
  // The free weights consume coercive mass directly, so they default to a
  // fixed fraction of whatever the drift pairing leaves of each m_alpha.
  eta.eta_H = Eigen::VectorXd::Ones(N);
  eta.eta_K = Eigen::MatrixXd::Ones(N, N);
  eta.eta_J = {Eigen::MatrixXd::Ones(N, N), Eigen::MatrixXd::Ones(N, N)};
  for (int a = 0; a < N; ++a) {
    double remainder = n.m_alpha[a];
    for (int i = 0; i < 2; ++i)
      for (int b = 0; b < N; ++b)
        if (n.D_sup[i](b, a) > 0) remainder -= n.D_sup[i](b, a) / (2 * eta.eta_D[i](b, a));
    if (!(remainder > 0))
      numeric_error("coercive mass exhausted by the drift pairing at alpha = " +
                    std::to_string(a + 1));
    double share = remainder / (2.0 * (1 + N + d * N));
    eta.eta_H[a] = share;
    for (int b = 0; b < N; ++b) eta.eta_K(a, b) = share;
    for (int i = 0; i < 2; ++i)
      for (int b = 0; b < N; ++b) eta.eta_J[i](a, b) = share;
  }
  return eta;
}

BoundConstants compute_constants(const NormBundle& n, const EtaChoices& eta) {
  const int N = n.N, d = n.d;
  BoundConstants bc;
  bc.norms = n;
  bc.eta = eta;

  // feasibility of the drift weights
  for (int i = 0; i < 2; ++i)
    for (int b = 0; b < N; ++b)
      for (int a = 0; a < N; ++a) {
        double Dt = n.D_sup[i](b, a);
        if (Dt <= 0) continue;
        double lo = d * N * Dt / (2 * n.m_alpha[a]);
        double hi = 2 * n.e_i[i] / (N * Dt);
        double v = eta.eta_D[i](b, a);
        if (!(lo < hi))
          numeric_error("drift-smallness assumption violated at (i=" + std::to_string(i + 1) +
                        ", beta=" + std::to_string(b + 1) + ", alpha=" + std::to_string(a + 1) +
                        ")");
        if (!(lo < v && v < hi))
          numeric_error("eta outside the admissible interval (" + fmt_g(lo) + ", " + fmt_g(hi) +
                        ") at (i=" + std::to_string(i + 1) + ", beta=" + std::to_string(b + 1) +
                        ", alpha=" + std::to_string(a + 1) + ")");
      }

  bc.m_tilde.resize(N);
  for (int a = 0; a < N; ++a) {
    double v = n.m_alpha[a];
    for (int i = 0; i < 2; ++i)
      for (int b = 0; b < N; ++b) {
        if (n.D_sup[i](b, a) > 0) v -= n.D_sup[i](b, a) / (2 * eta.eta_D[i](b, a));
        v -= eta.eta_J[i](a, b);
      }
    v -= eta.eta_H[a];
    for (int b = 0; b < N; ++b) v -= eta.eta_K(a, b);
    bc.m_tilde[a] = v;
  }
  bc.e_tilde.resize(2);
  for (int i = 0; i < 2; ++i) {
    double v = n.e_i[i];
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) v -= 0.5 * eta.eta_D[i](b, a) * n.D_sup[i](b, a);
    bc.e_tilde[i] = v;
  }
  for (int a = 0; a < N; ++a)
    if (!(bc.m_tilde[a] > 0))
      numeric_error("coercivity lost: m~_" + std::to_string(a + 1) + " = " +
                    fmt_g(bc.m_tilde[a]) + " <= 0 for this eta choice");
  for (int i = 0; i < 2; ++i)
    if (!(bc.e_tilde[i] > 0))
      numeric_error("coercivity lost: e~_" + std::to_string(i + 1) + " = " +
                    fmt_g(bc.e_tilde[i]) + " <= 0 for this eta choice");

  bc.H_tilde = 0;
  for (int a = 0; a < N; ++a) bc.H_tilde += n.H_sup[a] * n.H_sup[a] / (4 * eta.eta_H[a]);
  bc.K_tilde = Eigen::VectorXd::Zero(N);
  for (int a = 0; a < N; ++a)
    for (int r = 0; r < N; ++r)
      bc.K_tilde[a] += n.K_sup(r, a) * n.K_sup(r, a) / (4 * eta.eta_K(r, a));
  for (int i = 0; i < 2; ++i) {
    bc.J_tilde[i] = Eigen::VectorXd::Zero(N);
    for (int a = 0; a < N; ++a)
      for (int r = 0; r < N; ++r)
        bc.J_tilde[i][a] += eta.epsilon0 * eta.epsilon0 * n.J_sup[i](r, a) * n.J_sup[i](r, a) /
                            (4 * eta.eta_J[i](r, a));
  }

  const double dN = static_cast<double>(d) * N;
  bc.L_N = 2 * n.L_min + eta.eta * n.G_max + eta.eta1 * dN * n.grad_L_norm;
  bc.L_G = 2 * n.L_min + dN / eta.eta1 * n.grad_L_norm + eta.eta2 * n.G_max +
           eta.eta3 * dN * n.grad_G_norm;
  bc.G_N = n.G_max / eta.eta + dN / eta.eta3 * n.grad_G_norm;
  bc.G_G = n.G_max / eta.eta2;

  double maxK = bc.K_tilde.size() ? bc.K_tilde.maxCoeff() : 0.0;
  double maxJ = std::max(bc.J_tilde[0].maxCoeff(), bc.J_tilde[1].maxCoeff());
  auto gm_over = [&](int alpha_limit) {
    double gm = 0;
    for (int a = 0; a < alpha_limit; ++a) gm = std::max(gm, (bc.G_N + bc.G_G) / bc.m_tilde[a]);
    for (int i = 0; i < 2; ++i) gm = std::max(gm, bc.G_N / bc.e_tilde[i]);
    return gm;
  };
  bc.G_M = gm_over(N);
  bc.m = *std::min_element(bc.m_tilde.begin(), bc.m_tilde.end());
  bc.m = std::min(bc.m, std::min(bc.e_tilde[0], bc.e_tilde[1]));

  bc.kappa = n.kappa;
  bc.l = std::max(0.0, bc.L_N);
  double inner = std::max(bc.L_G + bc.G_M * maxK, bc.G_M * maxJ);
  bc.I = std::max(0.0, bc.L_N + inner);
  bc.lambda = 0.5 * bc.I;
  // the in-proof variant restricts the coercivity maximum to alpha < N
  double gm_variant = gm_over(std::max(1, N - 1));
  bc.lambda_variant =
      0.5 * std::max(0.0, bc.L_N + std::max(bc.L_G + gm_variant * maxK, gm_variant * maxJ));
  bc.mu = 9 * bc.kappa * bc.kappa * bc.G_N / (8 * bc.m * bc.m);
  bc.kappa_tilde = std::max(maxK, maxJ);
  bc.J_const = bc.G_M * bc.H_tilde;
  return bc;
}

double BoundConstants::u_h1_bound_sq(double u0_h1_sq, double t) const {
  if (I > 0) return std::exp(I * t) * u0_h1_sq + J_const / I * (std::exp(I * t) - 1.0);
  return u0_h1_sq + J_const * t;
}

double BoundConstants::v_bound_sq(double u_h1_sq) const {
  return (H_tilde + kappa_tilde * u_h1_sq) / m;
}

EtaChoices optimize_eta(const NormBundle& norms, EtaObjective objective, int grid_points) {
  EtaChoices best = EtaChoices::defaults(norms);
  if (objective == EtaObjective::none) return best;
  if (objective == EtaObjective::min_mu && norms.kappa == 0.0) return best;  // mu is already 0

  auto evaluate = [&](const EtaChoices& eta) -> double {
    try {
      BoundConstants bc = compute_constants(norms, eta);
      double obj = objective == EtaObjective::min_mu ? bc.mu : bc.lambda + bc.mu;
      return std::isfinite(obj) ? obj : 1e300;
    } catch (const Error&) {
      return 1e300;  // infeasible corner of the grid
    }
  };

  // exhaustive search over a nested candidate grid (10^k spaced over
  // [1e-3, 1e3]); enlarging grid_points to a superset can only improve
  // the returned optimum
  std::vector<double> cand(grid_points);
  for (int k = 0; k < grid_points; ++k)
    cand[k] = std::pow(10.0, -3.0 + 6.0 * k / (grid_points - 1));

  EtaChoices base = best;
  double best_obj = evaluate(best);
  for (double e0 : cand)
    for (double e1 : cand)
      for (double e2 : cand)
        for (double e3 : cand)
          for (double sHK : cand)
            for (double sJ : cand) {
              EtaChoices eta = base;
              eta.eta = e0;
              eta.eta1 = e1;
              eta.eta2 = e2;
              eta.eta3 = e3;
              eta.eta_H *= sHK;
              eta.eta_K *= sHK;
              for (int i = 0; i < 2; ++i) eta.eta_J[i] *= sJ;
              double obj = evaluate(eta);
              if (obj < best_obj) {
                best_obj = obj;
                best = eta;
              }
            }
  if (best_obj >= 1e300) numeric_error("eta optimization: feasible region is empty");
  return best;
}

RateTable theorem4_rates(const BoundConstants& bc, double q, std::optional<double> p, int grid) {
  if (!(q > 0 && q < 0.5)) config_error("q must lie in (0, 1/2)");
  RateTable tab;
  const double tau_cap = 10.0;

  if (bc.l > 0) {
    tab.branch = "l>0";
    tab.tau_max = bc.mu > 0 ? bc.l * (0.5 - q) / bc.mu : tau_cap;
    tab.eps_threshold = std::exp(-2 * bc.mu / ((1 - 2 * q) * bc.l));
    for (int k = 1; k <= grid; ++k) {
      double tau = tab.tau_max * k / (grid + 1);  // strictly interior
      RateRow row;
      row.tau = tau;
      row.phi_exponent = 0.5 - bc.mu / bc.l * tau;
      row.psi_exponent = row.phi_exponent - q;
      tab.rows.push_back(row);
    }
    return tab;
  }

  if (bc.kappa == 0.0) {
    tab.branch = "l=0,kappa=0";
    double tau_hi = bc.lambda > 0 ? std::min(tau_cap, 1.0 / bc.lambda) : tau_cap;
    tab.tau_max = tau_hi;
    for (int k = 0; k < grid; ++k) {
      double tau = tau_hi * k / grid;
      RateRow row;
      row.tau = tau;
      row.phi_exponent = std::min(0.5, 1.0 - bc.lambda * tau);
      row.psi_exponent = row.phi_exponent - q;
      tab.rows.push_back(row);
    }
    return tab;
  }

  tab.branch = "l=0";
  if (!p) config_error("the l = 0 branch requires the exponent p");
  if (!(*p > 0 && *p < 0.5)) config_error("p must lie in (0, 1/2)");
  // admissible: 0 < max(mu tau, (lambda+mu) tau + p - 1/2) < 1/2 - q
  double lo = 1e300, hi = -1e300;
  const int scan = 4096;
  for (int k = 0; k <= scan; ++k) {
    double tau = tau_cap * k / scan;
    double v = std::max(bc.mu * tau, (bc.lambda + bc.mu) * tau + *p - 0.5);
    if (v > 0 && v < 0.5 - q) {
      lo = std::min(lo, tau);
      hi = std::max(hi, tau);
    }
  }
  if (hi < lo) {
    tab.empty_range = true;
    tab.note = "no admissible tau for the given (q, p) and constants";
    return tab;
  }
  tab.tau_max = hi;
  for (int k = 0; k < grid; ++k) {
    double tau = lo + (hi - lo) * k / std::max(1, grid - 1);
    RateRow row;
    row.tau = tau;
    row.phi_exponent = std::min(0.5 - bc.mu * tau, 1.0 - (bc.lambda + bc.mu) * tau - *p);
    row.psi_exponent = row.phi_exponent - q;
    tab.rows.push_back(row);
  }
  return tab;
}

void write_constants_report(std::ostream& out, const BoundConstants& bc) {
  auto line = [&](const char* name, double v, const char* formula) {
    out << name << " = " << fmt_g(v) << "    [" << formula << "]\n";
  };
  out << "# growth and coercivity constants\n";
  line("kappa", bc.kappa, "sup |K| with first x/y derivatives");
  line("kappa_tilde", bc.kappa_tilde, "max(K~_a, J~_ia)");
  line("l", bc.l, "max(0, L_N)");
  line("lambda", bc.lambda, "max(0, L_N + max(L_G + G_M*max K~, G_M*max J~))/2");
  line("mu", bc.mu, "9*kappa^2*G_N/(8*m^2)");
  out << "# intermediate ledger\n";
  line("L_N", bc.L_N, "2*L_min + eta*G_max + eta1*d*N*|grad L|");
  line("L_G", bc.L_G, "2*L_min + d*N/eta1*|grad L| + eta2*G_max + eta3*d*N*|grad G|");
  line("G_N", bc.G_N, "G_max/eta + d*N/eta3*|grad G|");
  line("G_G", bc.G_G, "G_max/eta2");
  line("G_M", bc.G_M, "max((G_N+G_G)/m~_a, G_N/e~_i)");
  line("m", bc.m, "min(m~_a, e~_i)");
  line("H_tilde", bc.H_tilde, "sum |H_a|^2/(4 eta_a)");
  for (size_t a = 0; a < bc.m_tilde.size(); ++a)
    line(("m_tilde_" + std::to_string(a + 1)).c_str(), bc.m_tilde[a], "coercive mass remainder");
  for (int i = 0; i < 2; ++i)
    line(("e_tilde_" + std::to_string(i + 1)).c_str(), bc.e_tilde[i],
         "coercive stiffness remainder");
  for (int a = 0; a < bc.K_tilde.size(); ++a)
    line(("K_tilde_" + std::to_string(a + 1)).c_str(), bc.K_tilde[a],
         "sum |K_ba|^2/(4 eta_ba)");
  if (bc.lambda_variant != bc.lambda)
    line("lambda_variant", bc.lambda_variant, "in-proof factor placement; differs, see notes");
  out << "# feeding norms\n";
  line("L_min", bc.norms.L_min, "sup of -lambda_min(sym L)");
  line("L_min_full", bc.norms.L_min_full, "same from unsymmetrized spectrum");
  line("G_max", bc.norms.G_max, "sup of lambda_max(sym G)");
  line("G_max_full", bc.norms.G_max_full, "same from unsymmetrized spectrum");
  line("grad_L", bc.norms.grad_L_norm, "componentwise sup |dL/dx|");
  line("grad_G", bc.norms.grad_G_norm, "componentwise sup |dG/dx|");
  for (size_t a = 0; a < bc.norms.m_alpha.size(); ++a)
    line(("m_" + std::to_string(a + 1)).c_str(), bc.norms.m_alpha[a], "inf diag M");
  for (size_t i = 0; i < bc.norms.e_i.size(); ++i)
    line(("e_" + std::to_string(i + 1)).c_str(), bc.norms.e_i[i], "inf diag E");
}

void write_rate_csv(std::ostream& out, const RateTable& tab) {
  out << "tau,branch,phi_exponent,psi_exponent\n";
  for (const RateRow& r : tab.rows)
    out << fmt_g(r.tau) << "," << tab.branch << "," << fmt_g(r.phi_exponent) << ","
        << fmt_g(r.psi_exponent) << "\n";
}

}  // namespace homog
