#pragma once

#include <Eigen/Dense>
#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "homog/coefficients.hpp"

namespace homog {

// Sampled norms feeding the growth/coercivity constants. Eigenvalue
// quantities use the symmetric part (the Gronwall estimates bound
// quadratic forms); the full-matrix eigenvalues are recorded alongside.
struct NormBundle {
  int N = 1, d = 2;
  bool finite = true;

  double L_min = 0;   // sup of -lambda_min(sym L): |largest negative eigenvalue|,
                      // or -1 x the smallest positive eigenvalue if none
  double L_min_full = 0;      // same quantity from the unsymmetrized spectrum (real parts)
  double grad_L_norm = 0;     // sup |dL/dx| componentwise
  double G_max = 0;           // sup of lambda_max(sym G)
  double G_max_full = 0;
  double grad_G_norm = 0;     // sup |dG/dx| componentwise
  double G_op = 0;            // sup operator norm of G (for discrete recursion checks)

  std::vector<double> m_alpha, e_i;            // inf of the M/E diagonals
  std::array<Eigen::MatrixXd, 2> D_sup;        // sup |D_i(a,b)|
  Eigen::VectorXd H_sup;                       // sup |H_a|
  Eigen::MatrixXd K_sup;                       // sup |K_ab|
  std::array<Eigen::MatrixXd, 2> J_sup;        // sup |J_i(a,b)|
  double kappa = 0;  // sup over K entries of value and first x/y derivatives
};

NormBundle sample_norms(const CoefficientSet& c, const SampleGrid& grid = {});

// Young-inequality weights. eta_D(i)(b,a) pairs the drift entry D_{i b a};
// it must lie inside the open feasibility interval
//   d N D~ / (2 m_a)  <  eta  <  2 e_i / (N D~)
// whenever D~ > 0 (this interval is nonempty exactly when the
// drift-smallness assumption holds).
struct EtaChoices {
  std::array<Eigen::MatrixXd, 2> eta_D;
  Eigen::VectorXd eta_H;                 // eta_a
  Eigen::MatrixXd eta_K;                 // eta_{ab}
  std::array<Eigen::MatrixXd, 2> eta_J;  // eta~_{i a b}, first index = V row
  double eta = 1, eta1 = 1, eta2 = 1, eta3 = 1;
  double epsilon0 = 1.0;  // supremum of admissible epsilon values

  // feasibility-interval geometric means for eta_D, ones elsewhere
  static EtaChoices defaults(const NormBundle& n);
};

struct BoundConstants {
  // headline constants
  double kappa = 0, kappa_tilde = 0, l = 0, lambda = 0, mu = 0;
  // intermediate ledger
  std::vector<double> m_tilde, e_tilde;
  double H_tilde = 0;
  Eigen::VectorXd K_tilde;                // per alpha
  std::array<Eigen::VectorXd, 2> J_tilde; // per (i, alpha)
  double L_N = 0, L_G = 0, G_N = 0, G_G = 0, G_M = 0, m = 0;
  double I = 0;           // Gronwall rate, lambda = I/2
  double J_const = 0;     // additive Gronwall constant G_M * H_tilde
  double lambda_variant = 0;  // the in-proof factor placement, reported if it differs
  NormBundle norms;       // provenance
  EtaChoices eta;

  // runtime monitor envelopes
  double u_h1_bound_sq(double u0_h1_sq, double t) const;  // ||U||_H1^2 envelope
  double v_bound_sq(double u_h1_sq) const;                // ||V||_V envelope from the a priori row
};

BoundConstants compute_constants(const NormBundle& norms, const EtaChoices& eta);

enum class EtaObjective { none, min_mu, min_lambda_plus_mu };

EtaChoices optimize_eta(const NormBundle& norms, EtaObjective objective,
                        int grid_points_per_eta = 7);

// Rescaled-time convergence exponents.
struct RateRow {
  double tau = 0;
  double phi_exponent = 0, psi_exponent = 0;
};
struct RateTable {
  std::string branch;  // "l>0", "l=0", "l=0,kappa=0"
  bool empty_range = false;
  std::string note;
  double tau_max = 0;          // admissible upper endpoint (open)
  double eps_threshold = 1.0;  // l>0: epsilon must stay below exp(-2 mu / ((1-2q) l))
  std::vector<RateRow> rows;
};

RateTable theorem4_rates(const BoundConstants& bc, double q, std::optional<double> p,
                         int grid = 100);

void write_constants_report(std::ostream& out, const BoundConstants& bc);
void write_rate_csv(std::ostream& out, const RateTable& table);

}  // namespace homog
