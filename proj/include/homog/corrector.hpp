#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "homog/cell.hpp"
#include "homog/coefficients.hpp"
#include "homog/constants.hpp"
#include "homog/geometry.hpp"
#include "homog/pde.hpp"

namespace homog {

// Boundary-layer mask: 0 within distance eps of the outer boundary, 1
// beyond 2 eps, linear ramp between (thresholds scaled by `multiplier`).
struct CutoffField {
  Eigen::VectorXd values;  // nodal
  double epsilon = 0;
  double multiplier = 1;
  double max_eps_grad = 0;  // eps * max |grad M| over elements
};

CutoffField build_cutoff(const Mesh& fine, double epsilon, double multiplier = 1.0);

// V_eps seminorm / full H1 norm of the difference of two block fields on
// one mesh; the error-function norms of the harness.
struct ErrorNorms {
  double phi_semi = 0;  // ||grad(Va - Vb)||_L2
  double phi_l2 = 0;
  double psi_h1 = 0;
  double psi_l2 = 0;
};
ErrorNorms error_norms(const Mesh& mesh, int N, const Eigen::VectorXd& V_fine,
                       const Eigen::VectorXd& U_fine, const Eigen::VectorXd& V_exp,
                       const Eigen::VectorXd& U_exp);

// Reconstruction of the truncated two-scale expansion on the fine mesh.
// Macro fields enter through quadratic patch fits, cell functions through
// barycentric interpolation at y = x/eps mod 1; the corrector chains U1,
// U2 are advanced with the same implicit update as the trajectories.
class ExpansionBuilder {
 public:
  ExpansionBuilder(const Mesh& fine, double epsilon, const Mesh& macro_mesh,
                   const Mesh& cell_mesh, const CellFunctions& cf, const CoefficientSet& coeffs,
                   const CutoffField& cutoff);

  struct StepFields {
    Eigen::VectorXd V_exp, U_exp;  // nodal block fields on the fine mesh
    Eigen::VectorXd V1, V2;        // uncut correctors (consumed by the U chains)
  };

  // macro nodal states at one time step (value fits are built internally)
  StepFields reconstruct(const Eigen::VectorXd& V0_macro, const Eigen::VectorXd& U0_macro,
                         bool initial_time) const;

  // advance the corrector chains; call once per step after reconstruct
  void advance_chains(const StepFields& prev, double dt, double t_k, double t_km1);
  const Eigen::VectorXd& U1() const { return U1_; }
  const Eigen::VectorXd& U2() const { return U2_; }

 private:
  const Mesh& fine_;
  const Mesh& macro_;
  const CellFunctions& cf_;
  const CoefficientSet& coeffs_;
  const CutoffField& cutoff_;
  double eps_;
  int N_;

  PatchRecovery recovery_;
  std::vector<int> nearest_macro_;  // per fine node
  std::vector<char> on_boundary_;   // Dirichlet nodes: V0 evaluates to exactly 0
  // cell-function values pre-interpolated at y(x) per fine node
  std::vector<Eigen::VectorXd> Wy_, Zy_, Py_, Q0y_, R0y_, Q1y_, Q2y_;
  Eigen::VectorXd U1_, U2_;  // corrector chains (zero initial data)
};

struct OscillationRow {
  double eps = 0;
  double integral = 0;   // quadrature of f(x, x/eps) over the unit square
  double target = 0;     // cell-averaged double integral
  double difference = 0;
};

std::vector<OscillationRow> oscillation_check(const Expr& f, const std::vector<double>& eps_list);

// Least-squares slope of log|difference| vs log eps. Values below `floor`
// are treated as exactly converged; if fewer than two points remain the
// fit reports `exact` instead of a slope.
struct OrderFit {
  double slope = 0;
  bool valid = false;
  bool exact = false;  // all differences at the quadrature floor
};
OrderFit fit_order(const std::vector<double>& eps, const std::vector<double>& values,
                   double floor = 1e-12);

struct SweepConfig {
  CellSpec cell;            // geometry of the microstructure
  int cell_resolution = 64;
  int fine_resolution = 16;  // per-cell resolution of the fine meshes; the
                             // macro branch runs on the unperforated twin
  std::vector<double> eps_list;
  TimeGrid grid;
  CoefficientSet coeffs;
  double cutoff_multiplier = 1.0;
  SolveOptions solver;
  bool self_check = true;  // h/dt halving on the smallest eps
  SampleGrid norm_grid;
  unsigned seed = 42;
};

struct SweepRow {
  double eps = 0;
  int fine_res = 0;
  bool ok = false;
  std::string error;
  double phi = 0, psi = 0, phi_l2 = 0, psi_l2 = 0;  // final-time norms
  double bound = 0, ratio = 0, pair_rate = 0;
  double self_error = -1;        // only measured where the halving check ran
  double cutoff_eps_grad = 0;
  bool phi_boundary_zero = true;  // cutoff-support invariant
  bool psi_transfer_ok = true;    // discrete Gronwall transfer at every step
  double psi_transfer_worst = 0;
  std::vector<double> phi_l2_history;  // per logged time
};

struct CorrectorReport {
  std::vector<SweepRow> rows;
  double slope_phi = 0, slope_psi = 0;
  bool slope_valid = false;
  bool degenerate = false;
  std::string note;
  BoundConstants constants;
  int cell_res = 0, macro_res = 0;
};

CorrectorReport run_sweep(const SweepConfig& config);

void write_sweep_csv(std::ostream& out, const CorrectorReport& report);
void write_plot_data(std::ostream& out, const CorrectorReport& report);
void write_oscillation_csv(std::ostream& out, const std::vector<OscillationRow>& rows);

}  // namespace homog
