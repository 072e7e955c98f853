#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "homog/coefficients.hpp"
#include "homog/constants.hpp"
#include "homog/geometry.hpp"
#include "homog/sparse.hpp"
#include "homog/tensors.hpp"

namespace homog {

struct TimeGrid {
  double T_end = 1.0;
  double dt = 0.1;
  int steps = 10;

  static TimeGrid make(double T, double dt);  // validates steps * dt = T
  double time(int k) const { return k * dt; }
};

// Per-step energy log plus the a priori / growth-envelope monitor flags.
struct EnergyRecord {
  double t = 0;
  double U_l2 = 0, U_h1 = 0;       // sqrt of the summed component norms
  double V_l2 = 0, V_semi = 0;     // V_eps seminorm
  double apriori_lhs = 0, apriori_rhs = 0;
  bool apriori_ok = true;
  bool growth_ok = true;
};

// Nodal block fields: entry node*N + component.
struct Trajectory {
  const Mesh* mesh = nullptr;
  int N = 1;
  TimeGrid grid;
  std::vector<Eigen::VectorXd> U, V;  // steps+1 states
  std::vector<EnergyRecord> energy;

  int n_states() const { return static_cast<int>(U.size()); }
  bool monitors_clean() const;
};

struct FineProblem {
  const Mesh* mesh = nullptr;        // perforated domain mesh
  const CoefficientSet* coeffs = nullptr;
  double epsilon = 1.0;
  SolveOptions solver;
};

// One elliptic slice: assemble the oscillating operator at time t and
// solve for V given the current U (natural condition on hole boundaries,
// homogeneous Dirichlet rows on the outer boundary).
Eigen::VectorXd elliptic_solve_fine(const FineProblem& p, const Eigen::VectorXd& U, double t);

// Implicit nodal update of the ordinary differential equation block:
//   (I + dt L(t_k, x)) U_k = U_{k-1} + dt G(t_{k-1], x) V_{k-1}.
Eigen::VectorXd rothe_step(const Mesh& mesh, const CoefficientSet& coeffs,
                           const Eigen::VectorXd& U_prev, const Eigen::VectorXd& V_prev,
                           double dt, double t_k, double t_km1);

Trajectory run_fine(const FineProblem& p, const TimeGrid& grid,
                    const BoundConstants* monitors = nullptr);

struct MacroProblem {
  const Mesh* mesh = nullptr;  // unperforated domain mesh
  const CoefficientSet* coeffs = nullptr;
  const EffectiveTensorField* tensors = nullptr;
  SolveOptions solver;
};

Trajectory run_macro(const MacroProblem& p, const TimeGrid& grid,
                     const BoundConstants* monitors = nullptr);

// Shared block assembly (used by both branches and by tests).
struct BlockCoeffs {
  Eigen::MatrixXd M;             // N x N
  Eigen::Matrix2d E;             // d x d
  std::array<Eigen::MatrixXd, 2> D;  // per direction
};
using BlockCoeffFn = std::function<BlockCoeffs(int e, int q, const Vec2& x)>;
using BlockRhsFn = std::function<Eigen::VectorXd(int e, int q, const Vec2& x)>;

SparseMatrix assemble_block_matrix(const Mesh& mesh, int N, const BlockCoeffFn& coeff);
Eigen::VectorXd assemble_block_rhs(const Mesh& mesh, int N, const BlockRhsFn& rhs);
std::vector<int> dirichlet_block_rows(const Mesh& mesh, int N);

// Trajectory CSV/report output.
void write_trajectory_csv(std::ostream& out, const Mesh& mesh, int N,
                          const Eigen::VectorXd& U, const Eigen::VectorXd& V);
void write_energy_report(std::ostream& out, const Trajectory& tr);

}  // namespace homog
