#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "homog/coefficients.hpp"
#include "homog/fem.hpp"
#include "homog/geometry.hpp"
#include "homog/sparse.hpp"

namespace homog {

struct MacroPoint {
  double t = 0;
  Vec2 x{0.5, 0.5};
};

using MatFun = std::function<Eigen::Matrix2d(const Vec2&)>;
using ScalFun = std::function<double(const Vec2&)>;

// Periodic scalar elliptic solver on the unit cell: assembles the
// stiffness of A(y) over the periodic dof space once, keeps the
// factorization, and solves mean-zero problems for many right-hand
// sides. Right-hand sides are built from volume / flux / hole-boundary
// contributions:
//   b_a = int vol * phi_a dy - int flux . grad(phi_a) dy + int_hole g * phi_a ds
struct CellLoad {
  std::function<double(int e, int q, const Vec2& y)> vol;
  std::function<Vec2(int e, int q, const Vec2& y)> flux;
  ScalFun hole_g;
};

class CellWorkspace {
 public:
  CellWorkspace(const Mesh& cell, MatFun A, SolveOptions opts = {});

  const Mesh& mesh() const { return *mesh_; }
  const DofMap& dofs() const { return dofs_; }
  double material_area() const { return area_; }  // |Y*|

  Eigen::VectorXd assemble(const CellLoad& load) const;  // reduced load vector

  // Solve with the zero-mean (Lagrange multiplier) normalization.
  // sum(load) is the discrete compatibility defect; it must match
  // `expected_defect` within `defect_tol`, and with project=true the
  // defect is removed by recentring the load (a constant shift of the
  // right-hand side), which keeps the bordered system consistent.
  Eigen::VectorXd solve_mean_zero(Eigen::VectorXd load, double expected_defect,
                                  double defect_tol, bool project,
                                  double* defect_out = nullptr) const;

  // max_k |v_k . (K u - b)| over n random unit test vectors in the
  // periodic dof space (Galerkin orthogonality check)
  double weak_residual(const Eigen::VectorXd& nodal_solution, const Eigen::VectorXd& load,
                       unsigned seed, int n_tests = 20) const;

 private:
  const Mesh* mesh_;
  MatFun A_;
  SolveOptions opts_;
  DofMap dofs_;
  Eigen::VectorXd weights_;  // integral of each periodic basis function
  double area_ = 0;
  SparseMatrix K_;
  std::unique_ptr<LinearSolver> solver_;
};

// Generic scaffold for the periodic Neumann cell problem
//   -div_y(A grad_y w) = F in Y*,  -(A grad_y w).n = g on the hole
// with n pointing out of the material. Requires the compatibility
// condition  int F dy = int g ds  and returns the mean-zero solution.
struct CellProblem {
  const Mesh* mesh = nullptr;
  MatFun A;
  ScalFun F;       // may be null (zero)
  ScalFun g;       // may be null (zero)
  double compat_tol = 1e-8;
};

struct CellSolveReport {
  double volume_integral = 0, boundary_integral = 0;
  double defect = 0;
  double weak_residual = 0;
};

Eigen::VectorXd solve_generic(const CellProblem& cp, SolveOptions opts = {},
                              CellSolveReport* report = nullptr, unsigned seed = 1);

// First-order cell functions.
std::vector<Eigen::VectorXd> solve_W(CellWorkspace& ws, const CoefficientSet& coeffs,
                                     const MacroPoint& at);
std::vector<Eigen::VectorXd> solve_Z(CellWorkspace& ws, const CoefficientSet& coeffs,
                                     const MacroPoint& at);

// Everything solve_second_order consumes, frozen at one macro point.
// Null x-derivative blocks mean the micro coefficients are x-constant.
struct SecondOrderInputs {
  int N = 1;
  Eigen::Matrix2d Estar;
  std::array<Eigen::MatrixXd, 2> Dstar;
  Eigen::MatrixXd Mbar, Kbar;
  Eigen::VectorXd Hbar;
  // x-derivatives d/dx_j of the first-order solves and effective tensors
  std::optional<std::array<std::vector<Eigen::VectorXd>, 2>> dW;  // [j][i] nodal
  std::optional<std::array<std::vector<Eigen::VectorXd>, 2>> dZ;  // [j][a*N+b] nodal
  std::array<Eigen::Matrix2d, 2> dEstar{Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero()};
  std::array<std::array<Eigen::MatrixXd, 2>, 2> dDstar;  // [j][i] NxN
  double defect_tol = 1e-6;
};

struct CellFunctions {
  MacroPoint at;
  int N = 1;
  std::vector<Eigen::VectorXd> W;   // d
  std::vector<Eigen::VectorXd> Z;   // N*N, index a*N+b
  std::vector<Eigen::VectorXd> P;   // N
  std::vector<Eigen::VectorXd> Q0;  // N*N
  std::vector<Eigen::VectorXd> R0;  // N*N
  std::vector<Eigen::VectorXd> Q1;  // d*N*N, index (i*N+a)*N+b
  std::vector<Eigen::VectorXd> R1;  // d*N*N, identically zero
  std::vector<Eigen::VectorXd> Q2;  // d*d, index i*d+j
};

void solve_second_order(CellWorkspace& ws, const CoefficientSet& coeffs, const MacroPoint& at,
                        const SecondOrderInputs& in, CellFunctions& out);

// Full pipeline at one macro point: W, Z, effective tensors, averages,
// and the second-order family (with finite-difference x-derivative
// re-solves when the micro coefficients depend on x).
struct EffectiveTensors;  // tensors.hpp
CellFunctions solve_cell_functions(const Mesh& cell, const CoefficientSet& coeffs,
                                   const MacroPoint& at, SolveOptions opts,
                                   EffectiveTensors* tensors_out = nullptr);

}  // namespace homog
