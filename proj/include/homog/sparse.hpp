#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <iosfwd>
#include <memory>
#include <vector>

namespace homog {

// Triplet-buffered sparse matrix; finalize() sums duplicates and drops
// explicit zeros, after which the compressed form is immutable.
class SparseMatrix {
 public:
  SparseMatrix(int rows = 0, int cols = 0) : rows_(rows), cols_(cols) {}

  void add(int r, int c, double v) { trips_.emplace_back(r, c, v); }
  void finalize();
  bool finalized() const { return finalized_; }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const Eigen::SparseMatrix<double>& compressed() const;

  void dump_coordinate(std::ostream& out) const;  // "row col value" per entry

 private:
  int rows_, cols_;
  std::vector<Eigen::Triplet<double>> trips_;
  Eigen::SparseMatrix<double> mat_;
  bool finalized_ = false;
};

enum class ConstraintKind { none, zero_mean, dirichlet };

// zero_mean: bordered (saddle) system with a single Lagrange multiplier
//            enforcing weights . x = 0.
// dirichlet: listed rows are replaced by identity rows; rhs entries get
//            the prescribed values.
struct Constraint {
  ConstraintKind kind = ConstraintKind::none;
  Eigen::VectorXd weights;             // zero_mean
  std::vector<int> nodes;              // dirichlet rows
  Eigen::VectorXd dirichlet_values;    // same length as nodes (or empty = 0)
};

struct LinearSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  Constraint constraint;
};

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = 0;           // 0 -> 10 * dimension
  bool force_iterative = false;
  int direct_limit = 20000;   // direct factorization up to this dimension
};

struct SolveStats {
  bool direct = false;
  int iterations = 0;
  double residual = 0;  // verified post hoc, ||Ax-b|| / ||b|| of the solved (modified) system
};

// Reusable solver: factorize once (or keep an iterative context with
// warm starts) and solve many right-hand sides against the same
// constrained operator.
class LinearSolver {
 public:
  LinearSolver(const SparseMatrix& matrix, const Constraint& constraint,
               SolveOptions opts = {});
  ~LinearSolver();
  LinearSolver(LinearSolver&&) noexcept;
  LinearSolver& operator=(LinearSolver&&) noexcept;

  // rhs in the unconstrained numbering; returns solution of the same size.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, SolveStats* stats = nullptr,
                        const Eigen::VectorXd* warm_start = nullptr) const;

  int dimension() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot convenience wrapper implementing the module contract.
Eigen::VectorXd solve(LinearSystem& sys, SolveOptions opts = {}, SolveStats* stats = nullptr);

}  // namespace homog
