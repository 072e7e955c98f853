#include "homog/sparse.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <cmath>
#include <ostream>

#include "homog/common.hpp"

namespace homog {

void SparseMatrix::finalize() {
  if (finalized_) return;
  mat_.resize(rows_, cols_);
  mat_.setFromTriplets(trips_.begin(), trips_.end());  // sums duplicates
  mat_.prune(0.0, 0.0);                                // drop explicit zeros
  mat_.makeCompressed();
  trips_.clear();
  trips_.shrink_to_fit();
  finalized_ = true;
}

const Eigen::SparseMatrix<double>& SparseMatrix::compressed() const {
  if (!finalized_) config_error("SparseMatrix used before finalize()");
  return mat_;
}

void SparseMatrix::dump_coordinate(std::ostream& out) const {
  const auto& m = compressed();
  out << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
  for (int k = 0; k < m.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
      out << it.row() << " " << it.col() << " " << fmt_g(it.value(), 17) << "\n";
}

struct LinearSolver::Impl {
  Eigen::SparseMatrix<double> A;  // constrained operator (bordered / identity rows applied)
  Constraint constraint;
  SolveOptions opts;
  int n = 0;         // unconstrained dimension
  int nsys = 0;      // solved dimension (n, or n+1 for zero_mean)
  bool direct = false;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  mutable Eigen::BiCGSTAB<Eigen::SparseMatrix<double>,
                          Eigen::DiagonalPreconditioner<double>> bicg;
  mutable Eigen::VectorXd last_solution;  // warm start for successive solves

  Eigen::VectorXd make_rhs(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd b = rhs;
    if (constraint.kind == ConstraintKind::dirichlet) {
      for (size_t k = 0; k < constraint.nodes.size(); ++k)
        b[constraint.nodes[k]] =
            constraint.dirichlet_values.size() ? constraint.dirichlet_values[k] : 0.0;
    } else if (constraint.kind == ConstraintKind::zero_mean) {
      b.conservativeResize(nsys);
      b[nsys - 1] = 0.0;
    }
    return b;
  }
};

LinearSolver::LinearSolver(const SparseMatrix& matrix, const Constraint& constraint,
                           SolveOptions opts)
    : impl_(new Impl) {
  const Eigen::SparseMatrix<double>& M = matrix.compressed();
  if (M.rows() != M.cols()) config_error("solve: matrix must be square");
  impl_->constraint = constraint;
  impl_->opts = opts;
  impl_->n = static_cast<int>(M.rows());
  impl_->nsys = impl_->n;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(M.nonZeros() + impl_->n);
  switch (constraint.kind) {
    case ConstraintKind::none:
      impl_->A = M;
      break;
    case ConstraintKind::dirichlet: {
      std::vector<char> fixed(impl_->n, 0);
      for (int node : constraint.nodes) {
        if (node < 0 || node >= impl_->n) config_error("dirichlet node out of range");
        fixed[node] = 1;
      }
      for (int k = 0; k < M.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(M, k); it; ++it)
          if (!fixed[it.row()]) trips.emplace_back(it.row(), it.col(), it.value());
      for (int i = 0; i < impl_->n; ++i)
        if (fixed[i]) trips.emplace_back(i, i, 1.0);
      impl_->A.resize(impl_->n, impl_->n);
      impl_->A.setFromTriplets(trips.begin(), trips.end());
      break;
    }
    case ConstraintKind::zero_mean: {
      if (constraint.weights.size() != impl_->n)
        config_error("zero_mean weight vector size mismatch");
      impl_->nsys = impl_->n + 1;
      for (int k = 0; k < M.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(M, k); it; ++it)
          trips.emplace_back(it.row(), it.col(), it.value());
      for (int i = 0; i < impl_->n; ++i) {
        double w = constraint.weights[i];
        if (w != 0.0) {
          trips.emplace_back(i, impl_->n, w);
          trips.emplace_back(impl_->n, i, w);
        }
      }
      impl_->A.resize(impl_->nsys, impl_->nsys);
      impl_->A.setFromTriplets(trips.begin(), trips.end());
      break;
    }
  }
  impl_->A.makeCompressed();

  impl_->direct = !opts.force_iterative && impl_->nsys <= opts.direct_limit;
  if (impl_->direct) {
    impl_->lu.compute(impl_->A);
    if (impl_->lu.info() != Eigen::Success) {
      if (constraint.kind == ConstraintKind::none)
        numeric_error(
            "direct factorization failed: matrix is singular or structurally deficient "
            "(a pure-Neumann system needs a zero_mean constraint)");
      numeric_error("direct sparse factorization failed");
    }
    if (constraint.kind == ConstraintKind::none) {
      // A singular system with a compatible rhs still factors "successfully";
      // probe with a pseudo-random rhs, which is almost surely outside the
      // range of a singular operator.
      Eigen::VectorXd probe(impl_->nsys);
      unsigned state = 0x9e3779b9u;
      for (int i = 0; i < impl_->nsys; ++i) {
        state = state * 1664525u + 1013904223u;
        probe[i] = (state >> 8) * (1.0 / (1u << 24)) - 0.5;
      }
      Eigen::VectorXd z = impl_->lu.solve(probe);
      double rel = (impl_->A * z - probe).norm() / probe.norm();
      if (!z.allFinite() || rel > 1e-6)
        numeric_error(
            "matrix is singular: a pure-Neumann system needs a zero_mean constraint "
            "(probe residual " + fmt_g(rel) + ")");
    }
  } else {
    impl_->bicg.setTolerance(opts.tol);
    int maxit = opts.max_iter > 0 ? opts.max_iter : 10 * impl_->nsys;
    impl_->bicg.setMaxIterations(maxit);
    impl_->bicg.compute(impl_->A);
  }
}

LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

int LinearSolver::dimension() const { return impl_->n; }

Eigen::VectorXd LinearSolver::solve(const Eigen::VectorXd& rhs, SolveStats* stats,
                                    const Eigen::VectorXd* warm_start) const {
  if (rhs.size() != impl_->n) config_error("solve: rhs dimension mismatch");
  Eigen::VectorXd b = impl_->make_rhs(rhs);
  Eigen::VectorXd x;
  SolveStats st;
  st.direct = impl_->direct;

  if (impl_->direct) {
    x = impl_->lu.solve(b);
    if (impl_->lu.info() != Eigen::Success) numeric_error("direct sparse solve failed");
  } else {
    Eigen::VectorXd guess = Eigen::VectorXd::Zero(impl_->nsys);
    if (warm_start && warm_start->size() == impl_->n) guess.head(impl_->n) = *warm_start;
    else if (impl_->last_solution.size() == impl_->nsys) guess = impl_->last_solution;
    x = impl_->bicg.solveWithGuess(b, guess);
    st.iterations = static_cast<int>(impl_->bicg.iterations());
    if (impl_->bicg.info() != Eigen::Success) {
      double err = impl_->bicg.error();
      numeric_error("BiCGStab did not converge after " + std::to_string(st.iterations) +
                    " iterations (relative residual " + fmt_g(err) + ")");
    }
    impl_->last_solution = x;
  }

  // post-hoc residual verification with one matrix-vector product
  double bnorm = b.norm();
  double res = (impl_->A * x - b).norm();
  st.residual = bnorm > 0 ? res / bnorm : res;
  double accept = impl_->direct ? std::max(1e-8, impl_->opts.tol) : 50 * impl_->opts.tol;
  if (st.residual > accept) {
    if (impl_->constraint.kind == ConstraintKind::none)
      numeric_error("solve residual " + fmt_g(st.residual) +
                    " exceeds tolerance: system is singular or ill-conditioned "
                    "(a pure-Neumann system needs a zero_mean constraint)");
    numeric_error("solve residual " + fmt_g(st.residual) + " exceeds tolerance " +
                  fmt_g(accept));
  }
  if (stats) *stats = st;
  return x.head(impl_->n);
}

Eigen::VectorXd solve(LinearSystem& sys, SolveOptions opts, SolveStats* stats) {
  if (!sys.matrix.finalized()) sys.matrix.finalize();
  if (sys.rhs.size() != sys.matrix.rows()) config_error("solve: rhs dimension mismatch");
  LinearSolver solver(sys.matrix, sys.constraint, opts);
  return solver.solve(sys.rhs, stats);
}

}  // namespace homog
