#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "homog/geometry.hpp"

namespace homog {

// Node -> degree-of-freedom map. For periodic meshes, slave nodes share
// their master's dof, which realizes the periodic function space exactly.
struct DofMap {
  std::vector<int> dof;  // per node
  int n_dofs = 0;

  static DofMap identity(const Mesh& mesh);
  static DofMap periodic(const Mesh& mesh);
};

// Scatter a reduced dof vector back to nodal values (paired boundary
// nodes carry equal values by construction).
Eigen::VectorXd expand(const DofMap& map, const Eigen::VectorXd& reduced);

// Load vector of the constant-1 test function, lumped consistently with
// the assembly quadrature: w_a = integral of phi_a.
Eigen::VectorXd phi_weights(const Mesh& mesh, const DofMap& map);

// Scalar norms of nodal P1 fields (exact quadrature for the products).
double l2_norm_sq(const Mesh& mesh, const Eigen::VectorXd& nodal);
double h1_semi_norm_sq(const Mesh& mesh, const Eigen::VectorXd& nodal);

// Block variants: `field` holds N interleaved components (node*N + comp).
double l2_norm_sq_block(const Mesh& mesh, const Eigen::VectorXd& field, int N);
double h1_semi_norm_sq_block(const Mesh& mesh, const Eigen::VectorXd& field, int N);

// Elementwise gradient of a scalar nodal field.
Vec2 element_gradient(const Mesh& mesh, int e, const Eigen::VectorXd& nodal);

// Least-squares quadratic patch fit per node over the node star
// (extended to second neighbors where the star is too small). Used for
// gradient and Hessian recovery of macroscopic fields.
class PatchRecovery {
 public:
  explicit PatchRecovery(const Mesh& mesh);

  struct Fit {
    double value = 0;
    Vec2 grad{0, 0};
    Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
  };

  // fit at every node for the given scalar field
  std::vector<Fit> fit(const Eigen::VectorXd& nodal) const;

  // evaluate the recovered quadratic of the node nearest to x
  static double eval_value(const Fit& f, const Vec2& x0, const Vec2& x);
  static Vec2 eval_grad(const Fit& f, const Vec2& x0, const Vec2& x);

  const std::vector<std::vector<int>>& patches() const { return patch_; }

 private:
  const Mesh& mesh_;
  std::vector<std::vector<int>> patch_;                 // per node: fit support (incl. itself)
  std::vector<Eigen::MatrixXd> pinv_;                   // per node: 6 x |patch| LS pseudoinverse
};

}  // namespace homog
