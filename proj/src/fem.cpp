#include "homog/fem.hpp"

#include <set>

#include "homog/common.hpp"

namespace homog {

DofMap DofMap::identity(const Mesh& mesh) {
  DofMap m;
  m.dof.resize(mesh.n_nodes());
  for (int i = 0; i < mesh.n_nodes(); ++i) m.dof[i] = i;
  m.n_dofs = mesh.n_nodes();
  return m;
}

DofMap DofMap::periodic(const Mesh& mesh) {
  DofMap m;
  m.dof.assign(mesh.n_nodes(), -1);
  int next = 0;
  for (int i = 0; i < mesh.n_nodes(); ++i)
    if (mesh.periodic_master.empty() || mesh.periodic_master[i] < 0) m.dof[i] = next++;
  for (int i = 0; i < mesh.n_nodes(); ++i)
    if (m.dof[i] < 0) {
      int mst = mesh.periodic_master[i];
      if (mst < 0 || m.dof[mst] < 0) numeric_error("periodic dof map: unresolved master");
      m.dof[i] = m.dof[mst];
    }
  m.n_dofs = next;
  return m;
}

Eigen::VectorXd expand(const DofMap& map, const Eigen::VectorXd& reduced) {
  Eigen::VectorXd out(map.dof.size());
  for (size_t i = 0; i < map.dof.size(); ++i) out[static_cast<int>(i)] = reduced[map.dof[i]];
  return out;
}

Eigen::VectorXd phi_weights(const Mesh& mesh, const DofMap& map) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(map.n_dofs);
  for (int e = 0; e < mesh.n_tris(); ++e)
    for (int v : mesh.tris[e]) w[map.dof[v]] += mesh.element_areas[e] / 3.0;
  return w;
}

double l2_norm_sq(const Mesh& mesh, const Eigen::VectorXd& nodal) {
  return integrate_product(mesh, nodal, nodal);
}

double h1_semi_norm_sq(const Mesh& mesh, const Eigen::VectorXd& nodal) {
  double s = 0;
  for (int e = 0; e < mesh.n_tris(); ++e)
    s += mesh.element_areas[e] * element_gradient(mesh, e, nodal).squaredNorm();
  return s;
}

double l2_norm_sq_block(const Mesh& mesh, const Eigen::VectorXd& field, int N) {
  double s = 0;
  for (int e = 0; e < mesh.n_tris(); ++e) {
    const auto& t = mesh.tris[e];
    double q = 0;
    for (int a = 0; a < N; ++a)
      for (int k = 0; k < 3; ++k) {
        double mid = 0.5 * (field[t[k] * N + a] + field[t[(k + 1) % 3] * N + a]);
        q += mid * mid;
      }
    s += mesh.element_areas[e] / 3.0 * q;
  }
  return s;
}

double h1_semi_norm_sq_block(const Mesh& mesh, const Eigen::VectorXd& field, int N) {
  double s = 0;
  for (int e = 0; e < mesh.n_tris(); ++e) {
    const auto& t = mesh.tris[e];
    for (int a = 0; a < N; ++a) {
      Vec2 g = Vec2::Zero();
      for (int k = 0; k < 3; ++k) g += field[t[k] * N + a] * mesh.shape_grads[e][k];
      s += mesh.element_areas[e] * g.squaredNorm();
    }
  }
  return s;
}

Vec2 element_gradient(const Mesh& mesh, int e, const Eigen::VectorXd& nodal) {
  const auto& t = mesh.tris[e];
  Vec2 g = Vec2::Zero();
  for (int k = 0; k < 3; ++k) g += nodal[t[k]] * mesh.shape_grads[e][k];
  return g;
}

PatchRecovery::PatchRecovery(const Mesh& mesh) : mesh_(mesh) {
  std::vector<std::set<int>> ring(mesh.n_nodes());
  for (const auto& t : mesh.tris)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        if (a != b) ring[t[a]].insert(t[b]);

  patch_.resize(mesh.n_nodes());
  pinv_.resize(mesh.n_nodes());
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    std::set<int> support = ring[i];
    support.insert(i);
    if (support.size() < 8) {  // widen to second neighbors near boundaries
      std::set<int> wide = support;
      for (int j : support) wide.insert(ring[j].begin(), ring[j].end());
      support.swap(wide);
    }
    patch_[i].assign(support.begin(), support.end());
    if (patch_[i].size() < 6)
      numeric_error("patch recovery: node star too small for a quadratic fit");

    // monomial basis 1, dx, dy, dx^2/2, dx*dy, dy^2/2 around the node
    const int rows = static_cast<int>(patch_[i].size());
    Eigen::MatrixXd A(rows, 6);
    for (int r = 0; r < rows; ++r) {
      Vec2 dx = mesh.nodes[patch_[i][r]] - mesh.nodes[i];
      A(r, 0) = 1;
      A(r, 1) = dx.x();
      A(r, 2) = dx.y();
      A(r, 3) = 0.5 * dx.x() * dx.x();
      A(r, 4) = dx.x() * dx.y();
      A(r, 5) = 0.5 * dx.y() * dx.y();
    }
    pinv_[i] = (A.transpose() * A).ldlt().solve(A.transpose());
  }
}

std::vector<PatchRecovery::Fit> PatchRecovery::fit(const Eigen::VectorXd& nodal) const {
  std::vector<Fit> out(mesh_.n_nodes());
  for (int i = 0; i < mesh_.n_nodes(); ++i) {
    Eigen::VectorXd vals(patch_[i].size());
    for (size_t r = 0; r < patch_[i].size(); ++r) vals[static_cast<int>(r)] = nodal[patch_[i][r]];
    Eigen::VectorXd coef = pinv_[i] * vals;
    Fit f;
    f.value = coef[0];
    f.grad = Vec2(coef[1], coef[2]);
    f.hess << coef[3], coef[4], coef[4], coef[5];
    out[i] = f;
  }
  return out;
}

double PatchRecovery::eval_value(const Fit& f, const Vec2& x0, const Vec2& x) {
  Vec2 dx = x - x0;
  return f.value + f.grad.dot(dx) + 0.5 * dx.dot(f.hess * dx);
}

Vec2 PatchRecovery::eval_grad(const Fit& f, const Vec2& x0, const Vec2& x) {
  return f.grad + f.hess * (x - x0);
}

}  // namespace homog
