#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace homog {

using Vec2 = Eigen::Vector2d;

enum class HoleShape { none, disk };

// Unit periodicity cell [0,1]^2, optionally perforated by a disk.
struct CellSpec {
  HoleShape hole_shape = HoleShape::none;
  Vec2 hole_center{0.5, 0.5};
  double hole_radius = 0.25;
  int resolution = 16;  // grid subdivisions per cell edge

  void validate() const;  // throws Error(config) on violated invariants
};

// Macroscopic domain (0,1)^2 tiled by cells of size epsilon = 1/n.
struct DomainSpec {
  double epsilon = 0.25;

  int tiles() const;      // 1/epsilon as an integer, throws if not integral
  void validate() const;
};

enum class EdgeTag { internal, external };  // internal = hole boundary, external = outer boundary

struct BoundaryEdge {
  int a = 0, b = 0;
  EdgeTag tag = EdgeTag::external;
};

// Immutable triangle mesh with P1 metadata. Periodic pairing is only
// populated for cell meshes; slave nodes map onto the master node with
// the same tangential coordinate on the opposite face.
struct Mesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> tris;
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<int> periodic_master;  // node -> master node, or -1
  std::vector<double> element_areas;
  std::vector<std::array<Vec2, 3>> shape_grads;  // P1 basis gradients per element

  // geometry provenance
  double cell_size = 1.0;  // edge length of one structured square
  std::vector<Vec2> hole_centers;
  double hole_radius = 0.0;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_tris() const { return static_cast<int>(tris.size()); }
  double total_area() const;

  // Degree-2 quadrature: the three edge midpoints with weight area/3.
  std::array<Vec2, 3> quad_points(int e) const;

  bool on_outer_boundary(int node, double tol = 1e-12) const;
  std::vector<int> external_boundary_nodes() const;
  std::vector<int> internal_boundary_nodes() const;
};

Mesh build_cell_mesh(const CellSpec& spec);
Mesh build_perforated_domain_mesh(const DomainSpec& dspec, const CellSpec& cspec);

// Quadrature of a nodal P1 field, a callable f(x), or a product of two
// nodal fields. Exact for polynomials up to degree 2.
double integrate(const Mesh& mesh, const Eigen::VectorXd& nodal);
double integrate(const Mesh& mesh, const std::function<double(const Vec2&)>& f);
double integrate_product(const Mesh& mesh, const Eigen::VectorXd& u, const Eigen::VectorXd& v);

void export_mesh(const Mesh& mesh, std::ostream& out);

// Point location with barycentric interpolation. Query points that fail
// location (e.g. exactly on a polygonal hole edge) fall back to the
// nearest node within `snap`; beyond that locate() returns false.
class MeshLocator {
 public:
  explicit MeshLocator(const Mesh& mesh);

  struct Hit {
    int tri = -1;               // -1 when resolved by nearest-node snap
    int node = -1;              // nearest node when tri == -1
    std::array<double, 3> bary{};
  };

  bool locate(const Vec2& p, Hit& hit, double snap = 1e-9) const;
  double interpolate(const Hit& hit, const Eigen::VectorXd& nodal) const;

 private:
  const Mesh& mesh_;
  int nx_ = 1, ny_ = 1;
  Vec2 lo_{0, 0}, hi_{1, 1};
  std::vector<std::vector<int>> buckets_;
  std::vector<int> node_grid_;  // nearest-node acceleration

  int bucket_of(double x, double y) const;
};

}  // namespace homog
