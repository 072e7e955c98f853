#include "homog/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <unordered_map>

#include "homog/common.hpp"

namespace homog {

namespace {

constexpr double kMergeTol = 1e-9;

struct Key {
  long long x, y;
  bool operator==(const Key& o) const { return x == o.x && y == o.y; }
};
struct KeyHash {
  size_t operator()(const Key& k) const {
    return std::hash<long long>()(k.x * 1000003LL ^ k.y);
  }
};
Key quantize(const Vec2& p) {
  return {std::llround(p.x() / kMergeTol), std::llround(p.y() / kMergeTol)};
}

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

void finalize_metadata(Mesh& m) {
  m.element_areas.resize(m.tris.size());
  m.shape_grads.resize(m.tris.size());
  for (size_t e = 0; e < m.tris.size(); ++e) {
    const Vec2& p0 = m.nodes[m.tris[e][0]];
    const Vec2& p1 = m.nodes[m.tris[e][1]];
    const Vec2& p2 = m.nodes[m.tris[e][2]];
    double area = signed_area(p0, p1, p2);
    if (area <= 0)
      numeric_error("mesh element " + std::to_string(e) + " has non-positive area " +
                    fmt_g(area));
    m.element_areas[e] = area;
    // grad of barycentric basis: rotate opposite edge by 90 degrees / (2A)
    auto edge_grad = [&](const Vec2& a, const Vec2& b) -> Vec2 {
      return Vec2(a.y() - b.y(), b.x() - a.x()) / (2.0 * area);
    };
    m.shape_grads[e] = {edge_grad(p1, p2), edge_grad(p2, p0), edge_grad(p0, p1)};
  }
}

// Boundary edges = edges adjacent to exactly one triangle. An edge is
// external iff both endpoints lie on the outer square; everything else
// is a hole boundary (assumption: holes never touch the outer boundary).
void collect_boundary(Mesh& m) {
  std::map<std::pair<int, int>, int> count;
  for (const auto& t : m.tris)
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      count[{a, b}]++;
    }
  m.boundary_edges.clear();
  for (const auto& [edge, c] : count) {
    if (c != 1) continue;
    BoundaryEdge be;
    be.a = edge.first;
    be.b = edge.second;
    bool ext = m.on_outer_boundary(be.a) && m.on_outer_boundary(be.b);
    be.tag = ext ? EdgeTag::external : EdgeTag::internal;
    m.boundary_edges.push_back(be);
  }
}

}  // namespace

void CellSpec::validate() const {
  if (resolution < 2) config_error("cell resolution must be at least 2");
  if (hole_shape == HoleShape::none) return;
  if (!(hole_radius > 0 && hole_radius < 0.5))
    config_error("hole radius must lie in (0, 0.5), got " + fmt_g(hole_radius));
  for (int k = 0; k < 2; ++k) {
    if (!(hole_center[k] - hole_radius > 0 && hole_center[k] + hole_radius < 1))
      config_error("hole must be strictly interior to the unit cell");
  }
}

int DomainSpec::tiles() const {
  if (!(epsilon > 0) || epsilon > 1) config_error("epsilon must lie in (0, 1]");
  double inv = 1.0 / epsilon;
  int n = static_cast<int>(std::lround(inv));
  if (n < 1 || std::abs(inv - n) > 1e-9 * inv)
    config_error("1/epsilon must be an integer so cells tile the domain; got epsilon = " +
                 fmt_g(epsilon));
  return n;
}

void DomainSpec::validate() const { (void)tiles(); }

double Mesh::total_area() const {
  double a = 0;
  for (double v : element_areas) a += v;
  return a;
}

std::array<Vec2, 3> Mesh::quad_points(int e) const {
  const Vec2& p0 = nodes[tris[e][0]];
  const Vec2& p1 = nodes[tris[e][1]];
  const Vec2& p2 = nodes[tris[e][2]];
  return {0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p2 + p0)};
}

bool Mesh::on_outer_boundary(int node, double tol) const {
  const Vec2& p = nodes[node];
  return p.x() < tol || p.x() > 1 - tol || p.y() < tol || p.y() > 1 - tol;
}

std::vector<int> Mesh::external_boundary_nodes() const {
  std::vector<char> mark(nodes.size(), 0);
  for (const auto& be : boundary_edges)
    if (be.tag == EdgeTag::external) mark[be.a] = mark[be.b] = 1;
  std::vector<int> out;
  for (size_t i = 0; i < mark.size(); ++i)
    if (mark[i]) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> Mesh::internal_boundary_nodes() const {
  std::vector<char> mark(nodes.size(), 0);
  for (const auto& be : boundary_edges)
    if (be.tag == EdgeTag::internal) mark[be.a] = mark[be.b] = 1;
  std::vector<int> out;
  for (size_t i = 0; i < mark.size(); ++i)
    if (mark[i]) out.push_back(static_cast<int>(i));
  return out;
}

Mesh build_cell_mesh(const CellSpec& spec) {
  spec.validate();
  const int n = spec.resolution;
  const double h = 1.0 / n;

  Mesh m;
  m.cell_size = h;

  std::vector<Vec2> grid((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) grid[j * (n + 1) + i] = Vec2(i * h, j * h);

  auto gid = [&](int i, int j) { return j * (n + 1) + i; };

  const bool holed = spec.hole_shape == HoleShape::disk;
  const Vec2 c = spec.hole_center;
  const double r = spec.hole_radius;

  std::vector<char> inside(grid.size(), 0);
  if (holed)
    for (size_t k = 0; k < grid.size(); ++k)
      inside[k] = (grid[k] - c).norm() < r - 1e-12;

  // Structured triangulation, lower-left to upper-right diagonal. This
  // split is invariant under the swap (y1,y2) -> (y2,y1), which the
  // cell-function symmetry checks rely on.
  std::vector<std::array<int, 3>> tris;
  tris.reserve(2 * n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      int v00 = gid(i, j), v10 = gid(i + 1, j), v01 = gid(i, j + 1), v11 = gid(i + 1, j + 1);
      tris.push_back({v00, v10, v11});
      tris.push_back({v00, v11, v01});
    }

  // Drop elements fully inside the disk, snap the remaining interior
  // nodes radially onto the circle.
  std::vector<std::array<int, 3>> kept;
  if (holed) {
    for (const auto& t : tris) {
      int in = inside[t[0]] + inside[t[1]] + inside[t[2]];
      if (in == 3) continue;
      kept.push_back(t);
    }
    // snap to the circle only the interior nodes that survive in cut
    // elements; deeper nodes are orphaned and dropped below
    std::vector<char> referenced(grid.size(), 0);
    for (const auto& t : kept)
      for (int v : t) referenced[v] = 1;
    for (size_t k = 0; k < grid.size(); ++k)
      if (inside[k] && referenced[k]) {
        Vec2 d = grid[k] - c;
        double len = d.norm();
        if (len < 1e-14) numeric_error("hole center coincides with a grid node; shift center");
        grid[k] = c + d * (r / len);
      }
    // drop residual zero-area caps: all three nodes on the circle with
    // centroid inside the disk
    std::vector<std::array<int, 3>> kept2;
    for (const auto& t : kept) {
      bool all_on = true;
      for (int v : t) all_on &= std::abs((grid[v] - c).norm() - r) < 1e-12;
      Vec2 centroid = (grid[t[0]] + grid[t[1]] + grid[t[2]]) / 3.0;
      if (all_on && (centroid - c).norm() < r) continue;
      kept2.push_back(t);
    }
    kept.swap(kept2);
  } else {
    kept.swap(tris);
  }

  // Compact node numbering, merging coincident nodes: a snapped interior
  // node can land exactly on a grid node that already sits on the circle
  // (shared radial ray). The collapsed elements are dropped, which is a
  // conforming edge collapse.
  std::vector<int> remap(grid.size(), -1);
  std::unordered_map<Key, int, KeyHash> merged;
  for (const auto& t : kept)
    for (int v : t)
      if (remap[v] < 0) {
        Key key = quantize(grid[v]);
        auto it = merged.find(key);
        if (it != merged.end()) {
          remap[v] = it->second;
        } else {
          remap[v] = m.n_nodes();
          merged.emplace(key, remap[v]);
          m.nodes.push_back(grid[v]);
        }
      }
  for (auto t : kept) {
    int a = remap[t[0]], b = remap[t[1]], c2 = remap[t[2]];
    if (a == b || b == c2 || a == c2) continue;  // collapsed by the merge
    m.tris.push_back({a, b, c2});
  }
  // merging may orphan nodes whose every element collapsed; renumber
  {
    std::vector<int> used(m.nodes.size(), -1);
    std::vector<Vec2> packed;
    for (auto& t : m.tris)
      for (int& v : t) {
        if (used[v] < 0) {
          used[v] = static_cast<int>(packed.size());
          packed.push_back(m.nodes[v]);
        }
        v = used[v];
      }
    m.nodes.swap(packed);
  }

  if (holed) {
    m.hole_centers.push_back(c);
    m.hole_radius = r;
  }

  finalize_metadata(m);
  collect_boundary(m);

  if (holed) {
    int hole_nodes = static_cast<int>(m.internal_boundary_nodes().size());
    if (hole_nodes < 8)
      config_error("resolution too coarse to resolve the hole: only " +
                   std::to_string(hole_nodes) + " boundary nodes (need at least 8)");
  }

  // periodic pairing: right face -> left face, top face -> bottom face,
  // resolved transitively so no node is both master and slave
  std::unordered_map<Key, int, KeyHash> lookup;
  for (int i = 0; i < m.n_nodes(); ++i) lookup[quantize(m.nodes[i])] = i;
  auto find_node = [&](const Vec2& p) {
    auto it = lookup.find(quantize(p));
    if (it == lookup.end())
      numeric_error("periodic partner not found for node at (" + fmt_g(p.x()) + ", " +
                    fmt_g(p.y()) + ")");
    return it->second;
  };

  m.periodic_master.assign(m.n_nodes(), -1);
  const double tol = 1e-12;
  for (int i = 0; i < m.n_nodes(); ++i) {
    const Vec2& p = m.nodes[i];
    if (p.x() > 1 - tol) m.periodic_master[i] = find_node(Vec2(0.0, p.y()));
  }
  for (int i = 0; i < m.n_nodes(); ++i) {
    const Vec2& p = m.nodes[i];
    if (p.y() > 1 - tol && m.periodic_master[i] < 0)
      m.periodic_master[i] = find_node(Vec2(p.x(), 0.0));
  }
  for (int i = 0; i < m.n_nodes(); ++i) {  // path-compress chains like (1,1)->(0,1)->(0,0)
    int mst = m.periodic_master[i];
    while (mst >= 0 && m.periodic_master[mst] >= 0) mst = m.periodic_master[mst];
    if (m.periodic_master[i] >= 0) m.periodic_master[i] = mst;
  }

  return m;
}

Mesh build_perforated_domain_mesh(const DomainSpec& dspec, const CellSpec& cspec) {
  const int n = dspec.tiles();
  Mesh cell = build_cell_mesh(cspec);

  Mesh m;
  m.cell_size = cell.cell_size * dspec.epsilon;
  m.hole_radius = cell.hole_radius * dspec.epsilon;

  const double eps = dspec.epsilon;
  std::unordered_map<Key, int, KeyHash> lookup;
  auto add_node = [&](const Vec2& p) {
    Key k = quantize(p);
    auto it = lookup.find(k);
    if (it != lookup.end()) return it->second;
    int id = m.n_nodes();
    m.nodes.push_back(p);
    lookup.emplace(k, id);
    return id;
  };

  for (int kj = 0; kj < n; ++kj)
    for (int ki = 0; ki < n; ++ki) {
      Vec2 shift(ki, kj);
      std::vector<int> remap(cell.n_nodes());
      for (int i = 0; i < cell.n_nodes(); ++i)
        remap[i] = add_node(eps * (cell.nodes[i] + shift));
      for (const auto& t : cell.tris)
        m.tris.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
      for (const Vec2& hc : cell.hole_centers) m.hole_centers.push_back(eps * (hc + shift));
    }

  m.periodic_master.assign(m.n_nodes(), -1);
  finalize_metadata(m);
  collect_boundary(m);
  return m;
}

double integrate(const Mesh& mesh, const Eigen::VectorXd& nodal) {
  if (nodal.size() != mesh.n_nodes())
    config_error("integrate: field has " + std::to_string(nodal.size()) + " entries, mesh has " +
                 std::to_string(mesh.n_nodes()) + " nodes");
  double s = 0;
  for (int e = 0; e < mesh.n_tris(); ++e) {
    const auto& t = mesh.tris[e];
    // edge-midpoint rule: midpoint values of a P1 field are averages of nodal pairs
    double q = 0.5 * (nodal[t[0]] + nodal[t[1]]) + 0.5 * (nodal[t[1]] + nodal[t[2]]) +
               0.5 * (nodal[t[2]] + nodal[t[0]]);
    s += mesh.element_areas[e] / 3.0 * q;
  }
  return s;
}

double integrate(const Mesh& mesh, const std::function<double(const Vec2&)>& f) {
  double s = 0;
  for (int e = 0; e < mesh.n_tris(); ++e) {
    auto qp = mesh.quad_points(e);
    s += mesh.element_areas[e] / 3.0 * (f(qp[0]) + f(qp[1]) + f(qp[2]));
  }
  return s;
}

double integrate_product(const Mesh& mesh, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != mesh.n_nodes() || v.size() != mesh.n_nodes())
    config_error("integrate_product: field size does not match mesh");
  double s = 0;
  for (int e = 0; e < mesh.n_tris(); ++e) {
    const auto& t = mesh.tris[e];
    double q = 0;
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      q += 0.25 * (u[a] + u[b]) * (v[a] + v[b]);
    }
    s += mesh.element_areas[e] / 3.0 * q;
  }
  return s;
}

void export_mesh(const Mesh& mesh, std::ostream& out) {
  out << "nodes " << mesh.n_nodes() << "\n";
  for (const Vec2& p : mesh.nodes) out << fmt_g(p.x()) << " " << fmt_g(p.y()) << "\n";
  out << "triangles " << mesh.n_tris() << "\n";
  for (const auto& t : mesh.tris) out << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "boundary_edges " << mesh.boundary_edges.size() << "\n";
  for (const auto& be : mesh.boundary_edges)
    out << be.a << " " << be.b << " "
        << (be.tag == EdgeTag::internal ? "internal" : "external") << "\n";
}

MeshLocator::MeshLocator(const Mesh& mesh) : mesh_(mesh) {
  lo_ = Vec2(1e300, 1e300);
  hi_ = Vec2(-1e300, -1e300);
  for (const Vec2& p : mesh.nodes) {
    lo_ = lo_.cwiseMin(p);
    hi_ = hi_.cwiseMax(p);
  }
  int target = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.n_tris()) / 2)));
  nx_ = ny_ = target;
  buckets_.assign(static_cast<size_t>(nx_) * ny_, {});
  Vec2 span = (hi_ - lo_).cwiseMax(Vec2(1e-12, 1e-12));
  auto bx = [&](double x) {
    return std::clamp(static_cast<int>((x - lo_.x()) / span.x() * nx_), 0, nx_ - 1);
  };
  auto by = [&](double y) {
    return std::clamp(static_cast<int>((y - lo_.y()) / span.y() * ny_), 0, ny_ - 1);
  };
  for (int e = 0; e < mesh.n_tris(); ++e) {
    Vec2 tlo(1e300, 1e300), thi(-1e300, -1e300);
    for (int v : mesh.tris[e]) {
      tlo = tlo.cwiseMin(mesh.nodes[v]);
      thi = thi.cwiseMax(mesh.nodes[v]);
    }
    for (int j = by(tlo.y()); j <= by(thi.y()); ++j)
      for (int i = bx(tlo.x()); i <= bx(thi.x()); ++i)
        buckets_[static_cast<size_t>(j) * nx_ + i].push_back(e);
  }
  node_grid_.assign(buckets_.size(), -1);
  for (int v = 0; v < mesh.n_nodes(); ++v) {
    int b = bucket_of(mesh.nodes[v].x(), mesh.nodes[v].y());
    node_grid_[b] = v;  // any representative per bucket
  }
}

int MeshLocator::bucket_of(double x, double y) const {
  Vec2 span = (hi_ - lo_).cwiseMax(Vec2(1e-12, 1e-12));
  int i = std::clamp(static_cast<int>((x - lo_.x()) / span.x() * nx_), 0, nx_ - 1);
  int j = std::clamp(static_cast<int>((y - lo_.y()) / span.y() * ny_), 0, ny_ - 1);
  return j * nx_ + i;
}

bool MeshLocator::locate(const Vec2& p, Hit& hit, double snap) const {
  // search the containing bucket ring by ring
  Vec2 span = (hi_ - lo_).cwiseMax(Vec2(1e-12, 1e-12));
  int ci = std::clamp(static_cast<int>((p.x() - lo_.x()) / span.x() * nx_), 0, nx_ - 1);
  int cj = std::clamp(static_cast<int>((p.y() - lo_.y()) / span.y() * ny_), 0, ny_ - 1);
  for (int ring = 0; ring <= 2; ++ring) {
    for (int j = std::max(0, cj - ring); j <= std::min(ny_ - 1, cj + ring); ++j)
      for (int i = std::max(0, ci - ring); i <= std::min(nx_ - 1, ci + ring); ++i) {
        if (std::max(std::abs(i - ci), std::abs(j - cj)) != ring) continue;
        for (int e : buckets_[static_cast<size_t>(j) * nx_ + i]) {
          const auto& t = mesh_.tris[e];
          const Vec2 &a = mesh_.nodes[t[0]], &b = mesh_.nodes[t[1]], &c = mesh_.nodes[t[2]];
          double A = mesh_.element_areas[e];
          double w0 = signed_area(p, b, c) / A;
          double w1 = signed_area(a, p, c) / A;
          double w2 = signed_area(a, b, p) / A;
          if (w0 >= -1e-10 && w1 >= -1e-10 && w2 >= -1e-10) {
            hit.tri = e;
            hit.node = -1;
            hit.bary = {w0, w1, w2};
            return true;
          }
        }
      }
  }
  // nearest-node fallback for points sitting exactly on a hole chord
  int best = -1;
  double bestd = snap;
  for (int ring = 0; ring <= 2 && best < 0; ++ring)
    for (int j = std::max(0, cj - ring); j <= std::min(ny_ - 1, cj + ring); ++j)
      for (int i = std::max(0, ci - ring); i <= std::min(nx_ - 1, ci + ring); ++i)
        for (int e : buckets_[static_cast<size_t>(j) * nx_ + i])
          for (int v : mesh_.tris[e]) {
            double d = (mesh_.nodes[v] - p).norm();
            if (d < bestd) {
              bestd = d;
              best = v;
            }
          }
  if (best >= 0) {
    hit.tri = -1;
    hit.node = best;
    return true;
  }
  return false;
}

double MeshLocator::interpolate(const Hit& hit, const Eigen::VectorXd& nodal) const {
  if (hit.tri < 0) return nodal[hit.node];
  const auto& t = mesh_.tris[hit.tri];
  return hit.bary[0] * nodal[t[0]] + hit.bary[1] * nodal[t[1]] + hit.bary[2] * nodal[t[2]];
}

}  // namespace homog
