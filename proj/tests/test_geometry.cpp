#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "homog/common.hpp"
#include "homog/geometry.hpp"

using namespace homog;

namespace {
CellSpec disk_spec(int res, double r = 0.25) {
  CellSpec s;
  s.hole_shape = HoleShape::disk;
  s.hole_center = Vec2(0.5, 0.5);
  s.hole_radius = r;
  s.resolution = res;
  return s;
}
CellSpec plain_spec(int res) {
  CellSpec s;
  s.hole_shape = HoleShape::none;
  s.resolution = res;
  return s;
}
}  // namespace

TEST_CASE("unperforated 2x2 cell") {
  Mesh m = build_cell_mesh(plain_spec(2));
  CHECK(m.n_nodes() == 9);
  CHECK(m.n_tris() == 8);
  for (const auto& be : m.boundary_edges) CHECK(be.tag == EdgeTag::external);
  CHECK(m.total_area() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("perforated cell area and hole boundary") {
  Mesh m = build_cell_mesh(disk_spec(16));
  double exact = 1.0 - M_PI * 0.25 * 0.25;
  CHECK(m.total_area() == doctest::Approx(exact).epsilon(0.02));
  for (double a : m.element_areas) CHECK(a > 0);
  // hole boundary nodes sit exactly on the circle
  for (int v : m.internal_boundary_nodes())
    CHECK((m.nodes[v] - Vec2(0.5, 0.5)).norm() == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(m.internal_boundary_nodes().size() >= 8);
}

TEST_CASE("hole area error at least halves under refinement") {
  double exact = 1.0 - M_PI * 0.0625;
  double prev = -1;
  for (int res : {16, 32, 64}) {
    Mesh m = build_cell_mesh(disk_spec(res));
    double err = std::abs(m.total_area() - exact);
    if (prev > 0) CHECK(err < 0.55 * prev);
    prev = err;
  }
}

TEST_CASE("invalid cell specs are rejected") {
  CHECK_THROWS_AS(build_cell_mesh(disk_spec(16, 0.6)), Error);   // touches the boundary
  CHECK_THROWS_AS(build_cell_mesh(disk_spec(3, 0.25)), Error);   // under-resolved hole
  CellSpec off = disk_spec(16, 0.3);
  off.hole_center = Vec2(0.8, 0.5);  // 0.8 + 0.3 > 1
  CHECK_THROWS_AS(build_cell_mesh(off), Error);
}

TEST_CASE("periodic pairing invariants") {
  Mesh m = build_cell_mesh(disk_spec(16));
  int slaves = 0;
  for (int i = 0; i < m.n_nodes(); ++i) {
    int mst = m.periodic_master[i];
    if (mst < 0) continue;
    ++slaves;
    CHECK(m.periodic_master[mst] == -1);  // no node is both master and slave
    const Vec2 &s = m.nodes[i], &ma = m.nodes[mst];
    bool xpair = std::abs(s.x() - 1) < 1e-12 && std::abs(ma.x()) < 1e-12 &&
                 std::abs(s.y() - ma.y()) < 1e-9;
    bool ypair = std::abs(s.y() - 1) < 1e-12 && std::abs(ma.y()) < 1e-12 &&
                 std::abs(s.x() - ma.x()) < 1e-9;
    bool corner = (s - Vec2(1, 1)).norm() < 1e-12 && ma.norm() < 1e-12;
    CHECK((xpair || ypair || corner));
  }
  CHECK(slaves == 2 * 16 + 1);  // right and top faces plus the far corner
}

TEST_CASE("domain spec requires integer 1/eps") {
  DomainSpec d;
  d.epsilon = 1.0 / 3.0;
  CHECK(d.tiles() == 3);
  d.epsilon = 0.3;
  CHECK_THROWS_AS(d.tiles(), Error);
}

TEST_CASE("tiled perforated domain") {
  DomainSpec d;
  d.epsilon = 0.25;
  Mesh m = build_perforated_domain_mesh(d, disk_spec(8));
  CHECK(m.hole_centers.size() == 16);
  double exact = 1.0 - M_PI * 0.0625;  // porosity is scale invariant
  CHECK(m.total_area() == doctest::Approx(exact).epsilon(0.02));

  // all hole boundaries internal, the outer square external
  int internal_edges = 0, external_edges = 0;
  for (const auto& be : m.boundary_edges)
    (be.tag == EdgeTag::internal ? internal_edges : external_edges)++;
  CHECK(internal_edges > 0);
  CHECK(external_edges == 4 * 4 * 8);

  // no duplicate nodes within the merge tolerance
  std::set<std::pair<long long, long long>> seen;
  for (const Vec2& p : m.nodes)
    CHECK(seen.insert({std::llround(p.x() * 1e9), std::llround(p.y() * 1e9)}).second);
}

TEST_CASE("unperforated tiling reproduces the uniform grid count") {
  DomainSpec d;
  d.epsilon = 0.5;
  Mesh m = build_perforated_domain_mesh(d, plain_spec(4));
  CHECK(m.n_nodes() == 9 * 9);
  CHECK(m.n_tris() == 2 * 8 * 8);
  for (const auto& be : m.boundary_edges) CHECK(be.tag == EdgeTag::external);
}

TEST_CASE("integrate") {
  Mesh m = build_cell_mesh(plain_spec(8));
  Eigen::VectorXd one = Eigen::VectorXd::Ones(m.n_nodes());
  CHECK(integrate(m, one) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(integrate(m, [](const Vec2& p) { return p.x(); }) == doctest::Approx(0.5).epsilon(1e-12));
  // degree-2 exactness
  CHECK(integrate(m, [](const Vec2& p) { return p.x() * p.y(); }) ==
        doctest::Approx(0.25).epsilon(1e-12));

  Mesh holed = build_cell_mesh(disk_spec(16));
  Eigen::VectorXd oneh = Eigen::VectorXd::Ones(holed.n_nodes());
  CHECK(integrate(holed, oneh) == doctest::Approx(1.0 - M_PI / 16).epsilon(0.02));

  Eigen::VectorXd bad = Eigen::VectorXd::Ones(3);
  CHECK_THROWS_AS(integrate(m, bad), Error);
}

TEST_CASE("mesh export round trip sanity") {
  Mesh m = build_cell_mesh(disk_spec(8, 0.2));
  std::ostringstream os;
  export_mesh(m, os);
  std::string s = os.str();
  CHECK(s.find("nodes ") == 0);
  CHECK(s.find("triangles ") != std::string::npos);
  CHECK(s.find("internal") != std::string::npos);
  CHECK(s.find("external") != std::string::npos);
}

TEST_CASE("locator finds points and interpolates") {
  Mesh m = build_cell_mesh(disk_spec(16));
  MeshLocator loc(m);
  Eigen::VectorXd f(m.n_nodes());
  for (int i = 0; i < m.n_nodes(); ++i) f[i] = 2 * m.nodes[i].x() - m.nodes[i].y();
  MeshLocator::Hit hit;
  REQUIRE(loc.locate(Vec2(0.1234, 0.8765), hit));
  CHECK(loc.interpolate(hit, f) == doctest::Approx(2 * 0.1234 - 0.8765).epsilon(1e-12));
  // a point on the circle is still resolvable
  Vec2 on_circle = Vec2(0.5, 0.5) + 0.25 * Vec2(std::cos(0.3), std::sin(0.3));
  CHECK(loc.locate(on_circle, hit));
  // deep inside the hole: not locatable
  CHECK(!loc.locate(Vec2(0.5, 0.5), hit));
}
