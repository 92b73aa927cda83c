#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "dgflow/error.hpp"
#include "dgflow/mesh.hpp"

using namespace dgflow;

namespace {

// Longest edge per element, recomputed straight from the coordinates.
double brute_h_max(const Mesh& m) {
  double h = 0.0;
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const auto v = m.element_vertices(e);
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = i + 1; j < v.size(); ++j) h = std::max(h, norm(m.vertex(v[i]) - m.vertex(v[j])));
  }
  return h;
}

Vec2 edge_midpoint(const Mesh& m, const Edge& e) {
  return 0.5 * (m.vertex(e.vertices[0]) + m.vertex(e.vertices[1]));
}

void check_topology(const Mesh& m) {
  for (std::size_t k = 0; k < m.num_edges(); ++k) {
    const Edge& e = m.edge(k);
    CHECK(std::abs(norm(e.normal) - 1.0) < 1e-14);
    if (m.dimension() == 2) {
      const Vec2 d = m.vertex(e.vertices[1]) - m.vertex(e.vertices[0]);
      CHECK(std::abs(dot(d, e.normal)) <= 1e-12 * norm(d));
    }
    const Vec2 mid = edge_midpoint(m, e);
    CHECK(dot(e.normal, mid - m.centroid(e.elements[0])) > 0.0);
    if (!e.is_boundary()) {
      CHECK(e.elements[0] < e.elements[1]);
      CHECK(dot(e.normal, m.centroid(e.elements[1]) - mid) > 0.0);
      CHECK(e.tag == BoundaryTag::interior);
    } else {
      CHECK(e.tag != BoundaryTag::interior);
    }
    for (int s = 0; s < (e.is_boundary() ? 1 : 2); ++s) {
      const auto el = e.elements[static_cast<std::size_t>(s)];
      const auto local = m.element_edges(el);
      CHECK(local[static_cast<std::size_t>(e.local_index[static_cast<std::size_t>(s)])] == k);
    }
  }
  for (std::size_t el = 0; el < m.num_elements(); ++el) {
    const auto local = m.element_edges(el);
    std::set<std::size_t> distinct(local.begin(), local.end());
    CHECK(distinct.size() == local.size());
    for (std::size_t k : local) {
      const Edge& e = m.edge(k);
      CHECK((e.elements[0] == el || e.elements[1] == el));
    }
  }
}

}  // namespace

TEST_CASE("interval mesh counts") {
  const Mesh m = generate_interval_mesh(10, 0.0, 1.0);
  CHECK(m.num_elements() == 10);
  CHECK(m.num_interior_edges() == 9);
  CHECK(m.num_boundary_edges() == 2);
  CHECK(m.h_max() == doctest::Approx(0.1).epsilon(1e-14));
  check_topology(m);

  const Mesh one = generate_interval_mesh(1, 0.0, 1.0);
  CHECK(one.num_elements() == 1);
  CHECK(one.num_interior_edges() == 0);
  CHECK(one.num_boundary_edges() == 2);

  CHECK(generate_interval_mesh(200, 0.0, 1.0).num_elements() == 200);
}

TEST_CASE("interval mesh rejects bad input") {
  CHECK_THROWS_AS(generate_interval_mesh(0, 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(generate_interval_mesh(4, 1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(generate_interval_mesh(4, 2.0, 1.0), InvalidArgument);
}

TEST_CASE("1D point edges carry unit normals") {
  const Mesh m = generate_interval_mesh(3, -1.0, 2.0);
  for (const auto& e : m.edges()) {
    CHECK(e.vertices[0] == e.vertices[1]);
    CHECK(std::abs(e.normal.x) == 1.0);
    CHECK(e.normal.y == 0.0);
  }
  CHECK(m.edge(m.element_edges(0)[0]).side == Side::left);
  CHECK(m.edge(m.element_edges(2)[1]).side == Side::right);
  CHECK(m.total_measure() == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("single cell split") {
  const Mesh m = generate_triangle_mesh(1, 1);
  CHECK(m.num_elements() == 2);
  CHECK(m.num_interior_edges() == 1);
  CHECK(m.num_boundary_edges() == 4);
  // the shared edge is the lower-left to upper-right diagonal
  const Edge& diag = m.edge(std::find_if(m.edges().begin(), m.edges().end(),
                                         [](const Edge& e) { return !e.is_boundary(); }) -
                            m.edges().begin());
  const Vec2 a = m.vertex(diag.vertices[0]), b = m.vertex(diag.vertices[1]);
  CHECK(std::abs(a.x - a.y) < 1e-15);
  CHECK(std::abs(b.x - b.y) < 1e-15);
  check_topology(m);
}

TEST_CASE("64x64 counts and Euler relation") {
  const Mesh m = generate_triangle_mesh(64, 64);
  // every cell contributes 2 faces; each face has 3 edges, boundary edges counted once
  const std::size_t faces = 2 * 64 * 64, boundary = 4 * 64;
  CHECK(m.num_vertices() == 4225);
  CHECK(m.num_elements() == faces);
  CHECK(m.num_boundary_edges() == boundary);
  CHECK(m.num_edges() == (3 * faces + boundary) / 2);
  CHECK(m.num_edges() == 12416);
  const long euler = static_cast<long>(m.num_vertices()) - static_cast<long>(m.num_edges()) +
                     static_cast<long>(m.num_elements());
  CHECK(euler == 1);
  CHECK(std::abs(m.total_measure() - 1.0) <= 1e-12);
  CHECK(std::abs(m.h_max() - brute_h_max(m)) <= 1e-14);
  for (double a : m.element_measures()) CHECK(a > 0.0);
  check_topology(m);
}

TEST_CASE("measures sum to the rectangle area") {
  const Mesh m = generate_triangle_mesh(7, 3, {-1.0, 2.5, 0.5, 1.25});
  CHECK(std::abs(m.total_measure() - 3.5 * 0.75) <= 1e-12);
  CHECK(std::abs(m.h_max() - brute_h_max(m)) <= 1e-14);
  check_topology(m);
}

TEST_CASE("triangle mesh rejects zero counts") {
  CHECK_THROWS_AS(generate_triangle_mesh(0, 3), InvalidArgument);
  CHECK_THROWS_AS(generate_triangle_mesh(3, 0), InvalidArgument);
}

TEST_CASE("generation is deterministic") {
  const Mesh a = generate_triangle_mesh(9, 5);
  const Mesh b = generate_triangle_mesh(9, 5);
  REQUIRE(a.num_edges() == b.num_edges());
  for (std::size_t k = 0; k < a.num_edges(); ++k) {
    CHECK(a.edge(k).vertices == b.edge(k).vertices);
    CHECK(a.edge(k).elements == b.edge(k).elements);
    CHECK(a.edge(k).normal == b.edge(k).normal);
  }
  CHECK(a.vertices() == b.vertices());
}

TEST_CASE("tag_boundary") {
  SUBCASE("1D endpoints") {
    const Mesh m = tag_boundary(generate_interval_mesh(5, 0.0, 1.0),
                                {{"left", BoundaryTag::dirichlet_1}, {"right", BoundaryTag::dirichlet_2}});
    for (const auto& e : m.edges()) {
      if (!e.is_boundary()) continue;
      CHECK(e.tag == (e.side == Side::left ? BoundaryTag::dirichlet_1 : BoundaryTag::dirichlet_2));
    }
  }
  SUBCASE("2D constant-solution layout") {
    const Mesh m = tag_boundary(generate_triangle_mesh(4, 4), {{"right", BoundaryTag::dirichlet_1},
                                                               {"bottom", BoundaryTag::dirichlet_2},
                                                               {"left", BoundaryTag::neumann},
                                                               {"top", BoundaryTag::neumann}});
    std::size_t d1 = 0, d2 = 0, nn = 0;
    for (const auto& e : m.edges()) {
      if (!e.is_boundary()) continue;
      d1 += e.tag == BoundaryTag::dirichlet_1;
      d2 += e.tag == BoundaryTag::dirichlet_2;
      nn += e.tag == BoundaryTag::neumann;
    }
    CHECK(d1 == 4);
    CHECK(d2 == 4);
    CHECK(nn == 8);
    CHECK(d1 + d2 + nn == m.num_boundary_edges());
  }
  SUBCASE("2D block layout") {
    const Mesh m = tag_boundary(generate_triangle_mesh(3, 2), {{"left", BoundaryTag::dirichlet_1},
                                                               {"right", BoundaryTag::dirichlet_2},
                                                               {"top", BoundaryTag::neumann},
                                                               {"bottom", BoundaryTag::neumann}});
    for (const auto& e : m.edges()) {
      if (e.side == Side::left) CHECK(e.tag == BoundaryTag::dirichlet_1);
      if (e.side == Side::top || e.side == Side::bottom) CHECK(e.tag == BoundaryTag::neumann);
    }
  }
  SUBCASE("errors") {
    const Mesh m = generate_triangle_mesh(2, 2);
    CHECK_THROWS_AS(tag_boundary(m, {{"left", BoundaryTag::neumann}, {"right", BoundaryTag::neumann},
                                     {"top", BoundaryTag::neumann}, {"north", BoundaryTag::neumann}}),
                    InvalidArgument);
    CHECK_THROWS_AS(tag_boundary(m, {{"left", BoundaryTag::neumann}, {"right", BoundaryTag::neumann}}),
                    InvalidArgument);
    CHECK_THROWS_AS(tag_boundary(generate_interval_mesh(2, 0, 1),
                                 {{"left", BoundaryTag::neumann}, {"right", BoundaryTag::neumann},
                                  {"top", BoundaryTag::neumann}}),
                    InvalidArgument);
  }
}

TEST_CASE("boundary tag names") {
  CHECK(parse_boundary_tag("dirichlet_2") == BoundaryTag::dirichlet_2);
  CHECK(to_string(BoundaryTag::generic_boundary) == "generic_boundary");
  CHECK_THROWS_AS(parse_boundary_tag("robin"), InvalidArgument);
}

TEST_CASE("invalid element geometry") {
  // clockwise triangle
  CHECK_THROWS_AS(Mesh(2, {{0, 0}, {0, 1}, {1, 0}}, {{0, 1, 2}}), InvalidMesh);
  // collinear triangle
  CHECK_THROWS_AS(Mesh(2, {{0, 0}, {1, 1}, {2, 2}}, {{0, 1, 2}}), InvalidMesh);
  CHECK_THROWS_AS(Mesh(2, {{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 5}}), InvalidMesh);
  CHECK_THROWS_AS(Mesh(1, {{0, 0}, {0, 0}}, {{0, 1, npos}}), InvalidMesh);
}

TEST_CASE("text format round trip") {
  const Mesh m = tag_boundary(generate_triangle_mesh(3, 2, {0.0, 1.0, 0.0, 0.3}),
                              {{"left", BoundaryTag::dirichlet_1}, {"right", BoundaryTag::dirichlet_2},
                               {"top", BoundaryTag::neumann}, {"bottom", BoundaryTag::generic_boundary}});
  std::stringstream ss;
  write_mesh(ss, m);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "2 12 10 12");
  ss.seekg(0);
  const Mesh r = read_mesh(ss);
  REQUIRE(r.num_edges() == m.num_edges());
  CHECK(r.vertices() == m.vertices());
  for (std::size_t k = 0; k < m.num_edges(); ++k) {
    CHECK(r.edge(k).tag == m.edge(k).tag);
    CHECK(r.edge(k).elements == m.edge(k).elements);
  }

  const Mesh l = tag_boundary(generate_interval_mesh(4, 0, 2),
                              {{"left", BoundaryTag::neumann}, {"right", BoundaryTag::dirichlet_1}});
  std::stringstream s1;
  write_mesh(s1, l);
  const Mesh l2 = read_mesh(s1);
  CHECK(l2.dimension() == 1);
  CHECK(l2.num_elements() == 4);
  CHECK(l2.edge(l2.element_edges(3)[1]).tag == BoundaryTag::dirichlet_1);
}

TEST_CASE("malformed mesh files") {
  std::stringstream bad_header("x y z");
  CHECK_THROWS_AS(read_mesh(bad_header), InvalidMesh);
  std::stringstream truncated("2 3 0 1\n0 0\n1 0\n");
  CHECK_THROWS_AS(read_mesh(truncated), InvalidMesh);
  std::stringstream bad_tag("1 2 1 1\n0\n1\n0 1\n0 0 wall\n");
  CHECK_THROWS_AS(read_mesh(bad_tag), InvalidArgument);
  std::stringstream not_boundary("2 4 1 2\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n0 2 neumann\n");
  CHECK_THROWS_AS(read_mesh(not_boundary), InvalidMesh);
}
