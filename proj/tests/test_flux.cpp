#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "dgflow/error.hpp"
#include "dgflow/flux.hpp"

using namespace dgflow;
using std::numbers::pi;

namespace {

BoundaryField constant(double c) {
  return [c](const Vec2&) { return c; };
}

MeshPtr square(std::size_t n, std::map<std::string, BoundaryTag> tags) {
  return std::make_shared<const Mesh>(tag_boundary(generate_triangle_mesh(n, n), tags));
}

// Varying kappa, mixed BCs, nonzero source: nothing cancels by symmetry.
FlowProblem generic_problem(int theta, int degree, double shift = 0.0) {
  FlowProblem p;
  p.mesh = square(4, {{"left", BoundaryTag::dirichlet_1}, {"right", BoundaryTag::dirichlet_2},
                      {"top", BoundaryTag::neumann}, {"bottom", BoundaryTag::neumann}});
  for (std::size_t e = 0; e < p.mesh->num_elements(); ++e)
    p.kappa.push_back({1.0 + 0.5 * static_cast<double>(e % 3), 1.0 + 0.25 * static_cast<double>(e % 5)});
  p.source = [](std::size_t, const Vec2& x) { return std::sin(3 * x.x) + x.y; };
  p.boundary[BoundaryTag::dirichlet_1] =
      BoundaryCondition::dirichlet([shift](const Vec2& x) { return x.y * x.y + shift; });
  p.boundary[BoundaryTag::dirichlet_2] = BoundaryCondition::dirichlet(constant(-1.0 + shift));
  p.boundary[BoundaryTag::neumann] = BoundaryCondition::neumann([](const Vec2& x) { return 0.3 * x.x; });
  p.theta = theta;
  p.degree = degree;
  return p;
}

double max_abs(const std::vector<long double>& v) {
  long double m = 0;
  for (auto x : v) m = std::max(m, std::abs(x));
  return static_cast<double>(m);
}

}  // namespace

TEST_CASE("constant pressure gives zero flux") {
  for (int k : {0, 1, 2}) {
    FlowProblem p;
    p.mesh = square(3, {{"left", BoundaryTag::dirichlet_1}, {"right", BoundaryTag::dirichlet_1},
                        {"top", BoundaryTag::dirichlet_1}, {"bottom", BoundaryTag::dirichlet_1}});
    p.boundary[BoundaryTag::dirichlet_1] = BoundaryCondition::dirichlet(constant(4.0));
    p.degree = k;
    p.theta = 0;
    const auto u = reconstruct_flux(solve_flow(p));
    CHECK(max_abs(u.ux) <= 1e-12);
    CHECK(max_abs(u.uy) <= 1e-12);
    CHECK(max_abs(u.edge_coeffs) <= 1e-12);
  }
}

TEST_CASE("1D sine problem: inflow flux at x = 0") {
  FlowProblem p;
  p.mesh = std::make_shared<const Mesh>(tag_boundary(generate_interval_mesh(100, 0.0, 1.0),
                                                     {{"left", BoundaryTag::dirichlet_1}, {"right", BoundaryTag::dirichlet_2}}));
  p.source = [](std::size_t, const Vec2& x) { return -(pi / 2) * std::sin(pi * x.x / 2); };
  p.boundary[BoundaryTag::dirichlet_1] = BoundaryCondition::dirichlet(constant(0.0));
  p.boundary[BoundaryTag::dirichlet_2] = BoundaryCondition::dirichlet(constant(-2.0 / pi));
  // k_p = 0 behaves like a two-point scheme with kappa_eff = penalty factor, so it is left out
  for (int theta : {-1, 0, 1}) {
    for (int k : {1, 2}) {
      p.theta = theta;
      p.degree = k;
      const auto u = reconstruct_flux(solve_flow(p));
      bool found = false;
      for (std::size_t i = 0; i < p.mesh->num_edges(); ++i) {
        const Edge& e = p.mesh->edge(i);
        if (p.mesh->vertex(e.vertices[0]).x != 0.0) continue;
        found = true;
        // stored relative to the outward normal -x
        CHECK(std::abs(u.edge_mean(i) * e.normal.x - 1.0) <= 0.05);
      }
      CHECK(found);
    }
  }
}

TEST_CASE("Neumann edges carry g_N") {
  for (int theta : {-1, 0, 1}) {
    const auto p = generic_problem(theta, 2);
    const auto u = reconstruct_flux(solve_flow(p));
    for (std::size_t i = 0; i < p.mesh->num_edges(); ++i) {
      const Edge& e = p.mesh->edge(i);
      if (e.tag != BoundaryTag::neumann) continue;
      const DgSpace space(p.mesh, 0);
      for (const auto& pt : space.edge_points(i, 6)) CHECK(u.normal_flux(i, pt.t) == doctest::Approx(0.3 * pt.x.x).epsilon(1e-13));
    }
  }
}

TEST_CASE("IIPG flux is conservative of degree k_p") {
  for (int k : {0, 1, 2}) {
    const auto u = reconstruct_flux(solve_flow(generic_problem(0, k)));
    for (int j = 0; j <= k; ++j) {
      const auto rep = check_local_conservation(u, j);
      CHECK_MESSAGE(rep.passed(), "k_p=" << k << " audit " << j << " max " << rep.max_residual);
    }
  }
}

TEST_CASE("NIPG passes degree 0 only") {
  const auto u = reconstruct_flux(solve_flow(generic_problem(1, 1)));
  CHECK(check_local_conservation(u, 0).max_residual <= 1e-10);
  CHECK(check_local_conservation(u, 1).max_residual > 1e-6);
}

TEST_CASE("every theta passes the degree-0 audit") {
  for (int theta : {-1, 0, 1})
    for (int k : {0, 1, 2, 3}) {
      const auto rep = check_local_conservation(reconstruct_flux(solve_flow(generic_problem(theta, k))), 0);
      CHECK_MESSAGE(rep.passed(), "theta=" << theta << " k_p=" << k << " max " << rep.max_residual);
    }
}

TEST_CASE("zero flux with zero source has zero residuals") {
  const auto mesh = square(3, {{"left", BoundaryTag::neumann}, {"right", BoundaryTag::neumann},
                               {"top", BoundaryTag::neumann}, {"bottom", BoundaryTag::neumann}});
  const auto u = NumericalFlux::from_functions(
      mesh, 2, 2, [](std::size_t, const Vec2&) { return Vec2{}; }, [](std::size_t, const Vec2&) { return 0.0; });
  for (int k : {0, 1, 3, 5}) {
    const auto rep = check_local_conservation(u, k);
    CHECK(rep.max_residual == 0.0);
    for (double r : rep.residuals) CHECK(r == 0.0);
  }
}

TEST_CASE("lower audit degrees pass whenever a higher one does") {
  // Nested test spaces: the residual can only grow with the audit degree.
  for (int theta : {-1, 0, 1}) {
    const auto u = reconstruct_flux(solve_flow(generic_problem(theta, 2)));
    double prev = -1.0;
    bool passed_above = true;
    for (int k = 3; k >= 0; --k) {
      const auto rep = check_local_conservation(u, k);
      if (passed_above && k < 3) CHECK(prev <= rep.tolerance);
      if (prev >= 0.0) CHECK(rep.max_residual <= prev * (1 + 1e-12) + 1e-14);
      passed_above = rep.passed();
      prev = rep.max_residual;
    }
  }
}

TEST_CASE("audit invariant under a constant pressure shift") {
  for (int theta : {-1, 0, 1}) {
    const auto a = reconstruct_flux(solve_flow(generic_problem(theta, 1)));
    const auto b = reconstruct_flux(solve_flow(generic_problem(theta, 1, 7.5)));
    for (int k : {0, 1}) {
      const auto ra = check_local_conservation(a, k);
      const auto rb = check_local_conservation(b, k);
      CHECK(ra.passed() == rb.passed());
      CHECK(std::abs(ra.max_residual - rb.max_residual) <= 1e-9 * std::max(1.0, ra.max_residual));
    }
    for (std::size_t i = 0; i < a.edge_coeffs.size(); ++i)
      CHECK(static_cast<double>(std::abs(a.edge_coeffs[i] - b.edge_coeffs[i])) <= 1e-9);
  }
}

TEST_CASE("report bookkeeping and CSV") {
  const auto u = reconstruct_flux(solve_flow(generic_problem(1, 1)));
  const auto rep = check_local_conservation(u, 1);
  double m = 0.0;
  for (double r : rep.residuals) {
    CHECK(r >= 0.0);
    m = std::max(m, r);
  }
  CHECK(rep.max_residual == m);
  CHECK(rep.residuals[rep.worst_element] == m);

  std::ostringstream os;
  write_conservation_csv(os, rep);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "element_id residual");
  std::size_t rows = 0;
  while (std::getline(is, line) && line[0] != '#') {
    std::istringstream ls(line);
    std::size_t id;
    double r;
    ls >> id >> r;
    CHECK(id == rows);
    CHECK(r == doctest::Approx(rep.residuals[rows]).epsilon(1e-15));
    ++rows;
  }
  CHECK(rows == rep.residuals.size());
  CHECK(line.find("# degree=1") == 0);
  CHECK(line.find("status=fail") != std::string::npos);
  CHECK_THROWS_AS(check_local_conservation(u, -1), InvalidArgument);
}
