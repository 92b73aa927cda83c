#include <cmath>
#include <random>

#include "doctest.h"
#include "dgflow/dg_space.hpp"
#include "dgflow/error.hpp"
#include "dgflow/fem.hpp"

using namespace dgflow;

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

// Exact monomial integrals over the reference cells.
double tri_monomial(int a, int b) { return factorial(a) * factorial(b) / factorial(a + b + 2); }
double seg_monomial(int a) { return 1.0 / (a + 1.0); }

double quad_monomial(const QuadratureRule& r, int a, int b) {
  double s = 0.0;
  for (std::size_t q = 0; q < r.size(); ++q) s += r.weights[q] * std::pow(r.points[q].x, a) * std::pow(r.points[q].y, b);
  return s;
}

Vec2 random_interior(std::mt19937& rng, CellKind kind) {
  std::uniform_real_distribution<double> u(0.02, 0.98);
  if (kind == CellKind::segment) return {u(rng), 0.0};
  for (;;) {
    Vec2 p{u(rng), u(rng)};
    if (p.x + p.y < 0.98) return p;
  }
}

}  // namespace

TEST_CASE("basis dimension") {
  CHECK(basis_dimension(0, CellKind::segment) == 1);
  CHECK(basis_dimension(3, CellKind::segment) == 4);
  CHECK(basis_dimension(2, CellKind::triangle) == 6);
  CHECK(basis_dimension(4, CellKind::triangle) == 15);
  CHECK_THROWS_AS(basis_dimension(-1, CellKind::triangle), InvalidArgument);
  CHECK_THROWS_AS(BasisSet(max_basis_degree + 1, CellKind::segment), CapabilityError);
}

TEST_CASE("degree zero is the constant") {
  for (auto kind : {CellKind::segment, CellKind::triangle}) {
    const BasisSet nodal(0, kind, BasisFamily::lagrange);
    for (const Vec2 p : {Vec2{0.1, 0.2}, Vec2{0.7, 0.05}, Vec2{0.0, 0.0}}) {
      const auto v = nodal.eval(p);
      REQUIRE(v.size() == 1);
      CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-14));
      const auto g = nodal.eval_gradient(p);
      CHECK(g[0].x == 0.0);
      CHECK(g[0].y == 0.0);
    }
  }
  const BasisSet modal(0, CellKind::segment);
  CHECK(modal.eval({0.3, 0.0})[0] == 1.0);
}

TEST_CASE("linear nodal basis at the segment midpoint") {
  const BasisSet b(1, CellKind::segment, BasisFamily::lagrange);
  const auto v = b.eval({0.5, 0.0});
  CHECK(v[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(0.5).epsilon(1e-14));
  // nodal property at the endpoints
  CHECK(std::abs(b.eval({0.0, 0.0})[0] - 1.0) < 1e-14);
  CHECK(std::abs(b.eval({0.0, 0.0})[1]) < 1e-14);
}

TEST_CASE("nodal triangle basis interpolates at its nodes") {
  const BasisSet b(2, CellKind::triangle, BasisFamily::lagrange);
  const Vec2 nodes[] = {{0, 0}, {0.5, 0}, {1, 0}, {0, 0.5}, {0.5, 0.5}, {0, 1}};
  for (std::size_t a = 0; a < 6; ++a) {
    const auto v = b.eval(nodes[a]);
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(v[i] - (i == a ? 1.0 : 0.0)) < 1e-12);
  }
}

TEST_CASE("orthonormal bases have identity Gram matrices") {
  for (auto kind : {CellKind::segment, CellKind::triangle}) {
    for (int k = 0; k <= 6; ++k) {
      const BasisSet b(k, kind);
      const auto& r = quadrature_rule(2 * k, kind);
      std::vector<double> gram(b.size() * b.size(), 0.0);
      for (std::size_t q = 0; q < r.size(); ++q) {
        const auto v = b.eval(r.points[q]);
        for (std::size_t i = 0; i < b.size(); ++i)
          for (std::size_t j = 0; j < b.size(); ++j) gram[i * b.size() + j] += r.weights[q] * v[i] * v[j];
      }
      for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) CHECK(std::abs(gram[i * b.size() + j] - (i == j)) < 1e-12);
    }
  }
}

TEST_CASE("k=2 triangle: monomial Gram entries rebuilt from basis coordinates") {
  // Coordinates of each monomial in the orthonormal basis; then <m1, m2> = sum_i c1_i c2_i.
  const BasisSet b(2, CellKind::triangle);
  const auto& r = quadrature_rule(4, CellKind::triangle);
  const int exps[6][2] = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  std::vector<std::vector<double>> coord(6, std::vector<double>(b.size(), 0.0));
  for (std::size_t q = 0; q < r.size(); ++q) {
    const auto v = b.eval(r.points[q]);
    for (int m = 0; m < 6; ++m) {
      const double mono = std::pow(r.points[q].x, exps[m][0]) * std::pow(r.points[q].y, exps[m][1]);
      for (std::size_t i = 0; i < b.size(); ++i) coord[static_cast<std::size_t>(m)][i] += r.weights[q] * mono * v[i];
    }
  }
  for (int m1 = 0; m1 < 6; ++m1) {
    for (int m2 = 0; m2 < 6; ++m2) {
      double s = 0.0;
      for (std::size_t i = 0; i < b.size(); ++i) s += coord[static_cast<std::size_t>(m1)][i] * coord[static_cast<std::size_t>(m2)][i];
      CHECK(s == doctest::Approx(tri_monomial(exps[m1][0] + exps[m2][0], exps[m1][1] + exps[m2][1])).epsilon(1e-13));
    }
  }
  // x^2 * y
  CHECK(tri_monomial(2, 1) == doctest::Approx(1.0 / 60.0).epsilon(1e-15));
}

TEST_CASE("hierarchical prefix spans lower degrees") {
  // the first dim P_1 functions of the degree-3 basis coincide with the degree-1 basis
  const BasisSet b3(3, CellKind::triangle), b1(1, CellKind::triangle);
  for (const Vec2 p : {Vec2{0.2, 0.3}, Vec2{0.6, 0.1}}) {
    const auto v3 = b3.eval(p), v1 = b1.eval(p);
    for (std::size_t i = 0; i < v1.size(); ++i) CHECK(v3[i] == doctest::Approx(v1[i]).epsilon(1e-14));
  }
}

TEST_CASE("basis gradients match central differences") {
  std::mt19937 rng(7);
  const double h = 1e-6;
  for (auto family : {BasisFamily::orthonormal, BasisFamily::lagrange}) {
    for (auto kind : {CellKind::segment, CellKind::triangle}) {
      for (int k = 0; k <= 4; ++k) {
        const BasisSet b(k, kind, family);
        for (int s = 0; s < 20; ++s) {
          const Vec2 p = random_interior(rng, kind);
          const auto g = b.eval_gradient(p);
          const auto xp = b.eval({p.x + h, p.y}), xm = b.eval({p.x - h, p.y});
          const auto yp = b.eval({p.x, p.y + h}), ym = b.eval({p.x, p.y - h});
          for (std::size_t i = 0; i < b.size(); ++i) {
            CHECK(std::abs(g[i].x - (xp[i] - xm[i]) / (2 * h)) <= 1e-6 * std::max(1.0, std::abs(g[i].x)));
            if (kind == CellKind::triangle) {
              CHECK(std::abs(g[i].y - (yp[i] - ym[i]) / (2 * h)) <= 1e-6 * std::max(1.0, std::abs(g[i].y)));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("linear basis gradients are constant") {
  for (auto family : {BasisFamily::orthonormal, BasisFamily::lagrange}) {
    const BasisSet b(1, CellKind::triangle, family);
    const auto g0 = b.eval_gradient({0.1, 0.1});
    const auto g1 = b.eval_gradient({0.5, 0.3});
    for (std::size_t i = 0; i < b.size(); ++i) {
      CHECK(std::abs(g0[i].x - g1[i].x) < 1e-13);
      CHECK(std::abs(g0[i].y - g1[i].y) < 1e-13);
    }
  }
}

TEST_CASE("quadrature rules") {
  const auto& mid = quadrature_rule(1, CellKind::triangle);
  CHECK(mid.size() == 1);
  CHECK(mid.weights[0] == 0.5);
  CHECK(std::abs(quad_monomial(quadrature_rule(4, CellKind::triangle), 4, 0) - 1.0 / 30.0) <= 1e-13);

  for (int order = 0; order <= max_quadrature_order; ++order) {
    for (auto kind : {CellKind::segment, CellKind::triangle}) {
      const auto& r = quadrature_rule(order, kind);
      CHECK(r.order == order);
      double sum = 0.0;
      for (double w : r.weights) {
        CHECK(w > 0.0);
        sum += w;
      }
      CHECK(std::abs(sum - reference_measure(kind)) <= 1e-14);
      for (int a = 0; a <= order; ++a) {
        if (kind == CellKind::segment) {
          CHECK(std::abs(quad_monomial(r, a, 0) - seg_monomial(a)) <= 1e-13 * seg_monomial(a));
          continue;
        }
        for (int b = 0; a + b <= order; ++b) {
          const double exact = tri_monomial(a, b);
          CHECK(std::abs(quad_monomial(r, a, b) - exact) <= 1e-13 * exact);
        }
      }
    }
  }
  CHECK_THROWS_AS(quadrature_rule(max_quadrature_order + 1, CellKind::triangle), CapabilityError);
  CHECK_THROWS_AS(quadrature_rule(-1, CellKind::segment), CapabilityError);
  // cached rules are shared
  CHECK(&quadrature_rule(6, CellKind::triangle) == &quadrature_rule(6, CellKind::triangle));
}

TEST_CASE("element maps") {
  const auto id = element_map({Vec2{0, 0}, Vec2{1, 0}, Vec2{0, 1}}, CellKind::triangle);
  CHECK(id.jacobian.a == 1.0);
  CHECK(id.jacobian.b == 0.0);
  CHECK(id.jacobian.c == 0.0);
  CHECK(id.jacobian.d == 1.0);
  CHECK(id.det == 1.0);

  const double h = 0.3;
  const auto right = element_map({Vec2{0, 0}, Vec2{h, 0}, Vec2{0, h}}, CellKind::triangle);
  CHECK(right.det == doctest::Approx(h * h).epsilon(1e-15));

  const std::array<Vec2, 3> tri{Vec2{0.2, 0.1}, Vec2{1.3, 0.4}, Vec2{0.5, 1.7}};
  const auto m = element_map(tri, CellKind::triangle);
  const double area = 0.5 * cross(tri[1] - tri[0], tri[2] - tri[0]);
  CHECK(m.det == doctest::Approx(area / 0.5).epsilon(1e-14));
  const Vec2 ref{0.25, 0.4};
  const Vec2 back = m.to_reference(m.to_physical(ref));
  CHECK(std::abs(back.x - ref.x) < 1e-14);
  CHECK(std::abs(back.y - ref.y) < 1e-14);

  // physical gradient of phi(F^{-1}(x)) against central differences in x
  const BasisSet b(3, CellKind::triangle);
  const double d = 1e-6;
  const Vec2 x = m.to_physical(ref);
  const auto g = b.eval_gradient(ref);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Vec2 pg = m.physical_gradient(g[i]);
    auto f = [&](Vec2 y) { return b.eval(m.to_reference(y))[i]; };
    const double fx = (f({x.x + d, x.y}) - f({x.x - d, x.y})) / (2 * d);
    const double fy = (f({x.x, x.y + d}) - f({x.x, x.y - d})) / (2 * d);
    CHECK(std::abs(pg.x - fx) <= 1e-6 * std::max(1.0, std::abs(fx)));
    CHECK(std::abs(pg.y - fy) <= 1e-6 * std::max(1.0, std::abs(fy)));
  }

  const auto seg = element_map({Vec2{0.5, 0}, Vec2{0.75, 0}, Vec2{}}, CellKind::segment);
  CHECK(seg.det == 0.25);
  CHECK(seg.to_physical({0.5, 0}).x == 0.625);

  CHECK_THROWS_AS(element_map({Vec2{0, 0}, Vec2{1, 1}, Vec2{2, 2}}, CellKind::triangle), InvalidMesh);
  CHECK_THROWS_AS(element_map({Vec2{0, 0}, Vec2{0, 1}, Vec2{1, 0}}, CellKind::triangle), InvalidMesh);
  CHECK_THROWS_AS(element_map({Vec2{1, 0}, Vec2{0, 0}, Vec2{}}, CellKind::segment), InvalidMesh);
}

TEST_CASE("physical mass matrices are identities (hence SPD)") {
  auto mesh = std::make_shared<const Mesh>(generate_triangle_mesh(3, 2, {0.0, 2.0, -1.0, 0.5}));
  for (int k = 0; k <= 3; ++k) {
    const DgSpace space(mesh, k);
    const auto& t = space.volume_table(2 * k);
    for (std::size_t e = 0; e < mesh->num_elements(); ++e) {
      for (std::size_t i = 0; i < t.nbasis; ++i) {
        for (std::size_t j = 0; j < t.nbasis; ++j) {
          double s = 0.0;
          for (std::size_t q = 0; q < t.rule->size(); ++q)
            s += t.rule->weights[q] * space.map(e).det * space.table_value(e, t, q, i) * space.table_value(e, t, q, j);
          CHECK(std::abs(s - (i == j)) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("gradient-flux integrals on a physical triangle match symbolic values") {
  // T = s * reference triangle, so int_T x^p y^q = s^(p+q+2) p! q! / (p+q+2)!
  const double s = 1.5;
  const auto m = element_map({Vec2{0, 0}, Vec2{s, 0}, Vec2{0, s}}, CellKind::triangle);
  auto exact = [&](int p, int q) { return std::pow(s, p + q + 2) * tri_monomial(p, q); };
  // (w = x^a y^b, u = (x^c y^d, x^e y^f)): grad w . u = a x^(a-1+c) y^(b+d) + b x^(a+e) y^(b-1+f)
  const int pairs[5][6] = {{1, 0, 0, 0, 0, 0}, {1, 1, 1, 0, 0, 1}, {2, 1, 0, 2, 1, 1}, {0, 3, 2, 0, 1, 1}, {3, 2, 1, 1, 2, 0}};
  for (const auto& pr : pairs) {
    const int a = pr[0], b = pr[1], c = pr[2], d = pr[3], e = pr[4], f = pr[5];
    const int degree = std::max(a - 1 + c + b + d, a + e + b - 1 + f);
    const auto& r = quadrature_rule(degree, CellKind::triangle);
    double num = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q) {
      const Vec2 x = m.to_physical(r.points[q]);
      const Vec2 gw{a ? a * std::pow(x.x, a - 1) * std::pow(x.y, b) : 0.0,
                    b ? b * std::pow(x.x, a) * std::pow(x.y, b - 1) : 0.0};
      const Vec2 u{std::pow(x.x, c) * std::pow(x.y, d), std::pow(x.x, e) * std::pow(x.y, f)};
      num += r.weights[q] * m.det * dot(gw, u);
    }
    double ref = 0.0;
    if (a) ref += a * exact(a - 1 + c, b + d);
    if (b) ref += b * exact(a + e, b - 1 + f);
    CHECK(num == doctest::Approx(ref).epsilon(1e-13));
  }
}

TEST_CASE("edge points lie on the edge in both neighbours") {
  auto mesh = std::make_shared<const Mesh>(generate_triangle_mesh(2, 2));
  const DgSpace space(mesh, 2);
  for (std::size_t k = 0; k < mesh->num_edges(); ++k) {
    const auto pts = space.edge_points(k, 5);
    double len = 0.0;
    for (const auto& p : pts) {
      len += p.weight;
      for (int s = 0; s < 2; ++s) {
        const std::size_t e = mesh->edge(k).elements[static_cast<std::size_t>(s)];
        if (e == npos) continue;
        const Vec2 y = space.map(e).to_physical(p.reference[static_cast<std::size_t>(s)]);
        CHECK(norm(y - p.x) < 1e-14);
      }
    }
    CHECK(len == doctest::Approx(mesh->edge(k).measure).epsilon(1e-14));
  }
}

TEST_CASE("projection reproduces polynomials") {
  auto mesh = std::make_shared<const Mesh>(generate_triangle_mesh(3, 3));
  const DgSpace space(mesh, 2);
  auto f = [](std::size_t, const Vec2& x) { return 1.0 + 2.0 * x.x - x.y + 0.5 * x.x * x.y; };
  const auto c = space.project(f, 6);
  for (std::size_t e = 0; e < mesh->num_elements(); ++e) {
    const Vec2 ref{0.2, 0.3};
    const double v = space.value<double>(c, e, ref);
    CHECK(v == doctest::Approx(f(e, space.map(e).to_physical(ref))).epsilon(1e-13));
  }
  const DgSpace p0(mesh, 0);
  const auto c0 = p0.project([](std::size_t, const Vec2&) { return 3.0; }, 0);
  CHECK(p0.cell_mean(c0, 4) == doctest::Approx(3.0).epsilon(1e-14));
}
