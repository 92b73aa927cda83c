#include "dgflow/flux.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "dgflow/error.hpp"

namespace dgflow {

Vec2 NumericalFlux::interior(std::size_t e, const Vec2& ref) const {
  return interior_ext(e, ref.cast<long double>()).cast<double>();
}

Vec2L NumericalFlux::interior_ext(std::size_t e, const Vec2L& ref) const {
  return {interior_space->value_ext(ux, e, ref), interior_space->value_ext(uy, e, ref)};
}

double NumericalFlux::divergence(std::size_t e, const Vec2& ref) const {
  const DgSpace& sp = *interior_space;
  std::vector<double> phi(sp.local_size());
  std::vector<Vec2> g(sp.local_size());
  sp.eval(e, ref, phi, g);
  long double s = 0;
  for (std::size_t i = 0; i < g.size(); ++i) s += ux[sp.dof(e, i)] * g[i].x + uy[sp.dof(e, i)] * g[i].y;
  return static_cast<double>(s);
}

double NumericalFlux::normal_flux(std::size_t edge, double t) const {
  return static_cast<double>(normal_flux_ext(edge, t));
}

long double NumericalFlux::normal_flux_ext(std::size_t edge, long double t) const {
  long double l[64];
  edge_legendre<long double>(edge_degree, t, {l, edge_stride()});
  long double s = 0;
  for (std::size_t m = 0; m < edge_stride(); ++m) s += edge_coeffs[edge * edge_stride() + m] * l[m];
  return s;
}

double NumericalFlux::edge_mean(std::size_t edge) const {
  // L_0 = 1 and the higher modes have zero mean
  return static_cast<double>(edge_coeffs[edge * edge_stride()]);
}

double NumericalFlux::normal_flux_at(std::size_t edge, const Vec2& x) const {
  const Edge& e = mesh->edge(edge);
  if (mesh->dimension() == 1) return static_cast<double>(edge_coeffs[edge * edge_stride()]);
  const Vec2 a = mesh->vertex(e.vertices[0]);
  const Vec2 d = mesh->vertex(e.vertices[1]) - a;
  const double t = std::clamp(dot(x - a, d) / dot(d, d), 0.0, 1.0);
  return normal_flux(edge, t);
}

NumericalFlux NumericalFlux::from_functions(MeshPtr mesh, int interior_degree, int edge_degree,
                                            const std::function<Vec2(std::size_t, const Vec2&)>& interior,
                                            const std::function<double(std::size_t, const Vec2&)>& normal,
                                            ElementField source, int source_order) {
  NumericalFlux u;
  u.mesh = mesh;
  u.interior_space = std::make_shared<const DgSpace>(mesh, interior_degree);
  const int order = 2 * interior_degree + 4;
  const auto px = u.interior_space->project([&](std::size_t e, const Vec2& x) { return interior(e, x).x; }, order);
  const auto py = u.interior_space->project([&](std::size_t e, const Vec2& x) { return interior(e, x).y; }, order);
  u.ux.assign(px.begin(), px.end());
  u.uy.assign(py.begin(), py.end());
  u.edge_degree = mesh->dimension() == 1 ? 0 : edge_degree;
  u.edge_coeffs.assign(mesh->num_edges() * u.edge_stride(), 0.0);
  const DgSpace& sp = *u.interior_space;
  std::vector<double> l(u.edge_stride());
  for (std::size_t k = 0; k < mesh->num_edges(); ++k) {
    for (const auto& pt : sp.edge_points(k, 2 * u.edge_degree + 4)) {
      const double g = normal(k, pt.x);
      edge_legendre<double>(u.edge_degree, pt.t, l);
      const double w = pt.weight / mesh->edge(k).measure;
      for (std::size_t m = 0; m < l.size(); ++m) u.edge_coeffs[k * u.edge_stride() + m] += w * g * l[m];
    }
  }
  u.source = std::move(source);
  u.source_order = source_order;
  return u;
}

NumericalFlux reconstruct_flux(const FlowSolution& flow) {
  using T = long double;
  const FlowProblem& p = *flow.problem;
  const DgSpace& space = *flow.space;
  const Mesh& mesh = space.mesh();
  const std::size_t nloc = space.local_size();
  const auto& P = flow.pressure_extended;

  NumericalFlux u;
  u.mesh = p.mesh;
  u.source = p.source;
  u.source_order = p.resolved_source_order();
  const int ku = std::max(p.degree - 1, 0);
  u.interior_space = std::make_shared<const DgSpace>(p.mesh, ku);
  const DgSpace& us = *u.interior_space;
  u.ux.assign(us.size(), 0.0);
  u.uy.assign(us.size(), 0.0);

  std::vector<T> phi(nloc);
  std::vector<Vec2L> grad(nloc);
  auto flux_at = [&](std::size_t e, const Vec2L& ref, T& value, T& fx, T& fy) {
    space.eval_ext(e, ref, phi, grad);
    value = fx = fy = 0;
    const DiagTensor& k = p.kappa_at(e);
    for (std::size_t j = 0; j < nloc; ++j) {
      const T c = P[space.dof(e, j)];
      const Vec2L kg = k * grad[j];
      value += c * phi[j];
      fx -= c * kg.x;
      fy -= c * kg.y;
    }
  };

  if (p.degree > 0) {
    const auto& t = us.volume_table(2 * p.degree);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
      std::vector<T> cx(us.local_size(), 0), cy(us.local_size(), 0);
      for (std::size_t q = 0; q < t.rule->size(); ++q) {
        T v, fx, fy;
        flux_at(e, t.rule->points_ext[q], v, fx, fy);
        const T w = t.rule->weights_ext[q] * us.map_ext(e).det;
        for (std::size_t i = 0; i < us.local_size(); ++i) {
          const T b = us.table_value_ext(e, t, q, i);
          cx[i] += w * fx * b;
          cy[i] += w * fy * b;
        }
      }
      for (std::size_t i = 0; i < us.local_size(); ++i) {
        u.ux[us.dof(e, i)] = cx[i];
        u.uy[us.dof(e, i)] = cy[i];
      }
    }
  }

  u.edge_degree = mesh.dimension() == 1 ? 0 : p.degree;
  const std::size_t stride = u.edge_stride();
  u.edge_coeffs.assign(mesh.num_edges() * stride, 0.0);
  std::vector<T> l(stride);
  for (std::size_t k = 0; k < mesh.num_edges(); ++k) {
    const Edge& edge = mesh.edge(k);
    const auto pts = space.edge_points(k, p.resolved_edge_order());
    const BoundaryCondition* bc = edge.is_boundary() ? &p.boundary.at(edge.tag) : nullptr;
    const T sigma = (bc && bc->kind == BoundaryCondition::Kind::neumann) ? T(0) : static_cast<T>(p.sigma(k));
    std::vector<T> c(stride, 0);
    for (const auto& pt : pts) {
      T un;
      if (bc && bc->kind == BoundaryCondition::Kind::neumann) {
        un = bc->value ? static_cast<T>(bc->value(pt.x)) : T(0);
      } else {
        T v0, fx0, fy0;
        flux_at(edge.elements[0], pt.reference_ext[0], v0, fx0, fy0);
        const T n0 = fx0 * static_cast<T>(edge.normal.x) + fy0 * static_cast<T>(edge.normal.y);
        if (bc) {
          const T g = bc->value ? static_cast<T>(bc->value(pt.x)) : T(0);
          un = n0 + sigma * (v0 - g);
        } else {
          T v1, fx1, fy1;
          flux_at(edge.elements[1], pt.reference_ext[1], v1, fx1, fy1);
          const T n1 = fx1 * static_cast<T>(edge.normal.x) + fy1 * static_cast<T>(edge.normal.y);
          un = T(0.5) * (n0 + n1) + sigma * (v0 - v1);
        }
      }
      edge_legendre<T>(u.edge_degree, pt.t_ext, l);
      const T w = pt.weight_ext / static_cast<T>(edge.measure);
      for (std::size_t m = 0; m < stride; ++m) c[m] += w * un * l[m];
    }
    for (std::size_t m = 0; m < stride; ++m) u.edge_coeffs[k * stride + m] = c[m];
  }
  return u;
}

ConservationReport check_local_conservation(const NumericalFlux& flux, const ElementField& f, int k,
                                            double tolerance) {
  using T = long double;
  if (k < 0) throw InvalidArgument("audit degree must be >= 0");
  const Mesh& mesh = *flux.mesh;
  const DgSpace test(flux.mesh, k);
  const std::size_t nloc = test.local_size();
  const int ku = flux.interior_space->degree();
  const auto& st = test.volume_table(flux.source_order);
  const auto& vt = test.volume_table(std::max(ku + k, 0));
  const int edge_order = flux.edge_degree + k;

  ConservationReport rep;
  rep.degree = k;
  rep.tolerance = tolerance;
  rep.residuals.assign(mesh.num_elements(), 0.0);
  std::vector<T> r(nloc);
  std::vector<T> v(nloc);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    std::fill(r.begin(), r.end(), T(0));
    const T det = test.map_ext(e).det;
    if (f) {
      for (std::size_t q = 0; q < st.rule->size(); ++q) {
        const T fq = static_cast<T>(f(e, test.map(e).to_physical(st.rule->points[q])));
        if (fq == T(0)) continue;
        const T w = st.rule->weights_ext[q] * det;
        for (std::size_t i = 0; i < nloc; ++i) r[i] += w * fq * test.table_value_ext(e, st, q, i);
      }
    }
    if (k > 0) {
      for (std::size_t q = 0; q < vt.rule->size(); ++q) {
        const Vec2L uq = flux.interior_ext(e, vt.rule->points_ext[q]);
        const T w = vt.rule->weights_ext[q] * det;
        for (std::size_t i = 0; i < nloc; ++i) r[i] += w * dot(uq, test.table_gradient_ext(e, vt, q, i));
      }
    }
    const auto edges = mesh.element_edges(e);
    for (std::size_t le = 0; le < edges.size(); ++le) {
      const std::size_t ek = edges[le];
      const Edge& edge = mesh.edge(ek);
      const int side = edge.elements[0] == e ? 0 : 1;
      const T orient = side == 0 ? T(1) : T(-1);
      for (const auto& pt : test.edge_points(ek, edge_order)) {
        const T un = orient * (mesh.dimension() == 1 ? flux.edge_coeffs[ek] : flux.normal_flux_ext(ek, pt.t_ext));
        test.eval_ext(e, pt.reference_ext[static_cast<std::size_t>(side)], v);
        for (std::size_t i = 0; i < nloc; ++i) r[i] -= pt.weight_ext * un * v[i];
      }
    }
    T worst = 0;
    for (const T& x : r) worst = std::max(worst, std::abs(x));
    rep.residuals[e] = static_cast<double>(worst);
    if (rep.residuals[e] > rep.max_residual || e == 0) {
      rep.max_residual = rep.residuals[e];
      rep.worst_element = e;
    }
  }
  return rep;
}

ConservationReport check_local_conservation(const NumericalFlux& flux, int k, double tolerance) {
  return check_local_conservation(flux, flux.source, k, tolerance);
}

void write_conservation_csv(std::ostream& out, const ConservationReport& report) {
  const auto old = out.precision(17);
  out << "element_id residual\n";
  for (std::size_t e = 0; e < report.residuals.size(); ++e) out << e << ' ' << report.residuals[e] << '\n';
  out << "# degree=" << report.degree << " max_residual=" << report.max_residual
      << " worst_element=" << report.worst_element << " tolerance=" << report.tolerance
      << " status=" << (report.passed() ? "pass" : "fail") << '\n';
  out.precision(old);
}

}  // namespace dgflow
