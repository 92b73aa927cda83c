#include "dgflow/dg_space.hpp"

#include <algorithm>
#include <cmath>

#include "dgflow/error.hpp"

namespace dgflow {

DgSpace::DgSpace(MeshPtr mesh, int degree)
    : mesh_(std::move(mesh)),
      degree_(degree),
      kind_(mesh_->dimension() == 1 ? CellKind::segment : CellKind::triangle),
      basis_(degree, kind_) {
  maps_.reserve(mesh_->num_elements());
  scales_.reserve(mesh_->num_elements());
  for (std::size_t e = 0; e < mesh_->num_elements(); ++e) {
    maps_.push_back(element_map(mesh_->element_coordinates(e), kind_));
    scales_.push_back(1.0 / std::sqrt(maps_.back().det));
    maps_ext_.push_back(element_map<long double>(mesh_->element_coordinates(e), kind_));
    scales_ext_.push_back(1 / std::sqrt(maps_ext_.back().det));
  }
}

void DgSpace::eval(std::size_t e, const Vec2& ref, std::span<double> values, std::span<Vec2> grads) const {
  basis_.eval_into<double>(ref, values, grads);
  const double s = scales_[e];
  for (auto& v : values) v *= s;
  for (auto& g : grads) g = s * maps_[e].physical_gradient(g);
}

void DgSpace::eval_ext(std::size_t e, const Vec2L& ref, std::span<long double> values,
                       std::span<Vec2L> grads) const {
  basis_.eval_into<long double>(ref, values, grads);
  const long double s = scales_ext_[e];
  for (auto& v : values) v *= s;
  for (auto& g : grads) g = s * maps_ext_[e].physical_gradient(g);
}

long double DgSpace::value_ext(std::span<const long double> coeffs, std::size_t e, const Vec2L& ref) const {
  std::vector<long double> phi(local_size());
  eval_ext(e, ref, phi);
  long double s = 0;
  for (std::size_t i = 0; i < phi.size(); ++i) s += coeffs[dof(e, i)] * phi[i];
  return s;
}

const ReferenceTable& DgSpace::volume_table(int order) const {
  std::lock_guard lock(mutex_);
  auto& slot = tables_[order];
  if (!slot) {
    auto t = std::make_unique<ReferenceTable>();
    t->rule = &quadrature_rule(order, kind_);
    t->nbasis = basis_.size();
    t->values.resize(t->rule->size() * t->nbasis);
    t->gradients.resize(t->values.size());
    t->values_ext.resize(t->values.size());
    t->gradients_ext.resize(t->values.size());
    for (std::size_t q = 0; q < t->rule->size(); ++q) {
      const std::size_t off = q * t->nbasis;
      basis_.eval_into<double>(t->rule->points[q], std::span(t->values).subspan(off, t->nbasis),
                               std::span(t->gradients).subspan(off, t->nbasis));
      basis_.eval_into<long double>(t->rule->points_ext[q], std::span(t->values_ext).subspan(off, t->nbasis),
                                    std::span(t->gradients_ext).subspan(off, t->nbasis));
    }
    slot = std::move(t);
  }
  return *slot;
}

std::vector<EdgePoint> DgSpace::edge_points(std::size_t edge_index, int order) const {
  const Edge& edge = mesh_->edge(edge_index);
  std::vector<EdgePoint> pts;
  if (mesh_->dimension() == 1) {
    EdgePoint p;
    p.weight = 1.0;
    p.weight_ext = 1;
    p.x = mesh_->vertex(edge.vertices[0]);
    for (std::size_t s = 0; s < 2; ++s) {
      if (edge.elements[s] == npos) continue;
      p.reference[s] = {static_cast<double>(edge.local_index[s]), 0.0};
      p.reference_ext[s] = p.reference[s].cast<long double>();
    }
    pts.push_back(p);
    return pts;
  }
  // Reference endpoints of the edge inside each neighbour. Mapping physical points
  // back would cost ~ulp(x)/h of accuracy far from the origin.
  static const Vec2 ref_vertex[3] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  std::array<std::array<Vec2, 2>, 2> ends{};
  for (int s = 0; s < 2; ++s) {
    const std::size_t e = edge.elements[static_cast<std::size_t>(s)];
    if (e == npos) continue;
    const auto verts = mesh_->element_vertices(e);
    for (int end = 0; end < 2; ++end) {
      const std::size_t v = edge.vertices[static_cast<std::size_t>(end)];
      const std::size_t local = static_cast<std::size_t>(std::find(verts.begin(), verts.end(), v) - verts.begin());
      ends[static_cast<std::size_t>(s)][static_cast<std::size_t>(end)] = ref_vertex[local];
    }
  }
  const auto& rule = quadrature_rule(order, CellKind::segment);
  const Vec2 a = mesh_->vertex(edge.vertices[0]);
  const Vec2 b = mesh_->vertex(edge.vertices[1]);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    EdgePoint p;
    p.t = rule.points[q].x;
    p.weight = rule.weights[q] * edge.measure;
    p.t_ext = rule.points_ext[q].x;
    p.weight_ext = rule.weights_ext[q] * static_cast<long double>(edge.measure);
    p.x = a + p.t * (b - a);
    for (std::size_t s = 0; s < 2; ++s) {
      if (edge.elements[s] == npos) continue;
      p.reference[s] = ends[s][0] + p.t * (ends[s][1] - ends[s][0]);
      const Vec2L e0 = ends[s][0].cast<long double>(), e1 = ends[s][1].cast<long double>();
      p.reference_ext[s] = e0 + p.t_ext * (e1 - e0);
    }
    pts.push_back(p);
  }
  return pts;
}

Vec2 DgSpace::gradient(std::span<const double> coeffs, std::size_t e, const Vec2& ref) const {
  std::vector<double> phi(local_size());
  std::vector<Vec2> g(local_size());
  eval(e, ref, phi, g);
  Vec2 s;
  for (std::size_t i = 0; i < g.size(); ++i) s += coeffs[dof(e, i)] * g[i];
  return s;
}

std::vector<double> DgSpace::project(const ElementField& f, int order) const {
  const auto& t = volume_table(order);
  std::vector<double> c(size(), 0.0);
  for (std::size_t e = 0; e < mesh_->num_elements(); ++e) {
    for (std::size_t q = 0; q < t.rule->size(); ++q) {
      const double fx = f(e, maps_[e].to_physical(t.rule->points[q]));
      const double w = t.rule->weights[q] * maps_[e].det;
      for (std::size_t i = 0; i < t.nbasis; ++i) c[dof(e, i)] += w * fx * table_value(e, t, q, i);
    }
  }
  return c;
}

double DgSpace::cell_mean(std::span<const double> coeffs, std::size_t e) const {
  // phi_0 = 1/sqrt(|T|) * sqrt(1/|ref|) ; mean = c_0 * phi_0
  const double phi0 = scales_[e] / std::sqrt(reference_measure(kind_));
  return coeffs[dof(e, 0)] * phi0;
}

double l2_error(const DgSpace& space, std::span<const double> coeffs, const ElementField& u, int order) {
  const auto& t = space.volume_table(order);
  long double s = 0;
  for (std::size_t e = 0; e < space.mesh().num_elements(); ++e) {
    for (std::size_t q = 0; q < t.rule->size(); ++q) {
      double v = 0.0;
      for (std::size_t i = 0; i < t.nbasis; ++i) v += coeffs[space.dof(e, i)] * space.table_value(e, t, q, i);
      if (u) v -= u(e, space.map(e).to_physical(t.rule->points[q]));
      s += static_cast<long double>(t.rule->weights[q]) * space.map(e).det * v * v;
    }
  }
  return static_cast<double>(std::sqrt(s));
}

}  // namespace dgflow
