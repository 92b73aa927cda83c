#include "dgflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dgflow/error.hpp"

namespace dgflow {

bool TransportProblem::has_diffusion() const {
  return std::any_of(diffusion.begin(), diffusion.end(), [](const DiagTensor& d) { return !d.is_zero(); });
}

const ElementField& TransportProblem::source_field() const {
  static const ElementField none;
  if (source) return source;
  return flux ? flux->source : none;
}

double TransportProblem::source_at(std::size_t e, const Vec2& x) const {
  const auto& f = source_field();
  return f ? f(e, x) : 0.0;
}

double TransportProblem::sigma(std::size_t edge) const {
  const double factor = penalty_factor >= 0.0 ? penalty_factor : (has_diffusion() ? 100.0 : 0.0);
  if (factor == 0.0) return 0.0;
  const Edge& e = mesh->edge(edge);
  double h = mesh->element_diameter(e.elements[0]);
  if (!e.is_boundary()) h = 0.5 * (h + mesh->element_diameter(e.elements[1]));
  return factor / h;
}

int TransportProblem::resolved_volume_order() const {
  if (volume_order >= 0) return volume_order;
  return std::max(flux->interior_space->degree() + 2 * degree, 2 * degree);
}

int TransportProblem::resolved_edge_order() const {
  if (edge_order >= 0) return edge_order;
  return std::max(flux->edge_degree + 2 * degree, has_diffusion() ? 2 * degree + 1 : 0);
}

int TransportProblem::resolved_source_order() const {
  if (source_order >= 0) return source_order;
  // the flow's rule, so that constants see exactly the flow's source integrals
  return std::max(flux->source_order, 2 * degree);
}

std::size_t TransportProblem::steps() const {
  return static_cast<std::size_t>(std::ceil(final_time / dt - 1e-9));
}

void validate_transport(const TransportProblem& p) {
  if (!p.mesh) throw ConfigError("transport problem has no mesh");
  if (!p.flux) throw ConfigError("transport problem has no flux");
  if (p.flux->mesh != p.mesh) throw ConfigError("flux and transport live on different meshes");
  if (p.degree < 0) throw ConfigError("transport degree must be >= 0");
  if (!(p.dt > 0.0)) throw ConfigError("time step must be positive");
  if (p.final_time < 0.0) throw ConfigError("final time must be >= 0");
  if (p.theta < -1 || p.theta > 1) throw ConfigError("theta_c must be -1, 0 or 1");
  if (!p.diffusion.empty() && p.diffusion.size() != p.mesh->num_elements()) {
    throw ConfigError("diffusion needs one tensor per element");
  }
  for (const auto& d : p.diffusion) {
    if (d.xx < 0.0 || d.yy < 0.0) throw ConfigError("diffusion must be positive semi-definite");
  }
  if (!p.has_diffusion() && p.penalty_factor > 0.0) throw ConfigError("sigma_D must be 0 when D = 0");
}

std::size_t EdgeFlowClass::upstream(const Mesh& mesh, std::size_t edge) const {
  const Edge& e = mesh.edge(edge);
  if (kind[edge] == EdgeFlow::forward) return e.elements[0];
  if (kind[edge] == EdgeFlow::backward) return e.elements[1];
  return npos;
}

std::size_t EdgeFlowClass::downstream(const Mesh& mesh, std::size_t edge) const {
  const Edge& e = mesh.edge(edge);
  if (kind[edge] == EdgeFlow::forward) return e.elements[1];
  if (kind[edge] == EdgeFlow::backward) return e.elements[0];
  return npos;
}

namespace {

double edge_flux(const NumericalFlux& flux, std::size_t edge, const EdgePoint& pt) {
  return flux.mesh->dimension() == 1 ? flux.edge_mean(edge) : flux.normal_flux(edge, pt.t);
}

}  // namespace

EdgeFlowClass classify_edges(const NumericalFlux& flux, int edge_order) {
  const Mesh& mesh = *flux.mesh;
  const DgSpace probe(flux.mesh, 0);
  EdgeFlowClass c;
  c.kind.resize(mesh.num_edges());
  c.sign_change.assign(mesh.num_edges(), false);
  for (std::size_t k = 0; k < mesh.num_edges(); ++k) {
    const Edge& edge = mesh.edge(k);
    const double mean = flux.edge_mean(k);
    if (edge.is_boundary()) {
      c.kind[k] = mean < 0.0 ? EdgeFlow::inflow : EdgeFlow::outflow;
    } else {
      c.kind[k] = mean > 0.0 ? EdgeFlow::forward : (mean < 0.0 ? EdgeFlow::backward : EdgeFlow::tangential);
    }
    if (mesh.dimension() == 1) continue;
    bool pos = false, neg = false;
    for (const auto& pt : probe.edge_points(k, edge_order)) {
      const double un = flux.normal_flux(k, pt.t);
      pos = pos || un > 0.0;
      neg = neg || un < 0.0;
    }
    if (pos && neg) {
      c.sign_change[k] = true;
      ++c.sign_change_count;
    }
  }
  return c;
}

double upwind_edge_value(const DgSpace& space, std::span<const double> coeffs, const NumericalFlux& flux,
                         std::size_t edge_index, double t) {
  const Mesh& mesh = space.mesh();
  const Edge& edge = mesh.edge(edge_index);
  if (edge.is_boundary()) throw InvalidArgument("upwind value needs an interior edge");
  double un;
  Vec2 x;
  if (mesh.dimension() == 1) {
    un = flux.edge_mean(edge_index);
    x = mesh.vertex(edge.vertices[0]);
  } else {
    un = flux.normal_flux(edge_index, t);
    const Vec2 a = mesh.vertex(edge.vertices[0]);
    x = a + t * (mesh.vertex(edge.vertices[1]) - a);
  }
  const double c0 = space.value<double>(coeffs, edge.elements[0], space.map(edge.elements[0]).to_reference(x));
  const double c1 = space.value<double>(coeffs, edge.elements[1], space.map(edge.elements[1]).to_reference(x));
  return upwind_value(un, c0, c1);
}

TransportSystem assemble_transport_operator(const TransportProblem& p, const EdgeFlowClass& cls, Formulation form) {
  validate_transport(p);
  if (form == Formulation::lesaint_raviart && p.has_diffusion()) {
    throw UnsupportedConfiguration("the Lesaint-Raviart form is implemented for D = 0 only");
  }
  (void)cls;  // upwinding is pointwise; the classification only reports
  const Mesh& mesh = *p.mesh;
  const NumericalFlux& flux = *p.flux;
  const DgSpace space(p.mesh, p.degree);
  const std::size_t nloc = space.local_size();
  const std::size_t n = space.size();
  const bool lr = form == Formulation::lesaint_raviart;
  const bool diffusive = p.has_diffusion();
  const double gamma = p.gamma();

  std::vector<Triplet> trip;
  trip.reserve(mesh.num_elements() * nloc * nloc * 4);
  std::vector<double> load(n, 0.0);
  std::vector<double> local(nloc * nloc);
  std::vector<double> phi(nloc);
  std::vector<Vec2> grad(nloc);

  const auto& vt = space.volume_table(p.resolved_volume_order());
  const auto& st = space.volume_table(p.resolved_source_order());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    std::fill(local.begin(), local.end(), 0.0);
    for (std::size_t i = 0; i < nloc; ++i) local[i * nloc + i] = gamma;  // orthonormal: M = I
    const double det = space.map(e).det;
    for (std::size_t q = 0; q < vt.rule->size(); ++q) {
      const Vec2& ref = vt.rule->points[q];
      const double w = vt.rule->weights[q] * det;
      const Vec2 u = flux.interior(e, ref);
      const double divu = lr ? flux.divergence(e, ref) : 0.0;
      for (std::size_t i = 0; i < nloc; ++i) {
        phi[i] = space.table_value(e, vt, q, i);
        grad[i] = space.table_gradient(e, vt, q, i);
      }
      for (std::size_t i = 0; i < nloc; ++i) {
        for (std::size_t j = 0; j < nloc; ++j) {
          double a;
          if (lr) {
            a = dot(u, grad[j]) * phi[i] + divu * phi[j] * phi[i];
          } else {
            a = -phi[j] * dot(u, grad[i]);
          }
          if (diffusive) a += dot(p.diffusion[e] * grad[j], grad[i]);
          local[i * nloc + j] += w * a;
        }
      }
    }
    // sinks implicit, sources explicit through c~
    for (std::size_t q = 0; q < st.rule->size(); ++q) {
      const Vec2 x = space.map(e).to_physical(st.rule->points[q]);
      const double f = p.source_at(e, x);
      if (f == 0.0) continue;
      const double w = st.rule->weights[q] * det;
      for (std::size_t i = 0; i < nloc; ++i) phi[i] = space.table_value(e, st, q, i);
      if (f < 0.0) {
        for (std::size_t i = 0; i < nloc; ++i)
          for (std::size_t j = 0; j < nloc; ++j) local[i * nloc + j] -= w * f * phi[i] * phi[j];
      } else {
        const double ct = p.injected ? p.injected(e, x) : 0.0;
        for (std::size_t i = 0; i < nloc; ++i) load[space.dof(e, i)] += w * f * ct * phi[i];
      }
    }
    for (std::size_t i = 0; i < nloc; ++i)
      for (std::size_t j = 0; j < nloc; ++j)
        if (local[i * nloc + j] != 0.0) trip.push_back({space.dof(e, i), space.dof(e, j), local[i * nloc + j]});
  }

  const int edge_order = p.resolved_edge_order();
  std::vector<double> v[2] = {std::vector<double>(nloc), std::vector<double>(nloc)};
  std::vector<Vec2> g[2] = {std::vector<Vec2>(nloc), std::vector<Vec2>(nloc)};
  std::vector<double> blocks(4 * nloc * nloc);
  for (std::size_t k = 0; k < mesh.num_edges(); ++k) {
    const Edge& edge = mesh.edge(k);
    const auto pts = space.edge_points(k, edge_order);
    if (edge.is_boundary()) {
      const std::size_t e = edge.elements[0];
      std::fill(local.begin(), local.end(), 0.0);
      for (const auto& pt : pts) {
        const double un = edge_flux(flux, k, pt);
        if (un == 0.0) continue;
        space.eval(e, pt.reference[0], v[0]);
        if (un > 0.0) {
          if (lr) continue;
          for (std::size_t i = 0; i < nloc; ++i)
            for (std::size_t j = 0; j < nloc; ++j) local[i * nloc + j] += pt.weight * un * v[0][j] * v[0][i];
        } else {
          const double ci = p.inflow ? p.inflow(pt.x) : 0.0;
          if (lr) {
            for (std::size_t i = 0; i < nloc; ++i)
              for (std::size_t j = 0; j < nloc; ++j) local[i * nloc + j] -= pt.weight * un * v[0][j] * v[0][i];
          }
          for (std::size_t i = 0; i < nloc; ++i) load[space.dof(e, i)] -= pt.weight * ci * un * v[0][i];
        }
      }
      for (std::size_t i = 0; i < nloc; ++i)
        for (std::size_t j = 0; j < nloc; ++j)
          if (local[i * nloc + j] != 0.0) trip.push_back({space.dof(e, i), space.dof(e, j), local[i * nloc + j]});
      continue;
    }

    const std::size_t el[2] = {edge.elements[0], edge.elements[1]};
    const double sigma = diffusive ? p.sigma(k) : 0.0;
    const double theta = p.theta;
    std::fill(blocks.begin(), blocks.end(), 0.0);
    for (const auto& pt : pts) {
      const double un = edge_flux(flux, k, pt);
      space.eval(el[0], pt.reference[0], v[0], g[0]);
      space.eval(el[1], pt.reference[1], v[1], g[1]);
      for (int b = 0; b < 2; ++b) {
        const double sb = b == 0 ? 1.0 : -1.0;
        for (int a = 0; a < 2; ++a) {
          const double sa = a == 0 ? 1.0 : -1.0;
          double adv;
          if (lr) {
            // -(C_T - C_nb) w_T (U.n_T) on the inflow part of dT, T = side b
            const double unb = sb * un;
            adv = unb < 0.0 ? (a == b ? -unb : unb) : 0.0;
          } else {
            adv = sb * (0.5 * un + 0.5 * std::abs(un) * sa);
          }
          double* blk = &blocks[static_cast<std::size_t>(b * 2 + a) * nloc * nloc];
          for (std::size_t i = 0; i < nloc; ++i) {
            const double wi = v[b][i];
            for (std::size_t j = 0; j < nloc; ++j) {
              const double cj = v[a][j];
              double val = adv * cj * wi;
              if (diffusive) {
                const double dn_j = dot(p.diffusion[el[a]] * g[a][j], edge.normal);
                const double dn_i = dot(p.diffusion[el[b]] * g[b][i], edge.normal);
                val += -0.5 * dn_j * sb * wi + theta * 0.5 * dn_i * sa * cj + sigma * sa * sb * cj * wi;
              }
              blk[i * nloc + j] += pt.weight * val;
            }
          }
        }
      }
    }
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a) {
        const double* blk = &blocks[static_cast<std::size_t>(b * 2 + a) * nloc * nloc];
        for (std::size_t i = 0; i < nloc; ++i)
          for (std::size_t j = 0; j < nloc; ++j)
            if (blk[i * nloc + j] != 0.0) trip.push_back({space.dof(el[b], i), space.dof(el[a], j), blk[i * nloc + j]});
      }
  }

  TransportSystem sys;
  sys.matrix = assemble(n, n, std::move(trip));
  sys.rhs = std::move(load);
  return sys;
}

namespace {

TransportSystem with_state(TransportSystem sys, const TransportProblem& p, const TransportState& old) {
  if (old.coeffs.size() != sys.rhs.size()) throw InvalidArgument("state size does not match the transport space");
  const double gamma = p.gamma();
  for (std::size_t i = 0; i < sys.rhs.size(); ++i) sys.rhs[i] += gamma * old.coeffs[i];
  return sys;
}

}  // namespace

TransportSystem assemble_bms(const TransportProblem& p, const TransportState& old, const EdgeFlowClass& cls) {
  return with_state(assemble_transport_operator(p, cls, Formulation::bms), p, old);
}

TransportSystem assemble_lesaint_raviart(const TransportProblem& p, const TransportState& old,
                                         const EdgeFlowClass& cls) {
  return with_state(assemble_transport_operator(p, cls, Formulation::lesaint_raviart), p, old);
}

TransportState initial_state(const TransportProblem& p) {
  validate_transport(p);
  const DgSpace space(p.mesh, p.degree);
  TransportState s;
  if (p.initial) {
    s.coeffs = space.project(p.initial, std::max(2 * p.degree + 4, 12));
  } else {
    s.coeffs.assign(space.size(), 0.0);
  }
  return s;
}

TransportStepper::TransportStepper(TransportProblem problem, Formulation form)
    : problem_(std::move(problem)),
      space_(std::make_shared<const DgSpace>(problem_.mesh, problem_.degree)),
      class_(classify_edges(*problem_.flux, std::max(problem_.resolved_edge_order(), 8))),
      op_(assemble_transport_operator(problem_, class_, form)) {
  SolveOptions opts = problem_.solver;
  opts.block_size = space_->local_size();
  solver_ = std::make_unique<LinearSolver>(op_.matrix, opts);
}

TransportState TransportStepper::advance(const TransportState& state) const {
  if (state.coeffs.size() != op_.rhs.size()) throw InvalidArgument("state size does not match the transport space");
  std::vector<double> b = op_.rhs;
  const double gamma = problem_.gamma();
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += gamma * state.coeffs[i];
  auto res = solver_->solve(b, state.coeffs);
  report_ = res.report;
  TransportState next;
  next.coeffs = std::move(res.x);
  next.step = state.step + 1;
  next.time = static_cast<double>(next.step) * problem_.dt;
  return next;
}

TransportState advance(const TransportProblem& problem, const TransportState& state, const EdgeFlowClass& cls) {
  const auto sys = assemble_bms(problem, state, cls);
  SolveOptions opts = problem.solver;
  opts.block_size = basis_dimension(problem.degree, problem.mesh->dimension() == 1 ? CellKind::segment : CellKind::triangle);
  auto res = solve(sys.matrix, sys.rhs, opts);
  TransportState next;
  next.coeffs = std::move(res.x);
  next.step = state.step + 1;
  next.time = static_cast<double>(next.step) * problem.dt;
  return next;
}

double l2_norm(const DgSpace&, std::span<const double> coeffs) {
  // orthonormal basis: the norm is the coefficient norm
  long double s = 0;
  for (double c : coeffs) s += static_cast<long double>(c) * c;
  return static_cast<double>(std::sqrt(s));
}

StateSummary summarize(const DgSpace& space, const TransportState& state) {
  StateSummary r;
  r.step = state.step;
  r.time = state.time;
  r.l2_norm = l2_norm(space, state.coeffs);
  r.min_c = std::numeric_limits<double>::infinity();
  r.max_c = -std::numeric_limits<double>::infinity();
  const Mesh& mesh = space.mesh();
  long double mass = 0;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    mass += static_cast<long double>(state.coeffs[space.dof(e, 0)]) * std::sqrt(mesh.element_measure(e));
    if (space.degree() == 0) {
      const double c = space.cell_mean(state.coeffs, e);
      r.min_c = std::min(r.min_c, c);
      r.max_c = std::max(r.max_c, c);
    }
  }
  if (space.degree() > 0) {
    // sampled extrema: quadrature points and vertices
    const auto& t = space.volume_table(2 * space.degree() + 2);
    std::vector<Vec2> samples(t.rule->points);
    if (space.kind() == CellKind::segment) {
      samples.push_back({0.0, 0.0});
      samples.push_back({1.0, 0.0});
    } else {
      samples.push_back({0.0, 0.0});
      samples.push_back({1.0, 0.0});
      samples.push_back({0.0, 1.0});
    }
    std::vector<std::vector<double>> table;
    for (const auto& s : samples) table.push_back(space.basis().eval(s));
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
      for (const auto& phi : table) {
        double c = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i) c += state.coeffs[space.dof(e, i)] * phi[i];
        c *= space.scale(e);
        r.min_c = std::min(r.min_c, c);
        r.max_c = std::max(r.max_c, c);
      }
    }
  }
  r.mass_integral = static_cast<double>(mass);
  return r;
}

double energy_norm(const DgSpace& space, std::span<const double> coeffs, const NumericalFlux& flux, int edge_order) {
  const Mesh& mesh = space.mesh();
  const double l2 = l2_norm(space, coeffs);
  long double s = static_cast<long double>(l2) * l2;
  std::vector<double> v0(space.local_size()), v1(space.local_size());
  for (std::size_t k = 0; k < mesh.num_edges(); ++k) {
    const Edge& edge = mesh.edge(k);
    for (const auto& pt : space.edge_points(k, edge_order)) {
      const double un = edge_flux(flux, k, pt);
      space.eval(edge.elements[0], pt.reference[0], v0);
      double c0 = 0.0;
      for (std::size_t i = 0; i < v0.size(); ++i) c0 += coeffs[space.dof(edge.elements[0], i)] * v0[i];
      if (edge.is_boundary()) {
        if (un < 0.0) s += pt.weight * std::abs(un) * c0 * c0;
        continue;
      }
      space.eval(edge.elements[1], pt.reference[1], v1);
      double c1 = 0.0;
      for (std::size_t i = 0; i < v1.size(); ++i) c1 += coeffs[space.dof(edge.elements[1], i)] * v1[i];
      s += pt.weight * std::abs(un) * (c0 - c1) * (c0 - c1);
    }
  }
  return static_cast<double>(std::sqrt(s));
}

TransportRun run(const TransportProblem& problem, const StateObserver& observer) {
  TransportStepper stepper(problem);
  TransportRun out;
  out.sign_change_edges = stepper.classification().sign_change_count;
  for (int k = 0; k <= 2 * problem.degree; ++k) out.audits.push_back(check_local_conservation(*problem.flux, k));
  TransportState state = initial_state(problem);
  out.records.push_back(summarize(stepper.space(), state));
  if (observer) observer(stepper.space(), state);
  const std::size_t n = problem.steps();
  for (std::size_t s = 0; s < n; ++s) {
    state = stepper.advance(state);
    out.records.push_back(summarize(stepper.space(), state));
    if (observer) observer(stepper.space(), state);
  }
  out.last_report = stepper.report();
  out.final_state = std::move(state);
  return out;
}

}  // namespace dgflow
