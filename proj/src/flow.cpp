#include "dgflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dgflow/error.hpp"

namespace dgflow {

double FlowProblem::sigma(std::size_t edge) const {
  if (penalty) return penalty(edge);
  const Edge& e = mesh->edge(edge);
  double h = mesh->element_diameter(e.elements[0]);
  if (!e.is_boundary()) h = 0.5 * (h + mesh->element_diameter(e.elements[1]));
  return penalty_factor / h;
}

bool FlowProblem::has_dirichlet() const {
  for (const auto& edge : mesh->edges()) {
    if (!edge.is_boundary()) continue;
    auto it = boundary.find(edge.tag);
    if (it != boundary.end() && it->second.kind == BoundaryCondition::Kind::dirichlet) return true;
  }
  return false;
}

namespace {

double eval_or_zero(const BoundaryField& g, const Vec2& x) { return g ? g(x) : 0.0; }

void validate(const FlowProblem& p) {
  if (!p.mesh) throw InvalidArgument("flow problem has no mesh");
  const Mesh& mesh = *p.mesh;
  if (p.theta < -1 || p.theta > 1) throw InvalidArgument("theta_f must be -1, 0 or 1");
  if (p.degree < 0) throw InvalidArgument("pressure degree must be >= 0");
  if (!p.kappa.empty() && p.kappa.size() != mesh.num_elements()) {
    throw InvalidArgument("kappa needs one tensor per element");
  }
  for (const auto& k : p.kappa) {
    if (!(k.xx > 0.0) || !(k.yy > 0.0)) throw InvalidArgument("kappa must be positive definite");
  }
  for (std::size_t i = 0; i < mesh.num_edges(); ++i) {
    const Edge& e = mesh.edge(i);
    if (e.is_boundary()) {
      auto it = p.boundary.find(e.tag);
      if (it == p.boundary.end()) {
        throw InvalidArgument("no boundary condition for tag '" + std::string(to_string(e.tag)) + "'");
      }
      if (it->second.kind == BoundaryCondition::Kind::neumann) continue;
    }
    if (!(p.sigma(i) > 0.0)) throw InvalidArgument("penalty must be positive on interior and Dirichlet edges");
  }
}

// Mean-value integrals of each basis function, for the gauge row.
template <class T>
std::vector<T> basis_means(const DgSpace& space) {
  std::vector<T> m(space.size(), T(0));
  for (std::size_t e = 0; e < space.mesh().num_elements(); ++e) {
    // only the constant mode has a nonzero mean: int phi_0 = |T| * phi_0
    m[space.dof(e, 0)] = static_cast<T>(space.mesh().element_measure(e)) /
                         std::sqrt(static_cast<T>(space.mesh().element_measure(e)));
  }
  return m;
}

// Extended precision throughout; the audit of the reconstructed flux sits near the rounding floor otherwise.
BasicFlowSystem<long double> assemble_impl(const FlowProblem& p) {
  using T = long double;
  validate(p);
  const Mesh& mesh = *p.mesh;
  const bool pure_neumann = !p.has_dirichlet();
  if (pure_neumann && p.gauge == Gauge::none) {
    throw GaugeRequired("pure-Neumann flow problem needs a pressure gauge (zero_mean)");
  }
  const DgSpace space(p.mesh, p.degree);
  const std::size_t nloc = space.local_size();
  const std::size_t n = space.size();
  std::vector<BasicTriplet<T>> trip;
  trip.reserve(mesh.num_elements() * nloc * nloc * 4);
  std::vector<T> rhs(n, T(0));

  // volume terms
  const auto& vt = space.volume_table(p.resolved_volume_order());
  const auto& st = space.volume_table(p.resolved_source_order());
  std::vector<T> local(nloc * nloc);
  std::vector<Vec2L> grads(nloc);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    std::fill(local.begin(), local.end(), T(0));
    const DiagTensor& kap = p.kappa_at(e);
    const T det = space.map_ext(e).det;
    for (std::size_t q = 0; q < vt.rule->size(); ++q) {
      const T w = vt.rule->weights_ext[q] * det;
      for (std::size_t i = 0; i < nloc; ++i) grads[i] = space.table_gradient_ext(e, vt, q, i);
      for (std::size_t i = 0; i < nloc; ++i) {
        for (std::size_t j = 0; j < nloc; ++j) local[i * nloc + j] += w * dot(kap * grads[j], grads[i]);
      }
    }
    for (std::size_t i = 0; i < nloc; ++i)
      for (std::size_t j = 0; j < nloc; ++j)
        if (local[i * nloc + j] != T(0)) trip.push_back({space.dof(e, i), space.dof(e, j), local[i * nloc + j]});
    if (p.source) {
      for (std::size_t q = 0; q < st.rule->size(); ++q) {
        const T fq = static_cast<T>(p.source(e, space.map(e).to_physical(st.rule->points[q])));
        if (fq == T(0)) continue;
        const T w = st.rule->weights_ext[q] * det;
        for (std::size_t i = 0; i < nloc; ++i) rhs[space.dof(e, i)] += w * fq * space.table_value_ext(e, st, q, i);
      }
    }
  }

  // edge terms
  const T theta = static_cast<T>(p.theta);
  std::vector<T> v0(nloc), v1(nloc);
  std::vector<Vec2L> g0(nloc), g1(nloc);
  for (std::size_t k = 0; k < mesh.num_edges(); ++k) {
    const Edge& edge = mesh.edge(k);
    const Vec2L normal = edge.normal.cast<T>();
    const auto pts = space.edge_points(k, p.resolved_edge_order());
    if (edge.is_boundary()) {
      const auto& bc = p.boundary.at(edge.tag);
      const std::size_t e = edge.elements[0];
      const DiagTensor& kap = p.kappa_at(e);
      if (bc.kind == BoundaryCondition::Kind::neumann) {
        for (const auto& pt : pts) {
          const T g = static_cast<T>(eval_or_zero(bc.value, pt.x));
          if (g == T(0)) continue;
          space.eval_ext(e, pt.reference_ext[0], v0);
          for (std::size_t i = 0; i < nloc; ++i) rhs[space.dof(e, i)] -= pt.weight_ext * g * v0[i];
        }
        continue;
      }
      const T sigma = static_cast<T>(p.sigma(k));
      std::fill(local.begin(), local.end(), T(0));
      for (const auto& pt : pts) {
        space.eval_ext(e, pt.reference_ext[0], v0, g0);
        const T w = pt.weight_ext;
        const T g = static_cast<T>(eval_or_zero(bc.value, pt.x));
        for (std::size_t i = 0; i < nloc; ++i) {
          const T dn_i = dot(kap * g0[i], normal);
          for (std::size_t j = 0; j < nloc; ++j) {
            const T dn_j = dot(kap * g0[j], normal);
            local[i * nloc + j] += w * (-dn_j * v0[i] + sigma * v0[j] * v0[i] + theta * dn_i * v0[j]);
          }
          rhs[space.dof(e, i)] += w * g * (sigma * v0[i] + theta * dn_i);
        }
      }
      for (std::size_t i = 0; i < nloc; ++i)
        for (std::size_t j = 0; j < nloc; ++j) trip.push_back({space.dof(e, i), space.dof(e, j), local[i * nloc + j]});
      continue;
    }

    const std::size_t el[2] = {edge.elements[0], edge.elements[1]};
    const T sigma = static_cast<T>(p.sigma(k));
    // block (b, a): test on side b, trial on side a
    std::vector<T> blocks(4 * nloc * nloc, T(0));
    for (const auto& pt : pts) {
      space.eval_ext(el[0], pt.reference_ext[0], v0, g0);
      space.eval_ext(el[1], pt.reference_ext[1], v1, g1);
      const T w = pt.weight_ext;
      const std::vector<T>* vals[2] = {&v0, &v1};
      const std::vector<Vec2L>* grd[2] = {&g0, &g1};
      for (int b = 0; b < 2; ++b) {
        const T sb = b == 0 ? T(1) : T(-1);
        const DiagTensor& kb = p.kappa_at(el[b]);
        for (int a = 0; a < 2; ++a) {
          const T sa = a == 0 ? T(1) : T(-1);
          const DiagTensor& ka = p.kappa_at(el[a]);
          T* blk = &blocks[static_cast<std::size_t>(b * 2 + a) * nloc * nloc];
          for (std::size_t i = 0; i < nloc; ++i) {
            const T wi = (*vals[b])[i];
            const T dn_i = dot(kb * (*grd[b])[i], normal);
            for (std::size_t j = 0; j < nloc; ++j) {
              const T pj = (*vals[a])[j];
              const T dn_j = dot(ka * (*grd[a])[j], normal);
              blk[i * nloc + j] += w * (-T(0.5) * dn_j * sb * wi + sigma * sa * sb * pj * wi + theta * T(0.5) * dn_i * sa * pj);
            }
          }
        }
      }
    }
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a) {
        const T* blk = &blocks[static_cast<std::size_t>(b * 2 + a) * nloc * nloc];
        for (std::size_t i = 0; i < nloc; ++i)
          for (std::size_t j = 0; j < nloc; ++j)
            trip.push_back({space.dof(el[b], i), space.dof(el[a], j), blk[i * nloc + j]});
      }
  }

  BasicFlowSystem<T> sys;
  sys.pressure_size = n;
  if (pure_neumann) {
    // solvability: int f - int g_N = 0 (the constant is in the left kernel)
    T total = 0, scale = 0;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
      const T r0 = rhs[space.dof(e, 0)] * std::sqrt(static_cast<T>(mesh.element_measure(e)));
      total += r0;
      scale += std::abs(r0);
    }
    if (std::abs(total) > static_cast<T>(1e-10) * std::max(T(1), scale)) {
      throw InvalidArgument("pure-Neumann data violate solvability: int f - int g_N = " +
                            std::to_string(static_cast<double>(total)));
    }
    const auto m = basis_means<T>(space);
    for (std::size_t i = 0; i < n; ++i) {
      if (m[i] == T(0)) continue;
      trip.push_back({n, i, m[i]});
      trip.push_back({i, n, m[i]});
    }
    rhs.push_back(T(0));
    sys.bordered = true;
  }
  const std::size_t total_size = rhs.size();
  sys.matrix = assemble_basic<T>(total_size, total_size, std::move(trip));
  sys.rhs = std::move(rhs);
  return sys;
}

}  // namespace

FlowSystem assemble_flow(const FlowProblem& problem) {
  auto ext = assemble_impl(problem);
  FlowSystem sys;
  sys.matrix = ext.matrix.cast<double>();
  sys.rhs.assign(ext.rhs.begin(), ext.rhs.end());
  sys.pressure_size = ext.pressure_size;
  sys.bordered = ext.bordered;
  return sys;
}

BasicFlowSystem<long double> assemble_flow_extended(const FlowProblem& problem) {
  return assemble_impl(problem);
}

double FlowSolution::evaluate(std::size_t e, const Vec2& x) const {
  return space->value<double>(pressure, e, space->map(e).to_reference(x));
}

namespace {

// Bordered gauge systems [A m; m^T 0] without factoring the dense border, which
// ruins the sparse LU ordering. A annihilates constants from both sides (pure
// Neumann), so A~ = A + s e_j e_j^T is regular and two solves with it give
//   dp = y - dl z + alpha 1,  A~ y = r_p,  A~ z = m,  dl = y_j / z_j,
// with alpha fixing m^T dp = r_l. Refinement runs on the exact bordered system.
std::vector<long double> solve_bordered(const BasicFlowSystem<long double>& sys, const DgSpace& space,
                                        const SolveOptions& options, SolveReport& report) {
  const std::size_t np = sys.pressure_size;
  const std::size_t n = np + 1;
  const std::size_t j = space.dof(0, 0);
  std::vector<Triplet> trip;
  trip.reserve(sys.matrix.nnz());
  std::vector<double> m(np, 0.0), one(np, 0.0);
  double shift = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = sys.matrix.row_offsets()[i]; k < sys.matrix.row_offsets()[i + 1]; ++k) {
      const std::size_t c = sys.matrix.col_indices()[k];
      const double v = static_cast<double>(sys.matrix.values()[k]);
      if (i < np && c < np) {
        trip.push_back({i, c, v});
        if (i == c) shift = std::max(shift, std::abs(v));
      } else if (c == np && i < np) {
        m[i] = v;
      }
    }
  }
  for (std::size_t e = 0; e < space.mesh().num_elements(); ++e) {
    one[space.dof(e, 0)] = std::sqrt(space.mesh().element_measure(e));
  }
  trip.push_back({j, j, shift});
  SolveOptions o = options;
  o.method = SolveMethod::sparse_lu;
  o.tolerance = 1e-6;  // corrections only; the bordered residual is checked below
  const LinearSolver shifted(assemble(np, np, std::move(trip)), o);

  const std::vector<double> z = shifted.solve(m).x;
  double m_one = 0.0;
  for (std::size_t i = 0; i < np; ++i) m_one += m[i] * one[i];
  if (!(std::abs(z[j]) > 0.0) || !(std::abs(m_one) > 0.0)) throw SolverFailure("gauge elimination is singular");

  long double bn = 0;
  for (auto v : sys.rhs) bn += v * v;
  bn = std::sqrt(bn);
  std::vector<long double> x(n, 0.0L), best = x, r(n), ax(n);
  std::vector<double> rp(np);
  long double best_res = std::numeric_limits<long double>::infinity();
  std::size_t it = 0;
  int stalls = 0;
  for (; it < 40; ++it) {
    sys.matrix.multiply<long double>(x, ax);
    long double rn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = sys.rhs[i] - ax[i];
      rn += r[i] * r[i];
    }
    rn = std::sqrt(rn);
    const long double rel = bn > 0 ? rn / bn : rn;
    if (rel < best_res) {
      stalls = rel > 0.5L * best_res ? stalls + 1 : 0;
      best_res = rel;
      best = x;
    } else {
      ++stalls;
    }
    if (rel == 0 || stalls >= 2) break;
    for (std::size_t i = 0; i < np; ++i) rp[i] = static_cast<double>(r[i]);
    const std::vector<double> y = shifted.solve(rp).x;
    const double dl = y[j] / z[j];
    double mdp = 0.0;
    std::vector<double> dp(np);
    for (std::size_t i = 0; i < np; ++i) {
      dp[i] = y[i] - dl * z[i];
      mdp += m[i] * dp[i];
    }
    const double alpha = (static_cast<double>(r[np]) - mdp) / m_one;
    for (std::size_t i = 0; i < np; ++i) x[i] += dp[i] + alpha * one[i];
    x[np] += dl;
  }
  report.iterations = it;
  report.relative_residual = static_cast<double>(best_res);
  report.method = "sparse_lu (shifted gauge) + long-double refinement";
  report.iterative = false;
  if (!(report.relative_residual <= options.tolerance)) {
    std::vector<double> bd(best.begin(), best.end());
    throw NonConvergence("refined gauge solve did not reach tolerance", bd, report.relative_residual);
  }
  return best;
}

}  // namespace

FlowSolution solve_flow(const FlowProblem& problem) {
  auto sys = assemble_flow_extended(problem);
  FlowSolution sol;
  sol.problem = std::make_shared<const FlowProblem>(problem);
  sol.space = std::make_shared<const DgSpace>(problem.mesh, problem.degree);
  SolveOptions opts = problem.solver;
  opts.block_size = sol.space->local_size();
  opts.symmetric_hint = opts.symmetric_hint || (problem.theta == -1 && !sys.bordered);
  const bool iterative = opts.method == SolveMethod::gmres || opts.method == SolveMethod::cg;
  const bool large_gauge = sys.bordered && !iterative && opts.method != SolveMethod::dense_lu &&
                           sys.matrix.rows() > opts.dense_threshold;
  if (large_gauge) {
    std::vector<long double> x = solve_bordered(sys, *sol.space, opts, sol.report);
    sol.gauge_multiplier = static_cast<double>(x.back());
    x.pop_back();
    sol.pressure_extended = std::move(x);
    sol.pressure.assign(sol.pressure_extended.begin(), sol.pressure_extended.end());
    return sol;
  }
  LinearSolver solver(sys.matrix.cast<double>(), opts);
  std::vector<long double> x;
  if (iterative) {
    std::vector<double> b(sys.rhs.begin(), sys.rhs.end());
    auto res = solver.solve(b);
    sol.report = res.report;
    x.assign(res.x.begin(), res.x.end());
  } else {
    x = solver.solve_refined(sys.matrix, sys.rhs, sol.report);
  }
  if (sys.bordered) {
    sol.gauge_multiplier = static_cast<double>(x.back());
    x.pop_back();
  }
  sol.pressure_extended = std::move(x);
  sol.pressure.assign(sol.pressure_extended.begin(), sol.pressure_extended.end());
  return sol;
}

double flow_residual(const FlowSolution& solution) {
  const auto sys = assemble_flow_extended(*solution.problem);
  std::vector<long double> x = solution.pressure_extended;
  if (sys.bordered) x.push_back(solution.gauge_multiplier);
  std::vector<long double> ax(x.size());
  sys.matrix.multiply<long double>(x, ax);
  long double m = 0;
  for (std::size_t i = 0; i < sys.pressure_size; ++i) m = std::max(m, std::abs(ax[i] - sys.rhs[i]));
  return static_cast<double>(m);
}

}  // namespace dgflow
