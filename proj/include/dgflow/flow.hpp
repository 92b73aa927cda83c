#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "dgflow/dg_space.hpp"
#include "dgflow/linalg.hpp"
#include "dgflow/mesh.hpp"

namespace dgflow {

using BoundaryField = std::function<double(const Vec2& x)>;

struct BoundaryCondition {
  enum class Kind { dirichlet, neumann };
  Kind kind = Kind::neumann;
  /// g_D for Dirichlet; outward normal flux g_N = u.n for Neumann. Empty means zero.
  BoundaryField value;

  static BoundaryCondition dirichlet(BoundaryField g) { return {Kind::dirichlet, std::move(g)}; }
  static BoundaryCondition neumann(BoundaryField g) { return {Kind::neumann, std::move(g)}; }
};

enum class Gauge { none, zero_mean };

/// -div(kappa grad p) = f, u = -kappa grad p, discretized by interior penalty DG.
struct FlowProblem {
  MeshPtr mesh;
  /// One tensor per element; empty means the identity everywhere.
  std::vector<DiagTensor> kappa;
  /// Source density f; empty means zero.
  ElementField source;
  /// Every boundary tag present on the mesh needs an entry.
  std::map<BoundaryTag, BoundaryCondition> boundary;
  /// -1 SIPG, 0 IIPG, +1 NIPG.
  int theta = 0;
  int degree = 1;
  /// sigma_e = penalty_factor / h_e, h_e the mean diameter of the adjacent elements.
  double penalty_factor = 100.0;
  /// Optional override, sigma as a function of the edge index.
  std::function<double(std::size_t edge)> penalty;
  Gauge gauge = Gauge::none;
  SolveOptions solver;
  /// Quadrature orders; negative picks the defaults 2k+2 (volume), 2k+3 (edges), max(12, 2k+2) (source).
  int volume_order = -1;
  int edge_order = -1;
  int source_order = -1;

  const DiagTensor& kappa_at(std::size_t e) const {
    static const DiagTensor identity{};
    return kappa.empty() ? identity : kappa[e];
  }
  double sigma(std::size_t edge) const;
  int resolved_volume_order() const { return volume_order >= 0 ? volume_order : 2 * degree + 2; }
  int resolved_edge_order() const { return edge_order >= 0 ? edge_order : 2 * degree + 3; }
  int resolved_source_order() const { return source_order >= 0 ? source_order : std::max(12, 2 * degree + 2); }
  bool has_dirichlet() const;
};

/// Linear system of the flow discretization. With a zero-mean gauge the matrix is
/// bordered by the mean constraint (one extra row and column).
template <class T>
struct BasicFlowSystem {
  BasicSparseMatrix<T> matrix;
  std::vector<T> rhs;
  std::size_t pressure_size = 0;
  bool bordered = false;
};
using FlowSystem = BasicFlowSystem<double>;

/// Validates the problem (kappa > 0, sigma > 0, BC coverage, solvability) first.
/// Throws GaugeRequired for pure-Neumann problems with Gauge::none.
FlowSystem assemble_flow(const FlowProblem& problem);
/// Same system with entries accumulated in long double.
BasicFlowSystem<long double> assemble_flow_extended(const FlowProblem& problem);

struct FlowSolution {
  std::shared_ptr<const FlowProblem> problem;
  std::shared_ptr<const DgSpace> space;
  /// Extended-precision coefficients; `pressure` is the rounded copy.
  std::vector<long double> pressure_extended;
  std::vector<double> pressure;
  /// Lagrange multiplier of the mean constraint (0 without gauge).
  double gauge_multiplier = 0.0;
  SolveReport report;

  double evaluate(std::size_t e, const Vec2& x) const;
};

FlowSolution solve_flow(const FlowProblem& problem);

/// Discrete residual max_i |(A P - b)_i| of the flow equations.
double flow_residual(const FlowSolution& solution);

}  // namespace dgflow
