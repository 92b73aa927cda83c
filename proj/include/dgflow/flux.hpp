#pragma once

#include <cstddef>
#include <functional>
#include <cmath>
#include <iosfwd>
#include <memory>
#include <vector>

#include "dgflow/dg_space.hpp"
#include "dgflow/flow.hpp"

namespace dgflow {

/// Orthonormal Legendre polynomials on [0,1]: L_m(t) = sqrt(2m+1) P_m(2t-1).
template <class T>
void edge_legendre(int degree, T t, std::span<T> out) {
  using std::sqrt;
  legendre<T>(degree, 2 * t - 1, out);
  for (int m = 0; m <= degree; ++m) out[static_cast<std::size_t>(m)] *= sqrt(T(2 * m + 1));
}

/// Darcy velocity U: a vector polynomial inside each element plus one scalar
/// normal-flux polynomial per edge (relative to the edge's stored normal).
struct NumericalFlux {
  MeshPtr mesh;
  /// Space of each Cartesian component of the interior flux.
  std::shared_ptr<const DgSpace> interior_space;
  /// Coefficients are kept in long double; the audit needs them past double rounding.
  std::vector<long double> ux, uy;
  /// Legendre coefficients in the edge parameter t; (edge_degree + 1) per edge.
  /// 1D point edges store a single value.
  int edge_degree = 0;
  std::vector<long double> edge_coeffs;
  /// The source f, with the rule order used for its integrals.
  ElementField source;
  int source_order = 12;

  std::size_t edge_stride() const { return static_cast<std::size_t>(edge_degree) + 1; }
  Vec2 interior(std::size_t e, const Vec2& ref) const;
  Vec2 interior_at(std::size_t e, const Vec2& x) const {
    return interior(e, interior_space->map(e).to_reference(x));
  }
  double divergence(std::size_t e, const Vec2& ref) const;
  double normal_flux(std::size_t edge, double t) const;
  double edge_mean(std::size_t edge) const;
  Vec2L interior_ext(std::size_t e, const Vec2L& ref) const;
  long double normal_flux_ext(std::size_t edge, long double t) const;
  /// Normal flux at a physical point of an edge.
  double normal_flux_at(std::size_t edge, const Vec2& x) const;
  double source_at(std::size_t e, const Vec2& x) const { return source ? source(e, x) : 0.0; }

  /// Flux given by closed forms, L2-projected on the requested degrees.
  static NumericalFlux from_functions(MeshPtr mesh, int interior_degree, int edge_degree,
                                      const std::function<Vec2(std::size_t, const Vec2&)>& interior,
                                      const std::function<double(std::size_t, const Vec2&)>& normal,
                                      ElementField source = {}, int source_order = 12);
};

/// Interior flux -kappa grad P projected onto P_{k_p-1}; edge normal flux
///   interior:  -{kappa grad P}.n + sigma [P]
///   Dirichlet: -kappa grad P.n + sigma (P - g_D)
///   Neumann:   g_N
/// with data projected onto P_{k_p} of each edge using the flow's edge rule.
NumericalFlux reconstruct_flux(const FlowSolution& flow);

struct ConservationReport {
  int degree = 0;
  double tolerance = 1e-10;
  std::vector<double> residuals;
  double max_residual = 0.0;
  std::size_t worst_element = 0;
  bool passed() const { return max_residual <= tolerance; }
};

/// r_T = max_i |int_T f w_i + int_T U.grad w_i - int_dT (U.n_T) w_i| over an
/// L2(T)-orthonormal basis of P_k(T). The source quadrature matches the flow's.
ConservationReport check_local_conservation(const NumericalFlux& flux, const ElementField& f, int k,
                                            double tolerance = 1e-10);
ConservationReport check_local_conservation(const NumericalFlux& flux, int k, double tolerance = 1e-10);

/// `element_id residual` rows, then a `# ...` summary line.
void write_conservation_csv(std::ostream& out, const ConservationReport& report);

}  // namespace dgflow
