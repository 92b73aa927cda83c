#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "dgflow/geometry.hpp"

namespace dgflow {

enum class CellKind { segment, triangle };

enum class BasisFamily {
  /// Legendre (segment) / Dubiner (triangle), orthonormal on the reference cell, hierarchical.
  orthonormal,
  /// Nodal basis on equispaced points; k = 0 uses the cell midpoint.
  lagrange
};

/// k+1 on a segment, (k+1)(k+2)/2 on a triangle.
std::size_t basis_dimension(int degree, CellKind kind);

inline constexpr int max_basis_degree = 30;

inline double reference_measure(CellKind kind) { return kind == CellKind::segment ? 1.0 : 0.5; }

/// Reference cells: segment [0,1] (y ignored), triangle (0,0),(1,0),(0,1).
class BasisSet {
 public:
  BasisSet(int degree, CellKind kind, BasisFamily family = BasisFamily::orthonormal);

  int degree() const { return degree_; }
  CellKind kind() const { return kind_; }
  BasisFamily family() const { return family_; }
  std::size_t size() const { return size_; }

  std::vector<double> eval(const Vec2& p) const;
  std::vector<Vec2> eval_gradient(const Vec2& p) const;
  /// Allocation-free variants; spans must have size() entries. grads may be empty.
  /// Instantiated for double and long double.
  template <class T>
  void eval_into(const BasicVec2<T>& p, std::span<T> values, std::span<BasicVec2<T>> grads = {}) const;

 private:
  template <class T>
  void eval_modal(const BasicVec2<T>& p, std::span<T> values, std::span<BasicVec2<T>> grads) const;

  int degree_;
  CellKind kind_;
  BasisFamily family_;
  std::size_t size_;
  // lagrange_i = sum_j nodal_[i*size+j] * modal_j
  std::vector<double> nodal_;
  std::vector<long double> nodal_ext_;
};

struct QuadratureRule {
  std::vector<Vec2> points;
  std::vector<double> weights;
  // same rule before rounding to double
  std::vector<Vec2L> points_ext;
  std::vector<long double> weights_ext;
  int order = 0;
  std::size_t size() const { return points.size(); }
};

inline constexpr int max_quadrature_order = 40;

/// Rules are cached; the returned reference stays valid for the program lifetime.
/// Throws CapabilityError when order is negative or above max_quadrature_order.
const QuadratureRule& quadrature_rule(int order, CellKind kind);

/// Gauss-Legendre points on [0,1].
void gauss_legendre(int n, std::vector<double>& points, std::vector<double>& weights);
void gauss_legendre(int n, std::vector<long double>& points, std::vector<long double>& weights);

/// Legendre polynomials P_0..P_n at t in [-1,1], and derivatives if requested.
template <class T>
void legendre(int n, T t, std::span<T> p, std::span<T> dp = {}) {
  p[0] = 1;
  if (!dp.empty()) dp[0] = 0;
  if (n == 0) return;
  p[1] = t;
  if (!dp.empty()) dp[1] = 1;
  for (int m = 1; m < n; ++m) {
    p[m + 1] = (T(2 * m + 1) * t * p[m] - T(m) * p[m - 1]) / T(m + 1);
    if (!dp.empty()) dp[m + 1] = dp[m - 1] + T(2 * m + 1) * p[m];
  }
}

/// Affine map x = origin + J * xi from the reference cell.
template <class T>
struct BasicElementMap {
  BasicVec2<T> origin;
  BasicMat2<T> jacobian;
  BasicMat2<T> inverse_transpose;
  T det = 1;

  BasicVec2<T> to_physical(const BasicVec2<T>& ref) const { return origin + jacobian * ref; }
  BasicVec2<T> to_reference(const BasicVec2<T>& x) const {
    return inverse_transpose.transposed() * (x - origin);
  }
  BasicVec2<T> physical_gradient(const BasicVec2<T>& ref_grad) const { return inverse_transpose * ref_grad; }
};

using ElementMap = BasicElementMap<double>;
using ElementMapL = BasicElementMap<long double>;

/// Throws InvalidMesh when det J <= 0. 1D maps use J = diag(x1-x0, 1).
template <class T = double>
BasicElementMap<T> element_map(const std::array<Vec2, 3>& vertices, CellKind kind);

}  // namespace dgflow
