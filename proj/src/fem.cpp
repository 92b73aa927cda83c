#include "dgflow/fem.hpp"

#include <cmath>
#include <limits>
#include <type_traits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "dgflow/error.hpp"

namespace dgflow {

std::size_t basis_dimension(int degree, CellKind kind) {
  if (degree < 0) throw InvalidArgument("polynomial degree must be >= 0");
  const auto k = static_cast<std::size_t>(degree);
  return kind == CellKind::segment ? k + 1 : (k + 1) * (k + 2) / 2;
}

namespace {

// Jacobi P_n^{(a,0)}(t) for n = 0..count-1, with derivatives.
template <class T>
void jacobi_a0(int count, T a, T t, T* p, T* dp) {
  p[0] = 1;
  dp[0] = 0;
  if (count == 1) return;
  p[1] = T(0.5) * ((a + 2) * t + a);
  dp[1] = T(0.5) * (a + 2);
  for (int n = 2; n < count; ++n) {
    const T s = T(2 * n) + a;
    const T c0 = T(2 * n) * (T(n) + a) * (s - 2);
    const T c1 = (s - 1) * s * (s - 2);
    const T c2 = (s - 1) * a * a;
    const T c3 = 2 * (T(n) + a - 1) * T(n - 1) * s;
    p[n] = ((c1 * t + c2) * p[n - 1] - c3 * p[n - 2]) / c0;
    dp[n] = ((c1 * t + c2) * dp[n - 1] + c1 * p[n - 1] - c3 * dp[n - 2]) / c0;
  }
}

std::vector<Vec2> lagrange_nodes(int k, CellKind kind) {
  std::vector<Vec2> nodes;
  if (kind == CellKind::segment) {
    if (k == 0) return {{0.5, 0.0}};
    for (int i = 0; i <= k; ++i) nodes.push_back({static_cast<double>(i) / k, 0.0});
    return nodes;
  }
  if (k == 0) return {{1.0 / 3.0, 1.0 / 3.0}};
  for (int j = 0; j <= k; ++j) {
    for (int i = 0; i + j <= k; ++i) {
      nodes.push_back({static_cast<double>(i) / k, static_cast<double>(j) / k});
    }
  }
  return nodes;
}

}  // namespace

BasisSet::BasisSet(int degree, CellKind kind, BasisFamily family)
    : degree_(degree), kind_(kind), family_(family), size_(basis_dimension(degree, kind)) {
  if (degree_ > max_basis_degree) {
    throw CapabilityError("basis degree " + std::to_string(degree_) + " not supported");
  }
  if (family_ != BasisFamily::lagrange) return;
  // Vandermonde V(a,b) = modal_b(node_a); the nodal functions have coefficients V^{-T}.
  const auto nodes = lagrange_nodes(degree_, kind_);
  const auto n = static_cast<Eigen::Index>(size_);
  Eigen::MatrixXd v(n, n);
  std::vector<double> row(size_);
  for (Eigen::Index a = 0; a < n; ++a) {
    eval_modal<double>(nodes[static_cast<std::size_t>(a)], row, {});
    for (Eigen::Index b = 0; b < n; ++b) v(a, b) = row[static_cast<std::size_t>(b)];
  }
  const Eigen::MatrixXd c = v.inverse().transpose();
  nodal_.resize(size_ * size_);
  nodal_ext_.resize(size_ * size_);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      nodal_[static_cast<std::size_t>(i * n + j)] = c(i, j);
      nodal_ext_[static_cast<std::size_t>(i * n + j)] = c(i, j);
    }
  }
}

template <class T>
void BasisSet::eval_modal(const BasicVec2<T>& p, std::span<T> values, std::span<BasicVec2<T>> grads) const {
  using std::sqrt;
  const int k = degree_;
  const bool want_grad = !grads.empty();
  if (kind_ == CellKind::segment) {
    T lp[64], ldp[64];
    legendre<T>(k, 2 * p.x - 1, {lp, static_cast<std::size_t>(k + 1)}, {ldp, static_cast<std::size_t>(k + 1)});
    for (int i = 0; i <= k; ++i) {
      const T s = sqrt(T(2 * i + 1));
      values[static_cast<std::size_t>(i)] = s * lp[i];
      if (want_grad) grads[static_cast<std::size_t>(i)] = {2 * s * ldp[i], T(0)};
    }
    return;
  }

  // Homogenized Legendre H_i(u,v) = v^i P_i(u/v) stays smooth at the top vertex.
  const T u = 2 * p.x + p.y - 1;
  const T v = 1 - p.y;
  T h[64], hu[64], hv[64];
  h[0] = 1;
  hu[0] = hv[0] = 0;
  if (k >= 1) {
    h[1] = u;
    hu[1] = 1;
    hv[1] = 0;
  }
  for (int n = 1; n < k; ++n) {
    const T a = T(2 * n + 1), b = T(n), c = T(n + 1);
    h[n + 1] = (a * u * h[n] - b * v * v * h[n - 1]) / c;
    hu[n + 1] = (a * (h[n] + u * hu[n]) - b * v * v * hu[n - 1]) / c;
    hv[n + 1] = (a * u * hv[n] - b * (2 * v * h[n - 1] + v * v * hv[n - 1])) / c;
  }
  const T t = 2 * p.y - 1;
  T jp[64], jdp[64];
  std::size_t idx = 0;
  for (int d = 0; d <= k; ++d) {
    for (int i = d; i >= 0; --i) {
      const int j = d - i;
      jacobi_a0<T>(j + 1, T(2 * i + 1), t, jp, jdp);
      const T norm = sqrt(T(2 * (2 * i + 1) * (i + j + 1)));
      values[idx] = norm * h[i] * jp[j];
      if (want_grad) {
        // d/dx = 2 d/du ; d/dy = d/du - d/dv (+ the Jacobi factor through t = 2y - 1)
        const T dx = 2 * hu[i] * jp[j];
        const T dy = (hu[i] - hv[i]) * jp[j] + h[i] * 2 * jdp[j];
        grads[idx] = {norm * dx, norm * dy};
      }
      ++idx;
    }
  }
}

template <class T>
void BasisSet::eval_into(const BasicVec2<T>& p, std::span<T> values, std::span<BasicVec2<T>> grads) const {
  if (family_ == BasisFamily::orthonormal) {
    eval_modal<T>(p, values, grads);
    return;
  }
  const auto& nodal = [this]() -> const auto& {
    if constexpr (std::is_same_v<T, double>) {
      return nodal_;
    } else {
      return nodal_ext_;
    }
  }();
  std::vector<T> mv(size_);
  std::vector<BasicVec2<T>> mg(grads.empty() ? 0 : size_);
  eval_modal<T>(p, mv, mg);
  for (std::size_t i = 0; i < size_; ++i) {
    T s = 0;
    BasicVec2<T> g;
    for (std::size_t j = 0; j < size_; ++j) {
      const T c = nodal[i * size_ + j];
      s += c * mv[j];
      if (!grads.empty()) g += c * mg[j];
    }
    values[i] = s;
    if (!grads.empty()) grads[i] = g;
  }
}

template void BasisSet::eval_into<double>(const Vec2&, std::span<double>, std::span<Vec2>) const;
template void BasisSet::eval_into<long double>(const Vec2L&, std::span<long double>, std::span<Vec2L>) const;

std::vector<double> BasisSet::eval(const Vec2& p) const {
  std::vector<double> out(size_);
  eval_into<double>(p, out);
  return out;
}

std::vector<Vec2> BasisSet::eval_gradient(const Vec2& p) const {
  std::vector<double> vals(size_);
  std::vector<Vec2> out(size_);
  eval_into<double>(p, vals, out);
  return out;
}

namespace {

template <class T>
void gauss_legendre_impl(int n, std::vector<T>& points, std::vector<T>& weights) {
  using std::abs;
  using std::cos;
  if (n < 1) throw InvalidArgument("Gauss-Legendre needs at least one point");
  points.assign(static_cast<std::size_t>(n), T(0));
  weights.assign(static_cast<std::size_t>(n), T(0));
  std::vector<T> p(static_cast<std::size_t>(n + 1)), dp(p.size());
  const T eps = 4 * std::numeric_limits<T>::epsilon();
  for (int i = 0; i < n; ++i) {
    T t = cos(std::numbers::pi_v<T> * (T(i) + T(0.75)) / (T(n) + T(0.5)));
    for (int it = 0; it < 100; ++it) {
      legendre<T>(n, t, p, dp);
      const T dt = p[static_cast<std::size_t>(n)] / dp[static_cast<std::size_t>(n)];
      t -= dt;
      if (abs(dt) < eps) break;
    }
    legendre<T>(n, t, p, dp);
    const T d = dp[static_cast<std::size_t>(n)];
    // map [-1,1] -> [0,1]; sorted ascending
    const auto slot = static_cast<std::size_t>(n - 1 - i);
    points[slot] = (t + 1) / 2;
    weights[slot] = 1 / ((1 - t * t) * d * d);
  }
}

}  // namespace

void gauss_legendre(int n, std::vector<double>& points, std::vector<double>& weights) {
  std::vector<long double> x, w;
  gauss_legendre_impl(n, x, w);
  points.assign(x.begin(), x.end());
  weights.assign(w.begin(), w.end());
}

void gauss_legendre(int n, std::vector<long double>& points, std::vector<long double>& weights) {
  gauss_legendre_impl(n, points, weights);
}

namespace {

QuadratureRule build_rule(int order, CellKind kind) {
  QuadratureRule rule;
  rule.order = order;
  auto& pts = rule.points_ext;
  auto& wts = rule.weights_ext;
  if (kind == CellKind::segment) {
    std::vector<long double> x, w;
    gauss_legendre(order / 2 + 1, x, w);
    for (std::size_t i = 0; i < x.size(); ++i) {
      pts.push_back({x[i], 0.0L});
      wts.push_back(w[i]);
    }
  } else if (order <= 1) {
    pts = {{1.0L / 3, 1.0L / 3}};
    wts = {0.5L};
  } else if (order == 2) {
    pts = {{1.0L / 6, 1.0L / 6}, {2.0L / 3, 1.0L / 6}, {1.0L / 6, 2.0L / 3}};
    wts = {1.0L / 6, 1.0L / 6, 1.0L / 6};
  } else {
    // Collapsed (Duffy) product rule: the extra factor (1-b) costs one degree in b.
    const int n = (order + 3) / 2;
    std::vector<long double> x, w;
    gauss_legendre(n, x, w);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const long double a = x[static_cast<std::size_t>(i)];
        const long double b = x[static_cast<std::size_t>(j)];
        pts.push_back({a * (1 - b), b});
        wts.push_back(w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(j)] * (1 - b));
      }
    }
  }
  for (std::size_t q = 0; q < pts.size(); ++q) {
    rule.points.push_back(pts[q].cast<double>());
    rule.weights.push_back(static_cast<double>(wts[q]));
  }
  return rule;
}

}  // namespace

const QuadratureRule& quadrature_rule(int order, CellKind kind) {
  if (order < 0 || order > max_quadrature_order) {
    throw CapabilityError("quadrature order " + std::to_string(order) + " not supported (max " +
                          std::to_string(max_quadrature_order) + ")");
  }
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{order, static_cast<int>(kind)}];
  if (!slot) slot = std::make_unique<QuadratureRule>(build_rule(order, kind));
  return *slot;
}

template <class T>
BasicElementMap<T> element_map(const std::array<Vec2, 3>& vd, CellKind kind) {
  const std::array<BasicVec2<T>, 3> v{vd[0].cast<T>(), vd[1].cast<T>(), vd[2].cast<T>()};
  BasicElementMap<T> m;
  m.origin = v[0];
  if (kind == CellKind::segment) {
    m.jacobian = {v[1].x - v[0].x, T(0), T(0), T(1)};
  } else {
    const BasicVec2<T> e1 = v[1] - v[0];
    const BasicVec2<T> e2 = v[2] - v[0];
    m.jacobian = {e1.x, e2.x, e1.y, e2.y};
  }
  m.det = m.jacobian.det();
  if (!(m.det > 0)) throw InvalidMesh("degenerate or inverted element (det J <= 0)");
  m.inverse_transpose = m.jacobian.inverse().transposed();
  return m;
}

template ElementMap element_map<double>(const std::array<Vec2, 3>&, CellKind);
template ElementMapL element_map<long double>(const std::array<Vec2, 3>&, CellKind);

}  // namespace dgflow
