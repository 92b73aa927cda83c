#pragma once

#include <cmath>
#include <type_traits>

namespace dgflow {

/// Point or vector in the plane; 1D meshes use y = 0.
template <class T>
struct BasicVec2 {
  T x = 0;
  T y = 0;

  constexpr BasicVec2& operator+=(const BasicVec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr BasicVec2& operator-=(const BasicVec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr BasicVec2& operator*=(T s) {
    x *= s;
    y *= s;
    return *this;
  }
  template <class U>
  constexpr BasicVec2<U> cast() const {
    return {static_cast<U>(x), static_cast<U>(y)};
  }
  friend constexpr bool operator==(const BasicVec2&, const BasicVec2&) = default;
};

using Vec2 = BasicVec2<double>;
using Vec2L = BasicVec2<long double>;

template <class T>
constexpr BasicVec2<T> operator+(BasicVec2<T> a, const BasicVec2<T>& b) {
  return a += b;
}
template <class T>
constexpr BasicVec2<T> operator-(BasicVec2<T> a, const BasicVec2<T>& b) {
  return a -= b;
}
template <class T>
constexpr BasicVec2<T> operator-(const BasicVec2<T>& a) {
  return {-a.x, -a.y};
}
template <class T>
constexpr BasicVec2<T> operator*(std::type_identity_t<T> s, BasicVec2<T> a) {
  return a *= s;
}
template <class T>
constexpr BasicVec2<T> operator*(BasicVec2<T> a, std::type_identity_t<T> s) {
  return a *= s;
}
template <class T>
constexpr T dot(const BasicVec2<T>& a, const BasicVec2<T>& b) {
  return a.x * b.x + a.y * b.y;
}
template <class T>
constexpr T cross(const BasicVec2<T>& a, const BasicVec2<T>& b) {
  return a.x * b.y - a.y * b.x;
}
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }

/// Row-major 2x2 matrix.
template <class T>
struct BasicMat2 {
  T a = 1, b = 0;
  T c = 0, d = 1;

  constexpr T det() const { return a * d - b * c; }
  constexpr BasicVec2<T> operator*(const BasicVec2<T>& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
  constexpr BasicMat2 transposed() const { return {a, c, b, d}; }
  constexpr BasicMat2 inverse() const {
    const T s = T(1) / det();
    return {d * s, -b * s, -c * s, a * s};
  }
};

using Mat2 = BasicMat2<double>;

/// Diagonal, element-wise constant tensor (permeability or diffusion).
struct DiagTensor {
  double xx = 1.0;
  double yy = 1.0;
  template <class T>
  constexpr BasicVec2<T> operator*(const BasicVec2<T>& v) const {
    return {static_cast<T>(xx) * v.x, static_cast<T>(yy) * v.y};
  }
  constexpr bool is_zero() const { return xx == 0.0 && yy == 0.0; }
};

}  // namespace dgflow
