#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "dgflow/fem.hpp"
#include "dgflow/mesh.hpp"

namespace dgflow {

/// Basis values and reference gradients at the points of one reference rule.
struct ReferenceTable {
  const QuadratureRule* rule = nullptr;
  std::size_t nbasis = 0;
  std::vector<double> values;  // point-major: values[q * nbasis + i]
  std::vector<Vec2> gradients;
  // long double counterparts at rule->points_ext
  std::vector<long double> values_ext;
  std::vector<Vec2L> gradients_ext;
};

struct EdgePoint {
  double t = 0.0;                 // edge parameter in [0, 1], from vertices[0] to vertices[1]
  double weight = 0.0;            // physical weight (includes edge length)
  Vec2 x;                         // physical location
  std::array<Vec2, 2> reference;  // reference coordinates in elements[0] / elements[1]
  long double t_ext = 0;
  long double weight_ext = 0;
  std::array<Vec2L, 2> reference_ext;
};

using ElementField = std::function<double(std::size_t element, const Vec2& x)>;

/// Broken polynomial space V_{h,k}. Local basis functions are the reference
/// orthonormal basis scaled by |det J|^{-1/2}, so every element mass matrix is
/// the identity. Degree-k coefficients come first, so a prefix of the local
/// basis spans the lower degrees.
class DgSpace {
 public:
  DgSpace(MeshPtr mesh, int degree);

  const Mesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  CellKind kind() const { return kind_; }
  const BasisSet& basis() const { return basis_; }
  std::size_t local_size() const { return basis_.size(); }
  std::size_t size() const { return basis_.size() * mesh_->num_elements(); }
  std::size_t dof(std::size_t e, std::size_t i) const { return e * basis_.size() + i; }

  const ElementMap& map(std::size_t e) const { return maps_[e]; }
  double scale(std::size_t e) const { return scales_[e]; }
  const ElementMapL& map_ext(std::size_t e) const { return maps_ext_[e]; }
  long double scale_ext(std::size_t e) const { return scales_ext_[e]; }

  /// Physical basis values (and gradients) of element e at a reference point.
  void eval(std::size_t e, const Vec2& ref, std::span<double> values, std::span<Vec2> grads = {}) const;
  /// Same in long double, for assembly and audits near the rounding floor.
  void eval_ext(std::size_t e, const Vec2L& ref, std::span<long double> values, std::span<Vec2L> grads = {}) const;

  /// Cached tables for a volume rule of the given order.
  const ReferenceTable& volume_table(int order) const;
  /// Physical gradients of basis i at table point q.
  Vec2 table_gradient(std::size_t e, const ReferenceTable& t, std::size_t q, std::size_t i) const {
    return scales_[e] * maps_[e].physical_gradient(t.gradients[q * t.nbasis + i]);
  }
  double table_value(std::size_t e, const ReferenceTable& t, std::size_t q, std::size_t i) const {
    return scales_[e] * t.values[q * t.nbasis + i];
  }
  Vec2L table_gradient_ext(std::size_t e, const ReferenceTable& t, std::size_t q, std::size_t i) const {
    return scales_ext_[e] * maps_ext_[e].physical_gradient(t.gradients_ext[q * t.nbasis + i]);
  }
  long double table_value_ext(std::size_t e, const ReferenceTable& t, std::size_t q, std::size_t i) const {
    return scales_ext_[e] * t.values_ext[q * t.nbasis + i];
  }

  std::vector<EdgePoint> edge_points(std::size_t edge, int order) const;

  /// Evaluation of a global coefficient vector.
  template <class T>
  T value(std::span<const T> coeffs, std::size_t e, const Vec2& ref) const {
    std::vector<double> phi(local_size());
    eval(e, ref, phi);
    T s = 0;
    for (std::size_t i = 0; i < phi.size(); ++i) s += coeffs[dof(e, i)] * static_cast<T>(phi[i]);
    return s;
  }
  long double value_ext(std::span<const long double> coeffs, std::size_t e, const Vec2L& ref) const;
  Vec2 gradient(std::span<const double> coeffs, std::size_t e, const Vec2& ref) const;

  /// L2 projection (exact mass inverse, since local masses are identities).
  std::vector<double> project(const ElementField& f, int order) const;
  /// Element-wise mean of the degree-0 part (valid for any degree).
  double cell_mean(std::span<const double> coeffs, std::size_t e) const;

 private:
  MeshPtr mesh_;
  int degree_;
  CellKind kind_;
  BasisSet basis_;
  std::vector<ElementMap> maps_;
  std::vector<double> scales_;
  std::vector<ElementMapL> maps_ext_;
  std::vector<long double> scales_ext_;
  mutable std::mutex mutex_;
  mutable std::map<int, std::unique_ptr<ReferenceTable>> tables_;
};

/// ||u_h - u||_{L2} with the given rule order; an empty u means zero.
double l2_error(const DgSpace& space, std::span<const double> coeffs, const ElementField& u, int order);

}  // namespace dgflow
