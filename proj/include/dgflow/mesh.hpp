#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dgflow/geometry.hpp"

namespace dgflow {

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

enum class BoundaryTag { interior, dirichlet_1, dirichlet_2, neumann, generic_boundary };

std::string_view to_string(BoundaryTag tag);
/// Throws InvalidArgument on an unknown name.
BoundaryTag parse_boundary_tag(std::string_view name);

/// Side of the bounding box a boundary edge lies on (structured meshes).
enum class Side { none, left, right, bottom, top };

std::string_view to_string(Side side);

struct Edge {
  /// Vertex indices; for 1D point-edges both entries are the same vertex.
  std::array<std::size_t, 2> vertices{npos, npos};
  /// Incident elements; element[0] is the lower index, element[1] is npos on the boundary.
  std::array<std::size_t, 2> elements{npos, npos};
  /// Local edge number inside each incident element.
  std::array<int, 2> local_index{-1, -1};
  /// Unit normal pointing out of elements[0].
  Vec2 normal;
  /// Length (2D) or 1 (1D point-edges).
  double measure = 0.0;
  BoundaryTag tag = BoundaryTag::interior;
  Side side = Side::none;

  bool is_boundary() const { return elements[1] == npos; }
};

/// Conforming mesh of segments (dim 1) or counterclockwise triangles (dim 2).
///
/// Immutable once built. Edge numbering follows the first appearance while
/// walking elements in order, so identical inputs give identical meshes.
class Mesh {
 public:
  Mesh(int dimension, std::vector<Vec2> vertices, std::vector<std::array<std::size_t, 3>> elements);

  int dimension() const { return dimension_; }
  std::size_t vertices_per_element() const { return static_cast<std::size_t>(dimension_) + 1; }
  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_elements() const { return elements_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t num_interior_edges() const { return num_interior_edges_; }
  std::size_t num_boundary_edges() const { return edges_.size() - num_interior_edges_; }

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const Vec2& vertex(std::size_t i) const { return vertices_[i]; }
  std::span<const std::size_t> element_vertices(std::size_t e) const {
    return {elements_[e].data(), vertices_per_element()};
  }
  /// Vertex coordinates of element e (2 or 3 entries).
  std::array<Vec2, 3> element_coordinates(std::size_t e) const;
  /// Edge indices of element e in local order (local edge i is opposite vertex i in 2D,
  /// and is vertex i itself in 1D).
  std::span<const std::size_t> element_edges(std::size_t e) const {
    return {element_edges_[e].data(), vertices_per_element()};
  }

  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(std::size_t i) const { return edges_[i]; }

  double element_measure(std::size_t e) const { return measures_[e]; }
  const std::vector<double>& element_measures() const { return measures_; }
  double element_diameter(std::size_t e) const { return diameters_[e]; }
  Vec2 centroid(std::size_t e) const;
  double h_max() const { return h_max_; }
  double total_measure() const;

  Vec2 bbox_min() const { return bbox_min_; }
  Vec2 bbox_max() const { return bbox_max_; }

  /// Copy of this mesh with the given boundary edge retagged.
  Mesh with_tags(const std::vector<BoundaryTag>& edge_tags) const;

 private:
  void build_topology();

  int dimension_;
  std::vector<Vec2> vertices_;
  std::vector<std::array<std::size_t, 3>> elements_;
  std::vector<std::array<std::size_t, 3>> element_edges_;
  std::vector<Edge> edges_;
  std::vector<double> measures_;
  std::vector<double> diameters_;
  std::size_t num_interior_edges_ = 0;
  double h_max_ = 0.0;
  Vec2 bbox_min_;
  Vec2 bbox_max_;
};

using MeshPtr = std::shared_ptr<const Mesh>;

/// Axis-aligned rectangle [x0, x1] x [y0, y1].
struct Rectangle {
  double x0 = 0.0, x1 = 1.0;
  double y0 = 0.0, y1 = 1.0;
};

Mesh generate_interval_mesh(std::size_t n, double a, double b);

/// Each of the nx*ny cells is split by its lower-left to upper-right diagonal.
Mesh generate_triangle_mesh(std::size_t nx, std::size_t ny, const Rectangle& domain = {});

/// Assigns a tag to every boundary edge by side name ("left", "right", and in 2D
/// also "bottom", "top"). All sides must be present.
Mesh tag_boundary(const Mesh& mesh, const std::map<std::string, BoundaryTag>& spec);

/// Plain-text mesh format:
///   dim nv ne nelem
///   nv vertex lines (dim coordinates)
///   nelem element lines (dim+1 vertex indices)
///   ne boundary-tag lines "a b tag" (point edges in 1D repeat the vertex)
void write_mesh(std::ostream& out, const Mesh& mesh);
Mesh read_mesh(std::istream& in);

}  // namespace dgflow
