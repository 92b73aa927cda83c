#include "dgflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "dgflow/error.hpp"

namespace dgflow {

std::string_view to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::interior: return "interior";
    case BoundaryTag::dirichlet_1: return "dirichlet_1";
    case BoundaryTag::dirichlet_2: return "dirichlet_2";
    case BoundaryTag::neumann: return "neumann";
    case BoundaryTag::generic_boundary: return "generic_boundary";
  }
  return "generic_boundary";
}

BoundaryTag parse_boundary_tag(std::string_view name) {
  for (auto tag : {BoundaryTag::interior, BoundaryTag::dirichlet_1, BoundaryTag::dirichlet_2,
                   BoundaryTag::neumann, BoundaryTag::generic_boundary}) {
    if (to_string(tag) == name) return tag;
  }
  throw InvalidArgument("unknown boundary tag '" + std::string(name) + "'");
}

std::string_view to_string(Side side) {
  switch (side) {
    case Side::none: return "none";
    case Side::left: return "left";
    case Side::right: return "right";
    case Side::bottom: return "bottom";
    case Side::top: return "top";
  }
  return "none";
}

Mesh::Mesh(int dimension, std::vector<Vec2> vertices,
           std::vector<std::array<std::size_t, 3>> elements)
    : dimension_(dimension), vertices_(std::move(vertices)), elements_(std::move(elements)) {
  if (dimension_ != 1 && dimension_ != 2) throw InvalidArgument("mesh dimension must be 1 or 2");
  if (elements_.empty()) throw InvalidMesh("mesh has no elements");
  build_topology();
}

std::array<Vec2, 3> Mesh::element_coordinates(std::size_t e) const {
  std::array<Vec2, 3> xs{};
  for (std::size_t i = 0; i < vertices_per_element(); ++i) xs[i] = vertices_[elements_[e][i]];
  return xs;
}

Vec2 Mesh::centroid(std::size_t e) const {
  Vec2 c;
  for (std::size_t i = 0; i < vertices_per_element(); ++i) c += vertices_[elements_[e][i]];
  return (1.0 / static_cast<double>(vertices_per_element())) * c;
}

double Mesh::total_measure() const {
  double s = 0.0;
  for (double m : measures_) s += m;
  return s;
}

Mesh Mesh::with_tags(const std::vector<BoundaryTag>& edge_tags) const {
  if (edge_tags.size() != edges_.size()) throw InvalidArgument("tag vector size mismatch");
  Mesh copy = *this;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const bool boundary = edges_[i].is_boundary();
    if (boundary == (edge_tags[i] == BoundaryTag::interior)) {
      throw InvalidArgument("interior tag must be used exactly on interior edges");
    }
    copy.edges_[i].tag = edge_tags[i];
  }
  return copy;
}

void Mesh::build_topology() {
  const std::size_t nv = vertices_.size();
  const std::size_t nloc = vertices_per_element();

  bbox_min_ = bbox_max_ = vertices_.empty() ? Vec2{} : vertices_.front();
  for (const auto& v : vertices_) {
    bbox_min_ = {std::min(bbox_min_.x, v.x), std::min(bbox_min_.y, v.y)};
    bbox_max_ = {std::max(bbox_max_.x, v.x), std::max(bbox_max_.y, v.y)};
  }

  measures_.resize(elements_.size());
  diameters_.resize(elements_.size());
  element_edges_.assign(elements_.size(), {npos, npos, npos});
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    for (std::size_t i = 0; i < nloc; ++i) {
      if (elements_[e][i] >= nv) throw InvalidMesh("element vertex index out of range");
    }
    const auto xs = element_coordinates(e);
    if (dimension_ == 1) {
      measures_[e] = std::abs(xs[1].x - xs[0].x);
      diameters_[e] = measures_[e];
    } else {
      measures_[e] = 0.5 * cross(xs[1] - xs[0], xs[2] - xs[0]);
      diameters_[e] = std::max({norm(xs[1] - xs[0]), norm(xs[2] - xs[1]), norm(xs[0] - xs[2])});
    }
    if (!(measures_[e] > 0.0)) {
      throw InvalidMesh("element " + std::to_string(e) + " is degenerate or clockwise");
    }
  }
  h_max_ = *std::max_element(diameters_.begin(), diameters_.end());

  struct PairHash {
    std::size_t operator()(const std::pair<std::size_t, std::size_t>& p) const noexcept {
      return std::hash<std::size_t>{}(p.first * 0x9E3779B97F4A7C15ull ^ p.second);
    }
  };
  std::unordered_map<std::pair<std::size_t, std::size_t>, std::size_t, PairHash> lookup;
  edges_.clear();
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const auto& el = elements_[e];
    for (std::size_t i = 0; i < nloc; ++i) {
      std::size_t a, b;
      if (dimension_ == 1) {
        a = b = el[i];
      } else {
        a = el[(i + 1) % 3];
        b = el[(i + 2) % 3];
      }
      const auto key = std::minmax(a, b);
      auto [it, inserted] = lookup.try_emplace({key.first, key.second}, edges_.size());
      if (inserted) {
        Edge edge;
        edge.vertices = {a, b};
        edge.elements = {e, npos};
        edge.local_index = {static_cast<int>(i), -1};
        if (dimension_ == 1) {
          const double other = vertices_[el[1 - i]].x;
          edge.normal = {vertices_[a].x > other ? 1.0 : -1.0, 0.0};
          edge.measure = 1.0;
        } else {
          const Vec2 d = vertices_[b] - vertices_[a];
          edge.measure = norm(d);
          edge.normal = (1.0 / edge.measure) * Vec2{d.y, -d.x};
        }
        edges_.push_back(edge);
      } else {
        Edge& edge = edges_[it->second];
        if (edge.elements[1] != npos) {
          throw InvalidMesh("edge shared by more than two elements");
        }
        if (dimension_ == 2 && !(edge.vertices[0] == b && edge.vertices[1] == a)) {
          throw InvalidMesh("inconsistent element orientation across an edge");
        }
        edge.elements[1] = e;
        edge.local_index[1] = static_cast<int>(i);
      }
      element_edges_[e][i] = it->second;
    }
  }

  const double extent = std::max({bbox_max_.x - bbox_min_.x, bbox_max_.y - bbox_min_.y, 1.0});
  const double tol = 1e-12 * extent;
  auto on = [tol](double a, double b) { return std::abs(a - b) <= tol; };
  num_interior_edges_ = 0;
  for (auto& edge : edges_) {
    if (!edge.is_boundary()) {
      edge.tag = BoundaryTag::interior;
      ++num_interior_edges_;
      continue;
    }
    edge.tag = BoundaryTag::generic_boundary;
    const Vec2 pa = vertices_[edge.vertices[0]];
    const Vec2 pb = vertices_[edge.vertices[1]];
    if (on(pa.x, bbox_min_.x) && on(pb.x, bbox_min_.x)) {
      edge.side = Side::left;
    } else if (on(pa.x, bbox_max_.x) && on(pb.x, bbox_max_.x)) {
      edge.side = Side::right;
    } else if (dimension_ == 2 && on(pa.y, bbox_min_.y) && on(pb.y, bbox_min_.y)) {
      edge.side = Side::bottom;
    } else if (dimension_ == 2 && on(pa.y, bbox_max_.y) && on(pb.y, bbox_max_.y)) {
      edge.side = Side::top;
    }
  }
}

Mesh generate_interval_mesh(std::size_t n, double a, double b) {
  if (n == 0) throw InvalidArgument("interval mesh needs at least one element");
  if (!(a < b)) throw InvalidArgument("interval mesh needs a < b");
  std::vector<Vec2> vertices(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    vertices[i] = {i == n ? b : a + (b - a) * t, 0.0};
  }
  std::vector<std::array<std::size_t, 3>> elements(n);
  for (std::size_t i = 0; i < n; ++i) elements[i] = {i, i + 1, npos};
  return Mesh(1, std::move(vertices), std::move(elements));
}

Mesh generate_triangle_mesh(std::size_t nx, std::size_t ny, const Rectangle& domain) {
  if (nx == 0 || ny == 0) throw InvalidArgument("triangle mesh needs nx, ny >= 1");
  if (!(domain.x0 < domain.x1) || !(domain.y0 < domain.y1)) {
    throw InvalidArgument("triangle mesh needs a non-empty rectangle");
  }
  auto coord = [](double lo, double hi, std::size_t i, std::size_t n) {
    return i == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
  };
  std::vector<Vec2> vertices;
  vertices.reserve((nx + 1) * (ny + 1));
  for (std::size_t j = 0; j <= ny; ++j) {
    for (std::size_t i = 0; i <= nx; ++i) {
      vertices.push_back({coord(domain.x0, domain.x1, i, nx), coord(domain.y0, domain.y1, j, ny)});
    }
  }
  auto id = [nx](std::size_t i, std::size_t j) { return j * (nx + 1) + i; };
  std::vector<std::array<std::size_t, 3>> elements;
  elements.reserve(2 * nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      elements.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return Mesh(2, std::move(vertices), std::move(elements));
}

Mesh tag_boundary(const Mesh& mesh, const std::map<std::string, BoundaryTag>& spec) {
  std::vector<std::string> sides = {"left", "right"};
  if (mesh.dimension() == 2) {
    sides.push_back("bottom");
    sides.push_back("top");
  }
  for (const auto& [name, tag] : spec) {
    if (std::find(sides.begin(), sides.end(), name) == sides.end()) {
      throw InvalidArgument("unknown boundary side '" + name + "'");
    }
    if (tag == BoundaryTag::interior) {
      throw InvalidArgument("side '" + name + "' cannot be tagged interior");
    }
  }
  for (const auto& s : sides) {
    if (!spec.count(s)) throw InvalidArgument("boundary side '" + s + "' has no tag");
  }
  std::vector<BoundaryTag> tags(mesh.num_edges());
  for (std::size_t i = 0; i < mesh.num_edges(); ++i) {
    const Edge& edge = mesh.edge(i);
    tags[i] = edge.tag;
    if (edge.is_boundary() && edge.side != Side::none) {
      tags[i] = spec.at(std::string(to_string(edge.side)));
    }
  }
  return mesh.with_tags(tags);
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  const auto old_precision = out.precision(17);
  out << mesh.dimension() << ' ' << mesh.num_vertices() << ' ' << mesh.num_boundary_edges() << ' '
      << mesh.num_elements() << '\n';
  for (const auto& v : mesh.vertices()) {
    out << v.x;
    if (mesh.dimension() == 2) out << ' ' << v.y;
    out << '\n';
  }
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto vs = mesh.element_vertices(e);
    for (std::size_t i = 0; i < vs.size(); ++i) out << (i ? " " : "") << vs[i];
    out << '\n';
  }
  for (const auto& edge : mesh.edges()) {
    if (!edge.is_boundary()) continue;
    out << edge.vertices[0] << ' ' << edge.vertices[1] << ' ' << to_string(edge.tag) << '\n';
  }
  out.precision(old_precision);
}

Mesh read_mesh(std::istream& in) {
  int dim = 0;
  std::size_t nv = 0, ne = 0, nelem = 0;
  if (!(in >> dim >> nv >> ne >> nelem)) throw InvalidMesh("mesh file: bad header");
  if (dim != 1 && dim != 2) throw InvalidMesh("mesh file: dimension must be 1 or 2");
  std::vector<Vec2> vertices(nv);
  for (auto& v : vertices) {
    if (!(in >> v.x)) throw InvalidMesh("mesh file: bad vertex line");
    if (dim == 2 && !(in >> v.y)) throw InvalidMesh("mesh file: bad vertex line");
  }
  std::vector<std::array<std::size_t, 3>> elements(nelem, {npos, npos, npos});
  for (auto& el : elements) {
    for (int i = 0; i <= dim; ++i) {
      if (!(in >> el[static_cast<std::size_t>(i)])) throw InvalidMesh("mesh file: bad element line");
    }
  }
  Mesh mesh(dim, std::move(vertices), std::move(elements));

  std::map<std::pair<std::size_t, std::size_t>, std::size_t> lookup;
  for (std::size_t i = 0; i < mesh.num_edges(); ++i) {
    const auto& edge = mesh.edge(i);
    lookup[std::minmax(edge.vertices[0], edge.vertices[1])] = i;
  }
  std::vector<BoundaryTag> tags(mesh.num_edges());
  for (std::size_t i = 0; i < mesh.num_edges(); ++i) tags[i] = mesh.edge(i).tag;
  for (std::size_t k = 0; k < ne; ++k) {
    std::size_t a = 0, b = 0;
    std::string name;
    if (!(in >> a >> b >> name)) throw InvalidMesh("mesh file: bad boundary-tag line");
    auto it = lookup.find(std::minmax(a, b));
    if (it == lookup.end() || !mesh.edge(it->second).is_boundary()) {
      throw InvalidMesh("mesh file: tag line does not name a boundary edge");
    }
    tags[it->second] = parse_boundary_tag(name);
  }
  return mesh.with_tags(tags);
}

}  // namespace dgflow
