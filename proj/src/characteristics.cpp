#include "dgflow/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "dgflow/error.hpp"

namespace dgflow {

namespace {

using Polygon = std::vector<Vec2>;

double signed_area(const Polygon& p) {
  double s = 0.0;
  for (std::size_t i = 0, n = p.size(); i < n; ++i) s += cross(p[i], p[(i + 1) % n]);
  return 0.5 * s;
}

// Sutherland-Hodgman against a counterclockwise triangle; the subject may be non-convex.
double clipped_area(const Polygon& subject, const std::array<Vec2, 3>& tri, Polygon& a, Polygon& b) {
  a = subject;
  for (int i = 0; i < 3 && !a.empty(); ++i) {
    const Vec2 c0 = tri[i];
    const Vec2 d = tri[(i + 1) % 3] - c0;
    b.clear();
    for (std::size_t j = 0, n = a.size(); j < n; ++j) {
      const Vec2& p = a[j];
      const Vec2& q = a[(j + 1) % n];
      const double sp = cross(d, p - c0);
      const double sq = cross(d, q - c0);
      if (sp >= 0.0) b.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) b.push_back(p + (sp / (sp - sq)) * (q - p));
    }
    std::swap(a, b);
  }
  return a.size() < 3 ? 0.0 : signed_area(a);
}

struct Box {
  Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Vec2 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  void add(const Vec2& p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  bool overlaps(const Box& o) const { return lo.x <= o.hi.x && o.lo.x <= hi.x && lo.y <= o.hi.y && o.lo.y <= hi.y; }
};

CellKind kind_of(const Mesh& mesh) { return mesh.dimension() == 1 ? CellKind::segment : CellKind::triangle; }

// Local edge crossed when coordinate i goes negative.
int exit_local_edge(const Mesh& mesh, int i) { return mesh.dimension() == 1 ? 1 - i : i; }

std::size_t other_element(const Edge& edge, std::size_t e) {
  return edge.elements[0] == e ? edge.elements[1] : edge.elements[0];
}

}  // namespace

std::array<double, 3> barycentric(const Mesh& mesh, std::size_t e, const Vec2& x) {
  const auto v = mesh.element_coordinates(e);
  if (mesh.dimension() == 1) {
    const double t = (x.x - v[0].x) / (v[1].x - v[0].x);
    return {1.0 - t, t, 0.0};
  }
  const double det = cross(v[1] - v[0], v[2] - v[0]);
  const double l1 = cross(x - v[0], v[2] - v[0]) / det;
  const double l2 = cross(v[1] - v[0], x - v[0]) / det;
  return {1.0 - l1 - l2, l1, l2};
}

namespace {

double min_coordinate(const Mesh& mesh, std::size_t e, const Vec2& x, int* which = nullptr) {
  const auto l = barycentric(mesh, e, x);
  const int n = mesh.dimension() + 1;
  int k = 0;
  for (int i = 1; i < n; ++i)
    if (l[i] < l[k]) k = i;
  if (which) *which = k;
  return l[k];
}

}  // namespace

TracingVelocity TracingVelocity::interior(const NumericalFlux& flux) {
  TracingVelocity v;
  v.kind_ = Kind::interior;
  v.mesh_ = flux.mesh;
  v.flux_ = &flux;
  v.compute_speeds();
  return v;
}

TracingVelocity TracingVelocity::edge_lift(const NumericalFlux& flux) {
  TracingVelocity v;
  v.kind_ = Kind::edge_lift;
  v.mesh_ = flux.mesh;
  const Mesh& mesh = *flux.mesh;
  v.linear_.assign(mesh.num_elements(), {});
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto edges = mesh.element_edges(e);
    const Vec2 c = mesh.centroid(e);
    auto& p = v.linear_[e];
    if (mesh.dimension() == 1) {
      const auto x = mesh.element_coordinates(e);
      const Edge& e0 = mesh.edge(edges[0]);
      const Edge& e1 = mesh.edge(edges[1]);
      const double u0 = flux.normal_flux_at(edges[0], x[0]) * e0.normal.x;
      const double u1 = flux.normal_flux_at(edges[1], x[1]) * e1.normal.x;
      const double slope = (u1 - u0) / (x[1].x - x[0].x);
      p = {u0 + slope * (c.x - x[0].x), 0.0, slope, 0.0, 0.0, 0.0};
      continue;
    }
    // moments 0 and 1 of U.n_T on each side against the P1 Legendre pair
    std::vector<double> gp, gw;
    gauss_legendre(3, gp, gw);
    Eigen::Matrix<double, 6, 6> a = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> rhs = Eigen::Matrix<double, 6, 1>::Zero();
    for (int le = 0; le < 3; ++le) {
      const std::size_t k = edges[static_cast<std::size_t>(le)];
      const Edge& edge = mesh.edge(k);
      const double sign = edge.elements[0] == e ? 1.0 : -1.0;
      const Vec2 n = sign * edge.normal;
      const Vec2 x0 = mesh.vertex(edge.vertices[0]);
      const Vec2 x1 = mesh.vertex(edge.vertices[1]);
      for (int m = 0; m < 2; ++m) {
        const int row = 2 * le + m;
        for (std::size_t q = 0; q < gp.size(); ++q) {
          const double s = gp[q];
          const double w = gw[q] * (m == 0 ? 1.0 : std::sqrt(3.0) * (2 * s - 1));
          const Vec2 x = x0 + s * (x1 - x0);
          const Vec2 d = x - c;
          a(row, 0) += w * n.x;
          a(row, 1) += w * n.y;
          a(row, 2) += w * d.x * n.x;
          a(row, 3) += w * d.y * n.x;
          a(row, 4) += w * d.x * n.y;
          a(row, 5) += w * d.y * n.y;
          rhs(row) += w * sign * flux.normal_flux_at(k, x);
        }
      }
    }
    const Eigen::Matrix<double, 6, 1> sol = a.fullPivLu().solve(rhs);
    for (int i = 0; i < 6; ++i) p[static_cast<std::size_t>(i)] = sol(i);
  }
  v.compute_speeds();
  return v;
}

Vec2 TracingVelocity::operator()(std::size_t e, const Vec2& x) const {
  if (kind_ == Kind::interior) {
    Vec2 u = flux_->interior_at(e, x);
    if (mesh_->dimension() == 1) u.y = 0.0;
    return u;
  }
  const auto& p = linear_[e];
  const Vec2 d = x - mesh_->centroid(e);
  return {p[0] + p[2] * d.x + p[3] * d.y, p[1] + p[4] * d.x + p[5] * d.y};
}

void TracingVelocity::compute_speeds() {
  const Mesh& mesh = *mesh_;
  speed_.assign(mesh.num_elements(), 0.0);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto v = mesh.element_coordinates(e);
    const std::size_t nv = mesh.vertices_per_element();
    std::vector<Vec2> samples(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(nv));
    samples.push_back(mesh.centroid(e));
    for (std::size_t i = 0; i < nv; ++i) samples.push_back(0.5 * (v[i] + v[(i + 1) % nv]));
    double s = 0.0;
    for (const auto& x : samples) s = std::max(s, norm((*this)(e, x)));
    // |U| of a linear field peaks at a vertex; leave room for higher interior degrees
    speed_[e] = kind_ == Kind::edge_lift ? s : 1.25 * s;
  }
}

namespace {

Vec2 rk4(const TracingVelocity& u, std::size_t e, const Vec2& x, double h) {
  const Vec2 k1 = u(e, x);
  const Vec2 k2 = u(e, x + (0.5 * h) * k1);
  const Vec2 k3 = u(e, x + (0.5 * h) * k2);
  const Vec2 k4 = u(e, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Foot trace_point(const TracingVelocity& velocity, std::size_t e, const Vec2& x, double duration, int direction,
                 const TraceOptions& options, bool extend) {
  const Mesh& mesh = velocity.mesh();
  Foot f;
  f.origin = x;
  f.origin_element = e;
  Vec2 pos = x;
  std::size_t cur = e;
  double remaining = duration;
  bool outside = false;
  std::size_t stalls = 0;
  const double dir = direction < 0 ? -1.0 : 1.0;
  while (remaining > 0.0) {
    if (++f.substeps > options.max_substeps) {
      std::ostringstream msg;
      msg << "characteristic trace from (" << x.x << ", " << x.y << ") in element " << e << " exceeded "
          << options.max_substeps << " sub-steps; stuck near (" << pos.x << ", " << pos.y << ") in element "
          << cur << " with " << remaining << " of " << duration << " left";
      throw TracingFailure(msg.str());
    }
    const double speed = velocity.max_speed(cur);
    double dt = remaining;
    if (speed > 0.0) dt = std::min(remaining, options.travel_fraction * mesh.element_diameter(cur) / speed);
    const Vec2 next = rk4(velocity, cur, pos, dir * dt);
    if (outside || min_coordinate(mesh, cur, next) >= -options.tolerance) {
      pos = next;
      remaining -= dt;
      stalls = 0;
      continue;
    }
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 64 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (min_coordinate(mesh, cur, rk4(velocity, cur, pos, dir * mid * dt)) >= 0.0)
        lo = mid;
      else
        hi = mid;
    }
    const Vec2 crossed = rk4(velocity, cur, pos, dir * hi * dt);
    int which = 0;
    min_coordinate(mesh, cur, crossed, &which);
    const std::size_t k = mesh.element_edges(cur)[static_cast<std::size_t>(exit_local_edge(mesh, which))];
    const Edge& edge = mesh.edge(k);
    const double used = hi * dt;
    remaining -= used;
    pos = crossed;
    if (used <= 1e-14 * duration) {
      if (++stalls > 32) {
        std::ostringstream msg;
        msg << "characteristic trace from (" << x.x << ", " << x.y << ") makes no progress at edge " << k
            << " near (" << pos.x << ", " << pos.y << ")";
        throw TracingFailure(msg.str());
      }
    } else {
      stalls = 0;
    }
    if (edge.is_boundary()) {
      f.inside = false;
      f.exit_point = crossed;
      f.exit_edge = k;
      f.exit_time = duration - remaining;
      if (dir < 0.0 || !extend) break;
      outside = true;
      continue;
    }
    cur = other_element(edge, cur);
  }
  f.position = pos;
  f.element = f.inside ? cur : npos;
  return f;
}

std::vector<SamplePoint> volume_points(const Mesh& mesh, int order) {
  const auto& rule = quadrature_rule(order, kind_of(mesh));
  std::vector<SamplePoint> out;
  out.reserve(rule.size() * mesh.num_elements());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto map = element_map(mesh.element_coordinates(e), kind_of(mesh));
    for (std::size_t q = 0; q < rule.size(); ++q)
      out.push_back({e, map.to_physical(rule.points[q]), rule.weights[q] * map.det});
  }
  return out;
}

CharacteristicStep trace_feet(const TracingVelocity& velocity, std::vector<SamplePoint> points, double eta,
                              const TraceOptions& options) {
  if (!(eta > 0.0)) throw InvalidArgument("characteristic pseudo step must be positive");
  CharacteristicStep s;
  s.eta = eta;
  s.points = std::move(points);
  s.feet.reserve(s.points.size());
  for (const auto& p : s.points) {
    Foot f = trace_point(velocity, p.element, p.x, eta, -1, options);
    if (f.inside) {
      ++s.omega1;
      const auto l = barycentric(velocity.mesh(), f.element, f.position);
      for (int i = 0; i <= velocity.mesh().dimension(); ++i)
        if (l[i] < -1e-10 || l[i] > 1.0 + 1e-10) {
          ++s.misplaced;
          break;
        }
    } else {
      ++s.omega2;
    }
    s.feet.push_back(f);
  }
  return s;
}

CharacteristicStep trace_feet(const NumericalFlux& flux, std::vector<SamplePoint> points, double eta,
                              const TraceOptions& options) {
  return trace_feet(TracingVelocity::interior(flux), std::move(points), eta, options);
}

namespace {

void add_weight(std::vector<std::pair<std::size_t, double>>& row, std::size_t col, double w) {
  for (auto& [c, v] : row)
    if (c == col) {
      v += w;
      return;
    }
  row.emplace_back(col, w);
}

void transfer_1d(const TracingVelocity& u, double eta, const BoundaryField& inflow, const TransferOptions& o,
                 CharacteristicTransfer& t) {
  const Mesh& mesh = u.mesh();
  const std::size_t ne = mesh.num_elements();
  std::vector<std::pair<double, double>> cell(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto v = mesh.element_coordinates(e);
    cell[e] = std::minmax(v[0].x, v[1].x);
  }
  auto overlap = [](std::pair<double, double> a, std::pair<double, double> b) {
    return std::max(0.0, std::min(a.second, b.second) - std::max(a.first, b.first));
  };
  for (std::size_t src = 0; src < ne; ++src) {
    const auto v = mesh.element_coordinates(src);
    const double a = trace_point(u, src, v[0], eta, 1, o.trace, true).position.x;
    const double b = trace_point(u, src, v[1], eta, 1, o.trace, true).position.x;
    const auto image = std::minmax(a, b);
    double inside = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
      const double w = overlap(image, cell[e]);
      if (w <= 0.0) continue;
      add_weight(t.weights[e], src, w);
      inside += w;
    }
    t.outside_measure[src] = std::max(0.0, image.second - image.first - inside);
  }
  for (std::size_t k = 0; k < mesh.num_edges(); ++k) {
    const Edge& edge = mesh.edge(k);
    if (!edge.is_boundary()) continue;
    const std::size_t eb = edge.elements[0];
    const Vec2 xb = mesh.vertex(edge.vertices[0]);
    if (dot(u(eb, xb), edge.normal) >= 0.0) continue;
    const double y = trace_point(u, eb, xb, eta, 1, o.trace, true).position.x;
    const auto strip = std::minmax(xb.x, y);
    const double c = inflow ? inflow(xb) : 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
      const double w = overlap(strip, cell[e]);
      t.inflow_measure[e] += w;
      t.inflow_load[e] += c * w;
    }
  }
}

// Side parameters in (0, 1), symmetric under s -> 1 - s so that both neighbours of an
// edge trace the same points. Geometric grading toward the vertices keeps the chords
// short where the velocity of the adjacent elements can fan out.
std::vector<double> side_parameters(std::size_t n) {
  constexpr int grade = 20;
  const double h = 1.0 / static_cast<double>(n);
  std::vector<double> p;
  for (int j = grade; j >= 1; --j) p.push_back(h * std::ldexp(1.0, -j));
  for (std::size_t k = 1; k < n; ++k) p.push_back(static_cast<double>(k) * h);
  for (int j = 1; j <= grade; ++j) p.push_back(1.0 - h * std::ldexp(1.0, -j));
  return p;
}

// Zeros of U.n along a boundary side, from sign changes at 4n + 1 samples.
std::vector<double> normal_zeros(const TracingVelocity& u, std::size_t e, const Vec2& p0, const Vec2& p1,
                                 const Vec2& n, std::size_t samples) {
  auto g = [&](double s) { return dot(u(e, p0 + s * (p1 - p0)), n); };
  std::vector<double> out;
  const std::size_t m = 4 * samples;
  double s0 = 0.0, g0 = g(0.0);
  for (std::size_t i = 1; i <= m; ++i) {
    const double s1 = static_cast<double>(i) / static_cast<double>(m);
    const double g1 = g(s1);
    if ((g0 < 0.0 && g1 > 0.0) || (g0 > 0.0 && g1 < 0.0)) {
      double lo = s0, hi = s1;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((g(mid) < 0.0) == (g0 < 0.0) ? lo : hi) = mid;
      }
      out.push_back(0.5 * (lo + hi));
    }
    s0 = s1;
    g0 = g1;
  }
  return out;
}

void transfer_2d(const TracingVelocity& u, double eta, const BoundaryField& inflow, const TransferOptions& o,
                 CharacteristicTransfer& t) {
  const Mesh& mesh = u.mesh();
  const std::size_t ne = mesh.num_elements();
  const std::size_t n = std::max<std::size_t>(o.samples_per_side, 1);
  const std::vector<double> base = side_parameters(n);
  std::vector<std::array<Vec2, 3>> tri(ne);
  std::vector<Box> boxes(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    tri[e] = mesh.element_coordinates(e);
    for (const auto& p : tri[e]) boxes[e].add(p);
  }
  // boundary sides also get the zeros of U.n, shared with the inflow strips below
  std::vector<std::vector<double>> boundary_params(mesh.num_edges());
  for (std::size_t k = 0; k < mesh.num_edges(); ++k) {
    const Edge& edge = mesh.edge(k);
    if (!edge.is_boundary()) continue;
    const std::size_t eb = edge.elements[0];
    const int le = edge.local_index[0];
    const Vec2 p0 = tri[eb][static_cast<std::size_t>((le + 1) % 3)];
    const Vec2 p1 = tri[eb][static_cast<std::size_t>((le + 2) % 3)];
    auto& p = boundary_params[k];
    p = base;
    for (const double z : normal_zeros(u, eb, p0, p1, edge.normal, n)) p.push_back(z);
    std::sort(p.begin(), p.end());
  }

  Polygon poly, wa, wb;
  auto scatter = [&](auto&& sink) {
    Box box;
    for (const auto& p : poly) box.add(p);
    double total = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
      if (!box.overlaps(boxes[e])) continue;
      const double a = clipped_area(poly, tri[e], wa, wb);
      if (a <= 0.0) continue;
      sink(e, a);
      total += a;
    }
    return total;
  };

  for (std::size_t src = 0; src < ne; ++src) {
    poly.clear();
    for (int j = 0; j < 3; ++j) {
      const Vec2 p0 = tri[src][j];
      const Vec2 p1 = tri[src][(j + 1) % 3];
      // side j is local edge j + 2
      const std::size_t k = mesh.element_edges(src)[static_cast<std::size_t>((j + 2) % 3)];
      const auto& params = mesh.edge(k).is_boundary() ? boundary_params[k] : base;
      for (const double s : params) poly.push_back(trace_point(u, src, p0 + s * (p1 - p0), eta, 1, o.trace, true).position);
    }
    const double inside = scatter([&](std::size_t e, double a) { add_weight(t.weights[e], src, a); });
    t.outside_measure[src] = std::max(0.0, signed_area(poly) - inside);
  }

  // Omega_2: points reached from the inflow boundary in less than eta.
  // Neighbouring strips share their side curves, so one resolution for all of them.
  double travel = 0.0;
  for (std::size_t k = 0; k < mesh.num_edges(); ++k) {
    const Edge& edge = mesh.edge(k);
    if (!edge.is_boundary()) continue;
    const std::size_t eb = edge.elements[0];
    travel = std::max(travel, 4.0 * eta * u.max_speed(eb) * static_cast<double>(n) / mesh.element_diameter(eb));
  }
  const int curve = static_cast<int>(std::clamp(std::ceil(travel), 8.0, 1024.0));
  std::vector<double> s;
  for (std::size_t k = 0; k < mesh.num_edges(); ++k) {
    const Edge& edge = mesh.edge(k);
    if (!edge.is_boundary()) continue;
    const std::size_t eb = edge.elements[0];
    const int le = edge.local_index[0];
    const Vec2 p0 = tri[eb][static_cast<std::size_t>((le + 1) % 3)];
    const Vec2 p1 = tri[eb][static_cast<std::size_t>((le + 2) % 3)];
    s.assign(1, 0.0);
    s.insert(s.end(), boundary_params[k].begin(), boundary_params[k].end());
    s.push_back(1.0);
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const Vec2 y0 = p0 + s[i] * (p1 - p0);
      const Vec2 y1 = p0 + s[i + 1] * (p1 - p0);
      const Vec2 mid = 0.5 * (y0 + y1);
      if (dot(u(eb, mid), edge.normal) >= 0.0) continue;
      poly.assign({y0, y1});
      for (int c = 1; c <= curve; ++c)
        poly.push_back(trace_point(u, eb, y1, eta * c / curve, 1, o.trace, true).position);
      for (int c = curve; c >= 1; --c)
        poly.push_back(trace_point(u, eb, y0, eta * c / curve, 1, o.trace, true).position);
      const double c = inflow ? inflow(mid) : 0.0;
      scatter([&](std::size_t e, double a) {
        t.inflow_measure[e] += a;
        t.inflow_load[e] += c * a;
      });
    }
  }
}

}  // namespace

CharacteristicTransfer build_transfer(const TracingVelocity& velocity, double eta, const BoundaryField& inflow,
                                      const TransferOptions& options) {
  if (!(eta > 0.0)) throw InvalidArgument("characteristic pseudo step must be positive");
  const Mesh& mesh = velocity.mesh();
  const std::size_t ne = mesh.num_elements();
  CharacteristicTransfer t;
  t.eta = eta;
  t.weights.resize(ne);
  t.inflow_measure.assign(ne, 0.0);
  t.inflow_load.assign(ne, 0.0);
  t.outside_measure.assign(ne, 0.0);
  t.closure.assign(ne, 0.0);
  if (mesh.dimension() == 1)
    transfer_1d(velocity, eta, inflow, options, t);
  else
    transfer_2d(velocity, eta, inflow, options, t);

  // Pieces of T tile T up to the sampling of the images; the remainder goes to the
  // diagonal so that constants stay fixed points.
  for (std::size_t e = 0; e < ne; ++e) {
    double covered = t.inflow_measure[e];
    for (const auto& [c, w] : t.weights[e]) covered += w;
    const double r = mesh.element_measure(e) - covered;
    t.closure[e] = r;
    t.closure_defect = std::max(t.closure_defect, std::abs(r) / mesh.element_measure(e));
    add_weight(t.weights[e], e, r);
    std::sort(t.weights[e].begin(), t.weights[e].end());
  }
  return t;
}

std::size_t characteristic_iteration_cap(double eta, double gamma, double scale, double tolerance) {
  const double eg = eta * gamma;
  const auto base = static_cast<std::size_t>(10.0 * std::ceil(1.0 / eg));
  // |C^l - C| <= q^l |C^0 - C| with q = 1 / (1 + eta gamma)
  const double need = std::log(std::max(scale, 1.0) / tolerance) / std::log1p(eg);
  return std::max(base, static_cast<std::size_t>(2.0 * std::ceil(need)) + 10);
}

namespace {

struct CellIntegrals {
  std::vector<double> fplus;      // int_T f_+
  std::vector<double> injection;  // int_T f_+ c~
};

CellIntegrals cell_integrals(const TransportProblem& p) {
  const Mesh& mesh = *p.mesh;
  const auto& rule = quadrature_rule(p.resolved_source_order(), kind_of(mesh));
  CellIntegrals c;
  c.fplus.assign(mesh.num_elements(), 0.0);
  c.injection.assign(mesh.num_elements(), 0.0);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto map = element_map(mesh.element_coordinates(e), kind_of(mesh));
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec2 x = map.to_physical(rule.points[q]);
      const double f = p.source_at(e, x);
      if (f <= 0.0) continue;
      const double w = rule.weights[q] * map.det;
      c.fplus[e] += w * f;
      c.injection[e] += w * f * (p.injected ? p.injected(e, x) : 0.0);
    }
  }
  return c;
}

}  // namespace

CharacteristicResult characteristic_step_dg0(const TransportProblem& problem, const TransportState& old, double eta,
                                             const CharacteristicOptions& options) {
  if (problem.degree != 0) throw UnsupportedConfiguration("the characteristic solver is DG0 only");
  if (!(eta > 0.0)) throw InvalidArgument("characteristic pseudo step must be positive");
  if (!problem.flux) throw ConfigError("transport problem has no flux");
  const Mesh& mesh = *problem.mesh;
  const std::size_t ne = mesh.num_elements();
  if (old.coeffs.size() != ne) throw InvalidArgument("characteristic solver expects DG0 coefficients");

  const TracingVelocity velocity = options.velocity == TracingVelocity::Kind::interior
                                       ? TracingVelocity::interior(*problem.flux)
                                       : TracingVelocity::edge_lift(*problem.flux);
  CharacteristicResult r;
  r.transfer = build_transfer(velocity, eta, problem.inflow, options.transfer);
  const auto& t = r.transfer;
  const CellIntegrals ci = cell_integrals(problem);
  const double gamma = problem.gamma();

  std::vector<double> cold(ne), fixed(ne), denom(ne);
  double scale = 0.0;
  for (std::size_t e = 0; e < ne; ++e) {
    const double m = mesh.element_measure(e);
    cold[e] = old.coeffs[e] / std::sqrt(m);
    fixed[e] = ci.injection[e] + gamma * m * cold[e] + t.inflow_load[e] / eta;
    denom[e] = (1.0 / eta + gamma) * m + ci.fplus[e];
    scale = std::max({scale, std::abs(cold[e]), std::abs(fixed[e] / denom[e]) * (1.0 + 1.0 / (eta * gamma))});
  }
  const std::size_t cap = options.max_iterations ? options.max_iterations
                                                 : characteristic_iteration_cap(eta, gamma, scale, options.tolerance);

  std::vector<double> c = cold, next(ne);
  r.iterate_min = *std::min_element(c.begin(), c.end());
  r.iterate_max = *std::max_element(c.begin(), c.end());
  for (;;) {
    double update = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
      double s = 0.0;
      for (const auto& [src, w] : t.weights[e]) s += w * c[src];
      next[e] = (fixed[e] + s / eta) / denom[e];
      update = std::max(update, std::abs(next[e] - c[e]));
    }
    std::swap(c, next);
    ++r.iterations;
    r.last_update = update;
    r.iterate_min = std::min(r.iterate_min, *std::min_element(c.begin(), c.end()));
    r.iterate_max = std::max(r.iterate_max, *std::max_element(c.begin(), c.end()));
    if (update <= options.tolerance) break;
    if (r.iterations >= cap) {
      std::ostringstream msg;
      msg << "characteristic fixed point did not converge in " << cap << " iterations (eta = " << eta
          << ", last update " << update << ")";
      throw IterationFailure(msg.str());
    }
  }
  r.state.coeffs.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) r.state.coeffs[e] = c[e] * std::sqrt(mesh.element_measure(e));
  r.state.time = old.time + problem.dt;
  r.state.step = old.step + 1;
  return r;
}

double weighted_l2_norm(const TransportProblem& problem, std::span<const double> coeffs, double eta) {
  const Mesh& mesh = *problem.mesh;
  const CellIntegrals ci = cell_integrals(problem);
  double s = 0.0;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const double m = mesh.element_measure(e);
    const double v = coeffs[e] / std::sqrt(m);
    s += ((1.0 + eta * problem.gamma()) * m + eta * ci.fplus[e]) * v * v;
  }
  return std::sqrt(s);
}

double weighted_l2_norm(const TransportProblem& problem, double m, double eta) {
  const Mesh& mesh = *problem.mesh;
  std::vector<double> c(mesh.num_elements());
  for (std::size_t e = 0; e < c.size(); ++e) c[e] = m * std::sqrt(mesh.element_measure(e));
  return weighted_l2_norm(problem, c, eta);
}

double characteristic_energy_norm(const Mesh& mesh, const CharacteristicTransfer& t, std::span<const double> coeffs) {
  const std::size_t ne = mesh.num_elements();
  std::vector<double> v(ne);
  for (std::size_t e = 0; e < ne; ++e) v[e] = coeffs[e] / std::sqrt(mesh.element_measure(e));
  double plain = 0.0, jumps = 0.0;
  for (std::size_t e = 0; e < ne; ++e) {
    plain += mesh.element_measure(e) * v[e] * v[e];
    jumps += t.inflow_measure[e] * v[e] * v[e] + t.outside_measure[e] * v[e] * v[e];
    for (const auto& [src, w] : t.weights[e]) jumps += w * (v[e] - v[src]) * (v[e] - v[src]);
  }
  return std::sqrt(plain + jumps / t.eta);
}

std::vector<CharacteristicStudyRow> characteristic_convergence(const TransportProblem& problem,
                                                               std::span<const double> etas,
                                                               const CharacteristicOptions& options) {
  if (problem.degree != 0) throw UnsupportedConfiguration("the characteristic study is DG0 only");
  const TransportState start = initial_state(problem);
  const TransportStepper stepper(problem);
  const TransportState bms = stepper.advance(start);
  std::vector<CharacteristicStudyRow> rows;
  for (const double eta : etas) {
    const CharacteristicResult r = characteristic_step_dg0(problem, start, eta, options);
    double s = 0.0;
    for (std::size_t i = 0; i < bms.coeffs.size(); ++i) {
      const double d = r.state.coeffs[i] - bms.coeffs[i];
      s += d * d;
    }
    rows.push_back({eta, std::sqrt(s), r.iterations});
  }
  return rows;
}

void write_characteristic_csv(std::ostream& out, std::span<const CharacteristicStudyRow> rows) {
  out << "eta,l2_gap,iterations\n";
  const auto old = out.precision(17);
  for (const auto& r : rows) out << r.eta << ',' << r.l2_gap << ',' << r.iterations << '\n';
  out.precision(old);
}

}  // namespace dgflow
