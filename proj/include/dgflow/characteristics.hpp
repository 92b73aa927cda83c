#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "dgflow/flux.hpp"
#include "dgflow/transport.hpp"

namespace dgflow {

/// Velocity used to follow characteristics: one polynomial per element, extended
/// past the element when a trajectory leaves the domain.
class TracingVelocity {
 public:
  enum class Kind {
    interior,  // the flux's element polynomial
    edge_lift  // linear field whose normal trace matches the P1 part of the edge flux
  };

  /// Keeps a reference to flux: it must outlive the velocity.
  static TracingVelocity interior(const NumericalFlux& flux);
  /// BDM1 lift on triangles, linear interpolation of the end fluxes on segments.
  /// Normal components are continuous, so DG0 limits see the edge flux exactly.
  static TracingVelocity edge_lift(const NumericalFlux& flux);

  Kind kind() const { return kind_; }
  const Mesh& mesh() const { return *mesh_; }
  Vec2 operator()(std::size_t e, const Vec2& x) const;
  /// Bound on |U| over element e (vertex, edge-midpoint and centroid samples).
  double max_speed(std::size_t e) const { return speed_[e]; }

 private:
  TracingVelocity() = default;
  void compute_speeds();

  Kind kind_ = Kind::interior;
  MeshPtr mesh_;
  const NumericalFlux* flux_ = nullptr;
  // edge_lift: U = a + B (x - centroid), per element [a.x, a.y, Bxx, Bxy, Byx, Byy]
  std::vector<std::array<double, 6>> linear_;
  std::vector<double> speed_;
};

struct TraceOptions {
  /// A sub-step moves at most this fraction of the element diameter.
  double travel_fraction = 0.1;
  std::size_t max_substeps = 200000;
  /// Barycentric slack when deciding that a point left its element.
  double tolerance = 1e-12;
};

struct Foot {
  Vec2 origin;
  std::size_t origin_element = npos;
  Vec2 position;
  /// Element holding the foot; npos once the trajectory left the domain.
  std::size_t element = npos;
  bool inside = true;  // Omega_1 membership
  /// Where the trajectory crossed the boundary (Omega_2 only).
  Vec2 exit_point;
  std::size_t exit_edge = npos;
  double exit_time = 0.0;  // pseudo time spent before the exit
  std::size_t substeps = 0;
};

/// Follows dS/dtau = direction * U(S) for the given duration, starting at x in element e.
/// Backward traces (direction = -1) stop at the boundary. Forward traces with
/// extend = true carry on outside with the exit element's polynomial.
Foot trace_point(const TracingVelocity& velocity, std::size_t e, const Vec2& x, double duration, int direction,
                 const TraceOptions& options = {}, bool extend = false);

struct SamplePoint {
  std::size_t element = npos;
  Vec2 x;
  double weight = 0.0;
};

/// Physical points of a volume rule on every element.
std::vector<SamplePoint> volume_points(const Mesh& mesh, int order);

struct CharacteristicStep {
  double eta = 0.0;
  std::vector<SamplePoint> points;
  std::vector<Foot> feet;  // feet[i] = X^eta(points[i])
  std::size_t omega1 = 0;
  std::size_t omega2 = 0;
  /// Omega_1 feet whose barycentric coordinates in their element leave [-1e-10, 1 + 1e-10].
  std::size_t misplaced = 0;
};

/// Throws InvalidArgument for eta <= 0, TracingFailure past the sub-step cap.
CharacteristicStep trace_feet(const TracingVelocity& velocity, std::vector<SamplePoint> points, double eta,
                              const TraceOptions& options = {});
CharacteristicStep trace_feet(const NumericalFlux& flux, std::vector<SamplePoint> points, double eta,
                              const TraceOptions& options = {});

/// Barycentric coordinates of x in element e (two entries used in 1D).
std::array<double, 3> barycentric(const Mesh& mesh, std::size_t e, const Vec2& x);

/// DG0 transfer of one pseudo step:
///   weights[T]  = { (T', |{x in T : X^eta(x) in T'}|) }
///   inflow_measure[T] = |T cap Omega_2|, inflow_load[T] = int_{T cap Omega_2} c_I(exit)
/// computed by clipping forward images of elements (and of inflow strips) against T.
struct CharacteristicTransfer {
  double eta = 0.0;
  std::vector<std::vector<std::pair<std::size_t, double>>> weights;
  std::vector<double> inflow_measure;
  std::vector<double> inflow_load;
  /// |X^{-eta}(T') \ Omega| per source element T' (the Omega_3 pieces).
  std::vector<double> outside_measure;
  /// |T| - sum of the clipped pieces, moved onto the diagonal afterwards.
  std::vector<double> closure;
  /// max_T |closure_T| / |T|.
  double closure_defect = 0.0;
};

struct TransferOptions {
  /// Boundary samples per element side (and per inflow edge) of the traced images.
  std::size_t samples_per_side = 48;
  TraceOptions trace;
};

CharacteristicTransfer build_transfer(const TracingVelocity& velocity, double eta, const BoundaryField& inflow,
                                      const TransferOptions& options = {});

struct CharacteristicOptions {
  double tolerance = 1e-12;  // on max |C^{l+1} - C^l|, in cell values
  /// 0 picks the cap from the contraction factor.
  std::size_t max_iterations = 0;
  TracingVelocity::Kind velocity = TracingVelocity::Kind::edge_lift;
  TransferOptions transfer;
};

struct CharacteristicResult {
  TransportState state;  // DG0 coefficients
  std::size_t iterations = 0;
  double last_update = 0.0;
  /// Extremes of the cell values over all iterates, the start included.
  double iterate_min = 0.0;
  double iterate_max = 0.0;
  CharacteristicTransfer transfer;
};

/// Iteration cap used when options leave it at 0.
std::size_t characteristic_iteration_cap(double eta, double gamma, double scale, double tolerance);

/// Fixed-point solve of the DG0 characteristic step started from C_old.
/// Throws UnsupportedConfiguration unless k_c = 0, IterationFailure past the cap.
CharacteristicResult characteristic_step_dg0(const TransportProblem& problem, const TransportState& old, double eta,
                                             const CharacteristicOptions& options = {});

/// (int (1 + eta f_+ + eta gamma) u^2)^{1/2} for DG0 coefficients.
double weighted_l2_norm(const TransportProblem& problem, std::span<const double> coeffs, double eta);
/// Same norm of the constant m.
double weighted_l2_norm(const TransportProblem& problem, double m, double eta);

/// ||w||_{h,eta} for DG0 w from a transfer, Omega_3 term included.
double characteristic_energy_norm(const Mesh& mesh, const CharacteristicTransfer& transfer,
                                  std::span<const double> coeffs);

struct CharacteristicStudyRow {
  double eta = 0.0;
  double l2_gap = 0.0;
  std::size_t iterations = 0;
};

/// One step from the initial state with every eta; gaps against the BMS DG0 step.
std::vector<CharacteristicStudyRow> characteristic_convergence(const TransportProblem& problem,
                                                               std::span<const double> etas,
                                                               const CharacteristicOptions& options = {});

/// `eta,l2_gap,iterations` header and rows.
void write_characteristic_csv(std::ostream& out, std::span<const CharacteristicStudyRow> rows);

}  // namespace dgflow
