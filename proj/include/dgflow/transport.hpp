#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "dgflow/dg_space.hpp"
#include "dgflow/flow.hpp"
#include "dgflow/flux.hpp"
#include "dgflow/linalg.hpp"

namespace dgflow {

/// The transport matrix is constant in time: factor it once.
inline SolveOptions transport_solver_defaults() {
  SolveOptions o;
  o.method = SolveMethod::direct;
  return o;
}

struct TransportProblem {
  MeshPtr mesh;
  std::shared_ptr<const NumericalFlux> flux;
  int degree = 0;  // k_c
  double dt = 0.01;
  double final_time = 1.0;
  ElementField initial;   // c0, L2-projected
  BoundaryField inflow;   // c_I
  ElementField injected;  // c~ where f > 0
  /// Source density; empty means the flux's source (the flow's f).
  ElementField source;
  /// Element-wise diffusion; empty means D = 0.
  std::vector<DiagTensor> diffusion;
  int theta = 0;  // theta_c
  /// sigma_D = penalty_factor / h_e. Negative: 100 with diffusion, 0 without.
  double penalty_factor = -1.0;
  SolveOptions solver = transport_solver_defaults();
  int volume_order = -1;
  int edge_order = -1;
  int source_order = -1;

  double gamma() const { return 1.0 / dt; }
  bool has_diffusion() const;
  const ElementField& source_field() const;
  double source_at(std::size_t e, const Vec2& x) const;
  double sigma(std::size_t edge) const;
  int resolved_volume_order() const;
  int resolved_edge_order() const;
  int resolved_source_order() const;
  std::size_t steps() const;
};

struct TransportState {
  std::vector<double> coeffs;
  double time = 0.0;
  std::size_t step = 0;
};

enum class EdgeFlow {
  forward,     // elements[0] upstream
  backward,    // elements[1] upstream
  tangential,  // zero mean normal flux
  inflow,
  outflow
};

struct EdgeFlowClass {
  std::vector<EdgeFlow> kind;
  /// Edges whose normal flux changes sign between quadrature points.
  std::vector<bool> sign_change;
  std::size_t sign_change_count = 0;

  /// npos for boundary or tangential edges.
  std::size_t upstream(const Mesh& mesh, std::size_t edge) const;
  std::size_t downstream(const Mesh& mesh, std::size_t edge) const;
};

/// Classification by the edge-mean normal flux; sign changes found at the points of
/// the given edge rule (upwinding is then applied per point).
EdgeFlowClass classify_edges(const NumericalFlux& flux, int edge_order = 8);

/// Upwind trace for normal flux un along n (pointing out of the side-0 element).
inline double upwind_value(double un, double c0, double c1) {
  if (un > 0.0) return c0;
  if (un < 0.0) return c1;
  return 0.5 * (c0 + c1);
}

/// (\{C U\} + c_e [C]) . n with c_e = |U.n| / 2.
inline double jump_stabilized_flux(double un, double c0, double c1) {
  return 0.5 * un * (c0 + c1) + 0.5 * std::abs(un) * (c0 - c1);
}

/// Upwind value of the DG state on an interior edge at edge parameter t.
double upwind_edge_value(const DgSpace& space, std::span<const double> coeffs, const NumericalFlux& flux,
                         std::size_t edge, double t);

/// A C = rhs at one step. The matrix does not depend on the state.
struct TransportSystem {
  SparseMatrix matrix;
  std::vector<double> rhs;
};

enum class Formulation { bms, lesaint_raviart };

/// State-independent part: matrix and the load (f_+ c~, inflow) without gamma C_old.
TransportSystem assemble_transport_operator(const TransportProblem& problem, const EdgeFlowClass& cls,
                                            Formulation form = Formulation::bms);
/// Full system with rhs = load + gamma M C_old (M = I for the orthonormal basis).
TransportSystem assemble_bms(const TransportProblem& problem, const TransportState& old, const EdgeFlowClass& cls);
/// Throws UnsupportedConfiguration when D != 0.
TransportSystem assemble_lesaint_raviart(const TransportProblem& problem, const TransportState& old,
                                         const EdgeFlowClass& cls);

/// Validates the problem; throws ConfigError for sigma_D > 0 with D = 0 and for dt <= 0.
void validate_transport(const TransportProblem& problem);

TransportState initial_state(const TransportProblem& problem);

/// Reuses one factorization across steps.
class TransportStepper {
 public:
  TransportStepper(TransportProblem problem, Formulation form = Formulation::bms);

  const TransportProblem& problem() const { return problem_; }
  const DgSpace& space() const { return *space_; }
  const EdgeFlowClass& classification() const { return class_; }
  const TransportSystem& system() const { return op_; }

  TransportState advance(const TransportState& state) const;
  /// Last solve's report.
  const SolveReport& report() const { return report_; }

 private:
  TransportProblem problem_;
  std::shared_ptr<const DgSpace> space_;
  EdgeFlowClass class_;
  TransportSystem op_;
  std::unique_ptr<LinearSolver> solver_;
  mutable SolveReport report_;
};

/// One free step (rebuilds the operator).
TransportState advance(const TransportProblem& problem, const TransportState& state, const EdgeFlowClass& cls);

struct StateSummary {
  std::size_t step = 0;
  double time = 0.0;
  double l2_norm = 0.0;
  double min_c = 0.0;  // cell values for k_c = 0, sampled otherwise
  double max_c = 0.0;
  double mass_integral = 0.0;
};

StateSummary summarize(const DgSpace& space, const TransportState& state);
double l2_norm(const DgSpace& space, std::span<const double> coeffs);
/// ||w||_h^2 = ||w||^2 + sum_int |U.n| [w]^2 + sum_inflow |U.n| w^2.
double energy_norm(const DgSpace& space, std::span<const double> coeffs, const NumericalFlux& flux, int edge_order);

struct TransportRun {
  std::vector<StateSummary> records;  // step 0 (initial) through the final step
  TransportState final_state;
  std::size_t sign_change_edges = 0;
  SolveReport last_report;
  /// Flux audits of degrees 0..2 k_c, in order.
  std::vector<ConservationReport> audits;
};

using StateObserver = std::function<void(const DgSpace&, const TransportState&)>;

/// Steps from 0 to final_time (ceil(T/dt) steps); the observer sees every state, including the initial one.
TransportRun run(const TransportProblem& problem, const StateObserver& observer = {});

}  // namespace dgflow
