#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dgflow/characteristics.hpp"
#include "dgflow/flow.hpp"
#include "dgflow/flux.hpp"
#include "dgflow/transport.hpp"

namespace dgflow {

/// A scalar field in a config: a number, or a registry name times a scale.
struct FieldSpec {
  std::string name;  // empty: the constant `value`
  double value = 0.0;
  double scale = 1.0;

  static FieldSpec constant(double v) { return {"", v, 1.0}; }
  static FieldSpec named(std::string n, double scale = 1.0) { return {std::move(n), 0.0, scale}; }
  bool is_constant() const { return name.empty(); }
  bool operator==(const FieldSpec&) const = default;
};

struct NamedField {
  std::string name;
  std::string description;
  /// Element-supported fields need an element index and cannot be boundary data.
  bool element_supported = false;
  std::function<ElementField(const Mesh&)> make;
};

/// Registry of named analytic fields, sorted by name.
const std::vector<NamedField>& field_registry();
/// Throws ConfigError on unknown names.
ElementField make_field(const FieldSpec& spec, const Mesh& mesh);
BoundaryField make_boundary_field(const FieldSpec& spec, const Mesh& mesh);

struct MeshSpec {
  int dim = 2;
  std::size_t nx = 8;  // n in 1D
  std::size_t ny = 8;
  /// Side name -> boundary tag name.
  std::map<std::string, std::string> sides;
  bool operator==(const MeshSpec&) const = default;
};

/// kappa = diag(kxx, kyy) on elements whose centroid lies inside the box.
struct KappaRegion {
  std::array<double, 4> box{0.0, 1.0, 0.0, 1.0};  // x0, x1, y0, y1
  double kxx = 1.0;
  double kyy = 1.0;
  bool operator==(const KappaRegion&) const = default;
};

struct BoundarySpec {
  std::string type = "neumann";  // dirichlet | neumann
  FieldSpec value;
  bool operator==(const BoundarySpec&) const = default;
};

struct FlowSpec {
  int degree = 1;
  int theta = 0;
  double penalty = 100.0;
  double kappa = 1.0;
  /// Later regions win.
  std::vector<KappaRegion> regions;
  FieldSpec source;
  /// Tag name -> condition.
  std::map<std::string, BoundarySpec> boundary;
  std::string gauge = "none";  // none | zero_mean
  bool operator==(const FlowSpec&) const = default;
};

struct TransportSpec {
  int degree = 0;
  double dt = 0.01;
  double final_time = 1.0;
  FieldSpec initial;
  FieldSpec inflow;
  FieldSpec injected;
  double diffusion = 0.0;
  int theta = 0;
  double penalty = -1.0;
  int edge_order = -1;
  bool operator==(const TransportSpec&) const = default;
};

/// Kinds and their pass rules (m is the measured value):
///   bounds            m = worst excursion outside [lower, upper] over all steps, pass m <= tolerance
///   bound_violation   same m, pass m > tolerance
///   final_l2_error    m = ||C(T) - reference||, pass lower <= m <= upper
///   l2_stability      m = max_t ||C|| - upper |Omega|^{1/2}, pass m <= tolerance
///   audit_passes      m = degree-`degree` residual, pass m <= upper
///   audit_fails       same m, pass m > lower
///   lr_difference     m = max relative matrix/rhs difference, pass m <= upper
///   gap_monotone      m = max ratio of consecutive gaps, pass m < 1 and last gap < first
struct CheckSpec {
  std::string id;
  std::string kind;
  double lower = 0.0;
  double upper = 0.0;
  double tolerance = 0.0;
  double reference = 0.0;
  int degree = 0;
  bool operator==(const CheckSpec&) const = default;
};

struct ExperimentConfig {
  std::string name;
  std::string description;
  std::string kind = "transport";  // transport | lr_equivalence | characteristic_study
  MeshSpec mesh;
  FlowSpec flow;
  TransportSpec transport;
  std::vector<int> audit_degrees;
  std::size_t snapshot_every = 0;
  std::string output_dir;
  std::vector<CheckSpec> checks;
  /// characteristic_study: eta = dt * fraction.
  std::vector<double> eta_fractions;
  /// lr_equivalence: random cases, alternating 1D and 2D.
  std::size_t lr_cases = 6;
  unsigned lr_seed = 2024;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Strict parse: unknown keys, wrong types and invalid values throw ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& config);
/// Semantic checks run before any compute; throws ConfigError.
void validate_config(const ExperimentConfig& config);

struct PresetInfo {
  std::string name;
  std::string description;
};
std::vector<PresetInfo> list_presets();
/// Throws ConfigError for unknown names.
ExperimentConfig preset(const std::string& name);
bool is_preset(const std::string& name);
/// Preset name, or else a path to a JSON config.
ExperimentConfig resolve_config(const std::string& name_or_path);

MeshPtr build_mesh(const MeshSpec& spec);
FlowProblem build_flow(const ExperimentConfig& config, MeshPtr mesh);
TransportProblem build_transport(const ExperimentConfig& config, std::shared_ptr<const NumericalFlux> flux);

struct Verdict {
  std::string id;
  double measured = 0.0;
  double threshold = 0.0;
  bool passed = false;
  double runtime = 0.0;  // seconds, whole experiment
};

struct ExperimentResult {
  std::string name;
  std::vector<Verdict> verdicts;
  std::vector<StateSummary> records;
  std::vector<ConservationReport> audits;
  std::vector<CharacteristicStudyRow> study;
  double final_l2_error = 0.0;
  double lr_difference = 0.0;
  double runtime = 0.0;
  bool passed() const;
};

struct RunOptions {
  /// Overrides the config's output_dir when set. No artifacts when both are empty.
  std::string output_dir;
  /// Overrides snapshot_every when set.
  std::optional<std::size_t> snapshot_every;
  /// Progress and verdict lines; null for silence.
  std::ostream* log = nullptr;
};

/// Validates, runs, evaluates the checks and writes the artifacts:
///   steps.csv, pressure.vtk, concentration_NNNNN.vtk snapshots and the final state,
///   conservation_kK.csv per audit degree, characteristic.csv, verdicts.json.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

void write_verdicts_json(std::ostream& out, const ExperimentResult& result);

/// Max relative difference of BMS and Lesaint-Raviart systems over random conservative cases.
double lr_equivalence_difference(std::size_t cases, unsigned seed);

}  // namespace dgflow
