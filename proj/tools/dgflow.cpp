#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "dgflow/acceptance.hpp"
#include "dgflow/error.hpp"
#include "dgflow/experiments.hpp"
#include "dgflow/output.hpp"

using namespace dgflow;

namespace {

int cmd_list() {
  std::size_t width = 0;
  const auto presets = list_presets();
  for (const auto& p : presets) width = std::max(width, p.name.size());
  for (const auto& p : presets) std::cout << p.name << std::string(width + 2 - p.name.size(), ' ') << p.description << '\n';
  return 0;
}

int cmd_run(const std::string& target, const std::string& out, long snapshot_every) {
  const ExperimentConfig config = resolve_config(target);
  RunOptions options;
  options.output_dir = out.empty() ? (config.output_dir.empty() ? "dgflow_out/" + config.name : "") : out;
  if (snapshot_every >= 0) options.snapshot_every = static_cast<std::size_t>(snapshot_every);
  options.log = &std::cout;
  const auto result = run_experiment(config, options);
  std::cout << (result.passed() ? "all checks passed" : "some checks FAILED") << " ("
            << (options.output_dir.empty() ? config.output_dir : options.output_dir) << ")\n";
  return result.passed() ? 0 : 1;
}

int cmd_audit(const std::string& target, int degree, const std::string& csv, const std::string& matrix) {
  const ExperimentConfig config = resolve_config(target);
  if (config.kind == "lr_equivalence") throw ConfigError("'" + config.name + "' has no flow to audit");
  const FlowProblem flow = build_flow(config, build_mesh(config.mesh));
  if (!matrix.empty()) {
    write_file(matrix, [&](std::ostream& o) { write_matrix_dump(o, assemble_flow(flow).matrix); });
  }
  const auto report = check_local_conservation(reconstruct_flux(solve_flow(flow)), degree);
  if (csv.empty()) {
    write_conservation_csv(std::cout, report);
  } else {
    write_file(csv, [&](std::ostream& o) { write_conservation_csv(o, report); });
  }
  std::cerr << config.name << ": degree-" << degree << " audit " << (report.passed() ? "PASS" : "FAIL")
            << ", max residual " << report.max_residual << " at element " << report.worst_element << '\n';
  return report.passed() ? 0 : 1;
}

int cmd_verify(const std::vector<int>& ids, bool verbose) {
  const auto results = run_acceptance(std::cout, ids, verbose ? &std::cerr : nullptr);
  bool ok = true;
  for (const auto& r : results) ok = ok && r.passed;
  std::cout << (ok ? "acceptance: all criteria passed" : "acceptance: FAILED") << '\n';
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DG Darcy flow and transport experiments"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "List the registered presets");

  std::string target, out;
  long snapshot_every = -1;
  auto* run = app.add_subcommand("run", "Run a preset or a JSON config");
  run->add_option("target", target, "Preset name or config path")->required();
  run->add_option("--out", out, "Output directory (default dgflow_out/<name>)");
  run->add_option("--snapshot-every", snapshot_every, "VTK snapshot interval in steps (0 disables)")
      ->check(CLI::NonNegativeNumber);

  std::string audit_target, audit_csv, audit_matrix;
  int degree = 0;
  auto* audit = app.add_subcommand("audit", "Local conservation audit of a config's flux");
  audit->add_option("config", audit_target, "Preset name or config path")->required();
  audit->add_option("--degree", degree, "Audit degree K")->required()->check(CLI::NonNegativeNumber);
  audit->add_option("--csv", audit_csv, "Write `element_id residual` rows here instead of stdout");
  audit->add_option("--matrix", audit_matrix, "Dump the flow matrix as `row col value`");

  std::string show_target;
  auto* show = app.add_subcommand("show", "Print the resolved JSON config");
  show->add_option("target", show_target, "Preset name or config path")->required();

  std::vector<int> ids;
  bool verbose = false;
  auto* verify = app.add_subcommand("verify", "Run the acceptance criteria");
  verify->add_option("--criterion", ids, "Only these criteria (1-8)")->check(CLI::Range(1, acceptance_criteria));
  verify->add_flag("-v,--verbose", verbose, "Progress on stderr");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*list) return cmd_list();
    if (*run) return cmd_run(target, out, snapshot_every);
    if (*audit) return cmd_audit(audit_target, degree, audit_csv, audit_matrix);
    if (*show) {
      std::cout << serialize_config(resolve_config(show_target));
      return 0;
    }
    if (*verify) return cmd_verify(ids, verbose);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
