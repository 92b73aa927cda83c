#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "dgflow/error.hpp"
#include "dgflow/experiments.hpp"

using namespace dgflow;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dgflow_test_" + name);
  fs::remove_all(p);
  return p;
}

// Minimal valid transport config.
nlohmann::json minimal() {
  return nlohmann::json::parse(R"({
    "name": "mini",
    "mesh": {"dim": 1, "n": 4, "boundary": {"left": "dirichlet_1", "right": "dirichlet_2"}},
    "flow": {"boundary": {"dirichlet_1": {"type": "dirichlet", "value": 1},
                          "dirichlet_2": {"type": "dirichlet", "value": 0}}},
    "transport": {"dt": 0.1, "final_time": 0.3, "initial": 0, "inflow": 1}
  })");
}

void expect_config_error(const nlohmann::json& j, const std::string& fragment) {
  try {
    parse_config(j.dump());
    FAIL("accepted an invalid config: " << j.dump());
  } catch (const ConfigError& e) {
    CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
  }
}

}  // namespace

TEST_CASE("catalog holds the experiments and is stable") {
  const auto a = list_presets();
  const auto b = list_presets();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].description == b[i].description);
    CHECK_FALSE(a[i].description.empty());
    if (i > 0) CHECK(a[i - 1].name < a[i].name);
  }
  for (const char* name : {"front1d", "kblock2d", "inject2d", "constant2d", "lr_equiv", "char_oracle", "zero_data"}) {
    CHECK_MESSAGE(is_preset(name), name);
  }
  CHECK_THROWS_AS(preset("nope"), ConfigError);
}

TEST_CASE("every preset round-trips through serialization") {
  for (const auto& info : list_presets()) {
    const ExperimentConfig c = preset(info.name);
    CHECK_NOTHROW(validate_config(c));
    const std::string text = serialize_config(c);
    const ExperimentConfig back = parse_config(text);
    CHECK_MESSAGE(back == c, info.name);
    CHECK(serialize_config(back) == text);
  }
}

TEST_CASE("minimal config parses with defaults") {
  const auto c = parse_config(minimal().dump());
  CHECK(c.kind == "transport");
  CHECK(c.mesh.dim == 1);
  CHECK(c.mesh.nx == 4);
  CHECK(c.flow.degree == 1);
  CHECK(c.flow.penalty == 100.0);
  CHECK(c.transport.degree == 0);
  CHECK(c.transport.inflow == FieldSpec::constant(1.0));
}

TEST_CASE("unknown keys are rejected at every level") {
  auto j = minimal();
  j["extra"] = 1;
  expect_config_error(j, "unknown key 'extra'");
  j = minimal();
  j["flow"]["kapa"] = 2.0;
  expect_config_error(j, "config.flow: unknown key 'kapa'");
  j = minimal();
  j["flow"]["boundary"]["dirichlet_1"]["vale"] = 1;
  expect_config_error(j, "unknown key 'vale'");
  j = minimal();
  j["mesh"]["nx"] = 4;  // 1D meshes take n
  expect_config_error(j, "unknown key 'nx'");
  j = minimal();
  j["checks"] = nlohmann::json::array({{{"id", "a"}, {"kind", "bounds"}, {"tol", 1}}});
  expect_config_error(j, "unknown key 'tol'");
  j = minimal();
  j["transport"]["initial"] = {{"name", "x"}, {"sclae", 2}};
  expect_config_error(j, "unknown key 'sclae'");
}

TEST_CASE("type and value errors are actionable") {
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  auto j = minimal();
  j["transport"]["dt"] = "0.1";
  expect_config_error(j, "config.transport.dt: expected a number");
  j = minimal();
  j["flow"]["degree"] = 1.5;
  expect_config_error(j, "expected an integer");
  j = minimal();
  j["transport"]["dt"] = 0.0;
  expect_config_error(j, "transport.dt must be positive");
  j = minimal();
  j["flow"]["theta"] = 2;
  expect_config_error(j, "flow.theta");
  j = minimal();
  j["mesh"]["boundary"].erase("right");
  expect_config_error(j, "missing side 'right'");
  j = minimal();
  j["mesh"]["boundary"]["right"] = "dirichlet_3";
  expect_config_error(j, "unknown tag");
  j = minimal();
  j["flow"]["boundary"].erase("dirichlet_2");
  expect_config_error(j, "no condition for tag 'dirichlet_2'");
  j = minimal();
  j["flow"]["source"] = "no_such_field";
  expect_config_error(j, "unknown field 'no_such_field'");
  j = minimal();
  j["transport"]["inflow"] = "corner_wells";
  expect_config_error(j, "element-supported");
  j = minimal();
  j["kind"] = "movie";
  expect_config_error(j, "kind must be");
  j = minimal();
  j["checks"] = nlohmann::json::array({{{"id", "a"}, {"kind", "audit_passes"}, {"degree", 1}}});
  expect_config_error(j, "needs degree 1 in audit_degrees");
  j = minimal();
  j["kind"] = "characteristic_study";
  expect_config_error(j, "study.eta_fractions");
  CHECK_THROWS_AS(load_config("/nonexistent/dgflow.json"), ConfigError);
  CHECK_THROWS_AS(resolve_config("/nonexistent/dgflow.json"), ConfigError);
}

TEST_CASE("named fields") {
  const auto mesh = build_mesh(preset("inject2d").mesh);
  const auto wells = make_field(FieldSpec::named("corner_wells"), *mesh);
  double total = 0.0, positive = 0.0;
  int support = 0;
  for (std::size_t e = 0; e < mesh->num_elements(); ++e) {
    const double f = wells(e, mesh->centroid(e));
    if (f != 0.0) ++support;
    total += f * mesh->element_measure(e);
    if (f > 0.0) {
      positive += f * mesh->element_measure(e);
      CHECK(mesh->centroid(e).x < 0.01);
      CHECK(mesh->centroid(e).y < 0.01);
    }
  }
  CHECK(support == 2);
  CHECK(total == doctest::Approx(0.0).scale(100.0));
  CHECK(positive == doctest::Approx(100.0));
  const auto sink = make_field(FieldSpec::named("sine_sink_1d", 2.0), *mesh);
  CHECK(sink(0, {1.0, 0.0}) == doctest::Approx(-3.14159265358979));
  CHECK(make_boundary_field(FieldSpec::constant(2.5), *mesh)({0.3, 0.4}) == 2.5);
  CHECK_THROWS_AS(make_boundary_field(FieldSpec::named("corner_wells"), *mesh), ConfigError);
  CHECK(field_registry().size() >= 3);
}

TEST_CASE("kappa regions resolve on mesh lines") {
  const auto c = preset("kblock2d");
  const auto mesh = build_mesh(c.mesh);
  const auto flow = build_flow(c, mesh);
  std::size_t low = 0;
  for (const auto& k : flow.kappa) low += k.xx == 1e-3 ? 1 : 0;
  CHECK(low == mesh->num_elements() / 8);
}

TEST_CASE("zero data gives zero artifacts and passing verdicts") {
  const auto dir = scratch("zero");
  RunOptions o;
  o.output_dir = dir.string();
  o.snapshot_every = 2;
  const auto r = run_experiment(preset("zero_data"), o);
  CHECK(r.passed());
  CHECK(r.verdicts.size() == 4);
  for (const char* f : {"steps.csv", "pressure.vtk", "concentration_final.vtk", "concentration_00000.vtk",
                        "concentration_00002.vtk", "concentration_00004.vtk", "concentration_00005.vtk",
                        "conservation_k0.csv", "conservation_k1.csv", "verdicts.json", "config.json"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  CHECK_FALSE(fs::exists(dir / "concentration_00001.vtk"));
  std::istringstream csv(slurp(dir / "steps.csv"));
  std::string line;
  std::getline(csv, line);
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    CHECK(line.substr(line.find(',', line.find(',') + 1)) == ",0,0,0,0");
  }
  CHECK(rows == 6);
  const auto v = nlohmann::json::parse(slurp(dir / "verdicts.json"));
  CHECK(v["experiment"] == "zero_data");
  CHECK(v["passed"] == true);
  CHECK(v["verdicts"].size() == 4);
  for (const auto& x : v["verdicts"]) {
    CHECK(x.contains("criterion"));
    CHECK(x.contains("measured"));
    CHECK(x.contains("threshold"));
    CHECK(x["pass"] == true);
    CHECK(x.contains("runtime_seconds"));
  }
  CHECK(parse_config(slurp(dir / "config.json")) == preset("zero_data"));
  fs::remove_all(dir);
}

TEST_CASE("reruns give byte-identical CSV") {
  ExperimentConfig c = preset("front1d");
  c.mesh.nx = 20;
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  RunOptions o;
  o.output_dir = a.string();
  const auto ra = run_experiment(c, o);
  o.output_dir = b.string();
  run_experiment(c, o);
  CHECK(ra.passed());
  for (const char* f : {"steps.csv", "conservation_k0.csv", "conservation_k1.csv", "concentration_final.vtk"}) {
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("constant preset meets its error bound") {
  ExperimentConfig c = preset("constant2d");
  c.mesh.nx = c.mesh.ny = 16;
  c.transport.final_time = 0.1;
  const auto r = run_experiment(c);
  CHECK(r.passed());
  CHECK(r.final_l2_error <= 1e-9);
  CHECK(r.records.size() == 11);
}

TEST_CASE("check kinds evaluate their rules") {
  ExperimentConfig c = preset("front1d_dg1");
  CheckSpec tight;
  tight.id = "tight_bounds";
  tight.kind = "bounds";
  tight.lower = 0.1;
  tight.upper = 1.0;
  tight.tolerance = 1e-3;
  c.checks.push_back(tight);
  const auto r = run_experiment(c);
  REQUIRE(r.verdicts.size() == 2);
  CHECK(r.verdicts[0].passed);
  CHECK_FALSE(r.verdicts[1].passed);
  CHECK(r.verdicts[0].measured == r.verdicts[1].measured);
  CHECK_FALSE(r.passed());

  const auto lr = run_experiment(preset("lr_equiv"));
  CHECK(lr.passed());
  CHECK(lr.lr_difference <= 1e-12);
}
