#include "dgflow/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "dgflow/error.hpp"
#include "dgflow/output.hpp"

namespace dgflow {

using nlohmann::json;
using std::numbers::pi;

// ---------------------------------------------------------------- registry

namespace {

std::size_t nearest_element(const Mesh& mesh, const Vec2& p) {
  std::size_t best = 0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const Vec2 c = mesh.centroid(e);
    const double r = (c.x - p.x) * (c.x - p.x) + (c.y - p.y) * (c.y - p.y);
    if (r < d) {
      d = r;
      best = e;
    }
  }
  return best;
}

ElementField point_field(std::function<double(const Vec2&)> f) {
  return [f = std::move(f)](std::size_t, const Vec2& x) { return f(x); };
}

std::vector<NamedField> build_registry() {
  std::vector<NamedField> r;
  r.push_back({"corner_wells",
               "100/|T0| on the element at the lower-left corner, -100/|T1| at the upper-right one", true,
               [](const Mesh& mesh) -> ElementField {
                 const std::size_t a = nearest_element(mesh, mesh.bbox_min());
                 const std::size_t b = nearest_element(mesh, mesh.bbox_max());
                 const double qa = 100.0 / mesh.element_measure(a);
                 const double qb = -100.0 / mesh.element_measure(b);
                 return [a, b, qa, qb](std::size_t e, const Vec2&) { return e == a ? qa : (e == b ? qb : 0.0); };
               }});
  r.push_back({"sine_pressure_1d", "-(2/pi) sin(pi x / 2), the exact pressure of sine_sink_1d", false,
               [](const Mesh&) { return point_field([](const Vec2& x) { return -(2.0 / pi) * std::sin(pi * x.x / 2); }); }});
  r.push_back({"sine_sink_1d", "-(pi/2) sin(pi x / 2); with p(0) = 0, p(1) = -2/pi it gives u = cos(pi x / 2)", false,
               [](const Mesh&) { return point_field([](const Vec2& x) { return -(pi / 2) * std::sin(pi * x.x / 2); }); }});
  r.push_back({"x", "the x coordinate", false, [](const Mesh&) { return point_field([](const Vec2& x) { return x.x; }); }});
  r.push_back({"y", "the y coordinate", false, [](const Mesh&) { return point_field([](const Vec2& x) { return x.y; }); }});
  return r;
}

const NamedField& lookup_field(const std::string& name) {
  for (const auto& f : field_registry()) {
    if (f.name == name) return f;
  }
  std::string known;
  for (const auto& f : field_registry()) known += (known.empty() ? "" : ", ") + f.name;
  throw ConfigError("unknown field '" + name + "' (known: " + known + ")");
}

}  // namespace

const std::vector<NamedField>& field_registry() {
  static const std::vector<NamedField> registry = build_registry();
  return registry;
}

ElementField make_field(const FieldSpec& spec, const Mesh& mesh) {
  if (spec.is_constant()) {
    const double v = spec.value;
    return [v](std::size_t, const Vec2&) { return v; };
  }
  ElementField f = lookup_field(spec.name).make(mesh);
  if (spec.scale == 1.0) return f;
  const double s = spec.scale;
  return [f = std::move(f), s](std::size_t e, const Vec2& x) { return s * f(e, x); };
}

BoundaryField make_boundary_field(const FieldSpec& spec, const Mesh& mesh) {
  if (!spec.is_constant() && lookup_field(spec.name).element_supported) {
    throw ConfigError("field '" + spec.name + "' is element-supported and cannot be boundary data");
  }
  ElementField f = make_field(spec, mesh);
  return [f = std::move(f)](const Vec2& x) { return f(npos, x); };
}

// ---------------------------------------------------------------- JSON

namespace {

// Hands out members of one JSON object and rejects whatever was not asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  const json* find(const std::string& key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string at(const std::string& key) const { return path_ + "." + key; }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(at(key) + ": expected a number");
      out = v->get<double>();
    }
  }
  void integer(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
      out = v->get<int>();
    }
  }
  void count(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) {
        throw ConfigError(at(key) + ": expected a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }
  void text(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(at(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }
  void field(const std::string& key, FieldSpec& out);

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

FieldSpec read_field(const json& v, const std::string& path) {
  if (v.is_number()) return FieldSpec::constant(v.get<double>());
  if (v.is_string()) {
    const auto name = v.get<std::string>();
    lookup_field(name);
    return FieldSpec::named(name);
  }
  if (v.is_object()) {
    Reader r(v, path);
    FieldSpec f;
    r.text("name", f.name);
    r.number("scale", f.scale);
    r.finish();
    if (f.name.empty()) throw ConfigError(path + ".name: required");
    lookup_field(f.name);
    return f;
  }
  throw ConfigError(path + ": expected a number, a field name or {\"name\", \"scale\"}");
}

void Reader::field(const std::string& key, FieldSpec& out) {
  if (const json* v = find(key)) out = read_field(*v, at(key));
}

json write_field(const FieldSpec& f) {
  if (f.is_constant()) return f.value;
  if (f.scale == 1.0) return f.name;
  return json{{"name", f.name}, {"scale", f.scale}};
}

MeshSpec read_mesh_spec(const json& j, const std::string& path) {
  Reader r(j, path);
  MeshSpec m;
  r.integer("dim", m.dim);
  if (m.dim == 1) {
    r.count("n", m.nx);
    m.ny = 1;
  } else {
    r.count("nx", m.nx);
    r.count("ny", m.ny);
  }
  if (const json* b = r.find("boundary")) {
    if (!b->is_object()) throw ConfigError(r.at("boundary") + ": expected an object");
    for (auto it = b->begin(); it != b->end(); ++it) {
      if (!it->is_string()) throw ConfigError(r.at("boundary") + "." + it.key() + ": expected a tag name");
      m.sides[it.key()] = it->get<std::string>();
    }
  }
  r.finish();
  return m;
}

json write_mesh_spec(const MeshSpec& m) {
  json j{{"dim", m.dim}, {"boundary", m.sides}};
  if (m.dim == 1) {
    j["n"] = m.nx;
  } else {
    j["nx"] = m.nx;
    j["ny"] = m.ny;
  }
  return j;
}

FlowSpec read_flow_spec(const json& j, const std::string& path) {
  Reader r(j, path);
  FlowSpec f;
  r.integer("degree", f.degree);
  r.integer("theta", f.theta);
  r.number("penalty", f.penalty);
  r.number("kappa", f.kappa);
  r.field("source", f.source);
  r.text("gauge", f.gauge);
  if (const json* regions = r.find("regions")) {
    if (!regions->is_array()) throw ConfigError(r.at("regions") + ": expected an array");
    for (std::size_t i = 0; i < regions->size(); ++i) {
      const std::string p = r.at("regions") + "[" + std::to_string(i) + "]";
      Reader rr((*regions)[i], p);
      KappaRegion k;
      if (const json* box = rr.find("box")) {
        if (!box->is_array() || box->size() != 4) throw ConfigError(p + ".box: expected [x0, x1, y0, y1]");
        for (std::size_t c = 0; c < 4; ++c) {
          if (!(*box)[c].is_number()) throw ConfigError(p + ".box: expected numbers");
          k.box[c] = (*box)[c].get<double>();
        }
      }
      rr.number("kxx", k.kxx);
      rr.number("kyy", k.kyy);
      rr.finish();
      f.regions.push_back(k);
    }
  }
  if (const json* b = r.find("boundary")) {
    if (!b->is_object()) throw ConfigError(r.at("boundary") + ": expected an object");
    for (auto it = b->begin(); it != b->end(); ++it) {
      Reader rb(*it, r.at("boundary") + "." + it.key());
      BoundarySpec s;
      rb.text("type", s.type);
      rb.field("value", s.value);
      rb.finish();
      f.boundary[it.key()] = s;
    }
  }
  r.finish();
  return f;
}

json write_flow_spec(const FlowSpec& f) {
  json regions = json::array();
  for (const auto& k : f.regions) regions.push_back({{"box", k.box}, {"kxx", k.kxx}, {"kyy", k.kyy}});
  json boundary = json::object();
  for (const auto& [tag, s] : f.boundary) boundary[tag] = {{"type", s.type}, {"value", write_field(s.value)}};
  return {{"degree", f.degree}, {"theta", f.theta},     {"penalty", f.penalty},
          {"kappa", f.kappa},   {"regions", regions},   {"source", write_field(f.source)},
          {"boundary", boundary}, {"gauge", f.gauge}};
}

TransportSpec read_transport_spec(const json& j, const std::string& path) {
  Reader r(j, path);
  TransportSpec t;
  r.integer("degree", t.degree);
  r.number("dt", t.dt);
  r.number("final_time", t.final_time);
  r.field("initial", t.initial);
  r.field("inflow", t.inflow);
  r.field("injected", t.injected);
  r.number("diffusion", t.diffusion);
  r.integer("theta", t.theta);
  r.number("penalty", t.penalty);
  r.integer("edge_order", t.edge_order);
  r.finish();
  return t;
}

json write_transport_spec(const TransportSpec& t) {
  return {{"degree", t.degree},
          {"dt", t.dt},
          {"final_time", t.final_time},
          {"initial", write_field(t.initial)},
          {"inflow", write_field(t.inflow)},
          {"injected", write_field(t.injected)},
          {"diffusion", t.diffusion},
          {"theta", t.theta},
          {"penalty", t.penalty},
          {"edge_order", t.edge_order}};
}

CheckSpec read_check(const json& j, const std::string& path) {
  Reader r(j, path);
  CheckSpec c;
  r.text("id", c.id);
  r.text("kind", c.kind);
  r.number("lower", c.lower);
  r.number("upper", c.upper);
  r.number("tolerance", c.tolerance);
  r.number("reference", c.reference);
  r.integer("degree", c.degree);
  r.finish();
  return c;
}

json write_check(const CheckSpec& c) {
  return {{"id", c.id},       {"kind", c.kind},           {"lower", c.lower},  {"upper", c.upper},
          {"tolerance", c.tolerance}, {"reference", c.reference}, {"degree", c.degree}};
}

const std::set<std::string> check_kinds{"bounds",       "bound_violation", "final_l2_error", "l2_stability",
                                        "audit_passes", "audit_fails",     "lr_difference",  "gap_monotone"};

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Reader r(j, "config");
  ExperimentConfig c;
  r.text("name", c.name);
  r.text("description", c.description);
  r.text("kind", c.kind);
  if (const json* v = r.find("mesh")) c.mesh = read_mesh_spec(*v, "config.mesh");
  if (const json* v = r.find("flow")) c.flow = read_flow_spec(*v, "config.flow");
  if (const json* v = r.find("transport")) c.transport = read_transport_spec(*v, "config.transport");
  if (const json* v = r.find("audit_degrees")) {
    if (!v->is_array()) throw ConfigError("config.audit_degrees: expected an array");
    for (const auto& d : *v) {
      if (!d.is_number_integer()) throw ConfigError("config.audit_degrees: expected integers");
      c.audit_degrees.push_back(d.get<int>());
    }
  }
  if (const json* v = r.find("output")) {
    Reader ro(*v, "config.output");
    ro.text("directory", c.output_dir);
    ro.count("snapshot_every", c.snapshot_every);
    ro.finish();
  }
  if (const json* v = r.find("checks")) {
    if (!v->is_array()) throw ConfigError("config.checks: expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      c.checks.push_back(read_check((*v)[i], "config.checks[" + std::to_string(i) + "]"));
    }
  }
  if (const json* v = r.find("study")) {
    Reader rs(*v, "config.study");
    if (const json* e = rs.find("eta_fractions")) {
      if (!e->is_array()) throw ConfigError("config.study.eta_fractions: expected an array");
      for (const auto& x : *e) {
        if (!x.is_number()) throw ConfigError("config.study.eta_fractions: expected numbers");
        c.eta_fractions.push_back(x.get<double>());
      }
    }
    rs.count("lr_cases", c.lr_cases);
    std::size_t seed = c.lr_seed;
    rs.count("lr_seed", seed);
    c.lr_seed = static_cast<unsigned>(seed);
    rs.finish();
  }
  r.finish();
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string serialize_config(const ExperimentConfig& c) {
  json checks = json::array();
  for (const auto& k : c.checks) checks.push_back(write_check(k));
  const json j{{"name", c.name},
               {"description", c.description},
               {"kind", c.kind},
               {"mesh", write_mesh_spec(c.mesh)},
               {"flow", write_flow_spec(c.flow)},
               {"transport", write_transport_spec(c.transport)},
               {"audit_degrees", c.audit_degrees},
               {"output", {{"directory", c.output_dir}, {"snapshot_every", c.snapshot_every}}},
               {"checks", checks},
               {"study", {{"eta_fractions", c.eta_fractions}, {"lr_cases", c.lr_cases}, {"lr_seed", c.lr_seed}}}};
  return j.dump(2) + "\n";
}

void validate_config(const ExperimentConfig& c) {
  auto fail = [&](const std::string& what) { throw ConfigError("config '" + c.name + "': " + what); };
  if (c.kind != "transport" && c.kind != "lr_equivalence" && c.kind != "characteristic_study") {
    fail("kind must be transport, lr_equivalence or characteristic_study, not '" + c.kind + "'");
  }
  std::set<std::string> ids;
  for (const auto& k : c.checks) {
    if (k.id.empty()) fail("every check needs an id");
    if (!ids.insert(k.id).second) fail("duplicate check id '" + k.id + "'");
    if (!check_kinds.count(k.kind)) fail("check '" + k.id + "' has unknown kind '" + k.kind + "'");
    if ((k.kind == "audit_passes" || k.kind == "audit_fails") &&
        std::find(c.audit_degrees.begin(), c.audit_degrees.end(), k.degree) == c.audit_degrees.end()) {
      fail("check '" + k.id + "' needs degree " + std::to_string(k.degree) + " in audit_degrees");
    }
  }
  if (c.kind == "lr_equivalence") {
    if (c.lr_cases == 0) fail("lr_cases must be positive");
    return;
  }

  const auto& m = c.mesh;
  if (m.dim != 1 && m.dim != 2) fail("mesh.dim must be 1 or 2");
  if (m.nx == 0 || m.ny == 0) fail("mesh needs at least one cell per direction");
  std::vector<std::string> sides{"left", "right"};
  if (m.dim == 2) sides.insert(sides.end(), {"bottom", "top"});
  std::set<std::string> tags;
  for (const auto& s : sides) {
    const auto it = m.sides.find(s);
    if (it == m.sides.end()) fail("mesh.boundary is missing side '" + s + "'");
    try {
      parse_boundary_tag(it->second);
    } catch (const Error&) {
      fail("mesh.boundary." + s + ": unknown tag '" + it->second + "'");
    }
    tags.insert(it->second);
  }
  for (const auto& [side, tag] : m.sides) {
    if (std::find(sides.begin(), sides.end(), side) == sides.end()) fail("mesh.boundary: unknown side '" + side + "'");
  }

  const auto& f = c.flow;
  if (f.degree < 0) fail("flow.degree must be >= 0");
  if (f.theta < -1 || f.theta > 1) fail("flow.theta must be -1, 0 or 1");
  if (!(f.penalty > 0.0)) fail("flow.penalty must be positive");
  if (!(f.kappa > 0.0)) fail("flow.kappa must be positive");
  for (const auto& r : f.regions) {
    if (!(r.kxx > 0.0 && r.kyy > 0.0)) fail("flow.regions: kappa must be positive");
    if (!(r.box[0] < r.box[1] && r.box[2] < r.box[3])) fail("flow.regions: empty box");
  }
  if (f.gauge != "none" && f.gauge != "zero_mean") fail("flow.gauge must be none or zero_mean");
  if (!f.source.is_constant()) lookup_field(f.source.name);
  for (const auto& tag : tags) {
    const auto it = f.boundary.find(tag);
    if (it == f.boundary.end()) fail("flow.boundary has no condition for tag '" + tag + "'");
  }
  for (const auto& [tag, s] : f.boundary) {
    if (!tags.count(tag)) fail("flow.boundary: tag '" + tag + "' is not on the mesh");
    if (s.type != "dirichlet" && s.type != "neumann") fail("flow.boundary." + tag + ": type must be dirichlet or neumann");
    if (!s.value.is_constant() && lookup_field(s.value.name).element_supported) {
      fail("flow.boundary." + tag + ": element-supported field '" + s.value.name + "'");
    }
  }

  const auto& t = c.transport;
  if (t.degree < 0) fail("transport.degree must be >= 0");
  if (!(t.dt > 0.0)) fail("transport.dt must be positive");
  if (!(t.final_time >= 0.0)) fail("transport.final_time must be >= 0");
  if (t.diffusion < 0.0) fail("transport.diffusion must be >= 0");
  if (t.theta < -1 || t.theta > 1) fail("transport.theta must be -1, 0 or 1");
  if (t.diffusion == 0.0 && t.penalty > 0.0) fail("transport.penalty > 0 needs diffusion");
  for (const auto* fs : {&t.initial, &t.injected}) {
    if (!fs->is_constant()) lookup_field(fs->name);
  }
  if (!t.inflow.is_constant() && lookup_field(t.inflow.name).element_supported) {
    fail("transport.inflow: element-supported field '" + t.inflow.name + "'");
  }

  if (c.kind == "characteristic_study") {
    if (t.degree != 0) fail("characteristic_study needs transport.degree = 0");
    if (c.eta_fractions.empty()) fail("characteristic_study needs study.eta_fractions");
    for (double x : c.eta_fractions) {
      if (!(x > 0.0)) fail("study.eta_fractions must be positive");
    }
  }
}

// ---------------------------------------------------------------- presets

namespace {

struct Preset {
  std::string name;
  std::string description;
  std::function<ExperimentConfig()> make;
};

CheckSpec bounds_check(std::string id, double lo, double hi, double tol) {
  CheckSpec c;
  c.id = std::move(id);
  c.kind = "bounds";
  c.lower = lo;
  c.upper = hi;
  c.tolerance = tol;
  return c;
}

CheckSpec audit_check(int degree, double upper) {
  CheckSpec c;
  c.id = "audit_k" + std::to_string(degree);
  c.kind = "audit_passes";
  c.degree = degree;
  c.upper = upper;
  return c;
}

ExperimentConfig front1d() {
  ExperimentConfig c;
  c.name = "front1d";
  c.description = "1D front, u = cos(pi x / 2) from a sine sink, DG0 transport of c_I = 1 into c0 = 0.1";
  c.mesh.dim = 1;
  c.mesh.nx = 100;
  c.mesh.ny = 1;
  c.mesh.sides = {{"left", "dirichlet_1"}, {"right", "dirichlet_2"}};
  c.flow.degree = 1;
  c.flow.source = FieldSpec::named("sine_sink_1d");
  c.flow.boundary["dirichlet_1"] = {"dirichlet", FieldSpec::constant(0.0)};
  c.flow.boundary["dirichlet_2"] = {"dirichlet", FieldSpec::constant(-2.0 / pi)};
  c.transport.degree = 0;
  c.transport.dt = 0.02;
  c.transport.final_time = 0.5;
  c.transport.initial = FieldSpec::constant(0.1);
  c.transport.inflow = FieldSpec::constant(1.0);
  c.transport.injected = FieldSpec::constant(1.0);
  c.audit_degrees = {0, 1};
  c.checks = {bounds_check("dmp", 0.1, 1.0, 1e-10), audit_check(0, 1e-10), audit_check(1, 1e-10)};
  return c;
}

ExperimentConfig front1d_dg1() {
  ExperimentConfig c = front1d();
  c.name = "front1d_dg1";
  c.description = "front1d on 10 cells with DG1 transport; expected to leave [0.1, 1]";
  c.mesh.nx = 10;
  c.transport.degree = 1;
  CheckSpec v = bounds_check("bound_violation", 0.1, 1.0, 1e-3);
  v.kind = "bound_violation";
  c.checks = {v};
  return c;
}

ExperimentConfig stability1d() {
  ExperimentConfig c = front1d();
  c.name = "stability1d";
  c.description = "front1d on 10 cells, DG2 transport on a DG4 IIPG flux; L2 stability bound M = 1";
  c.mesh.nx = 10;
  c.flow.degree = 4;
  c.transport.degree = 2;
  c.audit_degrees = {4};
  CheckSpec s;
  s.id = "l2_stability";
  s.kind = "l2_stability";
  s.upper = 1.0;
  s.tolerance = 1e-8;
  c.checks = {s, audit_check(4, 1e-10)};
  return c;
}

ExperimentConfig stability1d_dg1flux() {
  ExperimentConfig c = stability1d();
  c.name = "stability1d_dg1flux";
  c.description = "stability1d on a DG1 flux, conservative only up to degree 1 (reported, no bound asserted)";
  c.flow.degree = 1;
  c.audit_degrees = {1, 2};
  CheckSpec f;
  f.id = "audit_k2_fails";
  f.kind = "audit_fails";
  f.degree = 2;
  f.lower = 1e-6;
  c.checks = {audit_check(1, 1e-10), f};
  return c;
}

ExperimentConfig block_flow(std::size_t n) {
  ExperimentConfig c;
  c.mesh.dim = 2;
  c.mesh.nx = c.mesh.ny = n;
  c.mesh.sides = {{"left", "dirichlet_1"}, {"right", "dirichlet_2"}, {"bottom", "neumann"}, {"top", "neumann"}};
  c.flow.degree = 1;
  c.flow.regions = {{{0.375, 0.625, 0.25, 0.75}, 1e-3, 1e-3}};
  c.flow.boundary["dirichlet_1"] = {"dirichlet", FieldSpec::constant(1.0)};
  c.flow.boundary["dirichlet_2"] = {"dirichlet", FieldSpec::constant(0.0)};
  c.flow.boundary["neumann"] = {"neumann", FieldSpec::constant(0.0)};
  c.transport.initial = FieldSpec::constant(0.0);
  c.transport.inflow = FieldSpec::constant(1.0);
  c.transport.injected = FieldSpec::constant(1.0);
  return c;
}

ExperimentConfig kblock2d() {
  ExperimentConfig c = block_flow(64);
  c.name = "kblock2d";
  c.description = "64x64 square, kappa = 1e-3 in (3/8,5/8)x(1/4,3/4), p = 1 left, 0 right; DG0 front to T = 3";
  c.transport.degree = 0;
  c.transport.dt = 0.01;
  c.transport.final_time = 3.0;
  c.snapshot_every = 50;
  c.audit_degrees = {0, 1};
  c.checks = {bounds_check("dmp", 0.0, 1.0, 1e-10), audit_check(0, 1e-10), audit_check(1, 1e-10)};
  return c;
}

ExperimentConfig inject2d() {
  ExperimentConfig c;
  c.name = "inject2d";
  c.description = "100x100 square, kappa = 1e-3 for x >= 0.5, wells +-100 at (0,0)/(1,1), no-flow walls; DG0 to T = 10";
  c.mesh.dim = 2;
  c.mesh.nx = c.mesh.ny = 100;
  c.mesh.sides = {{"left", "neumann"}, {"right", "neumann"}, {"bottom", "neumann"}, {"top", "neumann"}};
  c.flow.degree = 1;
  c.flow.regions = {{{0.5, 1.0, 0.0, 1.0}, 1e-3, 1e-3}};
  c.flow.source = FieldSpec::named("corner_wells");
  c.flow.boundary["neumann"] = {"neumann", FieldSpec::constant(0.0)};
  c.flow.gauge = "zero_mean";
  c.transport.degree = 0;
  c.transport.dt = 0.01;
  c.transport.final_time = 10.0;
  c.transport.initial = FieldSpec::constant(0.0);
  c.transport.inflow = FieldSpec::constant(0.0);
  c.transport.injected = FieldSpec::constant(1.0);
  c.snapshot_every = 100;
  c.audit_degrees = {0, 1};
  // the well elements carry loads near 1e4, so residuals sit at 1e-9 from rounding alone
  c.checks = {bounds_check("dmp", 0.0, 1.0, 1e-10), audit_check(0, 1e-8), audit_check(1, 1e-8)};
  return c;
}

ExperimentConfig inject2d_dg1() {
  ExperimentConfig c = inject2d();
  c.name = "inject2d_dg1";
  c.description = "inject2d with DG1 transport; min/max trajectories reported, no bound asserted";
  c.transport.degree = 1;
  c.checks = {audit_check(0, 1e-8), audit_check(1, 1e-8)};
  return c;
}

ExperimentConfig constant2d() {
  ExperimentConfig c;
  c.name = "constant2d";
  c.description = "64x64 square, K = 10, p = 100 right, 0 bottom; IIPG DG1 flow, DG1 transport of the constant 1";
  c.mesh.dim = 2;
  c.mesh.nx = c.mesh.ny = 64;
  c.mesh.sides = {{"right", "dirichlet_1"}, {"bottom", "dirichlet_2"}, {"left", "neumann"}, {"top", "neumann"}};
  c.flow.degree = 1;
  c.flow.theta = 0;
  c.flow.kappa = 10.0;
  c.flow.boundary["dirichlet_1"] = {"dirichlet", FieldSpec::constant(100.0)};
  c.flow.boundary["dirichlet_2"] = {"dirichlet", FieldSpec::constant(0.0)};
  c.flow.boundary["neumann"] = {"neumann", FieldSpec::constant(0.0)};
  c.transport.degree = 1;
  c.transport.dt = 0.01;
  c.transport.final_time = 1.0;
  c.transport.initial = FieldSpec::constant(1.0);
  c.transport.inflow = FieldSpec::constant(1.0);
  c.transport.injected = FieldSpec::constant(1.0);
  c.audit_degrees = {0, 1};
  CheckSpec e;
  e.id = "constant_l2_error";
  e.kind = "final_l2_error";
  e.reference = 1.0;
  e.upper = 1e-9;
  c.checks = {e, audit_check(0, 1e-10), audit_check(1, 1e-10)};
  return c;
}

ExperimentConfig lr_equiv() {
  ExperimentConfig c;
  c.name = "lr_equiv";
  c.description = "BMS and Lesaint-Raviart systems on random conservative 1D/2D fluxes, k_c = 0, 1, 2";
  c.kind = "lr_equivalence";
  c.lr_cases = 6;
  c.lr_seed = 2024;
  CheckSpec k;
  k.id = "lr_equivalence";
  k.kind = "lr_difference";
  k.upper = 1e-12;
  c.checks = {k};
  return c;
}

ExperimentConfig char_oracle() {
  ExperimentConfig c = block_flow(8);
  c.name = "char_oracle";
  c.description = "8x8 block flow, DG0: characteristic step vs BMS for eta = dt * {1, 1/2, ..., 1/16}";
  c.kind = "characteristic_study";
  c.transport.degree = 0;
  c.transport.dt = 0.05;
  c.transport.final_time = 0.05;
  c.transport.edge_order = 16;
  c.eta_fractions = {1.0, 0.5, 0.25, 0.125, 0.0625};
  CheckSpec g;
  g.id = "gap_monotone";
  g.kind = "gap_monotone";
  g.upper = 1.0;
  c.checks = {g};
  return c;
}

ExperimentConfig zero_data() {
  ExperimentConfig c;
  c.name = "zero_data";
  c.description = "8x8 square with zero pressure data and zero concentrations; everything stays zero";
  c.mesh.dim = 2;
  c.mesh.nx = c.mesh.ny = 8;
  c.mesh.sides = {{"left", "dirichlet_1"}, {"right", "dirichlet_1"}, {"bottom", "dirichlet_1"}, {"top", "dirichlet_1"}};
  c.flow.boundary["dirichlet_1"] = {"dirichlet", FieldSpec::constant(0.0)};
  c.transport.degree = 1;
  c.transport.dt = 0.1;
  c.transport.final_time = 0.5;
  c.audit_degrees = {0, 1};
  CheckSpec e;
  e.id = "zero_l2";
  e.kind = "final_l2_error";
  e.reference = 0.0;
  e.upper = 0.0;
  c.checks = {bounds_check("zero_bounds", 0.0, 0.0, 0.0), e, audit_check(0, 0.0), audit_check(1, 0.0)};
  return c;
}

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = [] {
    std::vector<Preset> p;
    for (auto make : {char_oracle, constant2d, front1d, front1d_dg1, inject2d, inject2d_dg1, kblock2d, lr_equiv,
                      stability1d, stability1d_dg1flux, zero_data}) {
      const auto c = make();
      p.push_back({c.name, c.description, make});
    }
    return p;
  }();
  return all;
}

}  // namespace

std::vector<PresetInfo> list_presets() {
  std::vector<PresetInfo> out;
  for (const auto& p : presets()) out.push_back({p.name, p.description});
  return out;
}

bool is_preset(const std::string& name) {
  return std::any_of(presets().begin(), presets().end(), [&](const Preset& p) { return p.name == name; });
}

ExperimentConfig preset(const std::string& name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p.make();
  }
  throw ConfigError("unknown preset '" + name + "' (see `dgflow list`)");
}

ExperimentConfig resolve_config(const std::string& name_or_path) {
  if (is_preset(name_or_path)) return preset(name_or_path);
  if (std::filesystem::exists(name_or_path)) return load_config(name_or_path);
  throw ConfigError("'" + name_or_path + "' is neither a preset nor a readable config file");
}

// ---------------------------------------------------------------- builders

MeshPtr build_mesh(const MeshSpec& spec) {
  std::map<std::string, BoundaryTag> tags;
  for (const auto& [side, tag] : spec.sides) tags[side] = parse_boundary_tag(tag);
  const Mesh raw = spec.dim == 1 ? generate_interval_mesh(spec.nx, 0.0, 1.0) : generate_triangle_mesh(spec.nx, spec.ny);
  return std::make_shared<const Mesh>(tag_boundary(raw, tags));
}

FlowProblem build_flow(const ExperimentConfig& config, MeshPtr mesh) {
  const auto& f = config.flow;
  FlowProblem p;
  p.mesh = mesh;
  p.kappa.assign(mesh->num_elements(), {f.kappa, f.kappa});
  for (const auto& r : f.regions) {
    for (std::size_t e = 0; e < mesh->num_elements(); ++e) {
      const Vec2 c = mesh->centroid(e);
      if (c.x > r.box[0] && c.x < r.box[1] && c.y > r.box[2] && c.y < r.box[3]) p.kappa[e] = {r.kxx, r.kyy};
    }
  }
  if (!(f.source.is_constant() && f.source.value == 0.0)) p.source = make_field(f.source, *mesh);
  for (const auto& [tag, s] : f.boundary) {
    BoundaryField g = make_boundary_field(s.value, *mesh);
    p.boundary[parse_boundary_tag(tag)] =
        s.type == "dirichlet" ? BoundaryCondition::dirichlet(std::move(g)) : BoundaryCondition::neumann(std::move(g));
  }
  p.theta = f.theta;
  p.degree = f.degree;
  p.penalty_factor = f.penalty;
  p.gauge = f.gauge == "zero_mean" ? Gauge::zero_mean : Gauge::none;
  return p;
}

TransportProblem build_transport(const ExperimentConfig& config, std::shared_ptr<const NumericalFlux> flux) {
  const auto& t = config.transport;
  TransportProblem p;
  p.mesh = flux->mesh;
  p.flux = std::move(flux);
  p.degree = t.degree;
  p.dt = t.dt;
  p.final_time = t.final_time;
  p.initial = make_field(t.initial, *p.mesh);
  p.inflow = make_boundary_field(t.inflow, *p.mesh);
  p.injected = make_field(t.injected, *p.mesh);
  if (t.diffusion > 0.0) p.diffusion.assign(p.mesh->num_elements(), {t.diffusion, t.diffusion});
  p.theta = t.theta;
  p.penalty_factor = t.penalty;
  p.edge_order = t.edge_order;
  return p;
}

// ---------------------------------------------------------------- runner

bool ExperimentResult::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.passed; });
}

namespace {

// Random smooth vector field, traced exactly by the edge fluxes.
struct PolyField {
  double a[6], b[6];
  Vec2 operator()(const Vec2& x) const {
    return {a[0] + a[1] * x.x + a[2] * x.y + a[3] * x.x * x.x + a[4] * x.x * x.y + a[5] * x.y * x.y,
            b[0] + b[1] * x.x + b[2] * x.y + b[3] * x.x * x.x + b[4] * x.x * x.y + b[5] * x.y * x.y};
  }
  double div(const Vec2& x) const { return a[1] + 2 * a[3] * x.x + a[4] * x.y + b[2] + b[4] * x.x + 2 * b[5] * x.y; }
};

double relative_difference(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(a[i]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

}  // namespace

double lr_equivalence_difference(std::size_t cases, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  double worst = 0.0;
  for (std::size_t trial = 0; trial < cases; ++trial) {
    const bool one_d = trial % 2 == 0;
    MeshPtr mesh;
    if (one_d) {
      mesh = std::make_shared<const Mesh>(tag_boundary(generate_interval_mesh(4 + trial, 0.0, 1.0),
                                                       {{"left", BoundaryTag::dirichlet_1}, {"right", BoundaryTag::dirichlet_2}}));
    } else {
      const std::size_t n = 2 + trial / 2;
      mesh = std::make_shared<const Mesh>(
          tag_boundary(generate_triangle_mesh(n, n), {{"left", BoundaryTag::dirichlet_1},
                                                      {"right", BoundaryTag::dirichlet_2},
                                                      {"top", BoundaryTag::neumann},
                                                      {"bottom", BoundaryTag::neumann}}));
    }
    PolyField f{};
    for (int i = 0; i < 6; ++i) {
      f.a[i] = d(rng);
      f.b[i] = one_d ? 0.0 : d(rng);
    }
    if (one_d) f.a[2] = f.a[4] = f.a[5] = 0.0;
    TransportProblem t;
    t.mesh = mesh;
    t.flux = std::make_shared<const NumericalFlux>(NumericalFlux::from_functions(
        mesh, 2, 2, [f](std::size_t, const Vec2& x) { return f(x); },
        [f, mesh](std::size_t k, const Vec2& x) { return dot(f(x), mesh->edge(k).normal); },
        [f](std::size_t, const Vec2& x) { return f.div(x); }, 12));
    t.dt = 0.05;
    t.inflow = [](const Vec2& x) { return 1.0 + x.x * x.y; };
    t.injected = [](std::size_t, const Vec2&) { return 0.7; };
    t.initial = [](std::size_t, const Vec2& x) { return std::cos(x.x + 2 * x.y); };
    const auto cls = classify_edges(*t.flux);
    for (int kc : {0, 1, 2}) {
      t.degree = kc;
      const auto s0 = initial_state(t);
      const auto bms = assemble_bms(t, s0, cls);
      const auto lr = assemble_lesaint_raviart(t, s0, cls);
      worst = std::max(worst, relative_difference(bms.matrix.to_dense(), lr.matrix.to_dense()));
      worst = std::max(worst, relative_difference(bms.rhs, lr.rhs));
    }
  }
  return worst;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  validate_config(config);
  const auto start = std::chrono::steady_clock::now();
  const std::string dir = options.output_dir.empty() ? config.output_dir : options.output_dir;
  const std::size_t snapshot_every = options.snapshot_every.value_or(config.snapshot_every);
  std::ostream* log = options.log;
  if (!dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
    write_file(join_path(dir, "config.json"), [&](std::ostream& out) { out << serialize_config(config); });
  }

  ExperimentResult result;
  result.name = config.name;
  std::unique_ptr<DgSpace> space;
  TransportState final_state;
  double domain_measure = 1.0;

  if (config.kind == "lr_equivalence") {
    result.lr_difference = lr_equivalence_difference(config.lr_cases, config.lr_seed);
    if (log) *log << config.name << ": max relative difference " << format_number(result.lr_difference) << '\n';
  } else {
    const MeshPtr mesh = build_mesh(config.mesh);
    domain_measure = mesh->total_measure();
    const FlowProblem flow = build_flow(config, mesh);
    const FlowSolution solution = solve_flow(flow);
    const auto flux = std::make_shared<const NumericalFlux>(reconstruct_flux(solution));
    if (log) *log << config.name << ": flow solved (" << solution.space->size() << " dofs)\n";
    if (!dir.empty()) {
      write_file(join_path(dir, "pressure.vtk"), [&](std::ostream& out) {
        write_vtk(out, *solution.space, solution.pressure, "pressure", config.name + " pressure");
      });
    }
    for (int k : config.audit_degrees) {
      result.audits.push_back(check_local_conservation(*flux, k));
      if (log) {
        *log << "  audit degree " << k << ": max residual " << format_number(result.audits.back().max_residual)
             << '\n';
      }
      if (!dir.empty()) {
        write_file(join_path(dir, "conservation_k" + std::to_string(k) + ".csv"),
                   [&](std::ostream& out) { write_conservation_csv(out, result.audits.back()); });
      }
    }

    const TransportProblem problem = build_transport(config, flux);
    if (config.kind == "characteristic_study") {
      std::vector<double> etas;
      for (double x : config.eta_fractions) etas.push_back(x * problem.dt);
      result.study = characteristic_convergence(problem, etas);
      if (log) {
        for (const auto& r : result.study) {
          *log << "  eta " << format_number(r.eta) << "  gap " << format_number(r.l2_gap) << "  iterations "
               << r.iterations << '\n';
        }
      }
      if (!dir.empty()) {
        write_file(join_path(dir, "characteristic.csv"),
                   [&](std::ostream& out) { write_characteristic_csv(out, result.study); });
      }
    } else {
      const std::size_t steps = problem.steps();
      StateObserver observer;
      if (!dir.empty() && snapshot_every > 0) {
        observer = [&](const DgSpace& s, const TransportState& state) {
          if (state.step % snapshot_every != 0 && state.step != steps) return;
          char name[64];
          std::snprintf(name, sizeof name, "concentration_%05zu.vtk", state.step);
          write_file(join_path(dir, name), [&](std::ostream& out) {
            write_vtk(out, s, state.coeffs, "concentration", config.name + " t=" + format_number(state.time));
          });
        };
      }
      TransportRun run_out = run(problem, observer);
      result.records = std::move(run_out.records);
      final_state = std::move(run_out.final_state);
      space = std::make_unique<DgSpace>(mesh, problem.degree);
      if (log) {
        const auto& last = result.records.back();
        *log << "  " << steps << " steps to t = " << last.time << ", final min " << format_number(last.min_c)
             << " max " << format_number(last.max_c) << '\n';
      }
      if (!dir.empty()) {
        write_file(join_path(dir, "steps.csv"), [&](std::ostream& out) { write_step_csv(out, result.records); });
        write_file(join_path(dir, "concentration_final.vtk"), [&](std::ostream& out) {
          write_vtk(out, *space, final_state.coeffs, "concentration", config.name + " final");
        });
      }
    }
  }

  const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.runtime = runtime;

  auto audit_residual = [&](int degree) {
    for (const auto& a : result.audits) {
      if (a.degree == degree) return a.max_residual;
    }
    throw ConfigError("no audit of degree " + std::to_string(degree));
  };
  auto excursion = [&](double lo, double hi) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& r : result.records) m = std::max({m, lo - r.min_c, r.max_c - hi});
    return m;
  };
  auto need_records = [&](const CheckSpec& c) {
    if (result.records.empty()) throw ConfigError("check '" + c.id + "' needs a transport run");
  };

  for (const auto& c : config.checks) {
    Verdict v;
    v.id = c.id;
    v.runtime = runtime;
    if (c.kind == "bounds" || c.kind == "bound_violation") {
      need_records(c);
      v.measured = excursion(c.lower, c.upper);
      v.threshold = c.tolerance;
      v.passed = c.kind == "bounds" ? v.measured <= c.tolerance : v.measured > c.tolerance;
    } else if (c.kind == "final_l2_error") {
      need_records(c);
      const double ref = c.reference;
      v.measured = l2_error(*space, final_state.coeffs, [ref](std::size_t, const Vec2&) { return ref; },
                            2 * space->degree() + 2);
      result.final_l2_error = v.measured;
      v.threshold = c.upper;
      v.passed = c.lower <= v.measured && v.measured <= c.upper;
    } else if (c.kind == "l2_stability") {
      need_records(c);
      double m = 0.0;
      for (const auto& r : result.records) m = std::max(m, r.l2_norm);
      v.measured = m - c.upper * std::sqrt(domain_measure);
      v.threshold = c.tolerance;
      v.passed = v.measured <= c.tolerance;
    } else if (c.kind == "audit_passes") {
      v.measured = audit_residual(c.degree);
      v.threshold = c.upper;
      v.passed = v.measured <= c.upper;
    } else if (c.kind == "audit_fails") {
      v.measured = audit_residual(c.degree);
      v.threshold = c.lower;
      v.passed = v.measured > c.lower;
    } else if (c.kind == "lr_difference") {
      if (config.kind != "lr_equivalence") throw ConfigError("check '" + c.id + "' needs kind lr_equivalence");
      v.measured = result.lr_difference;
      v.threshold = c.upper;
      v.passed = v.measured <= c.upper;
    } else if (c.kind == "gap_monotone") {
      if (result.study.size() < 2) throw ConfigError("check '" + c.id + "' needs a study with two or more etas");
      double ratio = 0.0;
      for (std::size_t i = 1; i < result.study.size(); ++i) {
        ratio = std::max(ratio, result.study[i].l2_gap / result.study[i - 1].l2_gap);
      }
      v.measured = ratio;
      v.threshold = 1.0;
      v.passed = ratio < 1.0 && result.study.back().l2_gap < result.study.front().l2_gap;
    }
    if (log) {
      *log << (v.passed ? "PASS " : "FAIL ") << v.id << "  measured " << format_number(v.measured) << "  threshold "
           << format_number(v.threshold) << '\n';
    }
    result.verdicts.push_back(v);
  }

  if (!dir.empty()) {
    write_file(join_path(dir, "verdicts.json"), [&](std::ostream& out) { write_verdicts_json(out, result); });
  }
  return result;
}

void write_verdicts_json(std::ostream& out, const ExperimentResult& result) {
  json list = json::array();
  for (const auto& v : result.verdicts) {
    list.push_back({{"criterion", v.id},
                    {"measured", v.measured},
                    {"threshold", v.threshold},
                    {"pass", v.passed},
                    {"runtime_seconds", v.runtime}});
  }
  const json j{{"experiment", result.name}, {"passed", result.passed()}, {"verdicts", list}};
  out << j.dump(2) << '\n';
}

}  // namespace dgflow
