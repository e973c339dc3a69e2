#include "schom/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace schom {

namespace {

using nlohmann::json;

class Parser {
 public:
  explicit Parser(const json& j) : j_(j) {
    if (!j.is_object()) throw ConfigError("configuration root must be a JSON object");
  }

  void get(const char* key, std::string& out) { fetch(key, out, "string"); }
  void get(const char* key, bool& out) { fetch(key, out, "boolean"); }
  void get(const char* key, int& out) { fetch_number(key, out); }
  void get(const char* key, unsigned& out) { fetch_number(key, out); }
  void get(const char* key, double& out) { fetch_number(key, out); }

  void get(const char* key, std::vector<double>& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_array()) throw ConfigError(std::string(key) + ": expected an array of numbers");
    out.clear();
    for (const auto& v : *it) {
      if (!v.is_number()) throw ConfigError(std::string(key) + ": expected an array of numbers");
      out.push_back(v.get<double>());
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown configuration key: " + it.key());
  }

 private:
  template <class T>
  void fetch(const char* key, T& out, const char* kind) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string(key) + ": expected a " + kind);
    }
  }

  template <class T>
  void fetch_number(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_number()) throw ConfigError(std::string(key) + ": expected a number");
    out = it->get<T>();
  }

  const json& j_;
  std::set<std::string> seen_;
};

void validate(const RunConfig& c) {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(c.micro_n >= 2, "micro_n must be at least 2");
  require(c.solver_tol > 0, "solver_tol must be positive");
  require(c.solver_max_iter > 0, "solver_max_iter must be positive");
  require(c.h > 0, "h must be positive");
  require(c.length > 0 && c.radius > 0, "length and radius must be positive");
  require(c.marrow_radius > 0 && c.marrow_radius < c.radius,
          "marrow_radius must lie in (0, radius)");
  require(c.defect_start >= 0 && c.defect_end > c.defect_start && c.defect_end <= c.length,
          "defect interval must satisfy 0 <= defect_start < defect_end <= length");
  require(c.dt > 0, "dt must be positive");
  require(c.T >= 0, "T must be nonnegative");
  require(c.k1 >= 0, "k1 must be nonnegative");
  require(c.initial_porosity > 0 && c.initial_porosity < 1,
          "initial_porosity must lie in (0, 1)");
  require(c.box_lower > 0 && c.box_lower < c.box_upper && c.box_upper < 1,
          "design box must satisfy 0 < box_lower < box_upper < 1");
  require(c.max_iters >= 0, "max_iters must be nonnegative");
  require(c.p >= 1, "p must be at least 1");
  require(c.cells_per_mm > 0, "cells_per_mm must be positive");
  require(c.reconstruct_samples_per_mm >= 2, "reconstruct_samples_per_mm must be at least 2");
  require(c.vtk_every >= 0, "vtk_every must be nonnegative");
  parse_mode(c.mode);
  parse_geometry(c.geometry);
  for (double r : c.rho_samples)
    require(r > 0 && r < 1, "rho_samples entries must lie in (0, 1)");
  for (double o : c.ost_samples)
    require(o >= 0 && o < 1, "ost_samples entries must lie in [0, 1)");
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  RunConfig c;
  Parser p(j);
  p.get("geometry", c.geometry);
  p.get("micro_n", c.micro_n);
  p.get("table_path", c.table_path);
  p.get("rho_samples", c.rho_samples);
  p.get("ost_samples", c.ost_samples);
  p.get("solver_tol", c.solver_tol);
  p.get("solver_max_iter", c.solver_max_iter);
  p.get("h", c.h);
  p.get("length", c.length);
  p.get("radius", c.radius);
  p.get("marrow_radius", c.marrow_radius);
  p.get("defect_start", c.defect_start);
  p.get("defect_end", c.defect_end);
  p.get("with_fixator", c.with_fixator);
  p.get("pcl_E", c.pcl_E);
  p.get("pcl_nu", c.pcl_nu);
  p.get("bone_E", c.bone_E);
  p.get("bone_nu", c.bone_nu);
  p.get("peek_E", c.peek_E);
  p.get("peek_nu", c.peek_nu);
  p.get("titanium_E", c.titanium_E);
  p.get("titanium_nu", c.titanium_nu);
  p.get("marrow_E", c.marrow_E);
  p.get("marrow_nu", c.marrow_nu);
  p.get("void_contrast", c.void_contrast);
  p.get("k_mig", c.k_mig);
  p.get("mode", c.mode);
  p.get("T", c.T);
  p.get("dt", c.dt);
  p.get("k1", c.k1);
  p.get("initial_porosity", c.initial_porosity);
  p.get("sharpness", c.sharpness);
  p.get("pro_boundary", c.pro_boundary);
  p.get("axial_load", c.axial_load);
  p.get("tangential_load", c.tangential_load);
  p.get("gamma", c.gamma);
  p.get("eta", c.eta);
  p.get("p", c.p);
  p.get("box_lower", c.box_lower);
  p.get("box_upper", c.box_upper);
  p.get("max_iters", c.max_iters);
  p.get("output_dir", c.output_dir);
  p.get("vtk_every", c.vtk_every);
  p.get("design_path", c.design_path);
  p.get("cells_per_mm", c.cells_per_mm);
  p.get("reconstruct_samples_per_mm", c.reconstruct_samples_per_mm);
  p.get("seed", c.seed);
  p.finish();
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string echo_config(const RunConfig& c) {
  json j;
  j["geometry"] = c.geometry;
  j["micro_n"] = c.micro_n;
  j["table_path"] = c.table_path;
  j["rho_samples"] = c.rho_samples.empty() ? default_rho_axis() : c.rho_samples;
  j["ost_samples"] = c.ost_samples.empty() ? default_ost_axis() : c.ost_samples;
  j["solver_tol"] = c.solver_tol;
  j["solver_max_iter"] = c.solver_max_iter;
  j["h"] = c.h;
  j["length"] = c.length;
  j["radius"] = c.radius;
  j["marrow_radius"] = c.marrow_radius;
  j["defect_start"] = c.defect_start;
  j["defect_end"] = c.defect_end;
  j["with_fixator"] = c.with_fixator;
  j["pcl_E"] = c.pcl_E;
  j["pcl_nu"] = c.pcl_nu;
  j["bone_E"] = c.bone_E;
  j["bone_nu"] = c.bone_nu;
  j["peek_E"] = c.peek_E;
  j["peek_nu"] = c.peek_nu;
  j["titanium_E"] = c.titanium_E;
  j["titanium_nu"] = c.titanium_nu;
  j["marrow_E"] = c.marrow_E;
  j["marrow_nu"] = c.marrow_nu;
  j["void_contrast"] = c.void_contrast;
  j["k_mig"] = c.k_mig;
  j["mode"] = c.mode;
  j["T"] = c.T;
  j["dt"] = c.dt;
  j["k1"] = c.k1;
  j["initial_porosity"] = c.initial_porosity;
  j["sharpness"] = c.sharpness;
  j["pro_boundary"] = c.pro_boundary;
  j["axial_load"] = c.axial_load;
  j["tangential_load"] = c.tangential_load;
  j["gamma"] = c.gamma;
  j["eta"] = c.eta;
  j["p"] = c.p;
  j["box_lower"] = c.box_lower;
  j["box_upper"] = c.box_upper;
  j["max_iters"] = c.max_iters;
  j["output_dir"] = c.output_dir;
  j["vtk_every"] = c.vtk_every;
  j["design_path"] = c.design_path;
  j["cells_per_mm"] = c.cells_per_mm;
  j["reconstruct_samples_per_mm"] = c.reconstruct_samples_per_mm;
  j["seed"] = c.seed;
  return j.dump(2);
}

Mode parse_mode(const std::string& mode) {
  if (mode == "n") return Mode::N;
  if (mode == "ed") return Mode::ED;
  if (mode == "eds") return Mode::EDS;
  throw ConfigError("mode must be one of n, ed, eds (got \"" + mode + "\")");
}

SurfaceKind parse_geometry(const std::string& geometry) {
  if (geometry == "gyroid") return SurfaceKind::gyroid;
  if (geometry == "strut") return SurfaceKind::strut;
  throw ConfigError("geometry must be gyroid or strut (got \"" + geometry + "\")");
}

MacroDomainConfig domain_config(const RunConfig& c) {
  MacroDomainConfig d;
  d.h = c.h;
  d.length = c.length;
  d.radius = c.radius;
  d.marrow_radius = c.marrow_radius;
  d.defect_start = c.defect_start;
  d.defect_end = c.defect_end;
  d.with_fixator = c.with_fixator;
  return d;
}

Materials materials_config(const RunConfig& c) {
  Materials m;
  m.pcl = {c.pcl_E, c.pcl_nu};
  m.bone = {c.bone_E, c.bone_nu};
  m.peek = {c.peek_E, c.peek_nu};
  m.titanium = {c.titanium_E, c.titanium_nu};
  m.marrow = {c.marrow_E, c.marrow_nu};
  m.void_contrast = c.void_contrast;
  m.k_mig = c.k_mig;
  return m;
}

MacroOptions macro_options(const RunConfig& c) {
  MacroOptions o;
  o.mode = parse_mode(c.mode);
  o.dt = c.dt;
  o.T = c.T;
  o.axial_load = c.axial_load;
  o.tangential_load = c.tangential_load;
  o.sharpness = c.sharpness;
  o.pro_boundary = c.pro_boundary;
  return o;
}

std::vector<double> default_rho_axis() {
  std::vector<double> axis;
  for (int i = 0; i <= 17; ++i) axis.push_back(0.10 + 0.05 * i);
  axis.push_back(0.99);
  return axis;
}

std::vector<double> default_ost_axis() {
  std::vector<double> axis;
  for (int i = 0; i <= 18; ++i) axis.push_back(0.05 * i);
  return axis;
}

}  // namespace schom
