#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "schom/geometry.hpp"
#include "schom/macro.hpp"

namespace schom {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat run configuration; every field has a JSON key of the same name.
/// Unknown keys in the file are rejected.
struct RunConfig {
  // Microcell geometry and tabulation.
  std::string geometry = "gyroid";  // gyroid | strut
  int micro_n = 16;
  std::string table_path;
  std::vector<double> rho_samples;  // empty -> default grid
  std::vector<double> ost_samples;
  double solver_tol = 1e-6;
  int solver_max_iter = 2000;

  // Macro domain (mm).
  double h = 0.25;
  double length = 10.0;
  double radius = 1.0;
  double marrow_radius = 0.6;
  double defect_start = 2.5;
  double defect_end = 7.5;
  bool with_fixator = true;

  // Materials (MPa).
  double pcl_E = 350.0, pcl_nu = 0.33;
  double bone_E = 5000.0, bone_nu = 0.3;
  double peek_E = 3800.0, peek_nu = 0.3;
  double titanium_E = 111000.0, titanium_nu = 0.33;
  double marrow_E = 2.0, marrow_nu = 0.17;
  double void_contrast = 1e-3;
  double k_mig = 6e-4;  // mm^2/day

  // Simulation.
  std::string mode = "eds";  // n | ed | eds
  double T = 140.0;          // days
  double dt = 1.0;
  double k1 = std::log(2.0) / 140.0;  // scaffold degradation rate, 1/day
  double initial_porosity = 0.79;
  double sharpness = 40.0;
  double pro_boundary = 0.3;
  double axial_load = 14.7;      // N
  double tangential_load = 1.8;  // N

  // Objective and optimization.
  double gamma = 1.0;
  double eta = 1.0;
  double p = 8.0;
  double box_lower = 0.1;
  double box_upper = 0.99;
  int max_iters = 4;

  // Output.
  std::string output_dir = "out";
  int vtk_every = 14;  // days between VTK snapshots; 0 disables

  // Reconstruction.
  std::string design_path;          // CSV from optimize; empty -> uniform initial design
  double cells_per_mm = 0.75;       // 3 unit cells per 4 mm
  int reconstruct_samples_per_mm = 12;

  unsigned seed = 0;
};

/// Parses the JSON text of a configuration. Throws ConfigError on malformed
/// JSON, unknown keys, wrong types, or out-of-range values.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// Effective configuration echoed as pretty JSON (defaults filled in).
std::string echo_config(const RunConfig& cfg);

Mode parse_mode(const std::string& mode);
SurfaceKind parse_geometry(const std::string& geometry);

MacroDomainConfig domain_config(const RunConfig& cfg);
Materials materials_config(const RunConfig& cfg);
MacroOptions macro_options(const RunConfig& cfg);

/// Default tabulation axes: rho in {0.10, 0.15, ..., 0.95, 0.99},
/// c_ost in {0, 0.05, ..., 0.9}.
std::vector<double> default_rho_axis();
std::vector<double> default_ost_axis();

}  // namespace schom
