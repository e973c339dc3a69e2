#include "schom/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

#include "schom/config.hpp"
#include "schom/fft_solver.hpp"
#include "schom/geometry.hpp"
#include "schom/macro.hpp"
#include "schom/marching_cubes.hpp"
#include "schom/optimize.hpp"
#include "schom/stl.hpp"
#include "schom/table.hpp"
#include "schom/vtk.hpp"

namespace schom {

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

RunConfig effective_config(const CommandOptions& opts) {
  if (opts.config_path.empty()) throw ConfigError("missing --config <path>");
  RunConfig cfg = load_config(opts.config_path);
  if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
  if (!opts.mode.empty()) {
    parse_mode(opts.mode);
    cfg.mode = opts.mode;
  }
  return cfg;
}

void prepare_output(const RunConfig& cfg, const CommandOptions& opts) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw std::ios_base::failure("cannot create output directory: " + cfg.output_dir);
  std::ofstream echo(fs::path(cfg.output_dir) / "config.json", std::ios::trunc);
  if (!echo) throw std::ios_base::failure("cannot write config echo");
  echo << echo_config(cfg) << '\n';
  if (opts.verbose) std::cout << echo_config(cfg) << '\n';
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CellSolveError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const TableError& e) {
    std::cerr << "table i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kExitSolver;
  }
}

struct SimSetup {
  MacroDomain domain;
  CoefficientTable table;
  bool has_table = false;
  MacroOptions options;
  Materials materials;
  ScaffoldDesign design;
};

SimSetup build_setup(const RunConfig& cfg) {
  SimSetup s;
  s.domain = MacroDomain::cylinder_with_fixator(domain_config(cfg));
  s.materials = materials_config(cfg);
  s.options = macro_options(cfg);
  if (s.options.mode != Mode::N) {
    if (cfg.table_path.empty())
      throw ConfigError("table_path is required for modes ed and eds");
    s.table = load_table(cfg.table_path);
    s.has_table = true;
  }
  s.design.rho = Eigen::VectorXd::Constant(s.domain.defect_element_count(),
                                           1.0 - cfg.initial_porosity);
  s.design.k1 = cfg.k1;
  s.design.lower = cfg.box_lower;
  s.design.upper = cfg.box_upper;
  return s;
}

/// Defect-element means of a defect-nodal field.
Eigen::VectorXd element_means(const MacroDomain& dom, const Eigen::VectorXd& nodal) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dom.defect_element_count());
  for (int de = 0; de < dom.defect_element_count(); ++de) {
    double acc = 0.0;
    for (int node : dom.element_nodes[dom.defect_elements[de]])
      acc += nodal[dom.node_defect_index[node]];
    out[de] = acc / 8.0;
  }
  return out;
}

void write_cells_csv(const fs::path& path, const MacroSim& sim, const Trajectory& traj) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  out << "day,c_pro,c_fib,c_cho,c_ost,compliance\n";
  for (std::size_t s = 0; s < traj.states.size(); ++s) {
    const auto mean = sim.defect_mean_fractions(traj.states[s]);
    out << num(traj.times[s]) << ',' << num(mean[kPro]) << ',' << num(mean[kFib]) << ','
        << num(mean[kCho]) << ',' << num(mean[kOst]) << ',' << num(traj.compliance[s])
        << '\n';
  }
  if (!out) throw std::ios_base::failure("write failed: " + path.string());
}

/// Full-grid cell scalars (zero outside active elements) from per-active or
/// per-defect element values.
struct GridFields {
  const MacroDomain& dom;
  std::size_t cells;

  explicit GridFields(const MacroDomain& d)
      : dom(d), cells(static_cast<std::size_t>(d.nx) * d.ny * d.nz) {}

  std::vector<double> from_active(const std::function<double(int)>& value) const {
    std::vector<double> out(cells, 0.0);
    for (int e = 0; e < dom.elements(); ++e) out[dom.element_grid[e]] = value(e);
    return out;
  }
  std::vector<double> from_defect(const Eigen::VectorXd& values) const {
    std::vector<double> out(cells, 0.0);
    for (int de = 0; de < dom.defect_element_count(); ++de)
      out[dom.element_grid[dom.defect_elements[de]]] = values[de];
    return out;
  }
};

void write_snapshot_vtk(const fs::path& path, const MacroSim& sim,
                        const ScaffoldDesign& design, const Trajectory& traj,
                        std::size_t step) {
  const MacroDomain& dom = sim.domain();
  const GridFields grid(dom);
  const double t = traj.times[step];
  const CellState& state = traj.states[step];
  const Eigen::VectorXd& u = traj.displacements[step];

  VtkStructuredPoints vtk({dom.nx + 1, dom.ny + 1, dom.nz + 1}, dom.origin, dom.h);
  vtk.add_cell_scalars("region", grid.from_active([&](int e) {
    return static_cast<double>(static_cast<int>(dom.element_region[e]));
  }));
  vtk.add_cell_scalars("scaffold_density",
                       grid.from_defect(design.decay(t) * design.rho));
  for (int sp = 0; sp < 4; ++sp) {
    static const char* names[4] = {"c_pro", "c_fib", "c_cho", "c_ost"};
    vtk.add_cell_scalars(names[sp], grid.from_defect(element_means(dom, state.c[sp])));
  }
  vtk.add_cell_scalars("stimulus",
                       grid.from_defect(sim.element_stimulus(design, state, u, t)));
  vtk.add_cell_scalars("strain_energy",
                       grid.from_defect(sim.element_energy(design, state, u, t)));
  vtk.add_cell_scalars("displacement_magnitude", grid.from_active([&](int e) {
    double acc = 0.0;
    for (int node : dom.element_nodes[e])
      acc += u.segment<3>(3 * node).norm();
    return acc / 8.0;
  }));
  vtk.write(path.string());
}

void write_snapshots(const RunConfig& cfg, const MacroSim& sim, const ScaffoldDesign& design,
                     const Trajectory& traj) {
  if (cfg.vtk_every <= 0) return;
  for (std::size_t s = 0; s < traj.states.size(); ++s) {
    const double t = traj.times[s];
    const bool on_cadence = std::abs(t - cfg.vtk_every * std::round(t / cfg.vtk_every)) < 1e-9;
    if (!on_cadence && s + 1 != traj.states.size()) continue;
    char name[48];
    std::snprintf(name, sizeof(name), "fields_day%07.2f.vtk", t);
    write_snapshot_vtk(fs::path(cfg.output_dir) / name, sim, design, traj, s);
  }
}

void write_design_csv(const fs::path& path, const MacroDomain& dom,
                      const Eigen::VectorXd& rho) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  out << "element,x,y,z,rho\n";
  for (int de = 0; de < dom.defect_element_count(); ++de) {
    const Eigen::Vector3d& c = dom.element_center[dom.defect_elements[de]];
    out << de << ',' << num(c.x()) << ',' << num(c.y()) << ',' << num(c.z()) << ','
        << num(rho[de]) << '\n';
  }
  if (!out) throw std::ios_base::failure("write failed: " + path.string());
}

Eigen::VectorXd read_design_csv(const fs::path& path, int expected) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open design file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("design file is empty");
  std::vector<double> rho;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    double value = 0.0;
    int col = 0;
    while (std::getline(row, field, ',')) {
      if (col == 4) value = std::stod(field);
      ++col;
    }
    if (col != 5) throw ConfigError("design file row must have 5 columns");
    rho.push_back(value);
  }
  if (static_cast<int>(rho.size()) != expected)
    throw ConfigError("design file has " + std::to_string(rho.size()) +
                      " rows, expected " + std::to_string(expected));
  return Eigen::Map<Eigen::VectorXd>(rho.data(), static_cast<Eigen::Index>(rho.size()));
}

}  // namespace

int cmd_tabulate(const CommandOptions& opts) {
  return guarded([&] {
    const RunConfig cfg = effective_config(opts);
    prepare_output(cfg, opts);
    const SurfaceKind kind = parse_geometry(cfg.geometry);
    const std::vector<double> rho_axis =
        cfg.rho_samples.empty() ? default_rho_axis() : cfg.rho_samples;
    const std::vector<double> ost_axis =
        cfg.ost_samples.empty() ? default_ost_axis() : cfg.ost_samples;

    int feasible = 0;
    for (double r : rho_axis)
      for (double o : ost_axis)
        if (r + o <= 1.0 + 1e-12) ++feasible;
    if (feasible == 0)
      throw ConfigError("infeasible sample grid: every (rho, c_ost) pair has rho + c_ost > 1");

    TabulateOptions topts;
    topts.scaffold = {cfg.pcl_E, cfg.pcl_nu};
    topts.bone = {cfg.bone_E, cfg.bone_nu};
    topts.void_contrast = cfg.void_contrast;
    topts.k_mig = cfg.k_mig;
    topts.solve.tol = cfg.solver_tol;
    topts.solve.max_iter = cfg.solver_max_iter;

    std::cout << "tabulating " << feasible << " samples (" << cfg.geometry
              << ", n=" << cfg.micro_n << ")\n";
    const CoefficientTable table = tabulate(kind, rho_axis, ost_axis, cfg.micro_n, topts);
    for (const TableRecord& rec : table.records)
      std::cout << "  rho=" << rec.rho << " c_ost=" << rec.c_ost
                << " iterations=" << rec.iterations << " residual=" << rec.residual << '\n';

    const std::string path = cfg.table_path.empty()
                                 ? (fs::path(cfg.output_dir) / "table.bin").string()
                                 : cfg.table_path;
    save_table(table, path);
    std::cout << "wrote " << path << " (" << table.records.size() << " records)\n";
  });
}

int cmd_simulate(const CommandOptions& opts) {
  return guarded([&] {
    const RunConfig cfg = effective_config(opts);
    prepare_output(cfg, opts);
    SimSetup s = build_setup(cfg);
    MacroSim sim(s.domain, s.materials, s.options, s.has_table ? &s.table : nullptr);

    const Trajectory traj = sim.simulate(s.design);
    write_cells_csv(fs::path(cfg.output_dir) / "cells.csv", sim, traj);
    write_snapshots(cfg, sim, s.design, traj);

    const auto mean = sim.defect_mean_fractions(traj.states.back());
    std::cout << "simulated " << traj.times.back() << " days (mode " << cfg.mode
              << "): final defect means c_pro=" << mean[kPro] << " c_fib=" << mean[kFib]
              << " c_cho=" << mean[kCho] << " c_ost=" << mean[kOst]
              << ", final compliance=" << traj.compliance.back() << '\n';
  });
}

int cmd_optimize(const CommandOptions& opts) {
  return guarded([&] {
    const RunConfig cfg = effective_config(opts);
    prepare_output(cfg, opts);
    SimSetup s = build_setup(cfg);
    MacroSim sim(s.domain, s.materials, s.options, s.has_table ? &s.table : nullptr);

    ObjectiveSpec spec;
    spec.gamma = cfg.gamma;
    spec.eta = cfg.eta;
    spec.p = cfg.p;

    OptimizeOptions oopts;
    oopts.max_iters = cfg.max_iters;

    const OptimizationResult result = optimize(sim, s.design, spec, oopts);

    std::ofstream hist(fs::path(cfg.output_dir) / "history.csv", std::ios::trunc);
    if (!hist) throw std::ios_base::failure("cannot write history.csv");
    hist << "iteration,objective,compliance_term,bone_term,gradient_norm,step\n";
    for (std::size_t i = 0; i < result.history.iterates.size(); ++i) {
      const OptimizationIterate& it = result.history.iterates[i];
      hist << i << ',' << num(it.objective) << ',' << num(it.compliance_term) << ','
           << num(it.bone_term) << ',' << num(it.gradient_norm) << ',' << num(it.step)
           << '\n';
    }
    hist.close();

    write_design_csv(fs::path(cfg.output_dir) / "design.csv", s.domain, result.design.rho);

    const Trajectory traj = sim.simulate(result.design);
    write_cells_csv(fs::path(cfg.output_dir) / "cells.csv", sim, traj);
    write_snapshots(cfg, sim, result.design, traj);

    std::cout << "optimization stopped after "
              << (result.history.iterates.size() - 1) << " accepted steps ("
              << result.history.stop_reason << "), objective " << result.objective << '\n';
  });
}

int cmd_reconstruct(const CommandOptions& opts) {
  return guarded([&] {
    const RunConfig cfg = effective_config(opts);
    prepare_output(cfg, opts);
    const SurfaceKind kind = parse_geometry(cfg.geometry);
    const MacroDomain dom = MacroDomain::cylinder_with_fixator(domain_config(cfg));

    Eigen::VectorXd rho;
    if (cfg.design_path.empty()) {
      rho = Eigen::VectorXd::Constant(dom.defect_element_count(), 1.0 - cfg.initial_porosity);
    } else {
      rho = read_design_csv(cfg.design_path, dom.defect_element_count());
    }
    for (int de = 0; de < rho.size(); ++de)
      if (rho[de] < cfg.box_lower - 1e-9 || rho[de] > cfg.box_upper + 1e-9)
        throw ConfigError("design density out of box at element " + std::to_string(de));

    // Shell half-thickness per quantized density, from the inverse volume map.
    std::map<long, double> alpha_cache;
    auto alpha_of = [&](double r) {
      const long key = std::lround(r * 1000.0);
      auto it = alpha_cache.find(key);
      if (it != alpha_cache.end()) return it->second;
      const double a = thickness_from_volumes(kind, key / 1000.0, 0.0, cfg.micro_n).alpha;
      alpha_cache.emplace(key, a);
      return a;
    };

    // Macro grid cell -> defect-local element, with nearest-center fallback so
    // samples just outside the cylinder get a sensible thickness before the
    // domain cap clips them.
    std::vector<int> cell_defect(static_cast<std::size_t>(dom.nx) * dom.ny * dom.nz, -1);
    for (int de = 0; de < dom.defect_element_count(); ++de)
      cell_defect[dom.element_grid[dom.defect_elements[de]]] = de;
    auto defect_at = [&](const Eigen::Vector3d& x) {
      auto clampi = [](int v, int n) { return std::min(std::max(v, 0), n - 1); };
      const Eigen::Vector3d local = (x - dom.origin) / dom.h;
      const int i = clampi(static_cast<int>(std::floor(local.x())), dom.nx);
      const int j = clampi(static_cast<int>(std::floor(local.y())), dom.ny);
      const int k = clampi(static_cast<int>(std::floor(local.z())), dom.nz);
      int& cached = cell_defect[i + dom.nx * (j + static_cast<std::size_t>(dom.ny) * k)];
      if (cached < 0) {
        double best = std::numeric_limits<double>::max();
        const Eigen::Vector3d center =
            dom.origin + dom.h * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5);
        for (int de = 0; de < dom.defect_element_count(); ++de) {
          const double d =
              (dom.element_center[dom.defect_elements[de]] - center).squaredNorm();
          if (d < best) {
            best = d;
            cached = de;
          }
        }
      }
      return cached;
    };

    const double scale = cfg.cells_per_mm;
    auto field = [&](const Eigen::Vector3d& x) {
      const double cap = std::min({cfg.radius - std::hypot(x.x(), x.y()),
                                   x.z() - cfg.defect_start, cfg.defect_end - x.z()});
      const double alpha = alpha_of(rho[defect_at(x)]);
      const double f = std::abs(implicit_value(kind, scale * x));
      return std::min(alpha - f, cap);
    };

    const double margin = 2.0 / cfg.reconstruct_samples_per_mm;
    const Eigen::Vector3d lo(-cfg.radius - margin, -cfg.radius - margin,
                             cfg.defect_start - margin);
    const Eigen::Vector3d hi(cfg.radius + margin, cfg.radius + margin,
                             cfg.defect_end + margin);
    const auto cells = [&](double a, double b) {
      return std::max(1, static_cast<int>(std::ceil((b - a) * cfg.reconstruct_samples_per_mm)));
    };
    const TriMesh mesh = marching_cubes(field, lo, hi, cells(lo.x(), hi.x()),
                                        cells(lo.y(), hi.y()), cells(lo.z(), hi.z()));
    if (mesh.triangles() == 0)
      std::cerr << "warning: reconstructed surface is empty\n";

    const std::string path = (fs::path(cfg.output_dir) / "scaffold.stl").string();
    write_stl(mesh, path);
    std::cout << "wrote " << path << " (" << mesh.triangles() << " triangles)\n";
  });
}

}  // namespace schom
