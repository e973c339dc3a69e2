#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "schom/fem.hpp"
#include "schom/stimulus.hpp"
#include "schom/table.hpp"

namespace schom {

enum class Region : std::uint8_t { outside, defect, cortical, marrow, fixator, nail };
enum class Mode { N, ED, EDS };

/// Species indices of the four cell fields.
constexpr int kPro = 0, kFib = 1, kCho = 2, kOst = 3;

struct MacroDomainConfig {
  double h = 0.25;          // element edge, mm
  double length = 10.0;     // bone axis (z), mm
  double radius = 1.0;      // bone radius
  double marrow_radius = 0.6;
  double defect_start = 2.5;
  double defect_end = 7.5;
  // Fixator proxy: a lateral PEEK bar tied to the bone by titanium nails. The
  // bar is sized so the frame shunts most of the axial load and keeps the
  // interfragmentary strain in the low-stimulus (bone-forming) range.
  bool with_fixator = true;
  double bar_gap = 0.3;
  double bar_thickness = 2.4;
  double bar_half_width = 0.5;
  double bar_z0 = 0.5;
  double bar_z1 = 9.5;
  std::vector<double> nail_z = {1.0, 1.8, 8.2, 9.0};
  double nail_half_width = 0.26;
  double nail_half_length = 0.26;
};

/// Structured hexahedral proxy domain: a bone cylinder (cortical ring +
/// marrow core) interrupted by the scaffolded defect, plus the fixator.
/// Elements outside every region are dropped; nodes are compacted.
struct MacroDomain {
  int nx = 0, ny = 0, nz = 0;  // grid elements per axis
  double h = 0.0;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();

  std::vector<Region> element_region;             // per active element
  std::vector<int> element_grid;                  // active element -> grid element id
  std::vector<std::array<int, 8>> element_nodes;  // compact node ids, l = i + 2j + 4k
  std::vector<Eigen::Vector3d> element_center;
  int n_nodes = 0;
  std::vector<Eigen::Vector3d> node_position;

  std::vector<int> defect_elements;       // active-element indices
  std::vector<int> defect_element_index;  // active element -> defect-local index or -1
  std::vector<int> defect_nodes;          // compact node id per defect-local node
  std::vector<int> node_defect_index;     // compact node -> defect-local index or -1
  std::vector<std::vector<int>> defect_node_elements;  // defect-local node -> defect elems

  std::vector<int> clamped_nodes;                 // Gamma_D, compact node ids
  std::vector<std::array<int, 4>> neumann_faces;  // Gamma_N quad faces, compact node ids
  double neumann_area = 0.0;

  std::vector<int> pro_dirichlet;  // defect-local nodes, c_pro prescribed
  std::vector<int> ost_dirichlet;  // defect-local nodes, c_ost = 1

  int elements() const { return static_cast<int>(element_region.size()); }
  int defect_element_count() const { return static_cast<int>(defect_elements.size()); }
  int defect_node_count() const { return static_cast<int>(defect_nodes.size()); }

  static MacroDomain cylinder_with_fixator(const MacroDomainConfig& cfg = {});
  /// All-defect box of nx*ny*nz cube elements; boundary sets empty (test use).
  static MacroDomain box(int nx, int ny, int nz, double h);
};

struct Materials {
  IsotropicMaterial pcl{350.0, 0.33};
  IsotropicMaterial bone{5000.0, 0.3};
  IsotropicMaterial peek{3800.0, 0.3};
  IsotropicMaterial titanium{111000.0, 0.33};
  IsotropicMaterial marrow{2.0, 0.17};
  double void_contrast = 1e-3;
  double k_mig = 6e-4;  // mm^2/day
};

struct ScaffoldDesign {
  Eigen::VectorXd rho;  // per defect element
  double k1 = std::log(2.0) / 140.0;
  double lower = 0.1;
  double upper = 0.99;

  double decay(double t) const { return std::exp(-k1 * t); }
};

struct CellState {
  std::array<Eigen::VectorXd, 4> c;  // pro, fib, cho, ost on defect-local nodes
};

struct MacroOptions {
  Mode mode = Mode::EDS;
  double dt = 1.0;    // days
  double T = 140.0;   // days
  double axial_load = 14.7;       // N, compressive along the bone axis
  double tangential_load = 1.8;   // N, each of the two bending components
  double sharpness = 40.0;
  double pro_boundary = 0.3;
  // Test hooks.
  bool zero_reactions = false;
  bool no_cell_dirichlet = false;
  double fixed_stimulus = -1.0;  // >= 0 replaces the mechanical stimulus
};

struct Trajectory {
  std::vector<double> times;                   // steps + 1
  std::vector<CellState> states;               // steps + 1
  std::vector<CellState> pre_clamp;            // steps (field before clamping)
  std::vector<Eigen::VectorXd> displacements;  // steps + 1
  std::vector<double> compliance;              // steps + 1
};

/// J = gamma * smoothmax_t(compliance) - eta * integral of c_ost(T); the
/// smooth max is the L^p mean over the selected times {0, T}.
struct ObjectiveSpec {
  double gamma = 0.0;
  double eta = 1.0;
  double p = 8.0;
  bool at_initial = true;
  bool at_final = true;
};

class MacroSim {
 public:
  MacroSim(const MacroDomain& domain, const Materials& materials, const MacroOptions& options,
           const CoefficientTable* table = nullptr);

  const MacroDomain& domain() const { return dom_; }
  const MacroOptions& options() const { return opts_; }
  const Materials& materials() const { return mat_; }
  const Eigen::VectorXd& force() const { return force_; }
  const RateTable& rate_table() const { return rates_; }

  CellState initial_state() const;

  Eigen::VectorXd solve_elasticity(const ScaffoldDesign& design, const CellState& state,
                                   double time) const;
  double compliance(const Eigen::VectorXd& u) const { return force_.dot(u); }

  CellState step_cells(const ScaffoldDesign& design, const CellState& state,
                       const Eigen::VectorXd& u, double time,
                       CellState* pre_clamp = nullptr) const;

  Trajectory simulate(const ScaffoldDesign& design, const CellState* initial = nullptr) const;

  /// Lumped-mass integral of c_ost over the defect, mm^3.
  double defect_bone_integral(const CellState& state) const;
  /// Mass-weighted defect averages of the four fields.
  std::array<double, 4> defect_mean_fractions(const CellState& state) const;
  /// Per-defect-element cell-averaged stimulus (gamma_oct of the corrected strain).
  Eigen::VectorXd element_stimulus(const ScaffoldDesign& design, const CellState& state,
                                   const Eigen::VectorXd& u, double time) const;
  /// Per-defect-element elastic energy density from a displacement field.
  Eigen::VectorXd element_energy(const ScaffoldDesign& design, const CellState& state,
                                 const Eigen::VectorXd& u, double time) const;

  double evaluate_objective(const Trajectory& traj, const ObjectiveSpec& objective) const;
  /// Weighted terms of the objective: {gamma * smoothmax, eta * bone integral};
  /// the objective value is their difference.
  std::pair<double, double> objective_terms(const Trajectory& traj,
                                            const ObjectiveSpec& objective) const;

  /// Discrete adjoint of evaluate_objective(simulate(design)) with respect to
  /// the per-element scaffold density.
  Eigen::VectorXd adjoint_gradient(const ScaffoldDesign& design, const Trajectory& traj,
                                   const ObjectiveSpec& objective) const;

 private:
  struct StiffnessLaw {
    Matrix6d c, d_rho, d_ost;
  };
  struct DiffusivityLaw {
    Eigen::Matrix3d d, d_rho, d_ost;
  };

  StiffnessLaw stiffness_law(double rho_eff, double ost, bool with_derivs) const;
  DiffusivityLaw diffusivity_law(double rho_eff, double ost, bool with_derivs) const;

  struct ElementRates {
    RateValues r;
    std::array<Eigen::Matrix3d, RateValues::kCount> d_eps;
    std::array<double, RateValues::kCount> d_rho;  // in the effective density
    std::array<double, RateValues::kCount> d_ost;
  };
  ElementRates element_rates(double rho_eff, double ost, const Eigen::Matrix3d& eps,
                             bool with_derivs) const;

  Eigen::VectorXd element_ost(const CellState& state) const;  // nodal means per element
  Eigen::VectorXd node_rho(const Eigen::VectorXd& rho) const;
  Eigen::Matrix3d element_strain(int defect_element, const Eigen::VectorXd& u) const;
  Eigen::Matrix<double, 24, 1> gather_displacement(int active_element,
                                                   const Eigen::VectorXd& u) const;

  void assemble_elasticity(const ScaffoldDesign& design, const Eigen::VectorXd& ost_e,
                           double sigma) const;
  Eigen::VectorXd solve_elastic_system(Eigen::VectorXd rhs) const;  // after assembly

  void impose_cell_dirichlet(CellState& state) const;

  const MacroDomain& dom_;
  Materials mat_;
  MacroOptions opts_;
  const CoefficientTable* table_;
  HexBasis basis_;
  RateTable rates_;

  Eigen::VectorXd force_;       // 3 * n_nodes, Gamma_D rows zeroed
  Eigen::VectorXd node_mass_;   // defect-local lumped masses
  std::vector<int> elastic_dirichlet_;  // dof ids on Gamma_D
  std::array<Matrix24d, 6> fixed_ke_;   // per Region, for non-defect regions

  mutable AssemblyCache elastic_;
  mutable AssemblyCache diffusion_;
  mutable Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> elastic_solver_;
  mutable bool elastic_analyzed_ = false;
  mutable Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> diffusion_solver_;
  mutable bool diffusion_analyzed_ = false;
};

}  // namespace schom
