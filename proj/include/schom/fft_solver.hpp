#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "schom/geometry.hpp"
#include "schom/voigt.hpp"

namespace schom {

enum class FftScheme { basic, cg };

struct CellSolveOptions {
  FftScheme scheme = FftScheme::cg;
  double tol = 1e-6;
  int max_iter = 2000;
};

struct CellDiagnostics {
  int iterations = 0;
  double residual = 0.0;
  bool converged = true;
  std::vector<double> history;
};

/// Thrown when a cell solve exhausts max_iter; carries the residual history.
class CellSolveError : public std::runtime_error {
 public:
  CellSolveError(std::string what, CellDiagnostics diag)
      : std::runtime_error(std::move(what)), diagnostics(std::move(diag)) {}
  CellDiagnostics diagnostics;
};

/// Periodic strain field on the voxel grid, tensor components
/// [e11, e22, e33, e23, e13, e12] per voxel.
struct StrainField {
  int n = 0;
  std::vector<double> data;  // 6 per voxel

  std::size_t voxels() const { return data.size() / 6; }
  Vector6d at(std::size_t v) const {
    return Eigen::Map<const Vector6d>(data.data() + 6 * v);
  }
  Vector6d mean() const;
};

/// Scalar-gradient analogue for the diffusion cell problem.
struct GradientField {
  int n = 0;
  std::vector<double> data;  // 3 per voxel

  Eigen::Vector3d at(std::size_t v) const {
    return Eigen::Map<const Eigen::Vector3d>(data.data() + 3 * v);
  }
};

struct ElasticCellSolution {
  std::array<StrainField, 6> load_case;
  std::array<CellDiagnostics, 6> diagnostics;
};

struct DiffusionCellSolution {
  std::array<GradientField, 3> load_case;
  std::array<CellDiagnostics, 3> diagnostics;
};

/// Corrector tensor per voxel as a 6x6 map from the macroscopic engineering
/// strain vector to local tensor strain components.
struct CorrectorField {
  int n = 0;
  std::vector<float> data;  // 36 per voxel, row-major

  std::size_t voxels() const { return data.size() / 36; }
  Matrix6f at(std::size_t v) const {
    return Eigen::Map<const Eigen::Matrix<float, 6, 6, Eigen::RowMajor>>(data.data() + 36 * v)
        .cast<float>();
  }
  /// Local strain G(y) : eps for macroscopic strain eps.
  Eigen::Matrix3d apply(std::size_t v, const Eigen::Matrix3d& eps) const {
    const Vector6d micro =
        at(v).cast<double>() * voigt_strain(eps);
    return from_voigt_tensor(micro);
  }

  static CorrectorField identity(int n);
};

StrainField solve_elastic_cell(const StiffnessField& stiffness, int load_case,
                               const CellSolveOptions& opts, CellDiagnostics* diag = nullptr);

/// Arbitrary mean strain; single solve (independent route used by oracles).
StrainField solve_elastic_cell_mean(const StiffnessField& stiffness,
                                    const Eigen::Matrix3d& mean_strain,
                                    const CellSolveOptions& opts,
                                    CellDiagnostics* diag = nullptr);

ElasticCellSolution solve_elastic_cell_all(const StiffnessField& stiffness,
                                           const CellSolveOptions& opts);

Matrix6d homogenized_stiffness(const StiffnessField& stiffness,
                               const ElasticCellSolution& solution);

CorrectorField assemble_corrector(const ElasticCellSolution& solution);

GradientField solve_diffusion_cell(const DiffusivityField& diffusivity, int direction,
                                   const CellSolveOptions& opts,
                                   CellDiagnostics* diag = nullptr);

DiffusionCellSolution solve_diffusion_cell_all(const DiffusivityField& diffusivity,
                                               const CellSolveOptions& opts);

Eigen::Matrix3d homogenized_diffusivity(const DiffusivityField& diffusivity,
                                        const DiffusionCellSolution& solution);

}  // namespace schom
