#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "schom/voigt.hpp"

namespace schom {

enum class SurfaceKind : std::uint8_t { gyroid = 0, strut = 1 };

enum class Phase : std::uint8_t { void_phase = 0, scaffold = 1, bone = 2 };

/// Thickness parameters of the level-set shells: scaffold |f| <= alpha,
/// bone alpha < |f| <= beta.
struct ThicknessPair {
  double alpha = 0.0;
  double beta = 0.0;
};

struct IsotropicMaterial {
  double youngs_modulus;  // MPa
  double poisson_ratio;

  LamePair lame() const { return lame_from_young_poisson(youngs_modulus, poisson_ratio); }
  Matrix6d stiffness() const {
    const LamePair lp = lame();
    return isotropic_stiffness(lp.lambda, lp.mu);
  }
};

/// Periodic n^3 voxelization of the unit cell into void/scaffold/bone.
class VoxelCell {
 public:
  VoxelCell() = default;
  explicit VoxelCell(int n) : n_(n), phase_(static_cast<std::size_t>(n) * n * n, 0) {}

  int resolution() const { return n_; }
  std::size_t size() const { return phase_.size(); }

  Phase phase(std::size_t v) const { return static_cast<Phase>(phase_[v]); }
  void set_phase(std::size_t v, Phase p) { phase_[v] = static_cast<std::uint8_t>(p); }

  // Periodic indexing.
  std::size_t index(int i, int j, int k) const {
    const int n = n_;
    i = ((i % n) + n) % n;
    j = ((j % n) + n) % n;
    k = ((k % n) + n) % n;
    return (static_cast<std::size_t>(k) * n + j) * n + i;
  }

  std::array<double, 3> fraction_by_phase() const;

 private:
  int n_ = 0;
  std::vector<std::uint8_t> phase_;
};

double implicit_value(SurfaceKind kind, const Eigen::Vector3d& point);

/// Largest |f| over voxel centers; usable as an upper bisection bound.
double implicit_max_abs(SurfaceKind kind, int n);

/// Phase decided at voxel centers (midpoint rule).
VoxelCell voxelize(SurfaceKind kind, const ThicknessPair& pair, int n);

/// (scaffold_fraction, bone_fraction) from voxel counts.
std::pair<double, double> volume_fraction(SurfaceKind kind, const ThicknessPair& pair, int n);

/// Inverse volume map: bisection on alpha, then beta. Throws std::invalid_argument
/// for infeasible (rho, c_ost).
ThicknessPair thickness_from_volumes(SurfaceKind kind, double rho, double c_ost, int n);

/// Per-voxel stiffness, indexed through the phase label.
struct StiffnessField {
  VoxelCell cell;
  std::array<Matrix6d, 3> phase_stiffness;

  const Matrix6d& at(std::size_t v) const {
    return phase_stiffness[static_cast<std::size_t>(cell.phase(v))];
  }
};

struct DiffusivityField {
  VoxelCell cell;
  std::array<double, 3> phase_value;

  double at(std::size_t v) const {
    return phase_value[static_cast<std::size_t>(cell.phase(v))];
  }
};

/// Scaffold voxels get C(lambda_rho, mu_rho), bone voxels C(lambda_ost, mu_ost),
/// void voxels void_contrast times the scaffold stiffness.
StiffnessField micro_stiffness(const VoxelCell& cell, const IsotropicMaterial& scaffold,
                               const IsotropicMaterial& bone, double void_contrast);

/// Pores conduct: void voxels carry k_mig, solid voxels contrast * k_mig.
DiffusivityField micro_diffusivity(const VoxelCell& cell, double k_mig,
                                   double solid_contrast = 1e-3);

}  // namespace schom
