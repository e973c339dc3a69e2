#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "schom/voigt.hpp"

namespace schom {

using Matrix24d = Eigen::Matrix<double, 24, 24>;
using Matrix8d = Eigen::Matrix<double, 8, 8>;

/// Trilinear hexahedral element of edge length h on a structured grid.
/// Local node l = i + 2j + 4k sits at (i, j, k)·h; elastic dofs are
/// (node, component) interleaved. Element matrices for arbitrary anisotropic
/// coefficients come from precomputed coefficient-free quadrature blocks:
///   Ke(C) = sum_IJ C_IJ · P[I][J],   Kd(D) = sum_ij D_ij · Pd[i][j].
class HexBasis {
 public:
  explicit HexBasis(double h);

  double h() const { return h_; }
  double volume() const { return h_ * h_ * h_; }
  /// Row-sum lumped mass per node for the unit-coefficient mass matrix.
  double lumped_mass() const { return volume() / 8.0; }

  Matrix24d stiffness(const Matrix6d& c) const;
  Matrix8d diffusion(const Eigen::Matrix3d& d) const;

  const Matrix24d& block(int voigt_i, int voigt_j) const { return p_[6 * voigt_i + voigt_j]; }
  const Matrix8d& diffusion_block(int i, int j) const { return pd_[3 * i + j]; }

  /// Engineering strain at the element center from the 24 local displacements.
  const Eigen::Matrix<double, 6, 24>& strain_matrix() const { return b_center_; }
  /// Scalar gradient at the element center from the 8 local nodal values.
  const Eigen::Matrix<double, 3, 8>& gradient_matrix() const { return g_center_; }

 private:
  double h_;
  std::array<Matrix24d, 36> p_;
  std::array<Matrix8d, 9> pd_;
  Eigen::Matrix<double, 6, 24> b_center_;
  Eigen::Matrix<double, 3, 8> g_center_;
};

/// Sparse matrix with a frozen pattern plus per-element value slots, so the
/// coupled simulation can re-assemble every time step without rebuilding the
/// structure. Element dof lists are fixed at construction.
class AssemblyCache {
 public:
  AssemblyCache(int n_dofs, const std::vector<int>& element_dofs, int dofs_per_element);

  void begin();  // zero all stored values
  void add(int element, const Eigen::Ref<const Eigen::MatrixXd>& ke);
  const Eigen::SparseMatrix<double>& matrix() const { return mat_; }
  Eigen::SparseMatrix<double>& matrix() { return mat_; }

  int elements() const { return n_elements_; }
  int dofs_per_element() const { return dpe_; }

 private:
  Eigen::SparseMatrix<double> mat_;
  std::vector<int> dofs_;
  std::vector<std::ptrdiff_t> slot_;  // value index per (element, local i, local j)
  int dpe_;
  int n_elements_;
};

/// Imposes A u = b with u[d] = value[d] on the listed dofs, symmetrically:
/// the rhs absorbs the coupling columns, then rows and columns are blanked
/// with a unit diagonal, keeping the matrix symmetric positive definite.
void apply_dirichlet(Eigen::SparseMatrix<double>& a, Eigen::VectorXd& b,
                     const std::vector<int>& dofs, const std::vector<double>& values);

}  // namespace schom
