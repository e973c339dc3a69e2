#pragma once

#include <Eigen/Dense>

namespace schom {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix6f = Eigen::Matrix<float, 6, 6>;

// Voigt component order: 11, 22, 33, 23, 13, 12.

/// Tensor components of a symmetric matrix (off-diagonals not doubled).
inline Vector6d voigt_tensor(const Eigen::Matrix3d& m) {
  Vector6d v;
  v << m(0, 0), m(1, 1), m(2, 2), m(1, 2), m(0, 2), m(0, 1);
  return v;
}

/// Engineering strain vector (off-diagonal shears doubled).
inline Vector6d voigt_strain(const Eigen::Matrix3d& eps) {
  Vector6d v = voigt_tensor(eps);
  v.tail<3>() *= 2.0;
  return v;
}

inline Eigen::Matrix3d from_voigt_tensor(const Vector6d& v) {
  Eigen::Matrix3d m;
  m << v[0], v[5], v[4],
       v[5], v[1], v[3],
       v[4], v[3], v[2];
  return m;
}

inline Eigen::Matrix3d from_voigt_strain(const Vector6d& v) {
  Vector6d t = v;
  t.tail<3>() *= 0.5;
  return from_voigt_tensor(t);
}

/// Unit macroscopic strain e_I = sym(e_i (x) e_j) for Voigt index I.
inline Eigen::Matrix3d unit_strain(int voigt_index) {
  Vector6d t = Vector6d::Zero();
  t[voigt_index] = voigt_index < 3 ? 1.0 : 0.5;
  return from_voigt_tensor(t);
}

struct LamePair {
  double lambda;
  double mu;
};

inline LamePair lame_from_young_poisson(double youngs_modulus, double poisson_ratio) {
  const double e = youngs_modulus;
  const double nu = poisson_ratio;
  return {e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu))};
}

/// Isotropic stiffness in Voigt convention (shear entries equal mu).
inline Matrix6d isotropic_stiffness(double lambda, double mu) {
  Matrix6d c = Matrix6d::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) c(i, j) = lambda;
    c(i, i) = lambda + 2.0 * mu;
    c(i + 3, i + 3) = mu;
  }
  return c;
}

}  // namespace schom
