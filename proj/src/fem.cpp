#include "schom/fem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace schom {

namespace {

// Shape-function gradients of the trilinear hex at a reference point in [0,1]^3,
// scaled to physical edge length h.
Eigen::Matrix<double, 3, 8> shape_gradients(const Eigen::Vector3d& xi, double h) {
  Eigen::Matrix<double, 3, 8> g;
  for (int l = 0; l < 8; ++l) {
    const double fx[2] = {1.0 - xi.x(), xi.x()};
    const double fy[2] = {1.0 - xi.y(), xi.y()};
    const double fz[2] = {1.0 - xi.z(), xi.z()};
    const int i = l & 1, j = (l >> 1) & 1, k = (l >> 2) & 1;
    const double dx[2] = {-1.0, 1.0};
    g(0, l) = dx[i] * fy[j] * fz[k] / h;
    g(1, l) = fx[i] * dx[j] * fz[k] / h;
    g(2, l) = fx[i] * fy[j] * dx[k] / h;
  }
  return g;
}

Eigen::Matrix<double, 6, 24> strain_matrix_at(const Eigen::Matrix<double, 3, 8>& g) {
  Eigen::Matrix<double, 6, 24> b = Eigen::Matrix<double, 6, 24>::Zero();
  for (int l = 0; l < 8; ++l) {
    const int ux = 3 * l, uy = 3 * l + 1, uz = 3 * l + 2;
    b(0, ux) = g(0, l);
    b(1, uy) = g(1, l);
    b(2, uz) = g(2, l);
    b(3, uy) = g(2, l);  // engineering shear 23
    b(3, uz) = g(1, l);
    b(4, ux) = g(2, l);  // 13
    b(4, uz) = g(0, l);
    b(5, ux) = g(1, l);  // 12
    b(5, uy) = g(0, l);
  }
  return b;
}

}  // namespace

HexBasis::HexBasis(double h) : h_(h) {
  for (auto& m : p_) m.setZero();
  for (auto& m : pd_) m.setZero();

  const double a = 0.5 - 0.5 / std::sqrt(3.0);
  const double gauss[2] = {a, 1.0 - a};
  const double w = volume() / 8.0;

  for (int qz = 0; qz < 2; ++qz)
    for (int qy = 0; qy < 2; ++qy)
      for (int qx = 0; qx < 2; ++qx) {
        const Eigen::Vector3d xi(gauss[qx], gauss[qy], gauss[qz]);
        const auto g = shape_gradients(xi, h_);
        const auto b = strain_matrix_at(g);
        for (int i = 0; i < 6; ++i)
          for (int j = 0; j < 6; ++j)
            p_[6 * i + j].noalias() += w * b.row(i).transpose() * b.row(j);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            pd_[3 * i + j].noalias() += w * g.row(i).transpose() * g.row(j);
      }

  g_center_ = shape_gradients(Eigen::Vector3d(0.5, 0.5, 0.5), h_);
  b_center_ = strain_matrix_at(g_center_);
}

Matrix24d HexBasis::stiffness(const Matrix6d& c) const {
  Matrix24d ke = Matrix24d::Zero();
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      if (c(i, j) != 0.0) ke.noalias() += c(i, j) * p_[6 * i + j];
  return ke;
}

Matrix8d HexBasis::diffusion(const Eigen::Matrix3d& d) const {
  Matrix8d kd = Matrix8d::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (d(i, j) != 0.0) kd.noalias() += d(i, j) * pd_[3 * i + j];
  return kd;
}

AssemblyCache::AssemblyCache(int n_dofs, const std::vector<int>& element_dofs,
                             int dofs_per_element)
    : dofs_(element_dofs), dpe_(dofs_per_element) {
  n_elements_ = static_cast<int>(dofs_.size()) / dpe_;

  std::vector<Eigen::Triplet<double>> pattern;
  pattern.reserve(static_cast<std::size_t>(n_elements_) * dpe_ * dpe_);
  for (int e = 0; e < n_elements_; ++e)
    for (int a = 0; a < dpe_; ++a)
      for (int b = 0; b < dpe_; ++b)
        pattern.emplace_back(dofs_[e * dpe_ + a], dofs_[e * dpe_ + b], 0.0);
  mat_.resize(n_dofs, n_dofs);
  mat_.setFromTriplets(pattern.begin(), pattern.end());
  mat_.makeCompressed();

  slot_.resize(pattern.size());
  const int* outer = mat_.outerIndexPtr();
  const int* inner = mat_.innerIndexPtr();
  std::size_t s = 0;
  for (int e = 0; e < n_elements_; ++e)
    for (int a = 0; a < dpe_; ++a)
      for (int b = 0; b < dpe_; ++b, ++s) {
        const int row = dofs_[e * dpe_ + a];
        const int col = dofs_[e * dpe_ + b];
        const int* lo = inner + outer[col];
        const int* hi = inner + outer[col + 1];
        const int* it = std::lower_bound(lo, hi, row);
        if (it == hi || *it != row) throw std::logic_error("assembly pattern mismatch");
        slot_[s] = it - inner;
      }
}

void AssemblyCache::begin() {
  std::fill(mat_.valuePtr(), mat_.valuePtr() + mat_.nonZeros(), 0.0);
}

void AssemblyCache::add(int element, const Eigen::Ref<const Eigen::MatrixXd>& ke) {
  double* values = mat_.valuePtr();
  const std::ptrdiff_t* slots = slot_.data() + static_cast<std::size_t>(element) * dpe_ * dpe_;
  for (int a = 0; a < dpe_; ++a)
    for (int b = 0; b < dpe_; ++b) values[slots[a * dpe_ + b]] += ke(a, b);
}

void apply_dirichlet(Eigen::SparseMatrix<double>& a, Eigen::VectorXd& b,
                     const std::vector<int>& dofs, const std::vector<double>& values) {
  std::vector<char> fixed(a.rows(), 0);
  Eigen::VectorXd target = Eigen::VectorXd::Zero(a.rows());
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    fixed[dofs[i]] = 1;
    target[dofs[i]] = values[i];
  }

  // Move the coupling columns to the rhs, then blank rows/columns.
  for (int d : dofs) {
    const double g = target[d];
    if (g == 0.0) continue;
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, d); it; ++it)
      if (!fixed[it.row()]) b[it.row()] -= it.value() * g;
  }
  for (int col = 0; col < a.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, col); it; ++it) {
      if (!fixed[it.row()] && !fixed[col]) continue;
      it.valueRef() = (it.row() == col) ? 1.0 : 0.0;
    }
  for (int d : dofs) b[d] = target[d];
}

}  // namespace schom
