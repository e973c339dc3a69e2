#include "schom/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace schom {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

double sq(double x) { return x * x; }
}  // namespace

double implicit_value(SurfaceKind kind, const Eigen::Vector3d& p) {
  const double x = p.x(), y = p.y(), z = p.z();
  switch (kind) {
    case SurfaceKind::gyroid:
      return std::cos(kTwoPi * x) * std::sin(kTwoPi * y) +
             std::cos(kTwoPi * y) * std::sin(kTwoPi * z) +
             std::cos(kTwoPi * z) * std::sin(kTwoPi * x);
    case SurfaceKind::strut:
      // Squared distance to the nearest of the three axis-aligned strut lines.
      return std::min({sq(x - 0.5) + sq(y - 0.5),
                       sq(x - 0.5) + sq(z - 0.5),
                       sq(y - 0.5) + sq(z - 0.5)});
  }
  return 0.0;
}

double implicit_max_abs(SurfaceKind kind, int n) {
  double m = 0.0;
  const double h = 1.0 / n;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d c((i + 0.5) * h, (j + 0.5) * h, (k + 0.5) * h);
        m = std::max(m, std::abs(implicit_value(kind, c)));
      }
  return m;
}

VoxelCell voxelize(SurfaceKind kind, const ThicknessPair& pair, int n) {
  VoxelCell cell(n);
  const double h = 1.0 / n;
  std::size_t v = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i, ++v) {
        const Eigen::Vector3d c((i + 0.5) * h, (j + 0.5) * h, (k + 0.5) * h);
        const double f = std::abs(implicit_value(kind, c));
        if (f <= pair.alpha)
          cell.set_phase(v, Phase::scaffold);
        else if (f <= pair.beta)
          cell.set_phase(v, Phase::bone);
        else
          cell.set_phase(v, Phase::void_phase);
      }
  return cell;
}

std::array<double, 3> VoxelCell::fraction_by_phase() const {
  std::array<std::size_t, 3> count{0, 0, 0};
  for (std::uint8_t p : phase_) ++count[p];
  const double total = static_cast<double>(phase_.size());
  return {count[0] / total, count[1] / total, count[2] / total};
}

std::pair<double, double> volume_fraction(SurfaceKind kind, const ThicknessPair& pair, int n) {
  const auto frac = voxelize(kind, pair, n).fraction_by_phase();
  return {frac[1], frac[2]};
}

ThicknessPair thickness_from_volumes(SurfaceKind kind, double rho, double c_ost, int n) {
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("rho outside [0, 1]");
  if (c_ost < 0.0) throw std::invalid_argument("c_ost negative");
  if (c_ost > 1.0 - rho + 1e-12)
    throw std::invalid_argument("over-full cell: c_ost exceeds remaining volume 1 - rho");

  const double fmax = implicit_max_abs(kind, n);
  const double tol = 1.0 / n;
  const int max_iter = 60;

  // Sorted |f| values give the exact voxel-count fractions without re-voxelizing.
  std::vector<double> absf;
  absf.reserve(static_cast<std::size_t>(n) * n * n);
  const double h = 1.0 / n;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d c((i + 0.5) * h, (j + 0.5) * h, (k + 0.5) * h);
        absf.push_back(std::abs(implicit_value(kind, c)));
      }
  std::sort(absf.begin(), absf.end());
  const double total = static_cast<double>(absf.size());
  auto frac_leq = [&](double t) {
    return static_cast<double>(std::upper_bound(absf.begin(), absf.end(), t) - absf.begin()) /
           total;
  };

  auto bisect = [&](double target, double lo, double hi) {
    if (frac_leq(lo) >= target) return lo;
    if (frac_leq(hi) <= target) return hi;
    for (int it = 0; it < max_iter; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double f = frac_leq(mid);
      if (std::abs(f - target) < 0.5 * tol) return mid;
      (f < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };

  ThicknessPair pair;
  pair.alpha = rho <= 0.0 ? 0.0 : bisect(rho, 0.0, fmax);
  const double scaffold_frac = frac_leq(pair.alpha);
  pair.beta = c_ost <= 0.0 ? pair.alpha : bisect(scaffold_frac + c_ost, pair.alpha, fmax);
  if (frac_leq(fmax) - scaffold_frac + tol < c_ost)
    throw std::invalid_argument("over-full cell: requested bone volume not reachable");
  return pair;
}

StiffnessField micro_stiffness(const VoxelCell& cell, const IsotropicMaterial& scaffold,
                               const IsotropicMaterial& bone, double void_contrast) {
  StiffnessField field;
  field.cell = cell;
  const Matrix6d c_scaffold = scaffold.stiffness();
  field.phase_stiffness[static_cast<std::size_t>(Phase::void_phase)] = void_contrast * c_scaffold;
  field.phase_stiffness[static_cast<std::size_t>(Phase::scaffold)] = c_scaffold;
  field.phase_stiffness[static_cast<std::size_t>(Phase::bone)] = bone.stiffness();
  return field;
}

DiffusivityField micro_diffusivity(const VoxelCell& cell, double k_mig, double solid_contrast) {
  DiffusivityField field;
  field.cell = cell;
  field.phase_value[static_cast<std::size_t>(Phase::void_phase)] = k_mig;
  field.phase_value[static_cast<std::size_t>(Phase::scaffold)] = solid_contrast * k_mig;
  field.phase_value[static_cast<std::size_t>(Phase::bone)] = solid_contrast * k_mig;
  return field;
}

}  // namespace schom
