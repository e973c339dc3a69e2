#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "schom/fft_solver.hpp"
#include "schom/geometry.hpp"

using namespace schom;

namespace {

const IsotropicMaterial kPcl{350.0, 0.33};
const IsotropicMaterial kBone{5000.0, 0.3};

StiffnessField uniform_cell(int n, Phase phase) {
  VoxelCell cell(n);
  for (std::size_t v = 0; v < cell.size(); ++v) cell.set_phase(v, phase);
  return micro_stiffness(cell, kPcl, kBone, 1e-3);
}

StiffnessField gyroid_cell(int n, double rho, double c_ost) {
  const ThicknessPair pair = thickness_from_volumes(SurfaceKind::gyroid, rho, c_ost, n);
  return micro_stiffness(voxelize(SurfaceKind::gyroid, pair, n), kPcl, kBone, 1e-3);
}

/// Two isotropic phases layered along x with volume fractions 1/2 each.
StiffnessField laminate_cell(int n) {
  VoxelCell cell(n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        cell.set_phase(cell.index(i, j, k), i < n / 2 ? Phase::scaffold : Phase::bone);
  return micro_stiffness(cell, kPcl, kBone, 1e-3);
}

Matrix6d voigt_average(const StiffnessField& f) {
  Matrix6d avg = Matrix6d::Zero();
  for (std::size_t v = 0; v < f.cell.size(); ++v) avg += f.at(v);
  return avg / static_cast<double>(f.cell.size());
}

}  // namespace

TEST_CASE("homogeneous cell: zero corrector, exact Voigt matrix") {
  const int n = 8;
  const StiffnessField f = uniform_cell(n, Phase::scaffold);
  const ElasticCellSolution sol = solve_elastic_cell_all(f, {});
  const Matrix6d hom = homogenized_stiffness(f, sol);
  const Matrix6d exact = kPcl.stiffness();
  CHECK((hom - exact).norm() / exact.norm() < 1e-8);
  for (int lc = 0; lc < 6; ++lc) CHECK(sol.diagnostics[lc].iterations <= 2);

  const CorrectorField g = assemble_corrector(sol);
  Matrix6d id = Matrix6d::Identity();
  id(3, 3) = id(4, 4) = id(5, 5) = 0.5;  // engineering strain in, tensor strain out
  for (std::size_t v : {std::size_t(0), f.cell.size() / 2})
    CHECK((g.at(v).cast<double>() - id).norm() < 1e-8);
}

TEST_CASE("laminate oracle: axial component is the harmonic mean") {
  const int n = 64;
  const StiffnessField f = laminate_cell(n);
  const ElasticCellSolution sol = solve_elastic_cell_all(f, {});
  const Matrix6d hom = homogenized_stiffness(f, sol);

  // Closed-form laminate with normal e1: sigma_xx continuity and lateral strain
  // continuity give C_11^eff = harmonic mean of C1111 when lateral strains are
  // eliminated phase-wise. For the unit-strain e11 load with laterally
  // constrained phases the exact relations are (standard 1-D laminate algebra):
  const Matrix6d c1 = kPcl.stiffness();
  const Matrix6d c2 = kBone.stiffness();
  // Condense each phase to its axial modulus under common lateral strains:
  // solve the 2x2 lateral block per phase to express e22, e33 via continuity of
  // sigma_xx only; with both lateral strains shared and zero on average, the
  // classical result for isotropic phases is
  //   1/C_eff = <1/(lam+2mu)> + correction from lateral stress balance.
  // We use the full closed form via phase compliance condensation:
  auto condense = [](const Matrix6d& c) {
    // Schur complement of the lateral (22,33) block onto the 11 entry assuming
    // lateral stresses carry the balance: axial compliance under
    // sigma22 = sigma33 shared among phases is handled below; here return the
    // plane-strain-free axial stiffness C11 - C12 * inv(C22block) * C21.
    Eigen::Matrix2d lat;
    lat << c(1, 1), c(1, 2), c(2, 1), c(2, 2);
    Eigen::Vector2d coup(c(0, 1), c(0, 2));
    return std::make_tuple(c(0, 0), coup, lat);
  };
  // Exact two-phase laminate axial stiffness (normal n = e1): with in-plane
  // strains continuous (equal to the zero mean) and sigma_xx continuous, each
  // phase sees e22 = e33 = 0, so sigma_xx^i = C11^i e11^i and
  // C_eff = [ <1/C11> ]^{-1}.
  const double c11_eff = 1.0 / (0.5 / c1(0, 0) + 0.5 / c2(0, 0));
  (void)condense;
  CHECK(std::abs(hom(0, 0) - c11_eff) / c11_eff < 1e-3);

  // In-plane axial component: strains continuous, stresses average, so the
  // 22-entry is bounded below by harmonic and above by arithmetic means.
  const double arith = 0.5 * c1(1, 1) + 0.5 * c2(1, 1);
  const double harm = 1.0 / (0.5 / c1(1, 1) + 0.5 / c2(1, 1));
  CHECK(hom(1, 1) <= arith * (1.0 + 1e-9));
  CHECK(hom(1, 1) >= harm * (1.0 - 1e-9));
}

TEST_CASE("laminate corrector matches the analytic strain concentration") {
  const int n = 16;
  const StiffnessField f = laminate_cell(n);
  const ElasticCellSolution sol = solve_elastic_cell_all(f, {});
  const CorrectorField g = assemble_corrector(sol);
  // Under e11 the phase strain is e11^i = C_eff / C11^i (uniform per phase).
  const Matrix6d c1 = kPcl.stiffness();
  const Matrix6d c2 = kBone.stiffness();
  const double c11_eff = 1.0 / (0.5 / c1(0, 0) + 0.5 / c2(0, 0));
  Eigen::Matrix3d e11 = Eigen::Matrix3d::Zero();
  e11(0, 0) = 1.0;
  const Eigen::Matrix3d soft = g.apply(f.cell.index(n / 4, 0, 0), e11);
  const Eigen::Matrix3d hard = g.apply(f.cell.index(3 * n / 4, 0, 0), e11);
  CHECK(soft(0, 0) == doctest::Approx(c11_eff / c1(0, 0)).epsilon(1e-3));
  CHECK(hard(0, 0) == doctest::Approx(c11_eff / c2(0, 0)).epsilon(1e-3));
}

TEST_CASE("basic and cg schemes agree on the gyroid cell") {
  const int n = 16;
  const StiffnessField f = gyroid_cell(n, 0.21, 0.0);
  CellSolveOptions cg;
  CellSolveOptions basic;
  basic.scheme = FftScheme::basic;
  basic.max_iter = 60000;  // fixed-point contraction is slow at 1e3 contrast
  const Matrix6d hom_cg = homogenized_stiffness(f, solve_elastic_cell_all(f, cg));
  const Matrix6d hom_basic = homogenized_stiffness(f, solve_elastic_cell_all(f, basic));
  CHECK((hom_cg - hom_basic).norm() / hom_cg.norm() < 1e-4);
}

TEST_CASE("gyroid effective tensors: bounds, symmetry, near symmetry classes") {
  const int n = 16;
  const StiffnessField f = gyroid_cell(n, 0.3, 0.1);
  const ElasticCellSolution sol = solve_elastic_cell_all(f, {});
  const Matrix6d hom = homogenized_stiffness(f, sol);

  CHECK((hom - hom.transpose()).norm() <= 1e-6 * hom.norm());

  const Matrix6d voigt = voigt_average(f);
  for (int probe = 0; probe < 6; ++probe) {
    Vector6d xi = Vector6d::Zero();
    xi[probe] = 1.0;
    CHECK(xi.dot(hom * xi) <= xi.dot(voigt * xi) * (1.0 + 1e-9));
  }

  const CorrectorField g = assemble_corrector(sol);
  Matrix6d mean = Matrix6d::Zero();
  for (std::size_t v = 0; v < g.voxels(); ++v) mean += g.at(v).cast<double>();
  mean /= static_cast<double>(g.voxels());
  Matrix6d id = Matrix6d::Identity();
  id(3, 3) = id(4, 4) = id(5, 5) = 0.5;
  CHECK((mean - id).norm() < 1e-5);
}

TEST_CASE("void cell is close to the contrast-scaled scaffold matrix") {
  const int n = 8;
  const StiffnessField f = uniform_cell(n, Phase::void_phase);
  const Matrix6d hom = homogenized_stiffness(f, solve_elastic_cell_all(f, {}));
  const Matrix6d target = 1e-3 * kPcl.stiffness();
  CHECK((hom - target).norm() / target.norm() < 0.1);
}

TEST_CASE("diffusion cell problems") {
  const int n = 16;
  SUBCASE("homogeneous pores") {
    VoxelCell cell(n);
    const DiffusivityField d = micro_diffusivity(cell, 6e-4);
    const Eigen::Matrix3d hom = homogenized_diffusivity(d, solve_diffusion_cell_all(d, {}));
    CHECK((hom - 6e-4 * Eigen::Matrix3d::Identity()).norm() < 1e-10);
  }
  SUBCASE("laminate: harmonic across, arithmetic along") {
    VoxelCell cell(n);
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
          cell.set_phase(cell.index(i, j, k), i < n / 2 ? Phase::void_phase : Phase::scaffold);
    const double k_mig = 6e-4, contrast = 1e-3;
    const DiffusivityField d = micro_diffusivity(cell, k_mig, contrast);
    const Eigen::Matrix3d hom = homogenized_diffusivity(d, solve_diffusion_cell_all(d, {}));
    const double harmonic = 1.0 / (0.5 / k_mig + 0.5 / (contrast * k_mig));
    const double arithmetic = 0.5 * k_mig + 0.5 * contrast * k_mig;
    CHECK(hom(0, 0) == doctest::Approx(harmonic).epsilon(1e-3));
    CHECK(hom(1, 1) == doctest::Approx(arithmetic).epsilon(1e-3));
    CHECK(hom(2, 2) == doctest::Approx(arithmetic).epsilon(1e-3));
  }
  SUBCASE("gyroid isotropy and Voigt bound") {
    const ThicknessPair pair = thickness_from_volumes(SurfaceKind::gyroid, 0.5, 0.0, n);
    const VoxelCell cell = voxelize(SurfaceKind::gyroid, pair, n);
    const DiffusivityField d = micro_diffusivity(cell, 6e-4);
    const Eigen::Matrix3d hom = homogenized_diffusivity(d, solve_diffusion_cell_all(d, {}));
    const double mean_diag = hom.trace() / 3.0;
    for (int i = 0; i < 3; ++i)
      CHECK(std::abs(hom(i, i) - mean_diag) / mean_diag < 0.02);
    CHECK(mean_diag < 0.5 * 6e-4 * (1.0 + 1e-3) + 1e-12);
  }
}

TEST_CASE("non-convergence raises a diagnostic error") {
  const int n = 8;
  const StiffnessField f = gyroid_cell(n, 0.21, 0.0);
  CellSolveOptions opts;
  opts.max_iter = 1;
  opts.tol = 1e-14;
  CHECK_THROWS_AS(solve_elastic_cell(f, 0, opts), CellSolveError);
  try {
    solve_elastic_cell(f, 0, opts);
  } catch (const CellSolveError& e) {
    CHECK(!e.diagnostics.converged);
    CHECK(!e.diagnostics.history.empty());
  }
}

TEST_CASE("mean strain of each converged load case equals the unit strain") {
  const int n = 8;
  const StiffnessField f = gyroid_cell(n, 0.3, 0.0);
  const ElasticCellSolution sol = solve_elastic_cell_all(f, {});
  for (int lc = 0; lc < 6; ++lc) {
    Vector6d unit = Vector6d::Zero();
    unit[lc] = lc < 3 ? 1.0 : 0.5;  // tensor components of the unit strain
    CHECK((sol.load_case[lc].mean() - unit).norm() < 1e-6);
  }
}
