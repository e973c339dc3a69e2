#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "schom/fft_solver.hpp"
#include "schom/geometry.hpp"
#include "schom/voigt.hpp"

namespace schom {

class TableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class TableFormatError : public TableError {
 public:
  using TableError::TableError;
};
class TableVersionError : public TableError {
 public:
  using TableError::TableError;
};
class TableTruncationError : public TableError {
 public:
  using TableError::TableError;
};
class TableChecksumError : public TableError {
 public:
  using TableError::TableError;
};

/// One tabulated sample of the homogenized coefficients at (rho, c_ost).
struct TableRecord {
  double rho = 0.0;
  double c_ost = 0.0;
  Matrix6d stiffness = Matrix6d::Zero();
  Eigen::Matrix3d diffusivity = Eigen::Matrix3d::Zero();
  CorrectorField corrector;
  std::int32_t iterations = 0;  // worst case over the nine cell solves
  double residual = 0.0;        // worst relative residual
};

struct CoefficientTable {
  SurfaceKind kind = SurfaceKind::gyroid;
  int n = 0;
  std::vector<double> rho_axis;
  std::vector<double> ost_axis;
  std::vector<TableRecord> records;  // row-major: rho outer, c_ost inner, feasible only
};

struct TabulateOptions {
  IsotropicMaterial scaffold{350.0, 0.33};  // PCL
  IsotropicMaterial bone{5000.0, 0.3};
  double void_contrast = 1e-3;
  double k_mig = 6e-4;
  double solid_contrast = 1e-3;
  CellSolveOptions solve;
};

/// Solves all cell problems for every feasible (rho, c_ost) pair.
/// Throws CellSolveError naming the sample on non-convergence.
CoefficientTable tabulate(SurfaceKind kind, const std::vector<double>& rho_axis,
                          const std::vector<double>& ost_axis, int n,
                          const TabulateOptions& opts = {});

/// Builds a table from analytic coefficient laws with identity correctors.
CoefficientTable analytic_table(
    const std::vector<double>& rho_axis, const std::vector<double>& ost_axis, int n,
    const std::function<Matrix6d(double, double)>& stiffness_law,
    const std::function<Eigen::Matrix3d(double, double)>& diffusivity_law);

/// Nearest sample in Euclidean (rho, c_ost) distance; ties break toward the
/// smaller rho, then the smaller c_ost. Throws TableError on an empty table.
const TableRecord& lookup(const CoefficientTable& table, double rho, double c_ost);
std::size_t lookup_index(const CoefficientTable& table, double rho, double c_ost);

/// Exact sample hit within tol, or nullptr.
const TableRecord* find_sample(const CoefficientTable& table, double rho, double c_ost,
                               double tol = 1e-9);

/// Axis neighbors of a record for central density differences; falls back to
/// one-sided differences at table edges. valid == false when the record has no
/// neighbor along the axis at all (difference quotient is then zero).
struct NeighborDiff {
  const TableRecord* plus = nullptr;
  const TableRecord* minus = nullptr;
  double h = 1.0;
  bool valid = false;
};

NeighborDiff rho_neighbors(const CoefficientTable& table, std::size_t record_index);
NeighborDiff ost_neighbors(const CoefficientTable& table, std::size_t record_index);

/// Binary persistence: magic "SCHOM", version, little-endian fixed-width
/// layout, trailing CRC32 of everything before it.
void save_table(const CoefficientTable& table, const std::string& path);
CoefficientTable load_table(const std::string& path);

constexpr std::uint32_t kTableVersion = 1;

}  // namespace schom
