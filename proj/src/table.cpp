#include "schom/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <zlib.h>

namespace schom {

namespace {

constexpr char kMagic[5] = {'S', 'C', 'H', 'O', 'M'};
constexpr double kAxisTol = 1e-9;

bool feasible(double rho, double c_ost) { return rho + c_ost <= 1.0 + 1e-12; }

class ByteWriter {
 public:
  void raw(const void* p, std::size_t len) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + len);
  }
  template <typename T>
  void scalar(T v) {
    raw(&v, sizeof(T));
  }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : buf_(std::move(bytes)) {}

  void raw(void* p, std::size_t len) {
    if (pos_ + len > buf_.size())
      throw TableTruncationError("table file truncated: wanted " + std::to_string(len) +
                                 " bytes at offset " + std::to_string(pos_) + ", file has " +
                                 std::to_string(buf_.size()));
    std::memcpy(p, buf_.data() + pos_, len);
    pos_ += len;
  }
  template <typename T>
  T scalar() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return buf_.size(); }
  const char* data() const { return buf_.data(); }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const char* data, std::size_t len) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

}  // namespace

CoefficientTable tabulate(SurfaceKind kind, const std::vector<double>& rho_axis,
                          const std::vector<double>& ost_axis, int n,
                          const TabulateOptions& opts) {
  if (rho_axis.empty() || ost_axis.empty()) throw TableError("empty sample axis");
  for (std::size_t i = 1; i < rho_axis.size(); ++i)
    if (rho_axis[i] <= rho_axis[i - 1]) throw TableError("rho axis not strictly increasing");
  for (std::size_t i = 1; i < ost_axis.size(); ++i)
    if (ost_axis[i] <= ost_axis[i - 1]) throw TableError("c_ost axis not strictly increasing");

  CoefficientTable table;
  table.kind = kind;
  table.n = n;
  table.rho_axis = rho_axis;
  table.ost_axis = ost_axis;

  for (double rho : rho_axis)
    for (double c_ost : ost_axis) {
      if (!feasible(rho, c_ost)) continue;
      TableRecord rec;
      rec.rho = rho;
      rec.c_ost = c_ost;

      const ThicknessPair pair = thickness_from_volumes(kind, rho, c_ost, n);
      const VoxelCell cell = voxelize(kind, pair, n);
      const StiffnessField stiffness =
          micro_stiffness(cell, opts.scaffold, opts.bone, opts.void_contrast);
      const DiffusivityField diffusivity =
          micro_diffusivity(cell, opts.k_mig, opts.solid_contrast);

      try {
        const ElasticCellSolution elastic = solve_elastic_cell_all(stiffness, opts.solve);
        const DiffusionCellSolution diffusion = solve_diffusion_cell_all(diffusivity, opts.solve);
        rec.stiffness = homogenized_stiffness(stiffness, elastic);
        rec.diffusivity = homogenized_diffusivity(diffusivity, diffusion);
        rec.corrector = assemble_corrector(elastic);
        for (const CellDiagnostics& d : elastic.diagnostics) {
          rec.iterations = std::max(rec.iterations, static_cast<std::int32_t>(d.iterations));
          rec.residual = std::max(rec.residual, d.residual);
        }
        for (const CellDiagnostics& d : diffusion.diagnostics) {
          rec.iterations = std::max(rec.iterations, static_cast<std::int32_t>(d.iterations));
          rec.residual = std::max(rec.residual, d.residual);
        }
      } catch (const CellSolveError& e) {
        throw CellSolveError("sample (rho=" + std::to_string(rho) +
                                 ", c_ost=" + std::to_string(c_ost) + "): " + e.what(),
                             e.diagnostics);
      }
      table.records.push_back(std::move(rec));
    }
  return table;
}

CoefficientTable analytic_table(
    const std::vector<double>& rho_axis, const std::vector<double>& ost_axis, int n,
    const std::function<Matrix6d(double, double)>& stiffness_law,
    const std::function<Eigen::Matrix3d(double, double)>& diffusivity_law) {
  CoefficientTable table;
  table.n = n;
  table.rho_axis = rho_axis;
  table.ost_axis = ost_axis;
  for (double rho : rho_axis)
    for (double c_ost : ost_axis) {
      if (!feasible(rho, c_ost)) continue;
      TableRecord rec;
      rec.rho = rho;
      rec.c_ost = c_ost;
      rec.stiffness = stiffness_law(rho, c_ost);
      rec.diffusivity = diffusivity_law(rho, c_ost);
      rec.corrector = CorrectorField::identity(n);
      table.records.push_back(std::move(rec));
    }
  return table;
}

std::size_t lookup_index(const CoefficientTable& table, double rho, double c_ost) {
  if (table.records.empty()) throw TableError("lookup on empty table");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < table.records.size(); ++i) {
    const TableRecord& r = table.records[i];
    const double d = (r.rho - rho) * (r.rho - rho) + (r.c_ost - c_ost) * (r.c_ost - c_ost);
    const TableRecord& b = table.records[best];
    if (d < best_d - kAxisTol ||
        (std::abs(d - best_d) <= kAxisTol &&
         (r.rho < b.rho - kAxisTol ||
          (std::abs(r.rho - b.rho) <= kAxisTol && r.c_ost < b.c_ost)))) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

const TableRecord& lookup(const CoefficientTable& table, double rho, double c_ost) {
  return table.records[lookup_index(table, rho, c_ost)];
}

const TableRecord* find_sample(const CoefficientTable& table, double rho, double c_ost,
                               double tol) {
  for (const TableRecord& r : table.records)
    if (std::abs(r.rho - rho) <= tol && std::abs(r.c_ost - c_ost) <= tol) return &r;
  return nullptr;
}

namespace {

NeighborDiff axis_neighbors(const CoefficientTable& table, std::size_t record_index,
                            bool along_rho) {
  const TableRecord& center = table.records[record_index];
  const std::vector<double>& axis = along_rho ? table.rho_axis : table.ost_axis;
  const double at = along_rho ? center.rho : center.c_ost;
  const double other = along_rho ? center.c_ost : center.rho;

  auto sample_at = [&](double value) {
    return along_rho ? find_sample(table, value, other, kAxisTol)
                     : find_sample(table, other, value, kAxisTol);
  };

  std::size_t idx = axis.size();
  for (std::size_t i = 0; i < axis.size(); ++i)
    if (std::abs(axis[i] - at) <= kAxisTol) idx = i;
  if (idx == axis.size()) throw TableError("record not aligned with a sample axis");

  const TableRecord* above = idx + 1 < axis.size() ? sample_at(axis[idx + 1]) : nullptr;
  const TableRecord* below = idx > 0 ? sample_at(axis[idx - 1]) : nullptr;

  NeighborDiff diff;
  if (above && below) {
    diff = {above, below, axis[idx + 1] - axis[idx - 1], true};
  } else if (above) {
    diff = {above, &center, axis[idx + 1] - axis[idx], true};
  } else if (below) {
    diff = {&center, below, axis[idx] - axis[idx - 1], true};
  }
  return diff;
}

}  // namespace

NeighborDiff rho_neighbors(const CoefficientTable& table, std::size_t record_index) {
  return axis_neighbors(table, record_index, true);
}

NeighborDiff ost_neighbors(const CoefficientTable& table, std::size_t record_index) {
  return axis_neighbors(table, record_index, false);
}

void save_table(const CoefficientTable& table, const std::string& path) {
  ByteWriter w;
  w.raw(kMagic, sizeof(kMagic));
  w.scalar<std::uint32_t>(kTableVersion);
  w.scalar<std::uint8_t>(static_cast<std::uint8_t>(table.kind));
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(table.n));
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(table.rho_axis.size()));
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(table.ost_axis.size()));
  for (double v : table.rho_axis) w.scalar(v);
  for (double v : table.ost_axis) w.scalar(v);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(table.records.size()));
  for (const TableRecord& rec : table.records) {
    w.scalar(rec.rho);
    w.scalar(rec.c_ost);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) w.scalar(rec.stiffness(i, j));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) w.scalar(rec.diffusivity(i, j));
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(rec.corrector.n));
    w.scalar<std::uint64_t>(static_cast<std::uint64_t>(rec.corrector.data.size()));
    w.raw(rec.corrector.data.data(), rec.corrector.data.size() * sizeof(float));
    w.scalar(rec.iterations);
    w.scalar(rec.residual);
  }
  const std::uint32_t crc = crc_of(w.bytes().data(), w.bytes().size());
  w.scalar(crc);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TableError("cannot open table file for writing: " + path);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw TableError("write failed: " + path);
}

CoefficientTable load_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TableError("cannot open table file: " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kMagic) + 2 * sizeof(std::uint32_t))
    throw TableTruncationError("table file shorter than header");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw TableFormatError("bad magic, not a coefficient table: " + path);

  // Parse the structure first so truncation is reported as such; the trailing
  // CRC32 (covering everything before it) is verified once parsing succeeds.
  ByteReader r(std::move(bytes));
  char magic[sizeof(kMagic)];
  r.raw(magic, sizeof(magic));
  const std::uint32_t version = r.scalar<std::uint32_t>();
  if (version != kTableVersion)
    throw TableVersionError("table version " + std::to_string(version) +
                            " not supported, expected " + std::to_string(kTableVersion));

  CoefficientTable table;
  table.kind = static_cast<SurfaceKind>(r.scalar<std::uint8_t>());
  table.n = static_cast<int>(r.scalar<std::uint32_t>());
  const std::uint32_t nrho = r.scalar<std::uint32_t>();
  const std::uint32_t nost = r.scalar<std::uint32_t>();
  table.rho_axis.resize(nrho);
  for (double& v : table.rho_axis) v = r.scalar<double>();
  table.ost_axis.resize(nost);
  for (double& v : table.ost_axis) v = r.scalar<double>();
  const std::uint32_t nrec = r.scalar<std::uint32_t>();
  table.records.resize(nrec);
  for (TableRecord& rec : table.records) {
    rec.rho = r.scalar<double>();
    rec.c_ost = r.scalar<double>();
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) rec.stiffness(i, j) = r.scalar<double>();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) rec.diffusivity(i, j) = r.scalar<double>();
    rec.corrector.n = static_cast<int>(r.scalar<std::uint32_t>());
    const std::uint64_t len = r.scalar<std::uint64_t>();
    rec.corrector.data.resize(len);
    r.raw(rec.corrector.data.data(), len * sizeof(float));
    rec.iterations = r.scalar<std::int32_t>();
    rec.residual = r.scalar<double>();
  }
  const std::size_t body = r.pos();
  const std::uint32_t stored = r.scalar<std::uint32_t>();
  if (r.pos() != r.size()) throw TableFormatError("trailing bytes after checksum");
  const std::uint32_t actual = crc_of(r.data(), body);
  if (stored != actual)
    throw TableChecksumError("table checksum mismatch: stored " + std::to_string(stored) +
                             ", computed " + std::to_string(actual));
  return table;
}

}  // namespace schom
