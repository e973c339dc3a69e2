#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "schom/table.hpp"

using namespace schom;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / (std::string("schom_test_") + name);
}

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

CoefficientTable small_real_table() {
  TabulateOptions opts;
  opts.solve.tol = 1e-6;
  return tabulate(SurfaceKind::gyroid, {0.2, 0.3}, {0.0, 0.1}, 8, opts);
}

CoefficientTable small_analytic_table(const std::vector<double>& rho_axis,
                                      const std::vector<double>& ost_axis) {
  return analytic_table(
      rho_axis, ost_axis, 4,
      [](double rho, double c_ost) -> Matrix6d {
        return (rho + 2.0 * c_ost) * Matrix6d::Identity();
      },
      [](double rho, double) -> Eigen::Matrix3d {
        return (1.0 - rho) * Eigen::Matrix3d::Identity();
      });
}

}  // namespace

TEST_CASE("save/load round trip preserves every field bit for bit") {
  const CoefficientTable table = small_real_table();
  REQUIRE(table.records.size() == 4);

  const fs::path path = temp_file("roundtrip.bin");
  save_table(table, path.string());
  const CoefficientTable loaded = load_table(path.string());

  CHECK(loaded.kind == table.kind);
  CHECK(loaded.n == table.n);
  CHECK(loaded.rho_axis == table.rho_axis);
  CHECK(loaded.ost_axis == table.ost_axis);
  REQUIRE(loaded.records.size() == table.records.size());
  for (std::size_t i = 0; i < table.records.size(); ++i) {
    const TableRecord& a = table.records[i];
    const TableRecord& b = loaded.records[i];
    CHECK(a.rho == b.rho);
    CHECK(a.c_ost == b.c_ost);
    CHECK(a.stiffness == b.stiffness);          // exact, not approximate
    CHECK(a.diffusivity == b.diffusivity);
    CHECK(a.corrector.n == b.corrector.n);
    CHECK(a.corrector.data == b.corrector.data);
    CHECK(a.iterations == b.iterations);
    CHECK(a.residual == b.residual);
  }

  // Saving the loaded table again must reproduce the file byte for byte.
  const fs::path path2 = temp_file("roundtrip2.bin");
  save_table(loaded, path2.string());
  CHECK(read_bytes(path) == read_bytes(path2));

  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("corrupted files raise distinct error types") {
  const CoefficientTable table =
      small_analytic_table({0.1, 0.2}, {0.0, 0.5});
  const fs::path path = temp_file("corrupt.bin");
  save_table(table, path.string());
  const std::vector<char> good = read_bytes(path);
  REQUIRE(good.size() > 64);

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_table((path.string() + ".does_not_exist")), TableError);
  }
  SUBCASE("bad magic") {
    std::vector<char> bad = good;
    bad[0] = 'X';
    write_bytes(path, bad);
    CHECK_THROWS_AS(load_table(path.string()), TableFormatError);
  }
  SUBCASE("unsupported version") {
    std::vector<char> bad = good;
    bad[5] = 99;  // version field follows the 5-byte magic
    write_bytes(path, bad);
    CHECK_THROWS_AS(load_table(path.string()), TableVersionError);
  }
  SUBCASE("truncated payload") {
    std::vector<char> bad(good.begin(), good.begin() + good.size() / 2);
    write_bytes(path, bad);
    CHECK_THROWS_AS(load_table(path.string()), TableTruncationError);
  }
  SUBCASE("truncated to less than a header") {
    std::vector<char> bad(good.begin(), good.begin() + 6);
    write_bytes(path, bad);
    CHECK_THROWS_AS(load_table(path.string()), TableTruncationError);
  }
  SUBCASE("single flipped payload byte fails the checksum") {
    std::vector<char> bad = good;
    bad[good.size() / 2] ^= 0x40;
    write_bytes(path, bad);
    CHECK_THROWS_AS(load_table(path.string()), TableChecksumError);
  }
  SUBCASE("trailing garbage") {
    std::vector<char> bad = good;
    bad.push_back('\0');
    write_bytes(path, bad);
    CHECK_THROWS_AS(load_table(path.string()), TableFormatError);
  }

  fs::remove(path);
}

TEST_CASE("nearest-sample lookup") {
  const CoefficientTable table =
      small_analytic_table({0.1, 0.3, 0.5}, {0.0, 0.2});

  SUBCASE("exact hits return the sample itself") {
    for (const TableRecord& rec : table.records) {
      const TableRecord& hit = lookup(table, rec.rho, rec.c_ost);
      CHECK(hit.rho == rec.rho);
      CHECK(hit.c_ost == rec.c_ost);
      const TableRecord* found = find_sample(table, rec.rho, rec.c_ost);
      REQUIRE(found != nullptr);
      CHECK(found->rho == rec.rho);
    }
  }
  SUBCASE("off-grid query snaps to the nearest sample") {
    const TableRecord& hit = lookup(table, 0.27, 0.04);
    CHECK(hit.rho == 0.3);
    CHECK(hit.c_ost == 0.0);
  }
  SUBCASE("ties break toward the smaller rho, then the smaller c_ost") {
    const TableRecord& mid_rho = lookup(table, 0.2, 0.0);  // between 0.1 and 0.3
    CHECK(mid_rho.rho == 0.1);
    const TableRecord& mid_ost = lookup(table, 0.3, 0.1);  // between 0.0 and 0.2
    CHECK(mid_ost.rho == 0.3);
    CHECK(mid_ost.c_ost == 0.0);
  }
  SUBCASE("queries outside the sampled box clamp to the boundary sample") {
    CHECK(lookup(table, -1.0, -1.0).rho == 0.1);
    CHECK(lookup(table, 2.0, 2.0).rho == 0.5);
  }
  SUBCASE("find_sample misses off-grid points") {
    CHECK(find_sample(table, 0.27, 0.04) == nullptr);
  }
  SUBCASE("empty table throws") {
    CoefficientTable empty;
    CHECK_THROWS_AS(lookup(empty, 0.5, 0.0), TableError);
  }
}

TEST_CASE("analytic table applies the laws with identity correctors") {
  const CoefficientTable table = small_analytic_table({0.7, 0.9}, {0.0, 0.2});
  // (0.9, 0.2) is infeasible (rho + c_ost > 1) and must be skipped.
  CHECK(table.records.size() == 3);
  CHECK(find_sample(table, 0.9, 0.2) == nullptr);
  const TableRecord* rec = find_sample(table, 0.7, 0.2);
  REQUIRE(rec != nullptr);
  CHECK(rec->stiffness(0, 0) == doctest::Approx(0.7 + 0.4).epsilon(1e-14));
  CHECK(rec->diffusivity(0, 0) == doctest::Approx(0.3).epsilon(1e-14));
  // Identity corrector maps engineering shear to the tensor component.
  Eigen::Matrix3d eps = Eigen::Matrix3d::Zero();
  eps(0, 1) = eps(1, 0) = 0.25;
  const Eigen::Matrix3d micro = rec->corrector.apply(0, eps);
  CHECK((micro - eps).norm() < 1e-12);
}

TEST_CASE("axis neighbors provide central or one-sided differences") {
  const CoefficientTable table =
      small_analytic_table({0.1, 0.3, 0.5}, {0.0, 0.2});

  SUBCASE("interior record uses central neighbors") {
    const std::size_t idx = lookup_index(table, 0.3, 0.0);
    const NeighborDiff d = rho_neighbors(table, idx);
    REQUIRE(d.valid);
    CHECK(d.plus->rho == 0.5);
    CHECK(d.minus->rho == 0.1);
    CHECK(d.h == doctest::Approx(0.4));
    // The analytic stiffness law is linear in rho, so the difference quotient
    // is exact.
    const double quot = (d.plus->stiffness(0, 0) - d.minus->stiffness(0, 0)) / d.h;
    CHECK(quot == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("edge record falls back to a one-sided difference") {
    const std::size_t idx = lookup_index(table, 0.1, 0.2);
    const NeighborDiff d = rho_neighbors(table, idx);
    REQUIRE(d.valid);
    CHECK(d.plus->rho == 0.3);
    CHECK(d.minus->rho == 0.1);
    CHECK(d.h == doctest::Approx(0.2));
  }
  SUBCASE("ost axis works the same way") {
    const std::size_t idx = lookup_index(table, 0.3, 0.0);
    const NeighborDiff d = ost_neighbors(table, idx);
    REQUIRE(d.valid);
    CHECK(d.plus->c_ost == 0.2);
    CHECK(d.minus->c_ost == 0.0);
  }
  SUBCASE("single-sample axis has no neighbors") {
    const CoefficientTable single = small_analytic_table({0.5}, {0.1});
    const NeighborDiff d = rho_neighbors(single, 0);
    CHECK(!d.valid);
  }
}

TEST_CASE("tabulated stiffness grows with the bone fraction") {
  const CoefficientTable table = small_real_table();
  const TableRecord* lo = find_sample(table, 0.3, 0.0);
  const TableRecord* hi = find_sample(table, 0.3, 0.1);
  REQUIRE(lo != nullptr);
  REQUIRE(hi != nullptr);
  for (int i = 0; i < 3; ++i) CHECK(hi->stiffness(i, i) > lo->stiffness(i, i));
  // More solid also means less pore space for migration.
  CHECK(hi->diffusivity.trace() < lo->diffusivity.trace());
  CHECK(lo->iterations > 0);
  CHECK(lo->residual > 0.0);
}

TEST_CASE("tabulate validates its axes") {
  CHECK_THROWS_AS(tabulate(SurfaceKind::gyroid, {}, {0.0}, 4), TableError);
  CHECK_THROWS_AS(tabulate(SurfaceKind::gyroid, {0.2, 0.2}, {0.0}, 4), TableError);
  CHECK_THROWS_AS(tabulate(SurfaceKind::gyroid, {0.2}, {0.1, 0.0}, 4), TableError);
}
