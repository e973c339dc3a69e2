#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "schom/commands.hpp"
#include "schom/config.hpp"
#include "schom/macro.hpp"
#include "schom/table.hpp"

using namespace schom;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& child = "") const {
    return child.empty() ? path.string() : (path / child).string();
  }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

std::vector<char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

CommandOptions options(const std::string& config, const std::string& output) {
  CommandOptions opts;
  opts.config_path = config;
  opts.output_dir = output;
  return opts;
}

/// Reads a binary STL and checks that every edge (with vertices quantized to
/// 1e-4) is shared by exactly two triangles, i.e. the surface is watertight.
void check_watertight(const std::string& path) {
  const std::vector<char> bytes = read_bytes(path);
  REQUIRE(bytes.size() >= 84);
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 80, 4);
  REQUIRE(count > 0);
  REQUIRE(bytes.size() == 84 + static_cast<std::size_t>(count) * 50);

  using Key = std::tuple<long, long, long>;
  std::map<Key, int> vertex_ids;
  std::map<std::pair<int, int>, int> edge_count;
  const char* p = bytes.data() + 84;
  for (std::uint32_t t = 0; t < count; ++t) {
    int ids[3];
    for (int v = 0; v < 3; ++v) {
      float xyz[3];
      std::memcpy(xyz, p + 12 + 12 * v, 12);
      const Key key{std::lround(xyz[0] * 1e4), std::lround(xyz[1] * 1e4),
                    std::lround(xyz[2] * 1e4)};
      auto [it, inserted] = vertex_ids.emplace(key, static_cast<int>(vertex_ids.size()));
      ids[v] = it->second;
    }
    for (int v = 0; v < 3; ++v) {
      const int a = ids[v], b = ids[(v + 1) % 3];
      ++edge_count[{std::min(a, b), std::max(a, b)}];
    }
    p += 50;
  }
  for (const auto& [edge, n] : edge_count) CHECK(n == 2);
}

int spawn(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("configuration failures exit with the config code") {
  TempDir dir("schom_cli_config_errors");
  SUBCASE("missing config file") {
    CHECK(cmd_simulate(options(dir.str("absent.json"), dir.str("out"))) == kExitConfig);
  }
  SUBCASE("empty --config path") {
    CHECK(cmd_simulate(options("", dir.str("out"))) == kExitConfig);
  }
  SUBCASE("malformed json") {
    write_file(dir.str("bad.json"), "{ not json");
    CHECK(cmd_simulate(options(dir.str("bad.json"), dir.str("out"))) == kExitConfig);
  }
  SUBCASE("unknown key") {
    write_file(dir.str("unknown.json"), R"({"mode": "n", "no_such_option": 1})");
    CHECK(cmd_simulate(options(dir.str("unknown.json"), dir.str("out"))) == kExitConfig);
  }
  SUBCASE("out-of-range value") {
    write_file(dir.str("range.json"), R"({"mode": "n", "dt": -1.0})");
    CHECK(cmd_simulate(options(dir.str("range.json"), dir.str("out"))) == kExitConfig);
  }
  SUBCASE("ed mode without a table") {
    write_file(dir.str("ed.json"), R"({"mode": "ed", "T": 1.0, "h": 0.5})");
    CHECK(cmd_simulate(options(dir.str("ed.json"), dir.str("out"))) == kExitConfig);
  }
  SUBCASE("infeasible tabulation grid") {
    write_file(dir.str("grid.json"),
               R"({"rho_samples": [0.9], "ost_samples": [0.5], "micro_n": 8})");
    CHECK(cmd_tabulate(options(dir.str("grid.json"), dir.str("out"))) == kExitConfig);
  }
}

TEST_CASE("tabulate writes a loadable table") {
  TempDir dir("schom_cli_tabulate");
  write_file(dir.str("cfg.json"),
             R"({"rho_samples": [0.3], "ost_samples": [0.0], "micro_n": 8,)"
             R"( "table_path": ")" + dir.str("table.bin") + R"("})");
  CHECK(cmd_tabulate(options(dir.str("cfg.json"), dir.str("out"))) == kExitOk);
  const CoefficientTable table = load_table(dir.str("table.bin"));
  REQUIRE(table.records.size() == 1);
  CHECK(table.records[0].rho == 0.3);
  CHECK(table.n == 8);
  CHECK(table.records[0].stiffness(0, 0) > 0.0);
  // The effective config is echoed next to the results.
  CHECK(fs::exists(dir.str("out") + "/config.json"));
}

TEST_CASE("simulate: zero-length run produces a single record and snapshot") {
  TempDir dir("schom_cli_simulate0");
  write_file(dir.str("cfg.json"), R"({"mode": "n", "T": 0.0, "h": 0.5})");
  CHECK(cmd_simulate(options(dir.str("cfg.json"), dir.str("out"))) == kExitOk);

  std::ifstream cells(dir.str("out") + "/cells.csv");
  REQUIRE(cells.good());
  std::string header, row, extra;
  REQUIRE(std::getline(cells, header));
  CHECK(header == "day,c_pro,c_fib,c_cho,c_ost,compliance");
  REQUIRE(std::getline(cells, row));
  CHECK(row.substr(0, 2) == "0,");
  CHECK(!std::getline(cells, extra));
  CHECK(fs::exists(dir.str("out") + "/fields_day0000.00.vtk"));
}

TEST_CASE("simulate runs are deterministic") {
  TempDir dir("schom_cli_determinism");
  write_file(dir.str("cfg.json"), R"({"mode": "n", "T": 3.0, "h": 0.5, "vtk_every": 2})");
  CHECK(cmd_simulate(options(dir.str("cfg.json"), dir.str("a"))) == kExitOk);
  CHECK(cmd_simulate(options(dir.str("cfg.json"), dir.str("b"))) == kExitOk);
  CHECK(read_bytes(dir.str("a") + "/cells.csv") == read_bytes(dir.str("b") + "/cells.csv"));
  CHECK(read_bytes(dir.str("a") + "/fields_day0002.00.vtk") ==
        read_bytes(dir.str("b") + "/fields_day0002.00.vtk"));
}

TEST_CASE("optimize with max_iters = 0 echoes the initial design") {
  TempDir dir("schom_cli_opt0");
  write_file(dir.str("cfg.json"),
             R"({"mode": "n", "T": 2.0, "h": 0.5, "max_iters": 0, "vtk_every": 0,)"
             R"( "initial_porosity": 0.7})");
  CHECK(cmd_optimize(options(dir.str("cfg.json"), dir.str("out"))) == kExitOk);

  // Every defect element keeps the uniform initial density 1 - porosity.
  const RunConfig cfg = load_config(dir.str("cfg.json"));
  const MacroDomain dom = MacroDomain::cylinder_with_fixator(domain_config(cfg));
  std::ifstream design(dir.str("out") + "/design.csv");
  REQUIRE(design.good());
  std::string line;
  REQUIRE(std::getline(design, line));
  CHECK(line == "element,x,y,z,rho");
  int rows = 0;
  while (std::getline(design, line)) {
    CHECK(line.substr(line.rfind(',') + 1) == "0.30000000000000004");
    ++rows;
  }
  CHECK(rows == dom.defect_element_count());

  std::ifstream hist(dir.str("out") + "/history.csv");
  REQUIRE(std::getline(hist, line));
  CHECK(line == "iteration,objective,compliance_term,bone_term,gradient_norm,step");
  int iters = 0;
  while (std::getline(hist, line)) ++iters;
  CHECK(iters == 1);
}

TEST_CASE("reconstruct produces watertight meshes across the density box") {
  TempDir dir("schom_cli_reconstruct");
  SUBCASE("dense design") {
    write_file(dir.str("cfg.json"),
               R"({"h": 0.5, "initial_porosity": 0.01, "reconstruct_samples_per_mm": 8})");
    CHECK(cmd_reconstruct(options(dir.str("cfg.json"), dir.str("out"))) == kExitOk);
    check_watertight(dir.str("out") + "/scaffold.stl");
  }
  SUBCASE("sparse design needs a finer sampling for the thin shell") {
    write_file(dir.str("cfg.json"),
               R"({"h": 0.5, "initial_porosity": 0.9, "reconstruct_samples_per_mm": 16})");
    CHECK(cmd_reconstruct(options(dir.str("cfg.json"), dir.str("out"))) == kExitOk);
    check_watertight(dir.str("out") + "/scaffold.stl");
  }
}

TEST_CASE("reconstruct rejects designs outside the box") {
  TempDir dir("schom_cli_reconstruct_box");
  const std::string cfg_text =
      R"({"h": 0.5, "design_path": ")" + dir.str("design.csv") + R"("})";
  write_file(dir.str("cfg.json"), cfg_text);
  const RunConfig cfg = load_config(dir.str("cfg.json"));
  const MacroDomain dom = MacroDomain::cylinder_with_fixator(domain_config(cfg));

  std::ofstream design(dir.str("design.csv"));
  design << "element,x,y,z,rho\n";
  for (int de = 0; de < dom.defect_element_count(); ++de)
    design << de << ",0,0,0,0.05\n";  // below box_lower = 0.1
  design.close();

  CHECK(cmd_reconstruct(options(dir.str("cfg.json"), dir.str("out"))) == kExitConfig);
}

TEST_CASE("the command line binary parses arguments") {
  TempDir dir("schom_cli_binary");
  const std::string exe = SCHOM_CLI_PATH;
  CHECK(spawn(exe + " --help > /dev/null 2>&1") == 0);
  CHECK(spawn(exe + " > /dev/null 2>&1") != 0);                 // subcommand required
  CHECK(spawn(exe + " frobnicate > /dev/null 2>&1") != 0);      // unknown subcommand
  CHECK(spawn(exe + " simulate > /dev/null 2>&1") != 0);        // --config required
  CHECK(spawn(exe + " simulate --config " + dir.str("none.json") + " > /dev/null 2>&1") != 0);

  write_file(dir.str("cfg.json"), R"({"T": 0.0, "h": 0.5, "vtk_every": 0})");
  CHECK(spawn(exe + " simulate --config " + dir.str("cfg.json") + " --mode n --output " +
              dir.str("out") + " > /dev/null 2>&1") == 0);
  CHECK(fs::exists(dir.str("out") + "/cells.csv"));
  // The mode override is reflected in the echoed configuration.
  const std::vector<char> echoed = read_bytes(dir.str("out") + "/config.json");
  const std::string echoed_text(echoed.begin(), echoed.end());
  CHECK(echoed_text.find("\"mode\": \"n\"") != std::string::npos);
}
