#pragma once

#include <string>

namespace schom {

struct CommandOptions {
  std::string config_path;
  std::string output_dir;  // overrides the configured output directory if set
  std::string mode;        // overrides the configured mode if set
  bool verbose = false;
};

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;  // configuration / validation failure
inline constexpr int kExitSolver = 3;  // solver failure (non-convergence, singular system)
inline constexpr int kExitIo = 4;      // file input/output failure

int cmd_tabulate(const CommandOptions& opts);
int cmd_simulate(const CommandOptions& opts);
int cmd_optimize(const CommandOptions& opts);
int cmd_reconstruct(const CommandOptions& opts);

}  // namespace schom
