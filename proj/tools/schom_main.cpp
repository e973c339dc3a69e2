#include <CLI11.hpp>

#include "schom/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Scaffold homogenization, regeneration simulation, and design optimization"};
  app.require_subcommand(1);

  schom::CommandOptions opts;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "Run configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--output", opts.output_dir, "Output directory override");
    sub->add_option("--mode", opts.mode, "Coupling mode override")
        ->check(CLI::IsMember({"n", "ed", "eds"}));
    sub->add_flag("--verbose", opts.verbose, "Echo the effective configuration");
    return sub;
  };

  CLI::App* tabulate =
      add_common(app.add_subcommand("tabulate", "Precompute the coefficient table"));
  CLI::App* simulate =
      add_common(app.add_subcommand("simulate", "Run a regeneration simulation"));
  CLI::App* optimize =
      add_common(app.add_subcommand("optimize", "Optimize the scaffold density field"));
  CLI::App* reconstruct =
      add_common(app.add_subcommand("reconstruct", "Export a printable scaffold surface"));

  CLI11_PARSE(app, argc, argv);

  if (tabulate->parsed()) return schom::cmd_tabulate(opts);
  if (simulate->parsed()) return schom::cmd_simulate(opts);
  if (optimize->parsed()) return schom::cmd_optimize(opts);
  if (reconstruct->parsed()) return schom::cmd_reconstruct(opts);
  return 1;
}
