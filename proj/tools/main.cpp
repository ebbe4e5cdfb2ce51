#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"
#include "sli/error.hpp"

int main(int argc, char** argv) {
  using namespace sli::cli;
  CLI::App app{"Line integrals of rough differential equations: criteria, constructions and experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  RunOptions options;
  std::string config_path;
  const auto describe = [](const std::string& name) -> std::string {
    if (name == "criterion") return "Check the non-degeneracy criterion for a form on a grid";
    if (name == "construct") return "Build supported forms and report their constraints";
    if (name == "density") return "Monte Carlo density diagnostics (atoms, kernel vanishing)";
    if (name == "reconstruct") return "Recover cube routes from extended signatures";
    return "Solve the system once and write the driver and trajectory";
  };
  for (const auto& name : command_names()) {
    CLI::App* sub = app.add_subcommand(name, describe(name));
    sub->add_option("config", config_path, "JSON config, or a manifest.json from an earlier run")->required();
    sub->add_option("-w,--workers", options.workers, "Worker threads (0: one per core)")->check(CLI::NonNegativeNumber);
    sub->add_option("-o,--output", options.output_directory,
                    std::string("Output directory (default: [output] directory, then $") + kOutputEnv + ", then sli-out)");
  }
  CLI::App* self = app.add_subcommand("selftest", "Run the built-in invariant checks");
  self->add_option("-w,--workers", options.workers, "Worker threads (0: one per core)")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kFailure;
  }

  try {
    if (self->parsed()) return run_selftest(options, std::cout);
    for (CLI::App* sub : app.get_subcommands())
      return run_command(sub->get_name(), load_config(config_path), options, std::cout);
  } catch (const sli::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
