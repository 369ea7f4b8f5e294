// pudwr_cli: run <configfile> [--key=value ...] | list-experiments | print-defaults
#include "pudwr/cli_io.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"space-time PU-DWR adaptive solver"};
  app.require_subcommand(1);

  std::string path;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "run an experiment described by a config file");
  run->add_option("config", path, "key = value file (use - for defaults only)")->required();
  run->allow_extras();

  app.add_subcommand("list-experiments", "list the shipped experiments");
  app.add_subcommand("print-defaults", "print every config key with its default");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("list-experiments")) {
      for (const auto& e : pudwr::experiments()) std::cout << e.name << "  " << e.description << '\n';
      return 0;
    }
    if (app.got_subcommand("print-defaults")) {
      std::cout << pudwr::to_text(pudwr::RunConfig{});
      return 0;
    }
    overrides = run->remaining();
    const pudwr::RunConfig cfg =
        pudwr::parse_config(path == "-" ? std::nullopt : std::optional<std::string>(path), overrides);
    return pudwr::run(cfg, std::cout);
  } catch (const pudwr::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  }
}
