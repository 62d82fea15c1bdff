// Command-line front end: topospec --config run.ini [--out DIR] [--command NAME] [--quiet]

#include "topospec/runner.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

struct NullBuffer : std::streambuf {
  int overflow(int c) override { return c; }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Jacobi-geometry and characteristic-class computations for mechanical systems"};
  std::string config_path, out_dir, command;
  bool quiet = false;
  app.add_option("--config", config_path, "run configuration (INI)")->required();
  app.add_option("--out", out_dir, "output directory (default: [output] dir, else .)");
  app.add_option("--command", command, "override [command] name")
      ->check(CLI::IsMember({"geodesic", "newton", "curvature", "euler", "spectrum", "check"}));
  app.add_flag("--quiet", quiet, "only report errors");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : topospec::exit_config;
  }

  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "config error: cannot read " << config_path << '\n';
    return topospec::exit_config;
  }
  std::stringstream text;
  text << in.rdbuf();

  topospec::RunConfig config;
  try {
    config = topospec::parse_config(text.str());
    if (!command.empty()) {
      config.set("command", "name", command);
      topospec::validate_config(config);
    }
  } catch (const topospec::ConfigError& e) {
    std::cerr << "config error in " << config_path << ":\n" << e.what() << '\n';
    return topospec::exit_config;
  }

  if (out_dir.empty()) out_dir = config.value_or<std::string>("output", "dir", ".");

  NullBuffer null;
  std::ostream silent(&null);
  return topospec::run(config, out_dir, quiet ? silent : std::cout, std::cerr);
}
