#include "quadgrad/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include "quadgrad/app.hpp"

namespace quadgrad {

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Existence analysis and fixed-point solver for quadratic-gradient elliptic problems"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "quadgrad-out";
  const char* commands[][2] = {
      {"constants", "theta, C(theta), delta1, G, smallness margins, delta0 and Z"},
      {"check", "smallness conditions only; exit 3 when they fail"},
      {"solve", "k-continuation solve, writes w.csv, u.csv, trace and diagnostics"},
      {"sweep", "delta or norm sweep of the critical-point analysis"},
      {"verify", "sample every invariant and report counterexamples"}};
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_code::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::config;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const error& e) {
    err << "error: " << e.what() << '\n';
    out << ordered_json{{"command", command}, {"error", "config_error"}, {"message", e.what()}}.dump(2)
        << '\n';
    return exit_code::config;
  }
  if (seed) cfg.seed = *seed;

  const CommandResult r = run_command(command, cfg, out_dir);
  for (const auto& w : r.warnings) err << "warning: " << w << '\n';
  if (r.report.contains("message")) err << "error: " << r.report["message"].get<std::string>() << '\n';
  out << r.report.dump(2) << '\n';
  return r.exit_code;
}

}  // namespace quadgrad
