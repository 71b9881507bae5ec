// gfock: scenario runner for generalized Fock space constructions.
//
//   gfock ladder   --config spec.json
//   gfock operator --config op.json
//   gfock evolve   --config kinetics.json --out results --format csv
//   gfock context  --config two_slit.json
//   gfock verify   [--config verify.json] [--seed 42] [--tol 1e-12]
//
// Exit codes: 0 success, 1 check failure, 2 config error, 3 I/O error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gfock/cli/config.hpp"
#include "gfock/cli/scenario.hpp"
#include "gfock/error.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace gfock;

  CLI::App app{"Generalized Fock space constructions, Doi-Peliti kinetics and contextual probability"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string format;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  bool timings = false;

  app.add_option("--config", config_path, "scenario JSON file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--format", format, "trajectory format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--seed", seed, "seed for stochastic checks");
  app.add_option("--tol", tol, "tolerance for algebraic identities")->check(CLI::PositiveNumber);
  app.add_flag("--timings", timings, "include wall-clock timings in report.json");

  struct Sub {
    const char* name;
    const char* help;
    cli::Command cmd;
  };
  const Sub subs[] = {
      {"ladder", "resolve ladder functions and check the commutator algebra", cli::Command::Ladder},
      {"operator", "build an operator and compare construction routes", cli::Command::Operator},
      {"evolve", "integrate the master equation directly and in Fock space", cli::Command::Evolve},
      {"context", "encode, combine and interfere contexts", cli::Command::Context},
      {"verify", "run the full invariant suite", cli::Command::Verify},
  };
  std::optional<cli::Command> chosen;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help)->fallthrough();
    sub->callback([&chosen, cmd = s.cmd] { chosen = cmd; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    cli::ScenarioConfig cfg;
    if (!config_path.empty()) {
      cfg = cli::load_config(config_path);
    } else if (chosen != cli::Command::Verify) {
      std::cerr << "error: --config is required for " << cli::command_name(*chosen) << '\n';
      return kExitConfig;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (format == "csv") cfg.format = cli::Format::Csv;
    if (format == "json") cfg.format = cli::Format::Json;
    if (seed) cfg.seed = *seed;
    if (tol) cfg.tol = *tol;
    if (timings) cfg.include_timings = true;

    cli::RunReport report = *chosen == cli::Command::Verify ? cli::verify_suite(cfg) : cli::run_scenario(cfg, *chosen);
    if (*chosen != cli::Command::Verify) {
      cli::detail::ensure_dir(cfg.out_dir);
      cli::export_json(report.to_json(cfg.include_timings), cfg.out_dir / "report.json");
    }
    cli::print_report(std::cout, report);
    for (const auto& [label, seconds] : report.timings()) {
      std::cerr << "time " << label << ": " << seconds << " s\n";
    }
    return report.ok() ? kExitOk : kExitCheckFailed;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::IoError ? kExitIo : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
