// ldfactor: large-deviation approximations and rare-event simulation for
// heavy-tailed factor models.
//
// Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime or
// sampling failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "commands.hpp"
#include "ldfactor/errors.hpp"
#include "run_config.hpp"

namespace {

constexpr int kValidation = 1;
constexpr int kRuntime = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace ldfactor;
  CLI::App app{"Heavy-tailed factor model tail probabilities"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<long long> iters;
  std::optional<long long> workers;
  std::optional<std::string> output;
  std::optional<std::string> format;
  bool naive = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "YAML run configuration")->required();
    sub->add_option("--seed", seed, "Base seed");
    sub->add_option("--iters", iters, "Monte Carlo iterations per cell");
    sub->add_option("--workers", workers, "Worker threads (0 = all cores)");
    sub->add_option("--output", output, "Output path, '-' for stdout");
    sub->add_option("--format", format, "csv or table")
        ->check(CLI::IsMember({"csv", "table"}));
  };
  auto* approx = app.add_subcommand("approx", "Closed-form approximation over the grid");
  auto* simulate = app.add_subcommand("simulate", "Conditional Monte Carlo over the grid");
  auto* compare = app.add_subcommand("compare", "Approximation and simulation side by side");
  auto* levy = app.add_subcommand("levy", "Compound Poisson marginal and one-jump check");
  for (auto* sub : {approx, simulate, compare, levy}) add_common(sub);
  simulate->add_flag("--naive", naive, "Also run the crude indicator estimator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidation;
  }

  try {
    auto cfg = cli::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (iters) {
      if (*iters < 1) throw ValidationError("--iters: must be >= 1");
      cfg.iters = static_cast<std::uint64_t>(*iters);
    }
    if (workers) {
      if (*workers < 0) throw ValidationError("--workers: must be >= 0");
      cfg.workers = static_cast<unsigned>(*workers);
    }
    if (output) cfg.output = *output;
    if (format) cfg.format = *format == "csv" ? cli::OutputFormat::csv
                                              : cli::OutputFormat::table;

    cli::Table table;
    if (approx->parsed()) {
      table = cli::cmd_approx(cfg);
    } else if (simulate->parsed()) {
      table = cli::cmd_simulate(cfg, naive);
    } else if (compare->parsed()) {
      table = cli::cmd_compare(cfg);
    } else {
      table = cli::cmd_levy(cfg);
    }

    if (cfg.output == "-") {
      cli::write_table(std::cout, table, cfg.format);
    } else {
      std::ofstream out(cfg.output);
      if (!out) throw std::runtime_error("cannot write '" + cfg.output + "'");
      cli::write_table(out, table, cfg.format);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const RegimeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return 0;
}
