#pragma once

// Run configuration for the ldfactor command line tool: model, grid,
// sampling budget and output settings, read from and written to YAML.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ldfactor/factor_model.hpp"
#include "ldfactor/ld_approx.hpp"
#include "ldfactor/levy_paths.hpp"

namespace ldfactor::cli {

enum class OutputFormat { csv, table };

/// Settings only read by the levy subcommand.
struct LevySettings {
  std::vector<double> t_list{1.0};
  std::uint64_t paths = 100000;
  /// Diagnostic threshold in units of lambda_n, unless `threshold` is set.
  double threshold_scale = 1.0;
  std::optional<double> threshold;
  double concentration = 0.9;
  bool stratify = true;
  double big_level = 0.5;
  /// Optional newline-delimited event dump of the first few paths.
  std::string events_output;
  std::uint64_t events_paths = 0;

  friend bool operator==(const LevySettings&, const LevySettings&) = default;
};

struct RunConfig {
  explicit RunConfig(std::variant<FactorModelSpec, LevyFactorSpec> m)
      : model(std::move(m)) {}

  std::variant<FactorModelSpec, LevyFactorSpec> model;
  std::optional<MuFunctional> mu;  // defaults to the axis functional
  std::vector<std::size_t> n_list;
  std::vector<double> x_list;
  double lambda_exponent = 2.0;
  std::uint64_t iters = 10000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string output = "-";
  OutputFormat format = OutputFormat::csv;
  LevySettings levy;

  [[nodiscard]] bool is_levy() const {
    return std::holds_alternative<LevyFactorSpec>(model);
  }
  [[nodiscard]] const FactorModelSpec& factor_model() const;
  [[nodiscard]] const LevyFactorSpec& levy_model() const;
  /// The configured mu, or the axis functional of the static model.
  [[nodiscard]] MuFunctional effective_mu() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses YAML text. Throws ValidationError naming the offending field.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string dump_config(const RunConfig& cfg);

}  // namespace ldfactor::cli
