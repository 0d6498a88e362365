#include "commands.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "ldfactor/cond_mc.hpp"
#include "ldfactor/errors.hpp"

namespace ldfactor::cli {

namespace {

std::string format_int(std::uint64_t v) { return std::to_string(v); }

void require_grid(const RunConfig& cfg) {
  if (cfg.n_list.empty()) throw ValidationError("grid.n: empty grid");
  if (cfg.x_list.empty()) throw ValidationError("grid.x: empty grid");
}

McOptions mc_options(const RunConfig& cfg) {
  return McOptions{cfg.iters, cfg.seed, cfg.workers};
}

double lambda_at(const RunConfig& cfg, std::size_t n) {
  return std::pow(static_cast<double>(n), cfg.lambda_exponent);
}

void dump_events(const RunConfig& cfg, const LevyFactorSpec& spec) {
  const auto& l = cfg.levy;
  if (l.events_output.empty() || l.events_paths == 0) return;
  std::ofstream out(l.events_output);
  if (!out) throw std::runtime_error("cannot write '" + l.events_output + "'");
  for (std::size_t n : cfg.n_list) {
    for (std::uint64_t p = 0; p < l.events_paths; ++p) {
      PathStreams streams(cfg.seed, p);
      const auto path = sample_path(spec, n, streams);
      for (const auto& e : path.events) {
        nlohmann::json rec{{"n", n},
                           {"path", p},
                           {"time", e.time},
                           {"size", e.size},
                           {"origin", e.origin == Origin::factor ? "factor" : "idio"},
                           {"index", e.index}};
        out << rec.dump() << '\n';
      }
    }
  }
}

}  // namespace

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4e", v);
  return buf;
}

Table cmd_approx(const RunConfig& cfg) {
  require_grid(cfg);
  const auto& spec = cfg.factor_model();
  const auto mu = cfg.effective_mu();
  Table t{{"n", "x", "lambda_n", "ld_estimate"}, {}};
  for (double x : cfg.x_list) {
    for (std::size_t n : cfg.n_list) {
      const double lambda = lambda_at(cfg, n);
      t.rows.push_back({format_int(n), format_real(x), format_real(lambda),
                        format_real(ld_tail_approx(spec, mu, n, lambda, x))});
    }
  }
  return t;
}

Table cmd_simulate(const RunConfig& cfg, bool naive) {
  require_grid(cfg);
  const auto& spec = cfg.factor_model();
  const auto opt = mc_options(cfg);
  Table t{{"n", "x", "lambda_n", "cmc_estimate", "cmc_std_error", "ci95_lo", "ci95_hi"},
          {}};
  if (naive) {
    t.header.push_back("naive_estimate");
    t.header.push_back("naive_std_error");
  }
  t.header.push_back("iters");
  t.header.push_back("seed");
  for (double x : cfg.x_list) {
    for (std::size_t n : cfg.n_list) {
      const double lambda = lambda_at(cfg, n);
      const auto e = estimate_tail_cmc(spec, n, lambda * x, opt);
      std::vector<std::string> row{format_int(n),           format_real(x),
                                   format_real(lambda),     format_real(e.value),
                                   format_real(e.std_error), format_real(e.ci95.first),
                                   format_real(e.ci95.second)};
      if (naive) {
        const auto c = estimate_tail_naive(spec, n, lambda * x, opt);
        row.push_back(format_real(c.value));
        row.push_back(format_real(c.std_error));
      }
      row.push_back(format_int(cfg.iters));
      row.push_back(format_int(cfg.seed));
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

Table cmd_compare(const RunConfig& cfg) {
  require_grid(cfg);
  const auto& spec = cfg.factor_model();
  const auto rows = compare_table(spec, cfg.effective_mu(), cfg.n_list, cfg.x_list,
                                  cfg.lambda_exponent, mc_options(cfg));
  Table t{{"n", "x", "lambda_n", "ld_estimate", "cmc_estimate", "cmc_std_error", "ratio",
           "iters", "seed"},
          {}};
  for (const auto& r : rows) {
    const double ratio = r.ld_value > 0.0 ? r.cmc.value / r.ld_value : kInfinity;
    t.rows.push_back({format_int(r.n), format_real(r.x), format_real(r.lambda_n),
                      format_real(r.ld_value), format_real(r.cmc.value),
                      format_real(r.cmc.std_error), format_real(ratio),
                      format_int(cfg.iters), format_int(cfg.seed)});
  }
  return t;
}

Table cmd_levy(const RunConfig& cfg) {
  require_grid(cfg);
  const auto& spec = cfg.levy_model();
  const auto& l = cfg.levy;
  if (l.t_list.empty()) throw ValidationError("levy.t: empty list");
  const double theta = spec.critical_exponent();
  const auto opt = mc_options(cfg);

  Table t{{"n", "t", "x", "lambda_n", "limit_measure", "estimate", "std_error", "ratio",
           "threshold", "paths", "exceedances", "exceedance_prob",
           "concentrated_fraction", "median_ratio", "factor_share",
           "limit_factor_share", "iters", "seed"},
          {}};
  for (std::size_t n : cfg.n_list) {
    const double lambda = std::pow(static_cast<double>(n), theta);
    const double threshold = l.threshold ? *l.threshold : l.threshold_scale * lambda;
    OneJumpOptions jo;
    jo.paths = l.paths;
    jo.seed = cfg.seed;
    jo.workers = cfg.workers;
    jo.concentration = l.concentration;
    jo.stratify = l.stratify;
    jo.big_level = l.big_level;
    const auto diag = one_jump_diagnostic(spec, n, threshold, jo);
    const double x_diag = threshold / lambda;
    const double expected_share =
        x_diag > 0.0 ? limit_measure_terms(spec, 1.0, x_diag).factor_share()
                     : std::nan("");
    for (double time : l.t_list) {
      for (double x : cfg.x_list) {
        const double m = limit_measure_mt(spec, time, x);
        const auto e = estimate_marginal_tail(spec, n, time, x, opt);
        const double ratio = m > 0.0 ? e.value / m : std::nan("");
        t.rows.push_back({format_int(n), format_real(time), format_real(x),
                          format_real(lambda), format_real(m), format_real(e.value),
                          format_real(e.std_error), format_real(ratio),
                          format_real(threshold), format_int(diag.paths),
                          format_int(diag.exceedances),
                          format_real(diag.exceedance_probability),
                          format_real(diag.concentrated_fraction),
                          format_real(diag.median_ratio), format_real(diag.factor_share),
                          format_real(expected_share), format_int(cfg.iters),
                          format_int(cfg.seed)});
      }
    }
  }
  dump_events(cfg, spec);
  return t;
}

void write_table(std::ostream& os, const Table& table, OutputFormat format) {
  if (format == OutputFormat::csv) {
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
      os << '\n';
    };
    line(table.header);
    for (const auto& r : table.rows) line(r);
    return;
  }
  std::vector<std::size_t> width(table.header.size(), 0);
  for (std::size_t i = 0; i < width.size(); ++i) width[i] = table.header[i].size();
  for (const auto& r : table.rows)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << "  ";
      os << std::string(width[i] - cells[i].size(), ' ') << cells[i];
    }
    os << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
}

}  // namespace ldfactor::cli
