// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "ldfactor/cond_mc.hpp"
#include "ldfactor/ld_approx.hpp"
#include "ldfactor/levy_paths.hpp"
#include "ldfactor/rv_dist.hpp"
#include "run_config.hpp"

using namespace ldfactor;
using namespace ldfactor::cli;

namespace {

const std::string kConfigDir = LDFACTOR_CONFIG_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string csv(const Table& t) {
  std::ostringstream os;
  write_table(os, t, OutputFormat::csv);
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome ld_column() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = load_config(kConfigDir + "/table1.cfg");
  const auto t = cmd_approx(cfg);
  const double elapsed = seconds_since(t0);
  // Rows run x-major, n-minor.
  const std::vector<std::string> want{"1.0010e-09", "1.0010e-14", "1.0010e-19",
                                      "1.1000e-14", "1.1000e-19", "1.1000e-24",
                                      "1.1000e-18", "1.1000e-23", "1.1000e-28"};
  int ok = 0;
  for (std::size_t i = 0; i < want.size() && i < t.rows.size(); ++i)
    ok += t.rows[i][3] == want[i];
  return {ok == 9 && t.rows.size() == 9 && elapsed < 1.0,
          std::to_string(ok) + "/9 exact, " + fmt("%.3fs", elapsed)};
}

// Bands frozen from a 30-seed pilot: reference +- (|pilot mean - reference| +
// 5 pilot sd), as a relative half-width rounded up to 0.1%. The two cells
// with prescribed bands use those instead.
struct Band {
  std::size_t n;
  double x;
  double lo;
  double hi;
};

std::vector<Band> table1_bands() {
  auto rel = [](std::size_t n, double x, double ref, double h) {
    return Band{n, x, ref * (1.0 - h), ref * (1.0 + h)};
  };
  return {Band{1000, 0.1, 1.8e-9, 2.2e-9},
          rel(10000, 0.1, 1.0673e-14, 1e-3),
          rel(100000, 0.1, 1.0074e-19, 1e-3),
          rel(1000, 1.0, 1.1708e-14, 1e-3),
          rel(10000, 1.0, 1.1068e-19, 1e-3),
          rel(100000, 1.0, 1.1007e-24, 1e-3),
          rel(1000, 10.0, 1.1049e-18, 1e-3),
          rel(10000, 10.0, 1.1005e-23, 1e-3),
          rel(100000, 10.0, 1.1000e-28, 5e-3)};
}

Outcome simulated_column() {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = load_config(kConfigDir + "/table1.cfg");
  cfg.iters = 10000;
  cfg.seed = 0;
  const auto t = cmd_simulate(cfg, false);
  int ok = 0;
  std::string worst;
  double worst_rel = 0.0;
  for (const auto& b : table1_bands()) {
    for (const auto& r : t.rows) {
      if (std::stoull(r[0]) != b.n || std::stod(r[1]) != b.x) continue;
      const double v = std::stod(r[3]);
      ok += v >= b.lo && v <= b.hi;
      const double mid = 0.5 * (b.lo + b.hi);
      const double rel = std::abs(v - mid) / (0.5 * (b.hi - b.lo));
      if (rel > worst_rel) {
        worst_rel = rel;
        worst = "n=" + r[0] + " x=" + r[1] + " " + r[3];
      }
    }
  }
  return {ok == 9, std::to_string(ok) + "/9 in band, worst " + worst +
                       fmt(" at %.2f of half-width", worst_rel) +
                       fmt(", %.0fs", seconds_since(t0))};
}

Outcome unbiasedness() {
  const FactorModelSpec spec(RegVarDist::pareto(5.0), RegVarDist::pareto(3.0),
                             LoadingSpec::deterministic({1.0, 1.0}));
  constexpr std::size_t n = 10;
  // x from an independent plain run.
  std::vector<double> s(200000);
  SubStreams streams(4242, 0);
  SumSample sample;
  for (auto& v : s) {
    sample_sum_into(spec, n, streams, sample);
    v = sample.s_n;
  }
  const std::size_t k = s.size() / 100;
  std::nth_element(s.begin(), s.end() - k, s.end());
  const double x = *(s.end() - k);

  int passes = 0;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto naive = estimate_tail_naive(spec, n, x, {1000000, 100 + 2 * i, 1});
    const auto cmc = estimate_tail_cmc(spec, n, x, {10000, 101 + 2 * i, 1});
    const double se = std::hypot(naive.std_error, cmc.std_error);
    passes += std::abs(cmc.value - naive.value) <= 3.0 * se;
  }
  return {passes >= 9, std::to_string(passes) + "/10 seeds within 3 SE at x=" +
                           fmt("%.4g", x)};
}

Outcome variance_reduction() {
  const auto spec = load_config(kConfigDir + "/table1.cfg").factor_model();
  const McOptions opt{10000, 0, 1};
  const double level = 1e6 * 1.0;
  const auto cmc = estimate_tail_cmc(spec, 1000, level, opt);
  const auto naive = estimate_tail_naive(spec, 1000, level, opt);
  const double rel = cmc.std_error / cmc.value;
  return {rel < 0.1 && naive.value == 0.0,
          "cmc " + fmt("%.4e", cmc.value) + fmt(" rel SE %.2e", rel) +
              ", naive hits " + fmt("%.0f", naive.value * 10000)};
}

Outcome regimes() {
  int ok = 0;
  int total = 0;
  auto expect = [&](double af, double ae, double g, const Regime& want) {
    ++total;
    ok += classify_regime(af, ae, g, 1.0) == want;
  };
  // alpha_F <= alpha_eps: the factor term wins at every scaling, and there
  // is no critical exponent; probe below, inside and above the other grids.
  for (double g : {1.5, 2.5, 4.0}) expect(3.0, 5.0, g, FactorDominated{});
  const double t1 = critical_exponents(5.0, 3.0).theta_factor;
  expect(5.0, 3.0, 1.5, FactorDominated{});
  expect(5.0, 3.0, t1, Mixed{1.0});
  expect(5.0, 3.0, t1 + 1.0, IdioDominated{});
  const double t2 = critical_exponents(4.0, 3.9).theta_factor;
  expect(4.0, 3.9, 1.5, FactorDominated{});
  expect(4.0, 3.9, t2, Mixed{1.0});
  expect(4.0, 3.9, t2 + 1.0, IdioDominated{});

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ue(2.05, 8.0);
  std::uniform_real_distribution<double> gap(0.05, 5.0);
  int identity_ok = 0;
  for (int i = 0; i < 100; ++i) {
    const double ae = ue(rng);
    const double af = ae + gap(rng);
    const double th = critical_exponents(af, ae).theta_factor;
    const double log_n = std::log(1e6);
    // log of n lambda^-ae and of (lambda/n)^-af with log lambda = th log n.
    const double lhs = log_n - ae * th * log_n;
    const double rhs = -af * (th - 1.0) * log_n;
    identity_ok += std::abs(lhs - rhs) <= 1e-12 * std::abs(rhs);
  }
  return {ok == total && identity_ok == 100,
          std::to_string(ok) + "/" + std::to_string(total) + " labels, " +
              std::to_string(identity_ok) + "/100 identities"};
}

Outcome levy_marginal() {
  const auto cfg = load_config(kConfigDir + "/levy_unit.cfg");
  const auto& spec = cfg.levy_model();
  bool pass = true;
  std::string detail;
  for (double x : {1.0, 2.0}) {
    const auto e = estimate_marginal_tail(spec, 10000, 1.0, x, {10000, 0, 1});
    const double r = e.value / limit_measure_mt(spec, 1.0, x);
    pass = pass && std::abs(r - 1.0) <= 0.1;
    detail += (detail.empty() ? "" : ", ") + fmt("x=%g", x) + fmt(" ratio %.4f", r);
  }
  return {pass, detail};
}

Outcome one_jump() {
  const auto spec = load_config(kConfigDir + "/levy_unit.cfg").levy_model();
  constexpr std::size_t n = 100;
  const double lambda = std::pow(static_cast<double>(n), spec.critical_exponent());
  OneJumpOptions opt;
  opt.paths = 1000000;
  const auto s = one_jump_diagnostic(spec, n, lambda, opt);
  const double want = limit_measure_terms(spec, 1.0, 1.0).factor_share();
  return {s.exceedances > 0 && s.concentrated_fraction >= 0.9 &&
              std::abs(s.factor_share - want) <= 0.1,
          fmt("concentrated %.4f", s.concentrated_fraction) +
              fmt(", factor share %.4f", s.factor_share) + fmt(" vs %.4f", want) +
              ", " + std::to_string(s.exceedances) + " exceedances"};
}

Outcome light_tail() {
  const auto r = light_tail_check(ExponentialLaw{1.0}, RegVarDist::pareto(3.0), 1000,
                                  PolynomialScaling{2.0}, {100000, 0, 1});
  return {r.ratio >= 0.8 && r.ratio <= 1.2,
          fmt("ratio %.4f", r.ratio) + fmt(" (SE %.2e)", r.std_error)};
}

Outcome distributions_and_determinism() {
  constexpr std::size_t kN = 1000000;
  const double eps = std::sqrt(std::log(2.0 / 0.01) / (2.0 * kN));
  int dkw_ok = 0;
  int dkw_total = 0;
  int hill_ok = 0;
  std::uint64_t seed = 900;
  for (const auto& d : {RegVarDist::pareto(3.0), RegVarDist::pareto(5.0),
                        RegVarDist::pareto(3.0, 0.5)}) {
    Stream s(seed++, 0, StreamLabel::idio);
    std::vector<double> xs(kN);
    for (auto& v : xs) v = d.sample(s);
    for (double level : {0.9, 0.99, 0.999}) {
      const double q = d.quantile(level);
      const double emp =
          static_cast<double>(std::count_if(xs.begin(), xs.end(),
                                            [q](double v) { return v > q; })) /
          kN;
      ++dkw_total;
      dkw_ok += std::abs(emp - d.tail(q)) <= eps;
    }
    const double tol = d.alpha() > 4.0 ? 0.15 : 0.1;
    hill_ok += std::abs(hill_estimate(xs, 10000) - d.alpha()) <= tol;
  }

  auto cfg = load_config(kConfigDir + "/table1.cfg");
  cfg.n_list = {1000, 10000};
  cfg.x_list = {0.1, 1.0};
  cfg.iters = 2000;
  cfg.seed = 5;
  std::vector<std::string> outs;
  for (unsigned w : {1u, 4u, 8u}) {
    cfg.workers = w;
    outs.push_back(csv(cmd_simulate(cfg, true)) + csv(cmd_compare(cfg)));
  }
  auto lcfg = load_config(kConfigDir + "/levy_unit.cfg");
  lcfg.n_list = {100};
  lcfg.iters = 1000;
  lcfg.levy.paths = 5000;
  std::vector<std::string> levy_outs;
  for (unsigned w : {1u, 4u, 8u}) {
    lcfg.workers = w;
    levy_outs.push_back(csv(cmd_levy(lcfg)));
  }
  const bool same = outs[0] == outs[1] && outs[0] == outs[2] &&
                    levy_outs[0] == levy_outs[1] && levy_outs[0] == levy_outs[2];
  return {dkw_ok == dkw_total && hill_ok == 3 && same,
          std::to_string(dkw_ok) + "/" + std::to_string(dkw_total) + " DKW, " +
              std::to_string(hill_ok) + "/3 Hill, csv " +
              (same ? "identical" : "differs") + " across workers {1,4,8}"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"LD column exact", ld_column},
      {"simulated column in bands", simulated_column},
      {"CMC unbiased against naive", unbiasedness},
      {"variance reduction", variance_reduction},
      {"regime classifier", regimes},
      {"levy marginal limit", levy_marginal},
      {"one big jump", one_jump},
      {"light-tailed factor", light_tail},
      {"distributions and determinism", distributions_and_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %zu [%s]: %s (%s)\n", i + 1, criteria[i].first,
                o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
