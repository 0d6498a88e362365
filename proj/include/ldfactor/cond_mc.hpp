#pragma once

// Rare-event estimation of P(S_n > x) by conditioning on which summand is
// the largest (Asmussen-Kroese), with a crude indicator estimator as the
// cross-check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "ldfactor/errors.hpp"
#include "ldfactor/factor_model.hpp"
#include "ldfactor/ld_approx.hpp"
#include "ldfactor/random.hpp"
#include "ldfactor/rv_dist.hpp"
#include "ldfactor/stats.hpp"

namespace ldfactor {

struct McOptions {
  std::uint64_t iters = 10000;
  std::uint64_t seed = 0;
  /// Threads; 0 uses every hardware thread. Never changes results.
  unsigned workers = 1;
};

struct TailEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t iters = 0;
  std::uint64_t seed = 0;
  std::pair<double, double> ci95{0.0, 0.0};
};

inline TailEstimate make_tail_estimate(double value, double std_error,
                                       std::uint64_t iters,
                                       std::uint64_t seed) {
  TailEstimate e;
  e.value = std::clamp(value, 0.0, 1.0);
  e.std_error = std::max(0.0, std_error);
  e.iters = iters;
  e.seed = seed;
  e.ci95 = {std::clamp(e.value - 1.96 * e.std_error, 0.0, 1.0),
            std::clamp(e.value + 1.96 * e.std_error, 0.0, 1.0)};
  return e;
}

inline TailEstimate make_tail_estimate(const SampleMoments& m,
                                       std::uint64_t seed) {
  const double n = static_cast<double>(m.count);
  return make_tail_estimate(m.mean(), std::sqrt(m.variance() / n), m.count,
                            seed);
}

/// One group of exchangeable summands. The last value is the group's
/// representative; it equals rep_scale times a draw from `dist`.
struct TermClass {
  std::span<const double> values;
  double rep_scale = 1.0;
  const RegVarDist* dist = nullptr;
};

/// Single-draw conditional estimator of P(sum of all terms > x):
///   sum over classes c of |c| * P(rep_c > max(x - S_{-rep_c}, M_{-rep_c}))
/// where S_{-r} and M_{-r} are the sum and maximum of every other term.
/// Each summand is a conditional probability, so the result lies in
/// [0, total term count]. When `per_class` is nonempty it receives each
/// class's contribution.
inline double conditional_max_draw(std::span<const TermClass> classes,
                                   double x,
                                   std::span<double> per_class = {}) {
  constexpr double kLowest = -std::numeric_limits<double>::infinity();
  CompensatedSum rest_sum;
  double rest_max = kLowest;
  std::size_t active = 0;
  for (const auto& c : classes) {
    if (c.values.empty()) continue;
    ++active;
    for (std::size_t i = 0; i + 1 < c.values.size(); ++i) {
      rest_sum.add(c.values[i]);
      rest_max = std::max(rest_max, c.values[i]);
    }
  }
  if (active == 0) return 0.0 > x ? 1.0 : 0.0;

  double z = 0.0;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& c = classes[k];
    if (c.values.empty()) continue;
    CompensatedSum others = rest_sum;
    double others_max = rest_max;
    for (std::size_t m = 0; m < classes.size(); ++m) {
      if (m == k || classes[m].values.empty()) continue;
      others.add(classes[m].values.back());
      others_max = std::max(others_max, classes[m].values.back());
    }
    const double level = std::max(x - others.value(), others_max);
    const double term = static_cast<double>(c.values.size()) *
                        scaled_tail(*c.dist, c.rep_scale, level);
    if (!per_class.empty()) per_class[k] = term;
    z += term;
  }
  return z;
}

/// The conditional estimator for one joint draw of the static model:
///   n * P(eps > max(x - S_-, M_-)) + d * P(S^L_{n,d} F > max(x - S'_-, M'_-)).
/// `parts`, when given, receives {factor term, idiosyncratic term}.
inline double cmc_draw(const FactorModelSpec& spec, const SumSample& s,
                       double x, std::span<double> parts = {}) {
  const TermClass classes[] = {
      {s.factor_terms, s.column_sums.back(), &spec.factor_dist()},
      {s.idio_terms, 1.0, &spec.idio_dist()},
  };
  return conditional_max_draw(classes, x, parts);
}

namespace detail {

inline void check_mc_args(std::size_t n, std::uint64_t iters) {
  if (n == 0) throw DomainError("estimator needs n >= 1");
  if (iters == 0) throw DomainError("estimator needs iters >= 1");
}

}  // namespace detail

/// Conditional Monte Carlo estimate of P(S_n > x).
inline TailEstimate estimate_tail_cmc(const FactorModelSpec& spec,
                                      std::size_t n, double x,
                                      const McOptions& opt) {
  detail::check_mc_args(n, opt.iters);
  if (!(x > 0.0)) throw DomainError("conditional estimator needs x > 0");
  const auto& loadings = spec.loading_spec();
  if (spec.d() > 1 && !loadings.exchangeable_columns())
    throw ValidationError(
        "conditional estimator with d > 1 needs identically distributed "
        "loading columns (equal deterministic loadings or identical ranges)");
  if (loadings.is_deterministic() && !(loadings.mean().front() > 0.0))
    throw ValidationError(
        "conditional estimator needs positive deterministic loadings");

  const auto blocks = run_blocks<SampleMoments>(
      opt.iters, opt.workers,
      [&](std::uint64_t b, std::uint64_t begin, std::uint64_t end) {
        SubStreams streams(opt.seed, b);
        SumSample draw;
        std::vector<double> z;
        z.reserve(end - begin);
        for (std::uint64_t it = begin; it < end; ++it) {
          sample_sum_into(spec, n, streams, draw);
          z.push_back(cmc_draw(spec, draw, x));
        }
        return SampleMoments::from(z);
      });
  return make_tail_estimate(merge_in_order(blocks), opt.seed);
}

/// Crude estimate: the fraction of draws with S_n > x.
inline TailEstimate estimate_tail_naive(const FactorModelSpec& spec,
                                        std::size_t n, double x,
                                        const McOptions& opt) {
  detail::check_mc_args(n, opt.iters);
  const auto hits = run_blocks<std::uint64_t>(
      opt.iters, opt.workers,
      [&](std::uint64_t b, std::uint64_t begin, std::uint64_t end) {
        SubStreams streams(opt.seed, b);
        SumSample draw;
        std::uint64_t count = 0;
        for (std::uint64_t it = begin; it < end; ++it) {
          sample_sum_into(spec, n, streams, draw);
          if (draw.s_n > x) ++count;
        }
        return count;
      });
  std::uint64_t total = 0;
  for (auto h : hits) total += h;
  const double iters = static_cast<double>(opt.iters);
  const double p = static_cast<double>(total) / iters;
  return make_tail_estimate(p, std::sqrt(p * (1.0 - p) / iters), opt.iters,
                            opt.seed);
}

struct CompareRow {
  std::size_t n = 0;
  double x = 0.0;
  double lambda_n = 0.0;
  double ld_value = 0.0;
  TailEstimate cmc;
};

/// For every (x, n) cell with lambda_n = n^lambda_exponent: the analytic
/// approximation and the conditional estimate of P(S_n > lambda_n x).
/// Rows are ordered by x, then by n. Every cell uses the same seed.
inline std::vector<CompareRow> compare_table(
    const FactorModelSpec& spec, const MuFunctional& mu,
    std::span<const std::size_t> n_list, std::span<const double> x_list,
    double lambda_exponent, const McOptions& opt) {
  if (n_list.empty() || x_list.empty())
    throw DomainError("compare_table needs nonempty n and x lists");
  std::vector<CompareRow> rows;
  rows.reserve(n_list.size() * x_list.size());
  for (double x : x_list) {
    for (std::size_t n : n_list) {
      CompareRow row;
      row.n = n;
      row.x = x;
      row.lambda_n = std::pow(static_cast<double>(n), lambda_exponent);
      row.ld_value = ld_tail_approx(spec, mu, n, row.lambda_n, x);
      row.cmc = estimate_tail_cmc(spec, n, row.lambda_n * x, opt);
      rows.push_back(row);
    }
  }
  return rows;
}

/// Exponential law, the built-in light-tailed factor: P(X > x) = e^(-rate x).
struct ExponentialLaw {
  double rate = 1.0;

  [[nodiscard]] double tail(double x) const {
    return x <= 0.0 ? 1.0 : std::exp(-rate * x);
  }
  template <UniformSource U>
  [[nodiscard]] double sample(U& source) const {
    return -std::log(source.uniform()) / rate;
  }
};

/// lambda_n = n^exponent.
struct PolynomialScaling {
  double exponent = 2.0;
  [[nodiscard]] double at(std::size_t n) const {
    return std::pow(static_cast<double>(n), exponent);
  }
};

struct RatioEstimate {
  double ratio = 0.0;
  double std_error = 0.0;
  double normalizer = 0.0;  // n * P(eps > lambda)
  TailEstimate probability;
};

/// Estimates P(nX + sum eps_i > lambda) / (n P(eps > lambda)) with a light
/// tailed X, conditioning on the largest eps only:
///   Z = n * P(eps > max(lambda - nX - S_{n-1}, M_{n-1})).
inline RatioEstimate light_tail_ratio(const ExponentialLaw& light,
                                      const RegVarDist& idio, std::size_t n,
                                      double lambda, const McOptions& opt) {
  detail::check_mc_args(n, opt.iters);
  if (!(light.rate > 0.0)) throw DomainError("exponential rate must be > 0");
  const double nn = static_cast<double>(n);
  const auto blocks = run_blocks<SampleMoments>(
      opt.iters, opt.workers,
      [&](std::uint64_t b, std::uint64_t begin, std::uint64_t end) {
        Stream light_stream(opt.seed, b, StreamLabel::light);
        Stream idio_stream(opt.seed, b, StreamLabel::idio);
        std::vector<double> z;
        z.reserve(end - begin);
        for (std::uint64_t it = begin; it < end; ++it) {
          CompensatedSum others;
          others.add(nn * light.sample(light_stream));
          double eps_max = -std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i + 1 < n; ++i) {
            const double e = idio.sample(idio_stream);
            others.add(e);
            eps_max = std::max(eps_max, e);
          }
          z.push_back(nn * idio.tail(std::max(lambda - others.value(), eps_max)));
        }
        return SampleMoments::from(z);
      });
  RatioEstimate out;
  out.probability = make_tail_estimate(merge_in_order(blocks), opt.seed);
  out.normalizer = nn * idio.tail(lambda);
  if (!(out.normalizer > 0.0))
    throw DomainError("light_tail_ratio: idiosyncratic tail vanishes at lambda");
  out.ratio = out.probability.value / out.normalizer;
  out.std_error = out.probability.std_error / out.normalizer;
  return out;
}

/// Light-tailed factor check along a scaling with lambda_n / n -> infinity.
inline RatioEstimate light_tail_check(const ExponentialLaw& light,
                                      const RegVarDist& idio, std::size_t n,
                                      const PolynomialScaling& scaling,
                                      const McOptions& opt) {
  if (!(scaling.exponent > 1.0))
    throw RegimeError(
        "light_tail_check needs lambda_n / n -> infinity (exponent > 1)");
  return light_tail_ratio(light, idio, n, scaling.at(n), opt);
}

}  // namespace ldfactor
