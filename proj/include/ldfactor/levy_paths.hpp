#pragma once

// Compound Poisson factor processes on [0, 1]:
//   S_n(t) = sum_j n EL_j F_j(t) + sum_i eps_i(t),
// with F_d(t) a compound Poisson vector process (rate lambda_F, i.i.d.
// coordinates) and eps_i i.i.d. compound Poisson (rate lambda_eps). Paths are
// kept as marked event lists.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "ldfactor/cond_mc.hpp"
#include "ldfactor/errors.hpp"
#include "ldfactor/ld_approx.hpp"
#include "ldfactor/random.hpp"
#include "ldfactor/rv_dist.hpp"
#include "ldfactor/stats.hpp"

namespace ldfactor {

class LevyFactorSpec {
 public:
  LevyFactorSpec(double lambda_factor, double lambda_eps, RegVarDist jump_factor,
                 RegVarDist jump_eps, std::vector<double> loading_mean)
      : lambda_factor_(lambda_factor),
        lambda_eps_(lambda_eps),
        jump_factor_(std::move(jump_factor)),
        jump_eps_(std::move(jump_eps)),
        loading_mean_(std::move(loading_mean)) {
    if (loading_mean_.empty())
      throw ValidationError("levy spec needs at least one factor");
    if (!(lambda_factor_ > 0.0) || !std::isfinite(lambda_factor_))
      throw ValidationError("lambda_F must be finite and > 0");
    if (!(lambda_eps_ > 0.0) || !std::isfinite(lambda_eps_))
      throw ValidationError("lambda_eps must be finite and > 0");
    if (!(jump_eps_.alpha() > 2.0))
      throw ValidationError("jump_eps.alpha must be > 2");
    if (!(jump_factor_.alpha() > jump_eps_.alpha()))
      throw ValidationError("levy spec needs alpha_F > alpha_eps > 2");
    if (std::all_of(loading_mean_.begin(), loading_mean_.end(),
                    [](double v) { return v == 0.0; }))
      throw ValidationError("mean loading vector EL must be nonzero");
  }

  [[nodiscard]] std::size_t d() const { return loading_mean_.size(); }
  [[nodiscard]] double lambda_factor() const noexcept { return lambda_factor_; }
  [[nodiscard]] double lambda_eps() const noexcept { return lambda_eps_; }
  [[nodiscard]] const RegVarDist& jump_factor() const noexcept { return jump_factor_; }
  [[nodiscard]] const RegVarDist& jump_eps() const noexcept { return jump_eps_; }
  [[nodiscard]] const std::vector<double>& loading_mean() const noexcept {
    return loading_mean_;
  }

  /// Critical scaling exponent theta_F for the two tail indices.
  [[nodiscard]] double critical_exponent() const {
    return critical_exponents(jump_factor_.alpha(), jump_eps_.alpha())
        .theta_factor;
  }

  friend bool operator==(const LevyFactorSpec&, const LevyFactorSpec&) = default;

 private:
  double lambda_factor_;
  double lambda_eps_;
  RegVarDist jump_factor_;
  RegVarDist jump_eps_;
  std::vector<double> loading_mean_;
};

enum class Origin { factor, idio };

struct JumpEvent {
  double time = 0.0;
  double size = 0.0;
  Origin origin = Origin::factor;
  /// Factor coordinate with the largest contribution, or the asset index.
  std::size_t index = 0;
};

struct PathSample {
  std::vector<JumpEvent> events;
  double terminal = 0.0;
  double supremum = 0.0;
};

struct PathStreams {
  Stream factor;
  Stream idio;
  Stream strata;

  PathStreams(std::uint64_t seed, std::uint64_t block)
      : factor(seed, block, StreamLabel::path_factor),
        idio(seed, block, StreamLabel::path_idio),
        strata(seed, block, StreamLabel::strata) {}
};

namespace detail {

/// X conditioned on X > a, drawn by inversion in tail space.
template <UniformSource U>
double sample_above(const RegVarDist& dist, double a, U& u) {
  const double level = dist.tail(a) * u.uniform();
  if (level <= dist.p()) return dist.tail_quantile(level);
  return dist.quantile(1.0 - level);
}

/// X conditioned on X <= a.
template <UniformSource U>
double sample_at_most(const RegVarDist& dist, double a, U& u) {
  const double top = dist.tail(a);
  double level = top + (1.0 - top) * u.uniform();
  level = std::min(level, std::nextafter(1.0, 0.0));
  if (level <= dist.p()) return dist.tail_quantile(level);
  return dist.quantile(1.0 - level);
}

/// X conditioned on X < c.
template <UniformSource U>
double sample_below(const RegVarDist& dist, double c, U& u) {
  const double level = dist.cdf(c) * u.uniform();
  return dist.quantile(std::max(level, std::numeric_limits<double>::min()));
}

/// X conditioned on X >= c.
template <UniformSource U>
double sample_at_least(const RegVarDist& dist, double c, U& u) {
  const double lo = dist.cdf(c);
  double level = lo + (1.0 - lo) * u.uniform();
  level = std::min(level, std::nextafter(1.0, 0.0));
  return dist.quantile(level);
}

/// A draw of X given that the contribution scale * X is (big) or is not
/// (small) above b.
template <UniformSource U>
double sample_contribution_side(const RegVarDist& dist, double scale, double b,
                                bool big, U& u) {
  if (scale > 0.0) {
    return big ? sample_above(dist, b / scale, u)
               : sample_at_most(dist, b / scale, u);
  }
  if (scale < 0.0) {
    return big ? sample_below(dist, b / scale, u)
               : sample_at_least(dist, b / scale, u);
  }
  return dist.sample(u);
}

}  // namespace detail

/// Stratum of the big-jump split used by the one-jump diagnostic. With
/// level b, "big" means some single coordinate contribution or
/// idiosyncratic jump exceeds b.
enum class JumpStratum { unrestricted, has_big_jump, no_big_jump };

/// Event-level probabilities of a big contribution above level b.
struct BigJumpRates {
  std::vector<double> coord_prob;  // P(n EL_j Z > b)
  double factor_epoch_prob = 0.0;  // P(any coordinate big)
  double idio_prob = 0.0;          // P(W > b)
  double big_rate = 0.0;           // expected big events on [0, 1]
  double has_big_prob = 0.0;       // 1 - exp(-big_rate)

  BigJumpRates(const LevyFactorSpec& spec, std::size_t n, double b) {
    const double nn = static_cast<double>(n);
    double log_none = 0.0;
    for (double el : spec.loading_mean()) {
      const double q = scaled_tail(spec.jump_factor(), nn * el, b);
      coord_prob.push_back(q);
      log_none += std::log1p(-q);
    }
    factor_epoch_prob = -std::expm1(log_none);
    idio_prob = spec.jump_eps().tail(b);
    big_rate = spec.lambda_factor() * factor_epoch_prob +
               nn * spec.lambda_eps() * idio_prob;
    has_big_prob = -std::expm1(-big_rate);
  }
};

namespace detail {

template <UniformSource U>
double exponential(double rate, U& u) {
  return -std::log(u.uniform()) / rate;
}

/// Adds the factor epoch at `time`. `first_big` is the index of the first
/// coordinate forced above b, or d for "all small", or SIZE_MAX for
/// unconditioned coordinates.
template <UniformSource U>
void push_factor_epoch(const LevyFactorSpec& spec, std::size_t n, double time,
                       double b, std::size_t first_big, U& u,
                       std::vector<JumpEvent>& out) {
  const double nn = static_cast<double>(n);
  CompensatedSum size;
  double best = -1.0;
  std::size_t best_j = 0;
  for (std::size_t j = 0; j < spec.d(); ++j) {
    const double scale = nn * spec.loading_mean()[j];
    double z;
    if (first_big == std::numeric_limits<std::size_t>::max() ||
        (first_big < spec.d() && j > first_big)) {
      z = spec.jump_factor().sample(u);
    } else {
      z = sample_contribution_side(spec.jump_factor(), scale, b, j == first_big, u);
    }
    const double c = scale * z;
    size.add(c);
    if (std::abs(c) > best) {
      best = std::abs(c);
      best_j = j;
    }
  }
  out.push_back({time, size.value(), Origin::factor, best_j});
}

inline void finish_path(std::vector<JumpEvent>& events, PathSample& path) {
  std::sort(events.begin(), events.end(),
            [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (!(events[i].time > events[i - 1].time))
      events[i].time = std::nextafter(events[i - 1].time, 2.0);
  }
  CompensatedSum running;
  double sup = 0.0;
  for (const auto& e : events) {
    running.add(e.size);
    sup = std::max(sup, running.value());
  }
  path.terminal = running.value();
  path.supremum = sup;
  path.events = std::move(events);
}

}  // namespace detail

/// Exact event-driven simulation of S_n on [0, 1]. Factor epochs arrive at
/// rate lambda_F; the n idiosyncratic processes are merged into one process
/// of rate n lambda_eps with uniformly assigned asset tags.
inline PathSample sample_path(const LevyFactorSpec& spec, std::size_t n,
                              PathStreams& streams) {
  if (n == 0) throw DomainError("sample_path needs n >= 1");
  std::vector<JumpEvent> events;
  for (double t = detail::exponential(spec.lambda_factor(), streams.factor);
       t <= 1.0; t += detail::exponential(spec.lambda_factor(), streams.factor)) {
    detail::push_factor_epoch(spec, n, t, 0.0,
                              std::numeric_limits<std::size_t>::max(),
                              streams.factor, events);
  }
  const double idio_rate = static_cast<double>(n) * spec.lambda_eps();
  for (double t = detail::exponential(idio_rate, streams.idio); t <= 1.0;
       t += detail::exponential(idio_rate, streams.idio)) {
    const double w = spec.jump_eps().sample(streams.idio);
    const auto i = std::min<std::size_t>(
        n - 1, static_cast<std::size_t>(streams.idio.uniform() * static_cast<double>(n)));
    events.push_back({t, w, Origin::idio, i});
  }
  PathSample path;
  detail::finish_path(events, path);
  return path;
}

/// Path of S_n restricted to one stratum of the big-jump split at level b.
/// The restricted law is the unconditional law conditioned on the stratum.
inline PathSample sample_path_stratum(const LevyFactorSpec& spec,
                                      std::size_t n, const BigJumpRates& rates,
                                      double b, JumpStratum stratum,
                                      PathStreams& streams) {
  if (stratum == JumpStratum::unrestricted) return sample_path(spec, n, streams);
  const std::size_t d = spec.d();
  std::vector<JumpEvent> events;

  // Small events: thinned processes with every contribution at most b.
  const double small_factor_rate =
      spec.lambda_factor() * (1.0 - rates.factor_epoch_prob);
  if (small_factor_rate > 0.0) {
    for (double t = detail::exponential(small_factor_rate, streams.factor);
         t <= 1.0; t += detail::exponential(small_factor_rate, streams.factor))
      detail::push_factor_epoch(spec, n, t, b, d, streams.factor, events);
  }
  const double small_idio_rate =
      static_cast<double>(n) * spec.lambda_eps() * (1.0 - rates.idio_prob);
  if (small_idio_rate > 0.0) {
    for (double t = detail::exponential(small_idio_rate, streams.idio); t <= 1.0;
         t += detail::exponential(small_idio_rate, streams.idio)) {
      const double w = detail::sample_at_most(spec.jump_eps(), b, streams.idio);
      const auto i = std::min<std::size_t>(
          n - 1,
          static_cast<std::size_t>(streams.idio.uniform() * static_cast<double>(n)));
      events.push_back({t, w, Origin::idio, i});
    }
  }

  if (stratum == JumpStratum::has_big_jump) {
    if (!(rates.big_rate > 0.0))
      throw DomainError("big-jump stratum has probability zero");
    // Zero-truncated Poisson count of big events.
    const double lam = rates.big_rate;
    double u = streams.strata.uniform();
    std::size_t count = 1;
    double pk = lam / std::expm1(lam);
    while (u > pk && count < 100000) {
      u -= pk;
      ++count;
      pk *= lam / static_cast<double>(count);
    }
    const double factor_share =
        spec.lambda_factor() * rates.factor_epoch_prob / lam;
    for (std::size_t k = 0; k < count; ++k) {
      const double t = streams.strata.uniform();
      if (streams.strata.uniform() < factor_share) {
        // First big coordinate j with weight prod_{i<j}(1 - q_i) q_j.
        std::size_t first = d - 1;
        while (first > 0 && rates.coord_prob[first] == 0.0) --first;
        double v = streams.strata.uniform() * rates.factor_epoch_prob;
        double none_before = 1.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double w = none_before * rates.coord_prob[j];
          if (v < w) {
            first = j;
            break;
          }
          v -= w;
          none_before *= 1.0 - rates.coord_prob[j];
        }
        detail::push_factor_epoch(spec, n, t, b, first, streams.strata, events);
      } else {
        const double w = detail::sample_above(spec.jump_eps(), b, streams.strata);
        const auto i = std::min<std::size_t>(
            n - 1, static_cast<std::size_t>(streams.strata.uniform() *
                                            static_cast<double>(n)));
        events.push_back({t, w, Origin::idio, i});
      }
    }
  }
  PathSample path;
  detail::finish_path(events, path);
  return path;
}

/// Factor and idiosyncratic parts of m_t(x, inf).
struct LimitMeasureTerms {
  double factor = 0.0;
  double idio = 0.0;
  [[nodiscard]] double total() const { return factor + idio; }
  [[nodiscard]] double factor_share() const {
    return total() > 0.0 ? factor / total() : 0.0;
  }
};

/// m_t(x, inf) = t p_F sum_j EL_j^-alpha_F x^-alpha_F
///             + t p_eps C lambda_eps / (d lambda_F) x^-alpha_eps,
/// with C the ratio of the jump laws' slowly varying constants (1 for unit
/// Pareto jumps). Negative loadings enter through the left factor tail.
inline LimitMeasureTerms limit_measure_terms(const LevyFactorSpec& spec,
                                             double t, double x) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("t must lie in [0, 1]");
  if (!(x > 0.0)) throw DomainError("limit measure needs x > 0");
  const auto& jf = spec.jump_factor();
  const auto& je = spec.jump_eps();
  const auto cf = jf.sv().limit();
  const auto ce = je.sv().limit();
  if (!cf || !ce)
    throw DomainError("limit measure needs jump laws with bounded slowly "
                      "varying factors");
  const double mu =
      mu_value(AxisIid{spec.loading_mean(), jf.alpha(), jf.p()});
  LimitMeasureTerms out;
  out.factor = t * mu * std::pow(x, -jf.alpha());
  out.idio = t * je.p() * (*ce / *cf) * spec.lambda_eps() /
             (static_cast<double>(spec.d()) * spec.lambda_factor()) *
             std::pow(x, -je.alpha());
  return out;
}

inline double limit_measure_mt(const LevyFactorSpec& spec, double t, double x) {
  return limit_measure_terms(spec, t, x).total();
}

/// One draw of the factor vector increment F_d(t).
template <UniformSource U>
std::vector<double> sample_factor_increment(const LevyFactorSpec& spec,
                                            double t, U& u) {
  std::vector<double> out(spec.d(), 0.0);
  for (double s = detail::exponential(spec.lambda_factor(), u); s <= t;
       s += detail::exponential(spec.lambda_factor(), u)) {
    for (auto& v : out) v += spec.jump_factor().sample(u);
  }
  return out;
}

struct NormalizedTailEstimate {
  TailEstimate raw;      // P(S_n(t) > lambda_n x)
  double lambda_n = 0.0;
  double gamma_n = 0.0;  // 1 / (d lambda_F P(|Z| > lambda_n / n))
  double value = 0.0;    // gamma_n * raw.value
  double std_error = 0.0;
};

/// gamma_n P(S_n(t) > lambda_n x) at the critical scaling
/// lambda_n = n^theta_F, estimated by conditioning on the largest jump.
/// Given the jump counts, the summands form exchangeable classes (one per
/// factor coordinate with nonzero loading, one for idiosyncratic jumps).
inline NormalizedTailEstimate estimate_marginal_tail(const LevyFactorSpec& spec,
                                                     std::size_t n, double t,
                                                     double x,
                                                     const McOptions& opt) {
  detail::check_mc_args(n, opt.iters);
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("t must lie in [0, 1]");
  if (!(x > 0.0)) throw DomainError("marginal tail needs x > 0");
  const double nn = static_cast<double>(n);
  NormalizedTailEstimate out;
  out.lambda_n = std::pow(nn, spec.critical_exponent());
  out.gamma_n = 1.0 / (static_cast<double>(spec.d()) * spec.lambda_factor() *
                       spec.jump_factor().abs_tail(out.lambda_n / nn));
  const double level = out.lambda_n * x;

  const auto blocks = run_blocks<SampleMoments>(
      opt.iters, opt.workers,
      [&](std::uint64_t b, std::uint64_t begin, std::uint64_t end) {
        Stream factor_stream(opt.seed, b, StreamLabel::path_factor);
        Stream idio_stream(opt.seed, b, StreamLabel::path_idio);
        std::vector<std::vector<double>> coord(spec.d());
        std::vector<double> idio;
        std::vector<TermClass> classes;
        std::vector<double> z;
        z.reserve(end - begin);
        const double mean_f = spec.lambda_factor() * t;
        const double mean_e = nn * spec.lambda_eps() * t;
        for (std::uint64_t it = begin; it < end; ++it) {
          std::size_t k_f = 0;
          std::size_t k_e = 0;
          if (mean_f > 0.0)
            k_f = std::poisson_distribution<std::size_t>(mean_f)(
                factor_stream.engine());
          if (mean_e > 0.0)
            k_e = std::poisson_distribution<std::size_t>(mean_e)(
                idio_stream.engine());
          classes.clear();
          for (std::size_t j = 0; j < spec.d(); ++j) {
            const double scale = nn * spec.loading_mean()[j];
            coord[j].clear();
            for (std::size_t k = 0; k < k_f; ++k)
              coord[j].push_back(scale * spec.jump_factor().sample(factor_stream));
            if (scale != 0.0)
              classes.push_back({coord[j], scale, &spec.jump_factor()});
          }
          idio.resize(k_e);
          for (auto& w : idio) w = spec.jump_eps().sample(idio_stream);
          classes.push_back({idio, 1.0, &spec.jump_eps()});
          z.push_back(conditional_max_draw(classes, level));
        }
        return SampleMoments::from(z);
      });
  out.raw = make_tail_estimate(merge_in_order(blocks), opt.seed);
  out.value = out.gamma_n * out.raw.value;
  out.std_error = out.gamma_n * out.raw.std_error;
  return out;
}

struct OneJumpOptions {
  std::uint64_t paths = 100000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  /// Ratio (largest jump)/supremum at or above which a path counts as
  /// concentrated on one jump.
  double concentration = 0.9;
  /// Split paths on whether some single contribution exceeds
  /// big_level * threshold. Only used for positive thresholds.
  bool stratify = true;
  double big_level = 0.5;
};

struct OneJumpSummary {
  std::uint64_t paths = 0;
  std::uint64_t exceedances = 0;        // sampled paths with sup > threshold
  double exceedance_probability = 0.0;  // P(sup > threshold)
  double concentrated_fraction = 0.0;   // among exceedances, ratio >= level
  double factor_share = 0.0;            // among exceedances, largest jump is factor
  double median_ratio = 0.0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  bool stratified = false;
  double big_jump_probability = 1.0;    // P(stratum with a big jump)
  std::vector<std::pair<double, double>> ratio_quantiles;  // (level, ratio)
};

/// Among simulated paths whose supremum exceeds `threshold`: the
/// distribution of (largest jump)/supremum and where the largest jump came
/// from. For positive thresholds the paths are stratified on the presence
/// of a big jump, each stratum sampled exactly and reweighted by its
/// probability, so the reported fractions estimate the unconditional law.
inline OneJumpSummary one_jump_diagnostic(const LevyFactorSpec& spec,
                                          std::size_t n, double threshold,
                                          const OneJumpOptions& opt) {
  if (n == 0) throw DomainError("one_jump_diagnostic needs n >= 1");
  if (opt.paths == 0) throw DomainError("one_jump_diagnostic needs paths >= 1");
  if (!(opt.big_level > 0.0 && opt.big_level <= 1.0))
    throw DomainError("big_level must lie in (0, 1]");

  const bool stratify = opt.stratify && threshold > 0.0 && opt.paths >= 2;
  const double b = opt.big_level * threshold;
  const BigJumpRates rates(spec, n, stratify ? b : 1.0);
  const bool use_strata = stratify && rates.big_rate > 0.0;
  const std::uint64_t big_paths = use_strata ? (opt.paths + 1) / 2 : 0;
  const double w_big = use_strata
                           ? rates.has_big_prob / static_cast<double>(big_paths)
                           : 0.0;
  const double w_small =
      use_strata ? (1.0 - rates.has_big_prob) /
                       static_cast<double>(opt.paths - big_paths)
                 : 1.0 / static_cast<double>(opt.paths);

  struct Record {
    double ratio;  // NaN when the supremum is not positive
    double weight;
    bool factor;
  };
  const auto blocks = run_blocks<std::vector<Record>>(
      opt.paths, opt.workers,
      [&](std::uint64_t blk, std::uint64_t begin, std::uint64_t end) {
        PathStreams streams(opt.seed, blk);
        std::vector<Record> out;
        for (std::uint64_t i = begin; i < end; ++i) {
          JumpStratum stratum = JumpStratum::unrestricted;
          double w = w_small;
          if (use_strata) {
            stratum = i < big_paths ? JumpStratum::has_big_jump
                                    : JumpStratum::no_big_jump;
            w = i < big_paths ? w_big : w_small;
          }
          const auto path = sample_path_stratum(spec, n, rates, b, stratum, streams);
          if (!(path.supremum > threshold)) continue;
          Record r{std::numeric_limits<double>::quiet_NaN(), w, false};
          if (!path.events.empty()) {
            const auto largest = std::max_element(
                path.events.begin(), path.events.end(),
                [](const JumpEvent& a, const JumpEvent& c) { return a.size < c.size; });
            r.factor = largest->origin == Origin::factor;
            if (path.supremum > 0.0) r.ratio = largest->size / path.supremum;
          }
          out.push_back(r);
        }
        return out;
      });

  OneJumpSummary s;
  s.paths = opt.paths;
  s.stratified = use_strata;
  s.big_jump_probability = use_strata ? rates.has_big_prob : 1.0;
  CompensatedSum total_w;
  CompensatedSum conc_w;
  CompensatedSum factor_w;
  CompensatedSum ratio_w;
  std::vector<std::pair<double, double>> ratios;  // (ratio, weight)
  for (const auto& blk : blocks) {
    for (const auto& r : blk) {
      ++s.exceedances;
      total_w.add(r.weight);
      if (r.factor) factor_w.add(r.weight);
      if (!std::isnan(r.ratio)) {
        ratio_w.add(r.weight);
        ratios.emplace_back(r.ratio, r.weight);
        if (r.ratio >= opt.concentration) conc_w.add(r.weight);
      }
    }
  }
  s.exceedance_probability = total_w.value();
  if (s.exceedances == 0) return s;
  s.factor_share = factor_w.value() / total_w.value();
  if (!ratios.empty()) {
    s.concentrated_fraction = conc_w.value() / ratio_w.value();
    std::sort(ratios.begin(), ratios.end());
    s.min_ratio = ratios.front().first;
    s.max_ratio = ratios.back().first;
    const double wsum = ratio_w.value();
    for (double q : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      double acc = 0.0;
      double val = ratios.back().first;
      for (const auto& [ratio, w] : ratios) {
        acc += w;
        if (acc >= q * wsum) {
          val = ratio;
          break;
        }
      }
      s.ratio_quantiles.emplace_back(q, val);
      if (q == 0.5) s.median_ratio = val;
    }
  }
  return s;
}

}  // namespace ldfactor
