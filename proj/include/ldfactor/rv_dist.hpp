#pragma once

// One-dimensional regularly varying laws: P(|X| > x) = L(x) x^-alpha with a
// symbolic slowly varying factor L, and a sign drawn independently of |X|.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "ldfactor/errors.hpp"
#include "ldfactor/random.hpp"

namespace ldfactor {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct ConstantSv {
  double c = 1.0;
};

/// L(x) given by an explicit function with a finite positive limit.
struct ConvergentSv {
  double limit = 1.0;
  std::function<double(double)> fn;
};

/// L(x) = a log x + b.
struct LogSv {
  double a = 0.0;
  double b = 1.0;
};

/// Slowly varying factor of a regularly varying tail. The three variants are
/// constants, functions converging to a constant, and affine functions of
/// log x.
class SlowlyVaryingSpec {
 public:
  using Variant = std::variant<ConstantSv, ConvergentSv, LogSv>;

  SlowlyVaryingSpec() : v_(ConstantSv{1.0}) {}

  static SlowlyVaryingSpec constant(double c) {
    if (!(c > 0.0) || !std::isfinite(c))
      throw ValidationError("slowly varying constant must be finite and > 0");
    return SlowlyVaryingSpec(ConstantSv{c});
  }

  static SlowlyVaryingSpec convergent_to(double limit,
                                         std::function<double(double)> fn) {
    if (!(limit > 0.0) || !std::isfinite(limit))
      throw ValidationError("slowly varying limit must be finite and > 0");
    if (!fn) throw ValidationError("convergent slowly varying spec needs a function");
    return SlowlyVaryingSpec(ConvergentSv{limit, std::move(fn)});
  }

  static SlowlyVaryingSpec log(double a, double b) {
    if (!(a >= 0.0) || !(b >= 0.0) || !(a + b > 0.0) || !std::isfinite(a) ||
        !std::isfinite(b))
      throw ValidationError(
          "log slowly varying spec needs a >= 0, b >= 0 and a + b > 0");
    return SlowlyVaryingSpec(LogSv{a, b});
  }

  [[nodiscard]] double operator()(double x) const {
    return std::visit(
        [x](const auto& s) -> double {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, ConstantSv>) {
            return s.c;
          } else if constexpr (std::is_same_v<T, ConvergentSv>) {
            return s.fn(x);
          } else {
            return s.a * std::log(x) + s.b;
          }
        },
        v_);
  }

  [[nodiscard]] bool is_constant() const {
    return std::holds_alternative<ConstantSv>(v_);
  }

  /// lim L(x) as x -> infinity; nullopt when L grows like a log.
  [[nodiscard]] std::optional<double> limit() const {
    if (const auto* c = std::get_if<ConstantSv>(&v_)) return c->c;
    if (const auto* c = std::get_if<ConvergentSv>(&v_)) return c->limit;
    const auto& l = std::get<LogSv>(v_);
    if (l.a == 0.0) return l.b;
    return std::nullopt;
  }

  [[nodiscard]] const Variant& variant() const noexcept { return v_; }

  /// Convergent specs compare by their limit only; function handles are
  /// not comparable.
  friend bool operator==(const SlowlyVaryingSpec& lhs,
                         const SlowlyVaryingSpec& rhs) {
    if (lhs.v_.index() != rhs.v_.index()) return false;
    if (const auto* c = std::get_if<ConstantSv>(&lhs.v_))
      return c->c == std::get<ConstantSv>(rhs.v_).c;
    if (const auto* c = std::get_if<ConvergentSv>(&lhs.v_))
      return c->limit == std::get<ConvergentSv>(rhs.v_).limit;
    const auto& a = std::get<LogSv>(lhs.v_);
    const auto& b = std::get<LogSv>(rhs.v_);
    return a.a == b.a && a.b == b.b;
  }

 private:
  explicit SlowlyVaryingSpec(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

/// Limit of L_eps(n^theta_F) / L_F(n^theta_eps) as n -> infinity, computed
/// in closed form per variant pair. May be 0 or +infinity.
inline double sv_ratio_limit(const SlowlyVaryingSpec& sv_eps,
                             const SlowlyVaryingSpec& sv_factor,
                             double theta_factor, double theta_eps) {
  if (!(theta_factor > 1.0) || !(theta_eps > 0.0) ||
      std::abs(theta_eps - (theta_factor - 1.0)) >
          1e-12 * std::max(1.0, theta_factor))
    throw DomainError(
        "sv_ratio_limit needs theta_F > 1 and theta_eps = theta_F - 1");
  const auto lim_eps = sv_eps.limit();
  const auto lim_f = sv_factor.limit();
  if (lim_eps && lim_f) return *lim_eps / *lim_f;
  if (!lim_eps && lim_f) return kInfinity;
  if (lim_eps && !lim_f) return 0.0;
  // Both grow like a log: the leading coefficients scale with the exponents.
  const double a_eps = std::get<LogSv>(sv_eps.variant()).a;
  const double a_f = std::get<LogSv>(sv_factor.variant()).a;
  return (a_eps * theta_factor) / (a_f * theta_eps);
}

/// Regularly varying law built as X = S |X| with sign S = +1 w.p. p.
///
/// |X| has survival function P(|X| > x) = min(1, L(x) x^-alpha), and the
/// support starts at the point where the power law reaches one, so for a
/// constant L = c the law is Pareto with scale c^(1/alpha). The canonical
/// case L = 1 gives support [1, inf) and P(|X| > x) = x^-alpha.
class RegVarDist {
 public:
  RegVarDist(double alpha, double p, SlowlyVaryingSpec sv)
      : alpha_(alpha), p_(p), sv_(std::move(sv)) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw ValidationError("tail index alpha must be finite and > 0");
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError("tail balance p must lie in [0, 1]");
    inv_alpha_ = 1.0 / alpha_;
    if (const auto* c = std::get_if<ConstantSv>(&sv_.variant())) {
      constant_ = c->c;
      support_min_ = std::pow(c->c, inv_alpha_);
    } else {
      support_min_ = locate_support();
    }
  }

  /// Pareto magnitude on [scale, inf) with P(|X| > x) = (x/scale)^-alpha.
  static RegVarDist pareto(double alpha, double p = 1.0, double scale = 1.0) {
    if (!(scale > 0.0)) throw ValidationError("Pareto scale must be > 0");
    return RegVarDist(alpha, p,
                      SlowlyVaryingSpec::constant(std::pow(scale, alpha)));
  }

  [[nodiscard]] double alpha() const noexcept { return alpha_; }
  [[nodiscard]] double p() const noexcept { return p_; }
  [[nodiscard]] const SlowlyVaryingSpec& sv() const noexcept { return sv_; }
  [[nodiscard]] double support_min() const noexcept { return support_min_; }
  [[nodiscard]] bool one_sided() const noexcept { return p_ == 1.0; }

  /// P(|X| > x).
  [[nodiscard]] double abs_tail(double x) const {
    if (x < support_min_) return 1.0;
    if (constant_) return *constant_ * std::pow(x, -alpha_);
    return std::min(1.0, power_tail(x));
  }

  /// P(X > x).
  [[nodiscard]] double tail(double x) const {
    if (x >= support_min_) return p_ * abs_tail(x);
    if (x >= -support_min_) return p_;
    return p_ + (1.0 - p_) * (1.0 - abs_tail(-x));
  }

  /// P(X <= x), computed without cancellation in the left tail.
  [[nodiscard]] double cdf(double x) const {
    if (x < -support_min_) return (1.0 - p_) * abs_tail(-x);
    if (x < support_min_) return 1.0 - p_;
    return 1.0 - p_ * abs_tail(x);
  }

  /// The magnitude m >= support_min with P(|X| > m) = v, v in (0, 1].
  [[nodiscard]] double abs_tail_quantile(double v) const {
    if (!(v > 0.0 && v <= 1.0))
      throw DomainError("tail level must lie in (0, 1]");
    if (constant_) return std::max(support_min_, std::pow(*constant_ / v, inv_alpha_));
    if (v >= 1.0) return support_min_;
    // Bisection in log space on the decreasing branch above support_min.
    double lo = support_min_;
    double hi = support_min_ * 2.0;
    while (power_tail(hi) > v) {
      lo = hi;
      hi *= 2.0;
    }
    for (int i = 0; i < 200 && hi - lo > 4e-16 * hi; ++i) {
      const double mid = std::sqrt(lo * hi);
      (power_tail(mid) > v ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  /// Inverse distribution function: the smallest x with cdf(x) >= u.
  [[nodiscard]] double quantile(double u) const {
    if (!(u > 0.0 && u < 1.0))
      throw DomainError("quantile level must lie in (0, 1)");
    const double left_mass = 1.0 - p_;
    if (u <= left_mass) return -abs_tail_quantile(u / left_mass);
    return abs_tail_quantile((1.0 - u) / p_);
  }

  /// The x with P(X > x) = v for v in (0, p]; accurate for tiny v.
  [[nodiscard]] double tail_quantile(double v) const {
    if (!(v > 0.0 && v <= p_))
      throw DomainError("right-tail level must lie in (0, p]");
    return abs_tail_quantile(v / p_);
  }

  template <UniformSource U>
  [[nodiscard]] double sample(U& source) const {
    return quantile(source.uniform());
  }

  friend bool operator==(const RegVarDist& lhs, const RegVarDist& rhs) {
    return lhs.alpha_ == rhs.alpha_ && lhs.p_ == rhs.p_ && lhs.sv_ == rhs.sv_;
  }

 private:
  [[nodiscard]] double power_tail(double x) const {
    return sv_(x) * std::pow(x, -alpha_);
  }

  /// Largest x with L(x) x^-alpha = 1, beyond which the power law must be
  /// nonincreasing.
  [[nodiscard]] double locate_support() const {
    double peak = 1.0;
    if (const auto* l = std::get_if<LogSv>(&sv_.variant()); l && l->a > 0.0) {
      // d/dx [(a log x + b) x^-alpha] = 0 at a log x + b = a / alpha.
      peak = std::max(1.0, std::exp((l->a / alpha_ - l->b) / l->a));
    }
    if (!(power_tail(peak) >= 1.0)) {
      double x = peak;
      for (int i = 0; i < 2000 && !(power_tail(x) >= 1.0); ++i) x *= 0.5;
      if (!(power_tail(x) >= 1.0) || !(x > 0.0))
        throw ValidationError(
            "slowly varying spec never reaches total mass one: L(x) x^-alpha "
            "< 1 everywhere");
      peak = x;
    }
    double lo = peak;
    double hi = peak * 2.0;
    while (power_tail(hi) >= 1.0) {
      lo = hi;
      hi *= 2.0;
      if (!std::isfinite(hi))
        throw ValidationError("slowly varying spec does not decay");
    }
    for (int i = 0; i < 200 && hi - lo > 4e-16 * hi; ++i) {
      const double mid = std::sqrt(lo * hi);
      (power_tail(mid) >= 1.0 ? lo : hi) = mid;
    }
    const double s = lo;
    // The survival function must be nonincreasing on the support.
    double prev = 1.0;
    for (double x = s; x < s * 1e12; x *= 1.25) {
      const double g = power_tail(x);
      if (g > prev * (1.0 + 1e-12))
        throw ValidationError(
            "slowly varying spec gives a non-monotone tail above the support");
      prev = std::min(prev, g);
    }
    return s;
  }

  double alpha_;
  double p_;
  SlowlyVaryingSpec sv_;
  double inv_alpha_ = 1.0;
  std::optional<double> constant_;
  double support_min_ = 1.0;
};

/// P(X > x).
inline double tail(const RegVarDist& dist, double x) { return dist.tail(x); }

/// Inverse-transform draw for a given uniform level u in (0, 1).
inline double quantile_sample(const RegVarDist& dist, double u) {
  return dist.quantile(u);
}

/// P(scale * X > y); scale = 0 gives the degenerate indicator.
inline double scaled_tail(const RegVarDist& dist, double scale, double y) {
  if (scale > 0.0) return dist.tail(y / scale);
  if (scale < 0.0) return dist.cdf(y / scale);
  return y < 0.0 ? 1.0 : 0.0;
}

/// Hill estimator of the tail index from the k largest order statistics of
/// |samples|.
inline double hill_estimate(std::span<const double> samples, std::size_t k) {
  if (k == 0) throw DiagnosticError("Hill estimator needs k >= 1");
  std::vector<double> mags;
  mags.reserve(samples.size());
  for (double s : samples) {
    const double m = std::abs(s);
    if (m > 0.0 && std::isfinite(m)) mags.push_back(m);
  }
  if (mags.size() < k + 1)
    throw DiagnosticError("Hill estimator needs more than k positive samples");
  auto kth = mags.begin() + static_cast<std::ptrdiff_t>(k);
  std::nth_element(mags.begin(), kth, mags.end(), std::greater<>{});
  const double threshold = *kth;
  double acc = 0.0;
  for (auto it = mags.begin(); it != kth; ++it) acc += std::log(*it / threshold);
  const double h = acc / static_cast<double>(k);
  if (!(h > 0.0))
    throw DiagnosticError("Hill estimator: no variation in the upper tail");
  return 1.0 / h;
}

}  // namespace ldfactor
