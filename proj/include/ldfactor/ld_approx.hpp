#pragma once

// Closed-form large-deviation approximations of P(S_n > lambda_n x) for the
// static factor model, and classification of polynomial scalings
// lambda_n = n^gamma into factor-dominated, idiosyncratic-dominated and
// mixed regimes.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ldfactor/errors.hpp"
#include "ldfactor/factor_model.hpp"
#include "ldfactor/rv_dist.hpp"

namespace ldfactor {

struct FactorDominated {
  friend bool operator==(const FactorDominated&, const FactorDominated&) = default;
};
struct IdioDominated {
  friend bool operator==(const IdioDominated&, const IdioDominated&) = default;
};
/// Both sums contribute; C is the limiting ratio of slowly varying factors.
struct Mixed {
  double c = 1.0;
  friend bool operator==(const Mixed&, const Mixed&) = default;
};

using Regime = std::variant<FactorDominated, IdioDominated, Mixed>;

inline std::string to_string(const Regime& r) {
  if (std::holds_alternative<FactorDominated>(r)) return "factor-dominated";
  if (std::holds_alternative<IdioDominated>(r)) return "idio-dominated";
  return "mixed(C=" + std::to_string(std::get<Mixed>(r).c) + ")";
}

struct CriticalExponents {
  double theta_factor = 0.0;
  double theta_eps = 0.0;
};

/// theta_F = (alpha_F - 1) / (alpha_F - alpha_eps), theta_eps = theta_F - 1.
inline CriticalExponents critical_exponents(double alpha_factor,
                                            double alpha_eps) {
  if (!(alpha_eps > 2.0))
    throw RegimeError("critical exponents need alpha_eps > 2");
  if (!(alpha_factor > alpha_eps))
    throw RegimeError(
        "critical exponents need alpha_F > alpha_eps; with alpha_F <= "
        "alpha_eps the factor term dominates for every lambda_n >> n");
  const double theta = (alpha_factor - 1.0) / (alpha_factor - alpha_eps);
  return {theta, theta - 1.0};
}

/// Relative tolerance under which a scaling exponent counts as critical.
inline constexpr double kCriticalTolerance = 1e-12;

/// Classifies lambda_n = n^lambda_exponent. `c` is the slowly varying ratio
/// limit (possibly +infinity), only consulted at the critical exponent.
inline Regime classify_regime(double alpha_factor, double alpha_eps,
                              double lambda_exponent, double c) {
  if (!(lambda_exponent > 1.0))
    throw RegimeError(
        "lambda_n = n^" + std::to_string(lambda_exponent) +
        " is outside the large-deviation region: need lambda_n >> n so that "
        "sqrt(n log n) / lambda_n -> 0");
  if (alpha_factor <= alpha_eps) return FactorDominated{};
  const double theta = critical_exponents(alpha_factor, alpha_eps).theta_factor;
  if (std::abs(lambda_exponent - theta) <= kCriticalTolerance * theta) {
    if (std::isfinite(c)) return Mixed{c};
    return IdioDominated{};
  }
  if (lambda_exponent > theta) return IdioDominated{};
  return FactorDominated{};
}

/// mu((EL)^-1 (1, inf)) for i.i.d. factors whose limit measure sits on the
/// coordinate axes, with right-tail balance p.
struct AxisIid {
  std::vector<double> mean_loadings;
  double alpha_factor = 0.0;
  double p = 1.0;
  friend bool operator==(const AxisIid&, const AxisIid&) = default;
};

/// A caller-supplied value of mu((EL)^-1 (1, inf)).
struct UserScalar {
  double value = 0.0;
  friend bool operator==(const UserScalar&, const UserScalar&) = default;
};

using MuFunctional = std::variant<AxisIid, UserScalar>;

/// Evaluates the functional. Appends a message to `diagnostics` when the
/// direction EL puts no mass in (1, inf).
inline double mu_value(const MuFunctional& mu,
                       std::vector<std::string>* diagnostics = nullptr) {
  if (const auto* user = std::get_if<UserScalar>(&mu)) {
    if (!(user->value >= 0.0) || !std::isfinite(user->value))
      throw DomainError("user mu value must be finite and >= 0");
    return user->value;
  }
  const auto& axis = std::get<AxisIid>(mu);
  if (!(axis.alpha_factor > 0.0)) throw DomainError("mu needs alpha_F > 0");
  double total = 0.0;
  for (double el : axis.mean_loadings) {
    if (el > 0.0) {
      total += axis.p * std::pow(el, -axis.alpha_factor);
    } else if (el < 0.0) {
      total += (1.0 - axis.p) * std::pow(-el, -axis.alpha_factor);
    }
  }
  if (total == 0.0 && diagnostics)
    diagnostics->push_back(
        "mu is zero: no mean loading direction reaches (1, inf) through the "
        "factor tails");
  return total;
}

/// The axis functional implied by a model spec.
inline MuFunctional axis_mu(const FactorModelSpec& spec) {
  return AxisIid{spec.loading_spec().mean(), spec.factor_dist().alpha(),
                 spec.factor_dist().p()};
}

namespace detail {

/// Constant part of L, or L evaluated at `at` when it grows like a log.
inline double sv_level(const SlowlyVaryingSpec& sv, double at) {
  if (auto lim = sv.limit()) return *lim;
  return sv(at);
}

}  // namespace detail

/// Factor and idiosyncratic parts of the approximation.
struct LdTerms {
  double factor = 0.0;
  double idio = 0.0;
  [[nodiscard]] double total() const { return factor + idio; }
};

/// A_F = mu * L_F * (lambda_n x / n)^-alpha_F and
/// A_eps = n * p_eps * L_eps * (lambda_n x)^-alpha_eps.
///
/// With constant (or convergent) slowly varying factors both terms are
/// kept in every regime. Otherwise the regime of the polynomial scaling
/// lambda_n = n^(log lambda_n / log n) selects the dominant term(s).
inline LdTerms ld_tail_terms(const FactorModelSpec& spec,
                             const MuFunctional& mu, std::size_t n,
                             double lambda_n, double x) {
  if (n == 0) throw DomainError("ld_tail_approx needs n >= 1");
  if (!(lambda_n > 0.0)) throw DomainError("ld_tail_approx needs lambda_n > 0");
  if (!(x > 0.0)) throw DomainError("ld_tail_approx needs x > 0");
  const auto& f = spec.factor_dist();
  const auto& e = spec.idio_dist();
  const double nn = static_cast<double>(n);
  const double factor_arg = lambda_n * x / nn;
  const double idio_arg = lambda_n * x;

  LdTerms terms;
  terms.factor = mu_value(mu) * detail::sv_level(f.sv(), factor_arg) *
                 std::pow(factor_arg, -f.alpha());
  terms.idio = nn * e.p() * detail::sv_level(e.sv(), idio_arg) *
               std::pow(idio_arg, -e.alpha());

  const bool bounded_sv = f.sv().limit().has_value() && e.sv().limit().has_value();
  if (bounded_sv || n < 2) return terms;

  const double gamma = std::log(lambda_n) / std::log(nn);
  double c = 1.0;
  if (f.alpha() > e.alpha()) {
    const auto th = critical_exponents(f.alpha(), e.alpha());
    c = sv_ratio_limit(e.sv(), f.sv(), th.theta_factor, th.theta_eps);
  }
  const Regime regime = classify_regime(f.alpha(), e.alpha(), gamma, c);
  if (std::holds_alternative<FactorDominated>(regime)) terms.idio = 0.0;
  if (std::holds_alternative<IdioDominated>(regime)) terms.factor = 0.0;
  return terms;
}

inline double ld_tail_approx(const FactorModelSpec& spec,
                             const MuFunctional& mu, std::size_t n,
                             double lambda_n, double x) {
  return ld_tail_terms(spec, mu, n, lambda_n, x).total();
}

}  // namespace ldfactor
