#pragma once

// Static factor model R_i = sum_j L_ij F_j + eps_i and the decomposition of
// S_n = sum_i R_i into column-sum weighted factors plus idiosyncratic terms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ldfactor/errors.hpp"
#include "ldfactor/random.hpp"
#include "ldfactor/rv_dist.hpp"
#include "ldfactor/stats.hpp"

namespace ldfactor {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Fixed loading row shared by every asset.
struct DeterministicLoadings {
  std::vector<double> values;

  friend bool operator==(const DeterministicLoadings&,
                         const DeterministicLoadings&) = default;
};

/// Loading rows drawn i.i.d., coordinate j uniform on ranges[j].
struct BoundedIidLoadings {
  std::vector<Interval> ranges;

  friend bool operator==(const BoundedIidLoadings&,
                         const BoundedIidLoadings&) = default;
};

class LoadingSpec {
 public:
  using Variant = std::variant<DeterministicLoadings, BoundedIidLoadings>;

  LoadingSpec(Variant v) : v_(std::move(v)) { validate(); }

  static LoadingSpec deterministic(std::vector<double> values) {
    return LoadingSpec(DeterministicLoadings{std::move(values)});
  }
  static LoadingSpec bounded_iid(std::vector<Interval> ranges) {
    return LoadingSpec(BoundedIidLoadings{std::move(ranges)});
  }
  /// d identical coordinates uniform on [lo, hi].
  static LoadingSpec uniform_iid(std::size_t d, double lo, double hi) {
    return bounded_iid(std::vector<Interval>(d, Interval{lo, hi}));
  }

  [[nodiscard]] std::size_t dim() const {
    return std::visit(
        [](const auto& s) -> std::size_t {
          if constexpr (requires { s.values; }) {
            return s.values.size();
          } else {
            return s.ranges.size();
          }
        },
        v_);
  }

  /// The mean loading vector EL.
  [[nodiscard]] std::vector<double> mean() const {
    if (const auto* det = std::get_if<DeterministicLoadings>(&v_))
      return det->values;
    const auto& iid = std::get<BoundedIidLoadings>(v_);
    std::vector<double> out;
    out.reserve(iid.ranges.size());
    for (const auto& r : iid.ranges) out.push_back(0.5 * (r.lo + r.hi));
    return out;
  }

  [[nodiscard]] bool is_deterministic() const {
    return std::holds_alternative<DeterministicLoadings>(v_);
  }

  /// True when the d loading columns are identically distributed, which
  /// makes the factor terms exchangeable given i.i.d. factors.
  [[nodiscard]] bool exchangeable_columns() const {
    if (const auto* det = std::get_if<DeterministicLoadings>(&v_)) {
      return std::all_of(det->values.begin(), det->values.end(),
                         [&](double v) { return v == det->values.front(); });
    }
    const auto& r = std::get<BoundedIidLoadings>(v_).ranges;
    return std::all_of(r.begin(), r.end(),
                       [&](const Interval& i) { return i == r.front(); });
  }

  [[nodiscard]] const Variant& variant() const noexcept { return v_; }

  friend bool operator==(const LoadingSpec&, const LoadingSpec&) = default;

 private:
  void validate() const {
    if (dim() == 0) throw ValidationError("loadings need at least one factor");
    if (const auto* iid = std::get_if<BoundedIidLoadings>(&v_)) {
      for (const auto& r : iid->ranges) {
        if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || !(r.lo <= r.hi))
          throw ValidationError(
              "bounded loading range must be a finite interval lo <= hi");
      }
    } else {
      for (double v : std::get<DeterministicLoadings>(v_).values)
        if (!std::isfinite(v))
          throw ValidationError("deterministic loadings must be finite");
    }
    const auto m = mean();
    if (std::all_of(m.begin(), m.end(), [](double v) { return v == 0.0; }))
      throw ValidationError("mean loading vector EL must be nonzero");
  }

  Variant v_;
};

/// d i.i.d. factors, n i.i.d. idiosyncratic terms and i.i.d. loading rows.
class FactorModelSpec {
 public:
  FactorModelSpec(RegVarDist factor, RegVarDist idio, LoadingSpec loadings)
      : factor_(std::move(factor)),
        idio_(std::move(idio)),
        loadings_(std::move(loadings)) {
    if (!(factor_.alpha() > 2.0))
      throw ValidationError("factor.alpha must be > 2 (tail index above 2 is "
                            "required for the large-deviation regime)");
    if (!(idio_.alpha() > 2.0))
      throw ValidationError("idio.alpha must be > 2 (tail index above 2 is "
                            "required for the large-deviation regime)");
  }

  [[nodiscard]] std::size_t d() const { return loadings_.dim(); }
  [[nodiscard]] const RegVarDist& factor_dist() const noexcept { return factor_; }
  [[nodiscard]] const RegVarDist& idio_dist() const noexcept { return idio_; }
  [[nodiscard]] const LoadingSpec& loading_spec() const noexcept { return loadings_; }

  friend bool operator==(const FactorModelSpec&, const FactorModelSpec&) = default;

 private:
  RegVarDist factor_;
  RegVarDist idio_;
  LoadingSpec loadings_;
};

/// One joint draw of the model, decomposed.
struct SumSample {
  double s_n = 0.0;
  std::vector<double> factor_terms;  // S^L_{n,j} F_j
  std::vector<double> idio_terms;    // eps_i
  std::vector<double> column_sums;   // S^L_{n,j}
};

/// Column sums S^L_{n,j} = sum_i L_ij. Random rows are drawn row by row, so
/// consecutive calls on one stream behave like one call with the summed n.
template <UniformSource U>
void column_sums_into(const LoadingSpec& loadings, std::size_t n, U& rng,
                      std::vector<double>& out) {
  const std::size_t d = loadings.dim();
  out.assign(d, 0.0);
  if (const auto* det = std::get_if<DeterministicLoadings>(&loadings.variant())) {
    for (std::size_t j = 0; j < d; ++j)
      out[j] = static_cast<double>(n) * det->values[j];
    return;
  }
  const auto& ranges = std::get<BoundedIidLoadings>(loadings.variant()).ranges;
  std::vector<CompensatedSum> acc(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const auto& r = ranges[j];
      acc[j].add(r.lo + (r.hi - r.lo) * rng.uniform());
    }
  }
  for (std::size_t j = 0; j < d; ++j) out[j] = acc[j].value();
}

template <UniformSource U>
std::vector<double> column_sums(const LoadingSpec& loadings, std::size_t n,
                                U& rng) {
  std::vector<double> out;
  column_sums_into(loadings, n, rng, out);
  return out;
}

/// Draws (Lambda_n, F_d, eps) into `out`, reusing its buffers. Loadings,
/// factors and idiosyncratic terms read from separate sub-streams.
inline void sample_sum_into(const FactorModelSpec& spec, std::size_t n,
                            SubStreams& streams, SumSample& out) {
  if (n == 0) throw DomainError("sample_sum needs n >= 1");
  const std::size_t d = spec.d();
  column_sums_into(spec.loading_spec(), n, streams.loadings, out.column_sums);
  out.factor_terms.resize(d);
  for (std::size_t j = 0; j < d; ++j)
    out.factor_terms[j] =
        out.column_sums[j] * spec.factor_dist().sample(streams.factors);
  out.idio_terms.resize(n);
  for (auto& e : out.idio_terms) e = spec.idio_dist().sample(streams.idio);

  CompensatedSum total;
  for (double v : out.factor_terms) total.add(v);
  for (double v : out.idio_terms) total.add(v);
  out.s_n = total.value();
}

inline SumSample sample_sum(const FactorModelSpec& spec, std::size_t n,
                            SubStreams& streams) {
  SumSample out;
  sample_sum_into(spec, n, streams, out);
  return out;
}

}  // namespace ldfactor
