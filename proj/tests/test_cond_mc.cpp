#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ldfactor/cond_mc.hpp"

using namespace ldfactor;

namespace {

FactorModelSpec model(LoadingSpec loadings) {
  return FactorModelSpec(RegVarDist::pareto(5.0), RegVarDist::pareto(3.0),
                         std::move(loadings));
}

FactorModelSpec ones(std::size_t d) {
  return model(LoadingSpec::deterministic(std::vector<double>(d, 1.0)));
}

double combined_se(const TailEstimate& a, const TailEstimate& b) {
  return std::hypot(a.std_error, b.std_error);
}

// P(X + eps > lambda), X ~ Exp(1), eps ~ Pareto(3) on [1, inf), by
// composite Simpson on the smooth part plus the exact remainder.
double convolution_tail(double lambda) {
  const double kink = lambda - 1.0;
  const int m = 20000;
  const double h = kink / m;
  auto f = [&](double u) { return std::exp(-u) * std::pow(lambda - u, -3.0); };
  double s = f(0.0) + f(kink);
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return s * h / 3.0 + std::exp(-kink);
}

}  // namespace

TEST(CondMc, BelowSupportIsCertain) {
  const auto spec = ones(1);
  const auto e = estimate_tail_cmc(spec, 1, 1.5, {4000, 1, 1});
  EXPECT_NEAR(e.value, 1.0, 4.0 * e.std_error + 1e-12);
  EXPECT_LE(e.ci95.first, e.value);
  EXPECT_GE(e.ci95.second, e.value);
}

TEST(CondMc, NaiveTrivialCases) {
  const auto spec = ones(3);
  const auto e = estimate_tail_naive(spec, 4, -1.0, {500, 3, 1});
  EXPECT_EQ(e.value, 1.0);
  EXPECT_EQ(e.std_error, 0.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto one = estimate_tail_naive(spec, 4, 20.0, {1, seed, 1});
    EXPECT_TRUE(one.value == 0.0 || one.value == 1.0);
  }
}

TEST(CondMc, ArgumentErrors) {
  const auto spec = ones(2);
  EXPECT_THROW((void)estimate_tail_cmc(spec, 5, 0.0, {}), DomainError);
  EXPECT_THROW((void)estimate_tail_cmc(spec, 0, 1.0, {}), DomainError);
  EXPECT_THROW((void)estimate_tail_cmc(spec, 5, 1.0, {0, 0, 1}), DomainError);
  const auto uneven = model(LoadingSpec::deterministic({1.0, 2.0}));
  EXPECT_THROW((void)estimate_tail_cmc(uneven, 5, 10.0, {}), ValidationError);
  const auto unequal = model(LoadingSpec::bounded_iid({{0.0, 1.0}, {0.0, 2.0}}));
  EXPECT_THROW((void)estimate_tail_cmc(unequal, 5, 10.0, {}), ValidationError);
  const auto negative = model(LoadingSpec::deterministic({-1.0}));
  EXPECT_THROW((void)estimate_tail_cmc(negative, 5, 10.0, {}), ValidationError);
}

TEST(CondMc, EstimatorBounded) {
  const auto spec = model(LoadingSpec::uniform_iid(3, -0.5, 1.5));
  SubStreams streams(8, 0);
  SumSample s;
  for (int i = 0; i < 5000; ++i) {
    sample_sum_into(spec, 7, streams, s);
    for (double x : {0.5, 5.0, 50.0, 5000.0}) {
      const double z = cmc_draw(spec, s, x);
      ASSERT_GE(z, 0.0);
      ASSERT_LE(z, 7.0 + 3.0);
    }
  }
}

TEST(CondMc, AgreesWithNaive) {
  const auto spec = ones(2);
  const double x = 25.0;
  const auto naive = estimate_tail_naive(spec, 5, x, {400000, 31, 1});
  const auto cmc = estimate_tail_cmc(spec, 5, x, {20000, 32, 1});
  ASSERT_GT(naive.value, 1e-3);
  EXPECT_LE(std::abs(cmc.value - naive.value), 3.0 * combined_se(cmc, naive));
}

TEST(CondMc, AgreesWithNaiveRandomLoadings) {
  const auto spec = model(LoadingSpec::uniform_iid(2, 0.0, 2.0));
  const double x = 25.0;
  const auto naive = estimate_tail_naive(spec, 5, x, {400000, 41, 1});
  const auto cmc = estimate_tail_cmc(spec, 5, x, {20000, 42, 1});
  ASSERT_GT(naive.value, 1e-3);
  EXPECT_LE(std::abs(cmc.value - naive.value), 3.0 * combined_se(cmc, naive));
}

TEST(CondMc, AgreesWithNaiveTwoSided) {
  const FactorModelSpec spec(RegVarDist::pareto(5.0, 0.6), RegVarDist::pareto(3.0, 0.7),
                             LoadingSpec::uniform_iid(2, -0.5, 2.0));
  const double x = 15.0;
  const auto naive = estimate_tail_naive(spec, 5, x, {400000, 51, 1});
  const auto cmc = estimate_tail_cmc(spec, 5, x, {20000, 52, 1});
  ASSERT_GT(naive.value, 1e-3);
  EXPECT_LE(std::abs(cmc.value - naive.value), 3.0 * combined_se(cmc, naive));
}

TEST(CondMc, MaxTermAttribution) {
  // E[factor part] = P(S > x, max is a factor term), likewise for eps.
  const auto spec = ones(2);
  const std::size_t n = 5;
  const double x = 20.0;
  SubStreams direct(61, 0);
  SumSample s;
  const int naive_iters = 400000;
  double hit_factor = 0.0, hit_idio = 0.0;
  for (int i = 0; i < naive_iters; ++i) {
    sample_sum_into(spec, n, direct, s);
    if (!(s.s_n > x)) continue;
    const double mf = *std::max_element(s.factor_terms.begin(), s.factor_terms.end());
    const double me = *std::max_element(s.idio_terms.begin(), s.idio_terms.end());
    (mf > me ? hit_factor : hit_idio) += 1.0;
  }
  SubStreams cond(62, 0);
  const int cmc_iters = 40000;
  std::vector<double> zf, ze;
  double parts[2];
  for (int i = 0; i < cmc_iters; ++i) {
    sample_sum_into(spec, n, cond, s);
    cmc_draw(spec, s, x, parts);
    zf.push_back(parts[0]);
    ze.push_back(parts[1]);
  }
  auto check = [&](double hits, const std::vector<double>& z) {
    const double p = hits / naive_iters;
    const auto m = SampleMoments::from(z);
    const double se = std::hypot(std::sqrt(p * (1 - p) / naive_iters),
                                 std::sqrt(m.variance() / cmc_iters));
    EXPECT_NEAR(m.mean(), p, 3.0 * se);
  };
  check(hit_factor, zf);
  check(hit_idio, ze);
}

TEST(CondMc, WorkerCountDoesNotChangeBits) {
  const auto spec = model(LoadingSpec::uniform_iid(3, 0.5, 1.5));
  const McOptions one{3000, 77, 1};
  const McOptions many{3000, 77, 5};
  const auto a = estimate_tail_cmc(spec, 20, 60.0, one);
  const auto b = estimate_tail_cmc(spec, 20, 60.0, many);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.std_error, b.std_error);
  const auto c = estimate_tail_naive(spec, 20, 30.0, one);
  const auto d = estimate_tail_naive(spec, 20, 30.0, many);
  EXPECT_EQ(c.value, d.value);
  const auto e = estimate_tail_cmc(spec, 20, 60.0, {3000, 78, 1});
  EXPECT_NE(a.value, e.value);
}

TEST(CondMc, VarianceReductionAtSmallProbability) {
  const auto spec = ones(10);
  const McOptions opt{2000, 0, 1};
  const auto cmc = estimate_tail_cmc(spec, 1000, 1e6, opt);
  const auto naive = estimate_tail_naive(spec, 1000, 1e6, opt);
  EXPECT_LT(cmc.std_error, 0.1 * cmc.value);
  EXPECT_EQ(naive.value, 0.0);
  EXPECT_NEAR(cmc.value, 1.17e-14, 0.02e-14);
}

TEST(CondMc, CompareTableLayout) {
  const auto spec = ones(10);
  const std::vector<std::size_t> ns{1000};
  const std::vector<double> xs{10.0};
  const auto single = compare_table(spec, axis_mu(spec), ns, xs, 2.0, {200, 0, 1});
  ASSERT_EQ(single.size(), 1u);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4e", single[0].ld_value);
  EXPECT_STREQ(buf, "1.1000e-18");
  EXPECT_EQ(single[0].lambda_n, 1e6);

  const std::vector<std::size_t> n2{100, 200};
  const std::vector<double> x2{1.0, 2.0, 3.0};
  const auto rows = compare_table(spec, axis_mu(spec), n2, x2, 2.0, {50, 0, 1});
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].x, 1.0);
  EXPECT_EQ(rows[1].x, 1.0);
  EXPECT_EQ(rows[1].n, 200u);
  EXPECT_EQ(rows[2].n, 100u);
  EXPECT_EQ(rows[5].x, 3.0);

  const std::vector<double> none;
  EXPECT_THROW((void)compare_table(spec, axis_mu(spec), ns, none, 2.0, {}), DomainError);
}

TEST(CondMc, LightTailSingleAssetQuadrature) {
  const ExponentialLaw light{1.0};
  const auto idio = RegVarDist::pareto(3.0);
  double previous = kInfinity;
  for (double lambda : {5.0, 20.0, 100.0}) {
    const double exact = convolution_tail(lambda);
    const auto r = light_tail_ratio(light, idio, 1, lambda, {100000, 3, 1});
    EXPECT_NEAR(r.probability.value, exact, 3.0 * r.probability.std_error + 1e-15);
    const double exact_ratio = exact / idio.tail(lambda);
    EXPECT_LT(std::abs(exact_ratio - 1.0), std::abs(previous - 1.0));
    previous = exact_ratio;
  }
  EXPECT_LT(std::abs(previous - 1.0), 0.04);
}

TEST(CondMc, LightTailRatioNearOne) {
  const auto r = light_tail_check(ExponentialLaw{1.0}, RegVarDist::pareto(3.0), 1000,
                                  PolynomialScaling{2.0}, {10000, 5, 1});
  EXPECT_GT(r.ratio, 0.8);
  EXPECT_LT(r.ratio, 1.2);
}

TEST(CondMc, LightTailNeedsFastScaling) {
  EXPECT_THROW((void)light_tail_check(ExponentialLaw{1.0}, RegVarDist::pareto(3.0), 100,
                                      PolynomialScaling{1.0}, {}),
               RegimeError);
}
