#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "zeroone/probability.hpp"

using namespace zeroone;

namespace {

// Bernoulli(p) indicator from the per-sample seed.
auto bernoulli(double p) {
  return [p](std::uint64_t, std::uint64_t seed) {
    return static_cast<double>(rng::uniform53(seed)) / static_cast<double>(rng::two53) < p;
  };
}

}  // namespace

TEST_CASE("all-success and all-failure intervals use the one-sided closed form") {
  const Rational conf(95, 100);
  const auto one = estimate([](auto, auto) { return true; }, 100, 1, "ones", conf);
  CHECK(one.hi == 1);
  CHECK(to_double(one.lo) == Catch::Approx(std::pow(0.05, 0.01)).epsilon(1e-9));
  CHECK(one.lo <= from_double(std::pow(0.05, 0.01)));
  const auto zero = estimate([](auto, auto) { return false; }, 100, 1, "zeros", conf);
  CHECK(zero.lo == 0);
  CHECK(to_double(zero.hi) == Catch::Approx(1 - std::pow(0.05, 0.01)).epsilon(1e-9));
}

TEST_CASE("Clopper-Pearson matches the beta-quantile definition") {
  // oracle: the CP endpoints solve P(Bin(n,lo) >= k) = a/2 and P(Bin(n,hi) <= k) = a/2
  const std::uint64_t n = 50, k = 17;
  const auto e = binomial_interval(k, n, Rational(95, 100), IntervalKind::ClopperPearson, {});
  auto tail_ge = [&](double p) {
    double s = 0;
    for (std::uint64_t i = k; i <= n; ++i) s += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) + i * std::log(p) + (n - i) * std::log1p(-p));
    return s;
  };
  auto tail_le = [&](double p) {
    double s = 0;
    for (std::uint64_t i = 0; i <= k; ++i) s += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) + i * std::log(p) + (n - i) * std::log1p(-p));
    return s;
  };
  CHECK(tail_ge(to_double(e.lo)) == Catch::Approx(0.025).epsilon(1e-6));
  CHECK(tail_le(to_double(e.hi)) == Catch::Approx(0.025).epsilon(1e-6));
}

TEST_CASE("estimate is deterministic across runs and worker counts") {
  const auto a = estimate(bernoulli(0.3), 20000, 42, "det", Rational(19, 20), IntervalKind::ClopperPearson, 1);
  const auto b = estimate(bernoulli(0.3), 20000, 42, "det", Rational(19, 20), IntervalKind::ClopperPearson, 3);
  const auto c = estimate(bernoulli(0.3), 20000, 42, "det", Rational(19, 20), IntervalKind::ClopperPearson, 8);
  CHECK(a == b);
  CHECK(a == c);
  const auto other = estimate(bernoulli(0.3), 20000, 43, "det", Rational(19, 20));
  CHECK(std::get<MonteCarloMethod>(other.method).successes != std::get<MonteCarloMethod>(a.method).successes);
}

TEST_CASE("fair coin at 10^4 samples covers 1/2 for at least 93 of 100 seeds") {
  int covered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto e = estimate(bernoulli(0.5), 10000, seed, "coin", Rational(95, 100), IntervalKind::ClopperPearson, 1);
    covered += (e.lo <= Rational(1, 2) && Rational(1, 2) <= e.hi);
  }
  CHECK(covered >= 93);
}

TEST_CASE("coverage calibration over 200 seeds") {
  // P(Bin(200, 0.95) < 180) is about 0.2%, so the threshold is a loose sanity bound.
  for (const double p : {0.1, 0.5, 0.9}) {
    for (const auto kind : {IntervalKind::ClopperPearson, IntervalKind::Hoeffding}) {
      int covered = 0;
      for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto e = estimate(bernoulli(p), 1000, 1000 + seed, "cal", Rational(95, 100), kind, 1);
        // 53-bit thresholding realizes p within 2^-53; compare at double precision
        covered += (to_double(e.lo) <= p && p <= to_double(e.hi));
      }
      CHECK(covered >= 180);
    }
  }
}

TEST_CASE("plan_samples matches the Hoeffding count") {
  using Dec = boost::multiprecision::cpp_dec_float_50;
  auto oracle = [](const Dec& delta, const Dec& conf) {
    return boost::multiprecision::ceil(boost::multiprecision::log(2 / (1 - conf)) / (2 * delta * delta)).convert_to<long long>();
  };
  CHECK(plan_samples(Rational(1, 20), Rational(95, 100)) == 738);
  CHECK(plan_samples(Rational(1, 2), Rational(1, 2)) == 3);
  CHECK(plan_samples(Rational(1, 100), Rational(99, 100)) == 26492);
  CHECK(plan_samples(Rational(1, 20), Rational(95, 100)) == static_cast<std::uint64_t>(oracle(Dec("0.05"), Dec("0.95"))));
  CHECK(plan_samples(Rational(3, 100), Rational(9, 10)) == static_cast<std::uint64_t>(oracle(Dec("0.03"), Dec("0.9"))));
}

TEST_CASE("compare") {
  const auto iv = [](Rational lo, Rational hi) { return ProbEstimate::enclosure(lo, hi, "test"); };
  CHECK(compare(iv(Rational(1, 5), Rational(3, 10)), Rational(1, 2)).kind == ThresholdVerdict::Kind::Below);
  const auto mid = compare(iv(Rational(2, 5), Rational(3, 5)), Rational(1, 2));
  CHECK(mid.kind == ThresholdVerdict::Kind::Inconclusive);
  CHECK(mid.gap == Rational(1, 5));
  CHECK(compare(ProbEstimate::exact(Rational(3, 4)), Rational(1, 2)).kind == ThresholdVerdict::Kind::Above);
  CHECK(compare(ProbEstimate::exact(Rational(1, 2)), Rational(1, 2)).kind == ThresholdVerdict::Kind::Inconclusive);
}

TEST_CASE("property: Above is preserved when the threshold decreases") {
  for (int lo = 0; lo <= 20; ++lo) {
    for (int hi = lo; hi <= 20; ++hi) {
      const auto e = ProbEstimate::enclosure(Rational(lo, 20), Rational(hi, 20), "grid");
      for (int t = 0; t <= 20; ++t) {
        if (compare(e, Rational(t, 20)).kind != ThresholdVerdict::Kind::Above) continue;
        for (int u = 0; u < t; ++u) CHECK(compare(e, Rational(u, 20)).kind == ThresholdVerdict::Kind::Above);
      }
    }
  }
}

TEST_CASE("sampler failures carry the failing index") {
  try {
    estimate([](std::uint64_t i, std::uint64_t) -> bool {
      if (i == 77) throw std::runtime_error("boom");
      return true;
    }, 200, 1, "fail", Rational(19, 20), IntervalKind::ClopperPearson, 1);
    FAIL("no exception");
  } catch (const SamplerFailure& e) {
    CHECK(e.sample_index() == 77);
  }
}

TEST_CASE("Bonferroni split") {
  SamplePlan plan;
  plan.error_budget = Rational(1, 20);
  plan.total_comparisons = 10;
  CHECK(plan.per_comparison_error() == Rational(1, 200));
  CHECK(plan.per_comparison_confidence() == Rational(199, 200));
}
