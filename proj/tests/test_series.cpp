#include <catch2/catch_amalgamated.hpp>

#include "zeroone/families/series.hpp"

using namespace zeroone;

namespace {

// Brute force over sign patterns of X_{n+1..k} = +-c_i: does some |S_j - S_i| reach t?
Rational window_oracle(const std::vector<Rational>& c, std::size_t n, std::size_t k, const Rational& t) {
  const std::size_t w = k - n;
  std::uint64_t hits = 0;
  for (std::uint64_t mask = 0; mask < (1ull << w); ++mask) {
    Rational s = 0, lo = 0, hi = 0;
    for (std::size_t i = 0; i < w; ++i) {
      s += ((mask >> i) & 1) ? c[n + 1 + i] : -c[n + 1 + i];
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    hits += (hi - lo >= t);
  }
  return Rational(Index(hits), Index(1ull << w));
}

std::vector<Rational> dyadic_coeffs(std::size_t h) {
  std::vector<Rational> c;
  for (std::size_t i = 0; i < h; ++i) c.push_back(pow2(-static_cast<long>(i)));
  return c;
}

}  // namespace

TEST_CASE("metastable event probability: trivial and closed-form cases") {
  SamplePlan plan;
  CHECK(metastable_event_prob(SignedDyadic{}, 5, 5, 3, plan) == ProbEstimate::exact(0));
  for (unsigned p = 0; p < 8; ++p) {
    for (unsigned n = p; n < p + 4; ++n) CHECK(metastable_event_prob(SignedDyadic{}, n, n + 30, p, plan).lo == 0);
    if (p > 0) CHECK(metastable_event_prob(SignedDyadic{}, p - 1, p + 3, p, plan).lo == 1);
  }
}

TEST_CASE("signed dyadic closed form matches sign enumeration") {
  const auto c = dyadic_coeffs(14);
  SamplePlan plan;
  for (unsigned p = 0; p < 6; ++p) {
    for (std::size_t n = 0; n < 8; ++n) {
      for (std::size_t k = n; k < 14; k += 2) {
        CHECK(metastable_event_prob(SignedDyadic{}, n, k, p, plan).lo == window_oracle(c, n, k, pow2(-static_cast<long>(p))));
      }
    }
  }
}

TEST_CASE("uniform indicator reduces to the union product") {
  const QSequence q = GeometricApproach{Rational(1, 2), Rational(3, 4), Rational(1, 2)};
  SamplePlan plan;
  const auto e = metastable_event_prob(UniformIndicator{q}, 1, 4, 0, plan);
  Rational c = 1;
  for (int j = 2; j <= 4; ++j) c *= 1 - (q_at(q, j + 1) - q_at(q, j));
  CHECK(e.is_exact());
  CHECK(e.lo == 1 - c);
}

TEST_CASE("scaled signs: enumeration path against the oracle") {
  const std::vector<Rational> c{Rational(1, 2), Rational(1, 3), Rational(1, 4), Rational(1, 5), Rational(1, 6),
                                Rational(1, 7), Rational(1, 8), Rational(1, 9), Rational(1, 10), Rational(1, 11)};
  SamplePlan plan;
  for (unsigned p = 1; p < 4; ++p) {
    const SeriesEventFamily fam(ScaledSigns{c}, p);
    for (std::size_t n = 0; n < 6; ++n) {
      for (std::size_t k = n; k < c.size(); ++k) {
        CHECK(prob_of(fam, n, k, plan).lo == window_oracle(c, n, k, pow2(-static_cast<long>(p))));
      }
    }
  }
}

TEST_CASE("property: windows monotone and per-sample closure") {
  const std::vector<Rational> c{Rational(1, 2), Rational(1, 3), Rational(1, 4), Rational(1, 8), Rational(1, 3),
                                Rational(1, 5), Rational(1, 16), Rational(1, 7)};
  const SeriesEventFamily fam(ScaledSigns{c}, 2);
  SamplePlan plan;
  for (int n = 0; n < 7; ++n) {
    for (int k = n; k < 7; ++k) {
      CHECK(prob_of(fam, n, k, plan).lo <= prob_of(fam, n, k + 1, plan).lo);
      CHECK(prob_of(fam, n + 1, k, plan).lo <= prob_of(fam, n, k, plan).lo);
    }
  }
  CHECK(check_closure(fam, 0, 7, 256, 3).ok());
}

TEST_CASE("B^p independence by enumeration on a dyadic truncation (2^12 atoms)") {
  const auto c = dyadic_coeffs(13);
  const unsigned p = 6;
  const Rational t = pow2(-static_cast<long>(p));
  const SeriesEventFamily fam(ScaledSigns{c}, p);
  for (std::size_t n = 0; n < 12; n += 2) {
    for (std::size_t m = n + 1; m < 12; m += 2) {
      for (std::size_t l = m + 1; l < 12; l += 3) {
        const std::size_t k = 12;
        // joint oracle over X_1..X_12
        std::uint64_t hits = 0;
        for (std::uint64_t mask = 0; mask < (1ull << 12); ++mask) {
          auto range_hits = [&](std::size_t a, std::size_t b) {
            Rational s = 0, lo = 0, hi = 0;
            for (std::size_t i = a + 1; i <= b; ++i) {
              s += ((mask >> (i - 1)) & 1) ? c[i] : -c[i];
              lo = std::min(lo, s);
              hi = std::max(hi, s);
            }
            return hi - lo >= t;
          };
          hits += range_hits(n, m) && range_hits(l, k);
        }
        const Rational joint(Index(hits), Index(1) << 12);
        CHECK(joint == window_oracle(c, n, m, t) * window_oracle(c, l, k, t));
        CHECK(fam.exact_joint(n, m, l, k)->lo == joint);
      }
    }
  }
}

TEST_CASE("verify_conv examples") {
  SamplePlan plan;
  for (unsigned p = 0; p < 5; ++p) {
    const auto res = verify_conv(SignedDyadic{}, AffineCeilMap{Rational(1), Rational(1)}, Rational(1, 2), Rational(1, 10), p,
                                 GapFunction::offset(3), plan);
    REQUIRE(res.verdict.is_first());
    CHECK(res.verdict.first().n == p + 1);
    CHECK(res.verdict.first().estimate == ProbEstimate::exact(0));
  }
  const auto zero_gap = verify_conv(SignedDyadic{}, ConstantMap{0}, Rational(1, 2), Rational(1, 10), 3, GapFunction::offset(0), plan);
  REQUIRE(zero_gap.verdict.is_first());
  CHECK(zero_gap.verdict.first().n == 0);

  const QSequence q = GeometricApproach{Rational(1, 4), Rational(1, 2), Rational(1, 2)};
  SamplePlan mc;
  mc.samples = 2048;
  mc.force_sampling = true;
  const auto u = verify_conv(UniformIndicator{q}, ConstantMap{0}, Rational(1, 4), Rational(1, 4), 2, GapFunction::offset(1), mc);
  CHECK(u.verdict.conclusive());
  CHECK(u.truncation_status != "skipped");
  for (const auto& row : u.verdict.audit) CHECK(row.estimate.is_sampled());
}

TEST_CASE("three-series moduli for signed dyadic signs") {
  const ThreeSeriesModuli mod{1, 1, 1, ConstantMap{0}, AffineCeilMap{Rational(1, 2), Rational(1, 2)}};
  for (unsigned p = 0; p <= 10; ++p) CHECK(mod.phi(p) == p + 4);
  CHECK(mod.lambda() == Rational(1, 4));
  const auto val = validate_three_series(SignedDyadic{}, mod, 10);
  CHECK_FALSE(val.any_violated());
  SamplePlan plan;
  const auto res = verify_three_series(SignedDyadic{}, mod, Rational(1, 10), 3, GapFunction::offset(1), plan);
  REQUIRE(res.conv.verdict.is_first());
  CHECK(res.conv.verdict.first().estimate == ProbEstimate::exact(0));
  CHECK(res.phi == 7);

  // xi too small: sum_{n >= xi(p)} 4^-n must be below 2^-p
  const ThreeSeriesModuli bad{1, 1, 1, ConstantMap{0}, ConstantMap{0}};
  CHECK(validate_three_series(SignedDyadic{}, bad, 10).any_violated());
  CHECK_THROWS_AS(verify_three_series(SignedDyadic{}, bad, Rational(1, 10), 3, GapFunction::offset(1), plan), ModuliInvalid);
}

TEST_CASE("Kolmogorov maximal inequality holds by enumeration") {
  const std::vector<Rational> t_grid{Rational(1, 4), Rational(1, 2), Rational(1), Rational(3, 2), Rational(2)};
  for (std::size_t h = 1; h <= 16; h += 5) {
    std::vector<Rational> c;
    for (std::size_t i = 0; i < h; ++i) c.push_back(Rational(1, static_cast<long>(i + 1)));
    for (const auto& row : maximal_inequality_check(c, t_grid)) {
      CHECK(row.holds);
      CHECK(row.probability <= row.bound);
    }
  }
}
