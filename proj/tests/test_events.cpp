#include <catch2/catch_amalgamated.hpp>

#include "zeroone/events.hpp"
#include "zeroone/families/bc.hpp"
#include "zeroone/families/percolation.hpp"

using namespace zeroone;

namespace {

// Fair coins A_j from the sample seed; B(n,k) is A_k alone, or the union when lawful.
class CoinFamily final : public EventFamily {
 public:
  explicit CoinFamily(bool lawful) : lawful_(lawful) {}
  std::string name() const override { return lawful_ ? "coins-union" : "coins-last"; }
  Index horizon_cap() const override { return 64; }
  Capabilities capabilities() const override { return {false, true, false}; }

  std::unique_ptr<Configuration> draw_from_seed(std::uint64_t seed, SampleTag tag) const override {
    return std::make_unique<Cfg>(std::move(tag), seed, lawful_);
  }

 private:
  struct Cfg final : Configuration {
    Cfg(SampleTag t, std::uint64_t seed, bool lawful) : Configuration(std::move(t)), seed_(seed), lawful_(lawful) {}
    bool coin(std::uint64_t j) const { return rng::keyed(seed_, j) & 1; }
    bool indicator(const Index& n, const Index& k) const override {
      if (!lawful_) return coin(to_u64(k));
      for (auto j = to_u64(n); j <= to_u64(k); ++j) {
        if (coin(j)) return true;
      }
      return false;
    }
    std::uint64_t seed_;
    bool lawful_;
  };
  bool lawful_;
};

// Exact family with A_0 = A_1 (fully correlated fair coin), A_j independent otherwise.
class CorrelatedFamily final : public EventFamily {
 public:
  std::string name() const override { return "correlated"; }
  Index horizon_cap() const override { return 3; }
  Capabilities capabilities() const override { return {true, false, true}; }
  // atoms: bits b0 (A_0 = A_1 = b0), b2, b3
  static bool occurs(unsigned w, std::uint64_t j) { return j <= 1 ? (w & 1) : ((w >> (j - 1)) & 1); }
  static bool block(unsigned w, std::uint64_t n, std::uint64_t k) {
    for (auto j = n; j <= k; ++j) {
      if (occurs(w, j)) return true;
    }
    return false;
  }
  std::optional<ProbEstimate> exact_prob(const Index& n, const Index& k) const override {
    int hits = 0;
    for (unsigned w = 0; w < 8; ++w) hits += block(w, to_u64(n), to_u64(k));
    return ProbEstimate::exact(Rational(hits, 8));
  }
  std::optional<ProbEstimate> exact_joint(const Index& n, const Index& m, const Index& l, const Index& k) const override {
    int hits = 0;
    for (unsigned w = 0; w < 8; ++w) hits += block(w, to_u64(n), to_u64(m)) && block(w, to_u64(l), to_u64(k));
    return ProbEstimate::exact(Rational(hits, 8));
  }
};

}  // namespace

TEST_CASE("prob_of: empty windows and product formula") {
  const BorelCantelliFamily half(ConstantProb{Rational(1, 2)});
  SamplePlan plan;
  CHECK(prob_of(half, 5, 3, plan) == ProbEstimate::exact(0));
  // oracle: 1 - prod (1 - 1/2)
  CHECK(prob_of(half, 0, 3, plan).lo == Rational(15, 16));
  CHECK(prob_of(half, 0, 3, plan).is_exact());
}

TEST_CASE("prob_of: one-dimensional percolation closed form") {
  const PercolationFamily perc(LatticeSpec{1, Rational(1, 2), 16}, Polarity::Connected);
  SamplePlan plan;
  const auto e = prob_of(perc, 1, 3, plan);
  CHECK(e.is_exact());
  const Rational q = 1 - Rational(1, 4);
  CHECK(e.lo == 1 - q * q);
  CHECK(e.lo == Rational(7, 16));
}

TEST_CASE("prob_of reports a missing capability") {
  const CoinFamily coins(true);
  SamplePlan plan;
  CHECK_THROWS_AS(prob_of(coins, 0, 3, plan, EvalPath::Exact), CapabilityMissing);
  const ExactTableFamily table({{Rational(1, 2), Rational(1, 2)}, {Rational(1, 3)}});
  CHECK_THROWS_AS(prob_of(table, 0, 1, plan, EvalPath::Sampled), CapabilityMissing);
}

TEST_CASE("sampled prob_of of a union of fair coins covers the product formula") {
  const CoinFamily coins(true);
  SamplePlan plan;
  plan.samples = 20000;
  const auto e = prob_of(coins, 2, 4, plan);
  CHECK(e.is_sampled());
  CHECK(e.lo <= Rational(7, 8));
  CHECK(Rational(7, 8) <= e.hi);
}

TEST_CASE("check_closure: lawful unions pass, A_k alone fails") {
  const auto ok = check_closure(CoinFamily(true), 0, 8, 64, 5);
  CHECK(ok.method == "per-sample");
  CHECK(ok.ok());
  const auto bad = check_closure(CoinFamily(false), 0, 8, 64, 5);
  CHECK_FALSE(bad.ok());
  REQUIRE_FALSE(bad.violations.empty());
  const auto& t = bad.violations.front().tuple;
  CHECK(t.n <= t.m);
  CHECK(t.m < t.l);
  CHECK(t.l <= t.k);
  CHECK(bad.violations.front().sample_index.has_value());
}

TEST_CASE("check_closure: exact monotonicity path") {
  const BorelCantelliFamily half(ConstantProb{Rational(1, 2)}, 64);
  // BC also samples; a table forces the exact path
  const ExactTableFamily mono({{Rational(1, 10), Rational(1, 5)}, {Rational(1, 10)}});
  CHECK(check_closure(mono, 0, 1, 16, 1).method == "exact-monotonicity");
  CHECK(check_closure(mono, 0, 1, 16, 1).ok());
  const ExactTableFamily broken({{Rational(1, 2), Rational(1, 5)}, {Rational(1, 10)}});
  CHECK_FALSE(check_closure(broken, 0, 1, 16, 1).ok());
  CHECK(check_closure(half, 0, 20, 32, 1).ok());
}

TEST_CASE("check_pairwise_independence: exact product identity") {
  const BorelCantelliFamily geo(GeometricProb{Rational(1, 4), Rational(1, 2)}, 64);
  SamplePlan plan;
  const auto rep = check_pairwise_independence(geo, 0, 10, {}, plan);
  CHECK(rep.method == "exact");
  CHECK(rep.exhaustive);
  CHECK(rep.ok());
  CHECK(rep.tuples_checked == 715);  // C(13, 4)
  CHECK(rep.tuples_total == 715);
}

TEST_CASE("check_pairwise_independence: correlated pair is reported") {
  SamplePlan plan;
  const auto rep = check_pairwise_independence(CorrelatedFamily(), 0, 3, {}, plan);
  CHECK_FALSE(rep.ok());
  bool saw = false;
  for (const auto& f : rep.failures) {
    if (f.tuple == IndexTuple{0, 0, 1, 1}) {
      saw = true;
      CHECK(f.joint.lo == Rational(1, 2));
      CHECK(f.discrepancy == Rational(1, 4));
    }
  }
  CHECK(saw);
}

TEST_CASE("check_pairwise_independence: Monte Carlo on percolation") {
  const PercolationFamily perc(LatticeSpec{2, Rational(1, 2), 8});
  SamplePlan plan;
  plan.hypothesis_samples = 512;
  const auto rep = check_pairwise_independence(perc, 1, 4, {}, plan);
  CHECK(rep.method == "monte-carlo");
  CHECK(rep.ok());
}

TEST_CASE("tuple count formula matches direct enumeration") {
  for (int r = 0; r < 3; ++r) {
    for (int s = r; s < r + 12; ++s) {
      long long direct = 0;
      for (int n = r; n <= s; ++n)
        for (int m = n; m <= s; ++m)
          for (int l = m + 1; l <= s; ++l)
            for (int k = l; k <= s; ++k) ++direct;
      CHECK(count_independence_tuples(r, s) == direct);
    }
  }
}

TEST_CASE("property: configurations are consistent under horizon extension") {
  const BorelCantelliFamily geo(HarmonicProb{Rational(1, 2)}, 1000);
  const PercolationFamily perc(LatticeSpec{2, Rational(3, 5), 12});
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto small = geo.draw_configuration(9, i, 10), big = geo.draw_configuration(9, i, 40);
    const auto ps = perc.draw_configuration(9, i, 5), pb = perc.draw_configuration(9, i, 9);
    for (int n = 0; n <= 10; ++n) {
      for (int k = n; k <= 10; ++k) CHECK(small->indicator(n, k) == big->indicator(n, k));
    }
    for (int n = 0; n <= 5; ++n) {
      for (int k = n; k <= 5; ++k) CHECK(ps->indicator(n, k) == pb->indicator(n, k));
    }
  }
}

TEST_CASE("property: exact probabilities are monotone in the window") {
  const BorelCantelliFamily fam(HarmonicProb{Rational(1, 3)}, 64);
  SamplePlan plan;
  for (int n = 0; n < 15; ++n) {
    for (int k = n; k < 15; ++k) {
      CHECK(prob_of(fam, n, k, plan).hi <= prob_of(fam, n, k + 1, plan).hi);
      CHECK(prob_of(fam, n + 1, k, plan).hi <= prob_of(fam, n, k, plan).hi);
    }
  }
}
