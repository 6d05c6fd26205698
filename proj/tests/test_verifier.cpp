#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "zeroone/families/bc.hpp"
#include "zeroone/verifier.hpp"

using namespace zeroone;

namespace {

Rational product_oracle(const std::vector<Rational>& p, std::size_t n, std::size_t k) {
  Rational c = 1;
  for (std::size_t j = n; j <= k; ++j) c *= 1 - p[j];
  return 1 - c;
}

// Exact table of a union family with independent A_j, for indices 0..h.
ExactTableFamily union_table(const std::vector<Rational>& p) {
  std::vector<std::vector<Rational>> rows(p.size());
  for (std::size_t n = 0; n < p.size(); ++n) {
    for (std::size_t k = n; k < p.size(); ++k) rows[n].push_back(product_oracle(p, n, k));
  }
  return ExactTableFamily(rows);
}

}  // namespace

TEST_CASE("verify_independent: constant 1/2 gives the second disjunct") {
  const BorelCantelliFamily half(ConstantProb{Rational(1, 2)});
  SamplePlan plan;
  const auto v = verify_independent(half, Tolerances(Rational(1, 10), Rational(1, 10)), 0, GapFunction::offset(1), plan);
  REQUIRE(v.is_second());
  CHECK(v.params.j == 24);
  CHECK(v.second().s == 49);
  CHECK(v.second().estimate.lo == 1 - pow2(-50));
  CHECK(v.closure->ok());
  CHECK(v.independence->ok());

  const auto w = verify_independent(half, Tolerances(Rational(1, 100), Rational(1, 10)), 0, GapFunction::offset(1), plan);
  REQUIRE(w.is_second());
  CHECK(w.params.j == 231);
  CHECK(w.second().s == 463);
  CHECK(w.second().estimate.lo == 1 - pow2(-464));
}

TEST_CASE("verify_independent: geometric sequence gives the first disjunct") {
  const BorelCantelliFamily geo(GeometricProb{Rational(1, 4), Rational(1, 2)});
  SamplePlan plan;
  const auto v = verify_independent(geo, Tolerances(Rational(1, 4), Rational(1, 2)), 0, GapFunction::offset(1), plan);
  REQUIRE(v.is_first());
  CHECK(v.first().n <= v.params.bound);
  CHECK(v.first().estimate.lo < Rational(1, 4));
  CHECK(v.first().estimate.lo == bc_exact_prob(geo.sequence(), v.first().n, v.first().n + 1));
}

TEST_CASE("verify_main examples") {
  SamplePlan plan;
  const BorelCantelliFamily certain(ConstantProb{Rational(1)});
  const auto v = verify_main(certain, Tolerances(Rational(1, 4), Rational(1, 4)), 0, GapFunction::offset(1), Rational(5), 3, plan);
  CHECK(v.is_second());

  const BorelCantelliFamily half(ConstantProb{Rational(1, 2)});
  const Rational x = ln_recip_upper(Rational(1, 10));
  const auto h = verify_main(half, Tolerances(Rational(1, 10), Rational(1, 10)), 0, GapFunction::offset(1), x, 49, plan);
  CHECK(h.is_second());

  const BorelCantelliFamily geo(GeometricProb{Rational(1, 4), Rational(1, 2)});
  const auto g = verify_main(geo, Tolerances(Rational(1, 4), Rational(1, 2)), 0, GapFunction::offset(1), 1, 8, plan);
  REQUIRE(g.is_first());
  CHECK(g.first().estimate.hi < Rational(1, 4));
  CHECK(g.first().n <= g.params.bound);
  CHECK(g.params.bound == iterate_gap(GapFunction::offset(1), 4, 0));
}

TEST_CASE("verify_main reports a violated premise") {
  // Every block has probability 1/2 but the tail stays at 1/2 <= 1 - lambda, so sum < x fails.
  std::vector<std::vector<Rational>> rows(6);
  for (int n = 0; n < 6; ++n) {
    for (int k = n; k < 6; ++k) rows[n].push_back(Rational(1, 2));
  }
  const ExactTableFamily flat(rows);
  SamplePlan plan;
  const auto v = verify_main(flat, Tolerances(Rational(1, 4), Rational(1, 4)), 0, GapFunction::offset(0), 1, 5, plan);
  CHECK(v.is_premise_violated());
  CHECK(v.premise.status == "violated");
  CHECK(v.premise.sum_lo >= 1);
  CHECK_THROWS_AS(verify_main(flat, Tolerances(Rational(1, 4), Rational(1, 4)), 0, GapFunction::offset(0), 0, 5, plan),
                  InvalidArgument);
}

TEST_CASE("verify_independent with checks off on a lawless family") {
  // P(B(n,k)) drops when k turns odd, so the closure check fails
  std::vector<std::vector<Rational>> rows(40);
  for (int n = 0; n < 40; ++n) {
    for (int k = n; k < 40; ++k) rows[n].push_back(k % 2 ? Rational(1, 4) : Rational(1, 2));
  }
  const ExactTableFamily lawless(rows);
  SamplePlan plan;
  IndependentOptions opts;
  const auto fails = verify_independent(lawless, Tolerances(Rational(1, 4), Rational(1, 4)), 0, GapFunction::offset(0), plan, opts);
  CHECK(fails.is_hypothesis_failed());
  REQUIRE(fails.closure);
  CHECK_FALSE(fails.closure->ok());
  REQUIRE(fails.independence);
  CHECK(fails.independence->skipped());
  opts.hypothesis_checks = false;
  const auto v = verify_independent(lawless, Tolerances(Rational(1, 4), Rational(1, 4)), 0, GapFunction::offset(0), plan, opts);
  CHECK(v.is_premise_violated());
}

TEST_CASE("verify_implication") {
  SamplePlan plan;
  const BorelCantelliFamily half(ConstantProb{Rational(1, 2)});
  Moduli twice;
  twice.rho = [](const Index& n, const Rational&) { return Rational(2 * n); };
  twice.sigma = [](const Index& big_n, const Index&, const Rational&) { return big_n; };
  const auto v = verify_implication(half, Tolerances(Rational(1, 2), Rational(1, 2)), 0, GapFunction::offset(1), twice, plan);
  CHECK(v.is_second());

  const auto w = verify_implication(half, Tolerances(Rational(1, 2), Rational(1, 2)), 2, GapFunction::offset(1), twice, plan);
  CHECK(w.params.bound == iterate_gap(GapFunction::offset(1), 8, 2));
  CHECK(w.conclusive());

  Moduli bad = twice;
  bad.sigma = [](const Index&, const Index& n, const Rational&) { return n - 1; };
  CHECK_THROWS_AS(verify_implication(half, Tolerances(Rational(1, 2), Rational(1, 2)), 2, GapFunction::offset(1), bad, plan),
                  ModuliInvalid);
}

TEST_CASE("property: totality and soundness on random exact independent families") {
  std::mt19937_64 gen(4242);
  std::uniform_int_distribution<int> num(1, 9), pnum(0, 16), rdist(0, 3), gdist(0, 2);
  SamplePlan plan;
  for (int trial = 0; trial < 40; ++trial) {
    const Rational eps(num(gen), 10), lambda(num(gen), 10);
    const Index r = rdist(gen);
    const GapFunction g = GapFunction::offset(gdist(gen));
    const Index s = schedule(g, r, to_u64(counter_independent(eps, lambda)) + 1).b.back();
    if (s > 60) continue;
    std::vector<Rational> p;
    for (Index j = 0; j <= s; ++j) p.push_back(Rational(pnum(gen), 64));
    const auto table = union_table(p);
    const auto v = verify_independent(table, Tolerances(eps, lambda), r, g, plan);
    REQUIRE(v.conclusive());
    if (v.is_first()) {
      const auto n = to_u64(v.first().n);
      CHECK(v.first().n <= v.params.bound);
      CHECK(product_oracle(p, n, to_u64(g(n))) < eps);
    } else {
      CHECK(product_oracle(p, to_u64(r), to_u64(s)) > 1 - lambda);
    }
  }
}

TEST_CASE("sampled verdicts respect the Bonferroni budget") {
  const BorelCantelliFamily geo(GeometricProb{Rational(1, 4), Rational(1, 2)});
  SamplePlan plan;
  plan.force_sampling = true;
  plan.samples = 2048;
  plan.max_samples = 8192;
  const auto v = verify_independent(geo, Tolerances(Rational(1, 4), Rational(1, 2)), 0, GapFunction::offset(1), plan);
  CHECK(v.conclusive());
  CHECK(v.error_spent <= v.error_budget);
  CHECK(v.samples_used >= 2048);
  for (const auto& row : v.audit) CHECK(row.estimate.is_sampled());
}

TEST_CASE("straddling thresholds end Inconclusive with margins") {
  // every block and the tail sit exactly on their thresholds, so sampling cannot certify either side
  const BorelCantelliFamily half(ConstantProb{Rational(1, 2)});
  SamplePlan plan;
  plan.force_sampling = true;
  plan.samples = 1024;
  plan.max_samples = 4096;
  const auto v = verify_main(half, Tolerances(Rational(1, 2), Rational(1, 2)), 0, GapFunction::offset(0), Rational(1, 2), 0, plan);
  REQUIRE(v.is_inconclusive());
  CHECK_FALSE(std::get<Inconclusive>(v.outcome).margins.empty());
  CHECK(v.rounds >= 2);
  CHECK(v.error_spent <= v.error_budget);
}
