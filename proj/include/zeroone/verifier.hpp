#pragma once

/**
 * @file verifier.hpp
 * @brief Finitary zero-one law verifiers.
 *
 * Each verifier fixes eps, lambda, a start index r and a gap function g,
 * derives the block schedule a_i = g~^(i)(r), b_i = g(a_i), and decides which
 * side of
 *
 *     exists n <= g~^(J)(r) with P(B(n, g(n))) < eps     or     P(B(r, s)) > 1 - lambda
 *
 * it can certify. Blocks are scanned in index order and the first certified
 * one is reported; the right-hand side is reported only when no block
 * qualifies, although its estimate is always kept in the audit. Monte
 * Carlo estimates are refined by doubling the sample count, and every Monte
 * Carlo comparison is charged against one Bonferroni error budget.
 */

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "zeroone/bounds.hpp"
#include "zeroone/events.hpp"
#include "zeroone/probability.hpp"
#include "zeroone/rational.hpp"

namespace zeroone {

struct AuditRow {
  /// "tail" for B(r,s) against 1 - lambda, "block" for B(a_i,b_i) against eps.
  std::string role;
  std::optional<std::uint64_t> block;
  Index n, k;
  ProbEstimate estimate;
  Rational threshold;
  ThresholdVerdict verdict;
};

/// Status of the summability premise sum_{i<=T} P(B(a_i,b_i)) < x.
struct PremiseAudit {
  std::optional<Rational> x;
  Rational sum_lo;
  Rational sum_hi;
  /// "holds", "violated", "undetermined" or "discharged" (by the hypotheses).
  std::string status = "undetermined";
};

struct FirstDisjunct {
  Index n;
  std::uint64_t block = 0;
  ProbEstimate estimate;
};

struct SecondDisjunct {
  Index s;
  ProbEstimate estimate;
};

struct PremiseViolated {
  std::string reason;
};

struct HypothesisFailed {
  std::string reason;
};

struct Margin {
  std::string role;
  std::optional<std::uint64_t> block;
  Index n, k;
  Rational lo, hi, threshold;
};

struct Inconclusive {
  std::vector<Margin> margins;
};

using Outcome = std::variant<FirstDisjunct, SecondDisjunct, PremiseViolated, HypothesisFailed, Inconclusive>;

struct VerdictParams {
  std::string theorem;
  Rational epsilon;
  Rational lambda;
  Index r;
  std::string gap;
  /// Number of scheduled blocks minus one (floor(x/eps), or the independent counter).
  Index j;
  Index s;
  /// g~^(j)(r): every reported first-disjunct index is at most this.
  Index bound;
  std::optional<Rational> x;
};

struct Verdict {
  Outcome outcome;
  VerdictParams params;
  std::vector<AuditRow> audit;
  PremiseAudit premise;
  std::optional<ClosureReport> closure;
  std::optional<IndependenceReport> independence;
  /// Sum of error probabilities of every Monte Carlo comparison made.
  Rational error_spent{0};
  Rational error_budget{0};
  std::uint64_t rounds = 0;
  std::uint64_t samples_used = 0;
  std::vector<std::string> notes;

  bool is_first() const { return std::holds_alternative<FirstDisjunct>(outcome); }
  bool is_second() const { return std::holds_alternative<SecondDisjunct>(outcome); }
  bool is_premise_violated() const { return std::holds_alternative<PremiseViolated>(outcome); }
  bool is_hypothesis_failed() const { return std::holds_alternative<HypothesisFailed>(outcome); }
  bool is_inconclusive() const { return std::holds_alternative<Inconclusive>(outcome); }
  bool conclusive() const { return is_first() || is_second(); }

  const FirstDisjunct& first() const { return std::get<FirstDisjunct>(outcome); }
  const SecondDisjunct& second() const { return std::get<SecondDisjunct>(outcome); }

  std::string outcome_name() const {
    switch (outcome.index()) {
      case 0: return "FirstDisjunct";
      case 1: return "SecondDisjunct";
      case 2: return "PremiseViolated";
      case 3: return "HypothesisFailed";
      default: return "Inconclusive";
    }
  }
};

/// Premise moduli rho(n, lambda) and sigma(N, n, lambda) >= n.
struct Moduli {
  std::function<Rational(const Index&, const Rational&)> rho;
  std::function<Index(const Index&, const Index&, const Rational&)> sigma;
  std::string description;

  Rational rho_at(const Index& n, const Rational& lambda) const {
    Rational v = rho(n, lambda);
    if (v < 0) throw ModuliInvalid("rho(" + n.str() + ", " + to_string(lambda) + ") is negative");
    return v;
  }

  Index sigma_at(const Index& big_n, const Index& n, const Rational& lambda) const {
    Index v = sigma(big_n, n, lambda);
    if (v < n) {
      throw ModuliInvalid("sigma(" + big_n.str() + ", " + n.str() + ", " + to_string(lambda) +
                          ") = " + v.str() + " is below n");
    }
    return v;
  }
};

namespace detail {

enum class PremiseMode { Sum, Hypotheses };

struct Query {
  Index n, k;
  std::optional<ProbEstimate> fixed;  // exact path
  std::uint64_t slot = 0;             // index into sampled queries
};

inline Verdict decide_disjunction(const EventFamily& family, const Tolerances& tol, const Index& r,
                                  const GapFunction& g, std::uint64_t blocks, const Index& s,
                                  const std::optional<Rational>& x, PremiseMode mode,
                                  const SamplePlan& plan, VerdictParams params) {
  plan.validate();
  if (s < r) throw InvalidArgument("s must be >= r");
  const IndexSchedule sched = schedule(g, r, blocks + 1);
  params.s = s;
  params.bound = sched.a.back();
  params.j = Index(blocks);

  Verdict v;
  v.params = std::move(params);
  v.error_budget = plan.error_budget;
  v.premise.x = x;
  if (mode == PremiseMode::Hypotheses) v.premise.status = "discharged";

  // query 0 is the tail B(r,s); query i+1 is block i
  std::vector<Query> queries;
  queries.push_back({r, s, std::nullopt, 0});
  for (std::uint64_t i = 0; i <= blocks; ++i) queries.push_back({sched.a[i], sched.b[i], std::nullopt, 0});

  std::vector<std::pair<Index, Index>> sampled;
  for (auto& q : queries) {
    family.check_index(q.n);
    family.check_index(q.k);
    if (q.k < q.n) {
      q.fixed = ProbEstimate::exact(0);
      continue;
    }
    if (!plan.force_sampling) q.fixed = family.exact_prob(q.n, q.k);
    if (!q.fixed) {
      if (!family.capabilities().sampled_indicator) {
        throw CapabilityMissing(family.name() + " can neither evaluate nor sample B(" + q.n.str() +
                                "," + q.k.str() + ")");
      }
      q.slot = sampled.size();
      sampled.emplace_back(q.n, q.k);
    }
  }

  std::uint64_t rounds_allowed = 1;
  if (!sampled.empty()) {
    for (std::uint64_t n = plan.samples; n * 2 <= plan.max_samples; n *= 2) ++rounds_allowed;
  }
  SamplePlan local = plan;
  local.total_comparisons = std::max<std::uint64_t>(1, sampled.size() * rounds_allowed);
  const Rational confidence = local.per_comparison_confidence();
  const Rational per_error = local.per_comparison_error();

  const Rational tail_threshold = 1 - tol.lambda;
  std::vector<std::uint64_t> counts(sampled.size(), 0);
  std::uint64_t used = 0;

  for (std::uint64_t round = 0; round < rounds_allowed; ++round) {
    v.rounds = round + 1;
    if (!sampled.empty()) {
      const std::uint64_t target = plan.samples << round;
      const auto add = sample_counts(family, sampled, used, target - used, plan.master_seed, plan.threads);
      for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += add.successes[i];
      used = target;
      v.samples_used = used;
      v.error_spent += per_error * Rational(Index(sampled.size()));
    }

    std::vector<ProbEstimate> est;
    est.reserve(queries.size());
    for (const auto& q : queries) {
      if (q.fixed) {
        est.push_back(*q.fixed);
      } else {
        MonteCarloMethod meta;
        meta.master_seed = plan.master_seed;
        meta.stream_id = family.stream_id();
        est.push_back(binomial_interval(counts[q.slot], used, confidence, plan.interval, std::move(meta)));
      }
    }

    v.audit.clear();
    v.audit.push_back({"tail", std::nullopt, r, s, est[0], tail_threshold, compare(est[0], tail_threshold)});
    for (std::uint64_t i = 0; i <= blocks; ++i) {
      v.audit.push_back({"block", i, sched.a[i], sched.b[i], est[i + 1], tol.epsilon,
                         compare(est[i + 1], tol.epsilon)});
    }

    v.premise.sum_lo = 0;
    v.premise.sum_hi = 0;
    for (std::uint64_t i = 1; i < est.size(); ++i) {
      v.premise.sum_lo += est[i].lo;
      v.premise.sum_hi += est[i].hi;
    }
    const bool antecedent = certainly_not_above(est[0], tail_threshold);
    if (mode == PremiseMode::Sum) {
      if (!antecedent && certainly_above(est[0], tail_threshold)) v.premise.status = "vacuous";
      else if (v.premise.sum_hi < *x) v.premise.status = "holds";
      else if (v.premise.sum_lo >= *x) v.premise.status = antecedent ? "violated" : "sum-fails";
      else v.premise.status = "undetermined";
    }

    std::optional<std::uint64_t> first_block;
    bool all_blocks_refuted = true;
    for (std::uint64_t i = 0; i <= blocks; ++i) {
      if (!first_block && certainly_below(est[i + 1], tol.epsilon)) first_block = i;
      if (!certainly_not_below(est[i + 1], tol.epsilon)) all_blocks_refuted = false;
    }

    if (mode == PremiseMode::Sum && antecedent && v.premise.sum_lo >= *x) {
      v.outcome = PremiseViolated{"P(B(r,s)) <= 1 - lambda but the block sum " +
                                  to_string(v.premise.sum_lo) + " is not below x = " + to_string(*x)};
      return v;
    }
    if (first_block) {
      v.outcome = FirstDisjunct{sched.a[*first_block], *first_block, est[*first_block + 1]};
      return v;
    }
    if (certainly_above(est[0], tail_threshold)) {
      v.outcome = SecondDisjunct{s, est[0]};
      return v;
    }
    if (mode == PremiseMode::Hypotheses && antecedent && all_blocks_refuted) {
      v.outcome = PremiseViolated{
          "neither disjunct holds although P(B(r,s)) <= 1 - lambda; closure or independence must "
          "fail on [r,s]"};
      return v;
    }

    if (round + 1 == rounds_allowed || sampled.empty()) {
      Inconclusive inc;
      if (!certainly_not_above(est[0], tail_threshold) && !certainly_above(est[0], tail_threshold)) {
        inc.margins.push_back({"tail", std::nullopt, r, s, est[0].lo, est[0].hi, tail_threshold});
      }
      for (std::uint64_t i = 0; i <= blocks; ++i) {
        const auto& e = est[i + 1];
        if (!certainly_below(e, tol.epsilon) && !certainly_not_below(e, tol.epsilon)) {
          inc.margins.push_back({"block", i, sched.a[i], sched.b[i], e.lo, e.hi, tol.epsilon});
        }
      }
      v.outcome = std::move(inc);
      return v;
    }
  }
  v.outcome = Inconclusive{};
  return v;
}

inline std::uint64_t block_count(const Index& j) { return to_u64(j, "block counter"); }

}  // namespace detail

/**
 * Finitary zero-one law for an arbitrary family, given x > 0 and s >= r.
 *
 * When P(B(r,s)) <= 1 - lambda is certified, a certified failure of the premise
 * sum_{i <= floor(x/eps)} P(B(a_i,b_i)) < x is PremiseViolated. Otherwise the
 * first block with P(B(a_i,b_i)) < eps gives n = a_i <= g~^(floor(x/eps))(r),
 * and failing that P(B(r,s)) > 1 - lambda gives the second disjunct.
 */
inline Verdict verify_main(const EventFamily& family, const Tolerances& tol, const Index& r,
                           const GapFunction& g, const Rational& x, const Index& s,
                           const SamplePlan& plan) {
  if (x <= 0) throw InvalidArgument("x must be positive");
  VerdictParams p{"main", tol.epsilon, tol.lambda, r, g.describe(), 0, s, 0, x};
  const Index t = counter_main(tol.epsilon, x);
  return detail::decide_disjunction(family, tol, r, g, detail::block_count(t), s, x,
                                    detail::PremiseMode::Sum, plan, std::move(p));
}

/**
 * Variant driven by premise moduli: x = rho(r, lambda), N = b_{floor(x/eps)},
 * s = sigma(N, r, lambda). A zero rho makes the premise's conclusion
 * unsatisfiable, so only the second disjunct can be certified.
 */
inline Verdict verify_implication(const EventFamily& family, const Tolerances& tol, const Index& r,
                                  const GapFunction& g, const Moduli& moduli, const SamplePlan& plan) {
  const Rational x = moduli.rho_at(r, tol.lambda);
  const Index t = x > 0 ? counter_main(tol.epsilon, x) : Index(0);
  const std::uint64_t blocks = detail::block_count(t);
  const IndexSchedule sched = schedule(g, r, blocks + 1);
  const Index big_n = sched.b.back();
  const Index s = moduli.sigma_at(big_n, r, tol.lambda);
  VerdictParams p{"implication", tol.epsilon, tol.lambda, r, g.describe(), 0, s, 0, x};
  Verdict v = detail::decide_disjunction(family, tol, r, g, blocks, s, x, detail::PremiseMode::Sum,
                                         plan, std::move(p));
  v.notes.push_back("N = b_" + t.str() + " = " + big_n.str() + "; moduli: " + moduli.description);
  return v;
}

struct IndependentOptions {
  bool hypothesis_checks = true;
  IndependenceTolerance tolerance;
  unsigned slack_bits = default_slack_bits;
};

/**
 * Independent-block variant: J = floor(ln(1/lambda)/eps) + 1 (with a certified
 * upper bound on the log) and s = b_J. With hypothesis checks on, closure and
 * pairwise independence are verified on [r,s] first and a failure is reported
 * as HypothesisFailed.
 */
inline Verdict verify_independent(const EventFamily& family, const Tolerances& tol, const Index& r,
                                  const GapFunction& g, const SamplePlan& plan,
                                  const IndependentOptions& opts = {}) {
  const Index j = counter_independent(tol.epsilon, tol.lambda, opts.slack_bits);
  const std::uint64_t blocks = detail::block_count(j);
  const IndexSchedule sched = schedule(g, r, blocks + 1);
  const Index s = sched.b.back();
  const Rational x = ln_recip_upper(tol.lambda, opts.slack_bits) + tol.epsilon;

  std::optional<ClosureReport> closure;
  std::optional<IndependenceReport> independence;
  if (opts.hypothesis_checks) {
    closure = check_closure(family, r, s, plan.hypothesis_samples, plan.master_seed);
    independence = check_pairwise_independence(family, r, s, opts.tolerance, plan);
    if (!closure->ok() || !independence->ok()) {
      Verdict v;
      v.params = {"independent", tol.epsilon, tol.lambda, r, g.describe(), j, s, sched.a.back(), x};
      v.error_budget = plan.error_budget;
      std::string what;
      if (!closure->ok()) what += std::to_string(closure->violation_count) + " closure violation(s)";
      if (!independence->ok()) {
        if (!what.empty()) what += ", ";
        what += std::to_string(independence->failure_count) + " independence failure(s)";
      }
      v.outcome = HypothesisFailed{what + " on [" + r.str() + "," + s.str() + "]"};
      v.closure = std::move(closure);
      v.independence = std::move(independence);
      return v;
    }
  }
  VerdictParams p{"independent", tol.epsilon, tol.lambda, r, g.describe(), 0, s, 0, x};
  Verdict v = detail::decide_disjunction(family, tol, r, g, blocks, s, x,
                                         detail::PremiseMode::Hypotheses, plan, std::move(p));
  v.closure = std::move(closure);
  v.independence = std::move(independence);
  if (v.closure && v.closure->skipped()) v.notes.push_back("closure check skipped: " + v.closure->note);
  if (v.independence && v.independence->skipped()) {
    v.notes.push_back("independence check skipped: " + v.independence->note);
  }
  return v;
}

}  // namespace zeroone
