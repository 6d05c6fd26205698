#pragma once

/**
 * @file events.hpp
 * @brief Doubly indexed event families B(n,k) and finite-range hypothesis checks.
 *
 * A family exposes up to two evaluation paths behind one interface: exact
 * probabilities (possibly as certified enclosures) and per-configuration
 * indicators over a seeded random realization. B(n,k) is empty for k < n.
 */

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zeroone/error.hpp"
#include "zeroone/probability.hpp"
#include "zeroone/rational.hpp"
#include "zeroone/rng.hpp"

namespace zeroone {

struct SampleTag {
  std::uint64_t master_seed = 0;
  std::uint64_t sample_index = 0;
  Index horizon;
};

/// One realization of the family's randomness up to `tag().horizon`.
/// Indicators at a smaller horizon never change when the horizon grows.
class Configuration {
 public:
  explicit Configuration(SampleTag tag) : tag_(std::move(tag)) {}
  virtual ~Configuration() = default;

  const SampleTag& tag() const noexcept { return tag_; }

  /// Whether B(n,k) occurred; requires n <= k <= horizon.
  virtual bool indicator(const Index& n, const Index& k) const = 0;

 private:
  SampleTag tag_;
};

struct Capabilities {
  bool exact_prob = false;
  bool sampled_indicator = false;
  bool exact_pair_prob = false;
};

class EventFamily {
 public:
  virtual ~EventFamily() = default;

  virtual std::string name() const = 0;
  virtual Index horizon_cap() const = 0;
  virtual Capabilities capabilities() const = 0;

  /// Exact probability (or certified enclosure) of B(n,k) for n <= k, if the
  /// family can produce one for this pair.
  virtual std::optional<ProbEstimate> exact_prob(const Index& /*n*/, const Index& /*k*/) const {
    return std::nullopt;
  }

  /// Exact P(B(n,m) and B(l,k)) for n <= m < l <= k, if available.
  virtual std::optional<ProbEstimate> exact_joint(const Index&, const Index&, const Index&,
                                                  const Index&) const {
    return std::nullopt;
  }

  /// Monte Carlo stream identifier; sample i uses derive_seed(master, hash(stream_id()), i).
  virtual std::string stream_id() const { return name(); }

  std::unique_ptr<Configuration> draw_configuration(std::uint64_t master_seed,
                                                    std::uint64_t sample_index,
                                                    const Index& horizon) const {
    const std::uint64_t seed =
        rng::derive_seed(master_seed, rng::stream_hash(stream_id()), sample_index);
    return draw_from_seed(seed, SampleTag{master_seed, sample_index, horizon});
  }

  /// Builds the configuration for an already derived per-sample seed.
  virtual std::unique_ptr<Configuration> draw_from_seed(std::uint64_t /*seed*/,
                                                        SampleTag /*tag*/) const {
    throw CapabilityMissing(name() + " has no sampled indicator");
  }

  void check_index(const Index& i) const {
    if (i < 0) throw InvalidArgument("negative index");
    if (i > horizon_cap()) {
      throw IndexOverflow("index " + i.str() + " exceeds horizon cap " + horizon_cap().str() +
                          " of " + name());
    }
  }
};

/// Exact-only family given by a table: rows[n][k - n] = P(B(n,k)).
class ExactTableFamily final : public EventFamily {
 public:
  explicit ExactTableFamily(std::vector<std::vector<Rational>> rows, std::string label = "table")
      : rows_(std::move(rows)), label_(std::move(label)) {
    if (rows_.empty()) throw InvalidArgument("probability table is empty");
    for (std::size_t n = 0; n < rows_.size(); ++n) {
      if (rows_[n].size() != rows_.size() - n) {
        throw InvalidArgument("table row " + std::to_string(n) + " must list k = n.." +
                              std::to_string(rows_.size() - 1));
      }
      for (const auto& v : rows_[n]) {
        if (!in_closed_unit(v)) throw InvalidArgument("table entry outside [0,1] in row " + std::to_string(n));
      }
    }
  }

  const std::vector<std::vector<Rational>>& rows() const noexcept { return rows_; }

  std::string name() const override { return label_; }
  Index horizon_cap() const override { return Index(rows_.size() - 1); }
  Capabilities capabilities() const override { return {true, false, false}; }

  std::optional<ProbEstimate> exact_prob(const Index& n, const Index& k) const override {
    if (k < n) return ProbEstimate::exact(0);
    const auto a = n.convert_to<std::size_t>(), b = k.convert_to<std::size_t>();
    return ProbEstimate::exact(rows_.at(a).at(b - a));
  }

 private:
  std::vector<std::vector<Rational>> rows_;
  std::string label_;
};

enum class EvalPath { Auto, Exact, Sampled };

/// A batch of Monte Carlo counts over the same configurations.
struct SampledCounts {
  std::uint64_t samples = 0;
  std::vector<std::uint64_t> successes;
};

/// Counts B(n,k) occurrences for each query over samples [first, first + count).
inline SampledCounts sample_counts(const EventFamily& family,
                                   std::span<const std::pair<Index, Index>> queries,
                                   std::uint64_t first, std::uint64_t count,
                                   std::uint64_t master_seed, unsigned threads) {
  if (!family.capabilities().sampled_indicator) {
    throw CapabilityMissing(family.name() + " has no sampled indicator");
  }
  Index horizon = 0;
  for (const auto& [n, k] : queries) {
    family.check_index(n);
    family.check_index(k);
    horizon = std::max(horizon, k);
  }
  SampledCounts out;
  out.samples = count;
  out.successes = count_successes(
      queries.size(), first, count, master_seed, family.stream_id(), threads,
      [&](std::uint64_t i, std::uint64_t seed, std::span<std::uint8_t> hits) {
        const auto cfg = family.draw_from_seed(seed, SampleTag{master_seed, i, horizon});
        for (std::size_t q = 0; q < queries.size(); ++q) {
          const auto& [n, k] = queries[q];
          hits[q] = (k >= n && cfg->indicator(n, k)) ? 1 : 0;
        }
      });
  return out;
}

/// P(B(n,k)) through the requested path. k < n is always Exact 0.
inline ProbEstimate prob_of(const EventFamily& family, const Index& n, const Index& k,
                            const SamplePlan& plan, EvalPath path = EvalPath::Auto) {
  family.check_index(n);
  family.check_index(k);
  if (k < n) return ProbEstimate::exact(0);
  if (path != EvalPath::Sampled && !(path == EvalPath::Auto && plan.force_sampling)) {
    if (auto e = family.exact_prob(n, k)) return *e;
    if (path == EvalPath::Exact) {
      throw CapabilityMissing(family.name() + " has no exact probability for (" + n.str() + "," +
                              k.str() + ")");
    }
  }
  const std::pair<Index, Index> q{n, k};
  const auto counts = sample_counts(family, std::span(&q, 1), 0, plan.samples, plan.master_seed,
                                    plan.threads);
  MonteCarloMethod meta;
  meta.master_seed = plan.master_seed;
  meta.stream_id = family.stream_id();
  return binomial_interval(counts.successes[0], counts.samples, plan.per_comparison_confidence(),
                           plan.interval, std::move(meta));
}

/// Witness n <= m < l <= k of a failed closure inclusion.
struct IndexTuple {
  Index n, m, l, k;
  bool operator==(const IndexTuple&) const = default;
};

struct ClosureViolation {
  IndexTuple tuple;
  /// Sample that exhibited the violation; empty for exact monotonicity checks.
  std::optional<std::uint64_t> sample_index;
  std::string detail;
};

struct ClosureReport {
  Index r, s;
  std::string method;  // "per-sample", "exact-monotonicity" or "skipped"
  std::uint64_t samples = 0;
  std::uint64_t violation_count = 0;
  std::vector<ClosureViolation> violations;  // first few, in discovery order
  std::string note;

  bool ok() const { return violation_count == 0; }
  bool skipped() const { return method == "skipped"; }
};

inline constexpr std::size_t max_reported_violations = 16;
inline constexpr std::uint64_t max_closure_range = 4096;

/**
 * Closure check on [r,s]. Per configuration, the inclusion for every
 * n <= m < l <= k is equivalent to k -> B(n,k) being nondecreasing and
 * n -> B(n,k) being nonincreasing, so consecutive comparisons suffice.
 * Exact-only families are checked through the same monotonicities of their
 * probabilities.
 */
inline ClosureReport check_closure(const EventFamily& family, const Index& r, const Index& s,
                                   std::uint64_t samples, std::uint64_t master_seed) {
  family.check_index(r);
  family.check_index(s);
  ClosureReport rep;
  rep.r = r;
  rep.s = s;
  if (s < r) {
    rep.method = "per-sample";
    rep.note = "empty range";
    return rep;
  }
  const Index width_big = s - r + 1;
  if (width_big > max_closure_range) {
    rep.method = "skipped";
    rep.note = "range of " + width_big.str() + " indices exceeds the check limit of " +
               std::to_string(max_closure_range);
    return rep;
  }
  const auto width = width_big.convert_to<std::size_t>();
  auto record = [&](IndexTuple t, std::optional<std::uint64_t> sample, std::string detail) {
    ++rep.violation_count;
    if (rep.violations.size() < max_reported_violations) {
      rep.violations.push_back({std::move(t), sample, std::move(detail)});
    }
  };
  const auto idx = [&](std::size_t i) { return r + Index(i); };

  if (family.capabilities().sampled_indicator) {
    rep.method = "per-sample";
    rep.samples = samples;
    std::vector<std::uint8_t> table(width * width);
    for (std::uint64_t smp = 0; smp < samples; ++smp) {
      const auto cfg = family.draw_configuration(master_seed, smp, s);
      for (std::size_t a = 0; a < width; ++a) {
        for (std::size_t b = a; b < width; ++b) table[a * width + b] = cfg->indicator(idx(a), idx(b));
      }
      for (std::size_t a = 0; a < width; ++a) {
        for (std::size_t b = a; b + 1 < width; ++b) {
          if (table[a * width + b] && !table[a * width + b + 1]) {
            record({idx(a), idx(b), idx(b + 1), idx(b + 1)}, smp,
                   "B(n,m) occurred but B(n,k) did not");
          }
        }
      }
      for (std::size_t b = 0; b < width; ++b) {
        for (std::size_t l = b; l >= 1; --l) {
          if (table[l * width + b] && !table[(l - 1) * width + b]) {
            record({idx(l - 1), idx(l - 1), idx(l), idx(b)}, smp,
                   "B(l,k) occurred but B(n,k) did not");
          }
        }
      }
    }
    return rep;
  }
  if (!family.capabilities().exact_prob) {
    throw CapabilityMissing(family.name() + " supports neither exact nor sampled evaluation");
  }
  rep.method = "exact-monotonicity";
  std::vector<std::optional<ProbEstimate>> p(width * width);
  for (std::size_t a = 0; a < width; ++a) {
    for (std::size_t b = a; b < width; ++b) {
      p[a * width + b] = family.exact_prob(idx(a), idx(b));
      if (!p[a * width + b]) {
        throw CapabilityMissing(family.name() + " lacks an exact probability inside the range");
      }
    }
  }
  for (std::size_t a = 0; a < width; ++a) {
    for (std::size_t b = a; b + 1 < width; ++b) {
      // violation only when certain: lower end of the larger window below the smaller window
      if (p[a * width + b + 1]->hi < p[a * width + b]->lo) {
        record({idx(a), idx(b), idx(b + 1), idx(b + 1)}, std::nullopt,
               "P(B(n,k)) decreases in k");
      }
    }
  }
  for (std::size_t b = 0; b < width; ++b) {
    for (std::size_t l = b; l >= 1; --l) {
      if (p[(l - 1) * width + b]->hi < p[l * width + b]->lo) {
        record({idx(l - 1), idx(l - 1), idx(l), idx(b)}, std::nullopt,
               "P(B(n,k)) increases in n");
      }
    }
  }
  return rep;
}

struct IndependenceTolerance {
  Rational absolute{0};
  /// Monte Carlo slack as a multiple of the summed confidence-interval widths.
  Rational ci_multiple{3};
};

struct IndependenceFailure {
  IndexTuple tuple;
  ProbEstimate joint;
  ProbEstimate first;   // P(B(n,m))
  ProbEstimate second;  // P(B(l,k))
  Rational discrepancy;
  Rational tolerance;
};

struct IndependenceReport {
  Index r, s;
  std::string method;  // "exact", "monte-carlo" or "skipped"
  Index tuples_total;
  std::uint64_t tuples_checked = 0;
  bool exhaustive = true;
  std::uint64_t failure_count = 0;
  std::vector<IndependenceFailure> failures;
  std::string note;

  bool ok() const { return failure_count == 0; }
  bool skipped() const { return method == "skipped"; }
};

/// Number of tuples n <= m < l <= k inside [r,s].
inline Index count_independence_tuples(const Index& r, const Index& s) {
  if (s <= r) return 0;
  const Index w = s - r + 1;
  // sum over m < l of (m - r + 1)(s - l + 1) = C(w + 2, 4)
  return (w + 2) * (w + 1) * w * (w - 1) / 24;
}

namespace detail {

template <class Visit>
void for_each_tuple(std::size_t width, std::uint64_t budget, std::uint64_t seed,
                    const Index& total, bool& exhaustive, Visit&& visit) {
  if (total <= Index(budget)) {
    exhaustive = true;
    for (std::size_t m = 0; m < width; ++m) {
      for (std::size_t l = m + 1; l < width; ++l) {
        for (std::size_t n = 0; n <= m; ++n) {
          for (std::size_t k = l; k < width; ++k) visit(n, m, l, k);
        }
      }
    }
    return;
  }
  // Deterministic spot check: m < l uniformly, then n <= m and k >= l uniformly.
  exhaustive = false;
  rng::SplitMix64 gen(rng::mix64(seed ^ 0x5eedc0ffeeull));
  for (std::uint64_t t = 0; t < budget; ++t) {
    std::size_t m = gen() % width;
    std::size_t l = gen() % width;
    if (m == l) {
      --t;
      continue;
    }
    if (m > l) std::swap(m, l);
    const std::size_t n = gen() % (m + 1);
    const std::size_t k = l + gen() % (width - l);
    visit(n, m, l, k);
  }
}

inline ProbEstimate product_interval(const ProbEstimate& a, const ProbEstimate& b) {
  ProbEstimate p;
  p.lo = a.lo * b.lo;
  p.hi = a.hi * b.hi;
  p.confidence = 1 - (a.error() + b.error());
  if (a.is_exact() && b.is_exact()) p.method = ExactMethod{};
  else p.method = EnclosureMethod{"product of marginals"};
  return p;
}

}  // namespace detail

/**
 * Pairwise block independence on [r,s]. With exact joint probabilities the
 * identity is checked with the absolute tolerance (0 by default) and a
 * failure is only reported when the enclosures certify a discrepancy; with
 * Monte Carlo the point estimates are compared within
 * absolute + ci_multiple * (sum of interval widths).
 */
inline IndependenceReport check_pairwise_independence(const EventFamily& family, const Index& r,
                                                      const Index& s,
                                                      const IndependenceTolerance& tol,
                                                      const SamplePlan& plan,
                                                      EvalPath path = EvalPath::Auto) {
  family.check_index(r);
  family.check_index(s);
  IndependenceReport rep;
  rep.r = r;
  rep.s = s;
  rep.tuples_total = count_independence_tuples(r, s);
  if (rep.tuples_total == 0) {
    rep.method = family.capabilities().exact_pair_prob ? "exact" : "monte-carlo";
    rep.note = "no tuples in range";
    return rep;
  }
  const Index width_big = s - r + 1;
  if (width_big > max_closure_range) {
    rep.method = "skipped";
    rep.note = "range of " + width_big.str() + " indices exceeds the check limit";
    return rep;
  }
  const auto width = width_big.convert_to<std::size_t>();
  const auto idx = [&](std::size_t i) { return r + Index(i); };
  auto record = [&](IndependenceFailure f) {
    ++rep.failure_count;
    if (rep.failures.size() < max_reported_violations) rep.failures.push_back(std::move(f));
  };

  const bool use_exact = path == EvalPath::Exact ||
                         (path == EvalPath::Auto && family.capabilities().exact_pair_prob &&
                          !plan.force_sampling);
  if (use_exact) {
    if (!family.capabilities().exact_pair_prob) {
      throw CapabilityMissing(family.name() + " has no exact joint probabilities");
    }
    rep.method = "exact";
    std::vector<std::optional<ProbEstimate>> marg(width * width);
    auto marginal = [&](std::size_t a, std::size_t b) -> const ProbEstimate& {
      auto& slot = marg[a * width + b];
      if (!slot) {
        slot = family.exact_prob(idx(a), idx(b));
        if (!slot) throw CapabilityMissing(family.name() + " lacks an exact marginal");
      }
      return *slot;
    };
    detail::for_each_tuple(width, plan.hypothesis_tuple_budget, plan.master_seed, rep.tuples_total,
                           rep.exhaustive, [&](std::size_t n, std::size_t m, std::size_t l, std::size_t k) {
      ++rep.tuples_checked;
      auto joint = family.exact_joint(idx(n), idx(m), idx(l), idx(k));
      if (!joint) throw CapabilityMissing(family.name() + " lacks an exact joint probability");
      const ProbEstimate& a = marginal(n, m);
      const ProbEstimate& b = marginal(l, k);
      const ProbEstimate prod = detail::product_interval(a, b);
      // certified discrepancy: distance between the two enclosures
      Rational gap = 0;
      if (joint->lo > prod.hi) gap = joint->lo - prod.hi;
      else if (prod.lo > joint->hi) gap = prod.lo - joint->hi;
      if (gap > tol.absolute) {
        record({{idx(n), idx(m), idx(l), idx(k)}, *joint, a, b, gap, tol.absolute});
      }
    });
    return rep;
  }

  if (!family.capabilities().sampled_indicator) {
    if (path == EvalPath::Sampled) throw CapabilityMissing(family.name() + " cannot be sampled");
    // marginal tables do not determine joints; independence is then the caller's assumption
    rep.method = "skipped";
    rep.note = family.name() + " exposes neither joint probabilities nor configurations";
    return rep;
  }
  rep.method = "monte-carlo";
  // Collect tuples first so the per-sample pass can count joints in place.
  std::vector<std::array<std::size_t, 4>> tuples;
  detail::for_each_tuple(width, plan.hypothesis_tuple_budget, plan.master_seed, rep.tuples_total,
                         rep.exhaustive, [&](std::size_t n, std::size_t m, std::size_t l, std::size_t k) {
    tuples.push_back({n, m, l, k});
  });
  rep.tuples_checked = tuples.size();
  const std::size_t pair_slots = width * width;
  const auto counts = count_successes(
      pair_slots + tuples.size(), 0, plan.samples, plan.master_seed, family.stream_id(),
      plan.threads, [&](std::uint64_t i, std::uint64_t seed, std::span<std::uint8_t> hits) {
        const auto cfg = family.draw_from_seed(seed, SampleTag{plan.master_seed, i, s});
        for (std::size_t a = 0; a < width; ++a) {
          for (std::size_t b = a; b < width; ++b) hits[a * width + b] = cfg->indicator(idx(a), idx(b));
        }
        for (std::size_t t = 0; t < tuples.size(); ++t) {
          const auto& [n, m, l, k] = tuples[t];
          hits[pair_slots + t] = hits[n * width + m] && hits[l * width + k];
        }
      });
  const Rational conf = plan.per_comparison_confidence();
  auto interval = [&](std::uint64_t succ) {
    MonteCarloMethod meta;
    meta.master_seed = plan.master_seed;
    meta.stream_id = family.stream_id();
    return binomial_interval(succ, plan.samples, conf, plan.interval, std::move(meta));
  };
  const Rational nsamp{Index(plan.samples)};
  for (std::size_t t = 0; t < tuples.size(); ++t) {
    const auto& [n, m, l, k] = tuples[t];
    const std::uint64_t cj = counts[pair_slots + t];
    const std::uint64_t ca = counts[n * width + m];
    const std::uint64_t cb = counts[l * width + k];
    const Rational pj = Rational(Index(cj)) / nsamp;
    const Rational pa = Rational(Index(ca)) / nsamp;
    const Rational pb = Rational(Index(cb)) / nsamp;
    const ProbEstimate ej = interval(cj), ea = interval(ca), eb = interval(cb);
    const Rational slack = tol.absolute + tol.ci_multiple * (ej.width() + ea.width() + eb.width());
    const Rational diff = abs(pj - pa * pb);
    if (diff > slack) record({{idx(n), idx(m), idx(l), idx(k)}, ej, ea, eb, diff, slack});
  }
  return rep;
}

}  // namespace zeroone
