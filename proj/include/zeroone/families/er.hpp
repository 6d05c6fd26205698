#pragma once

/**
 * @file er.hpp
 * @brief Events with prescribed singleton and pairwise probabilities, the
 *        correlation ratio sum P(A_i A_j) / (sum P(A_k))^2, and the
 *        Erdos-Renyi instantiation of the implication verifier.
 */

#include <bit>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "zeroone/bounds.hpp"
#include "zeroone/error.hpp"
#include "zeroone/events.hpp"
#include "zeroone/probability.hpp"
#include "zeroone/rational.hpp"
#include "zeroone/rng.hpp"
#include "zeroone/verifier.hpp"

namespace zeroone {

/// Mutually independent events with P(A_i) = p.
struct IndependentIdentical {
  Rational p;
  bool operator==(const IndependentIdentical&) const = default;
};

/// A_i = "the bits selected by mask i+1 have odd parity" for k fair bits,
/// i = 0 .. 2^k - 2. Pairwise independent, not mutually independent.
struct PairwiseFromBits {
  unsigned k = 0;
  bool operator==(const PairwiseFromBits&) const = default;
};

/// Explicit P(A_i) and P(A_i A_j) tables (symmetric, diagonal = singletons).
struct ExplicitTables {
  std::vector<Rational> single;
  std::vector<std::vector<Rational>> pair;
  bool operator==(const ExplicitTables&) const = default;
};

using PairwiseModel = std::variant<IndependentIdentical, PairwiseFromBits, ExplicitTables>;

/// Atoms above this many bits are not enumerated.
inline constexpr unsigned max_enumerated_bits = 20;

inline void validate(const PairwiseModel& model) {
  std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, IndependentIdentical>) {
          if (!in_closed_unit(m.p)) throw InvalidArgument("probability outside [0,1]");
        } else if constexpr (std::is_same_v<T, PairwiseFromBits>) {
          if (m.k < 2 || m.k > 62) throw InvalidArgument("parity model needs 2 <= k <= 62 bits");
        } else {
          const std::size_t n = m.single.size();
          if (n == 0) throw InvalidArgument("empty probability table");
          if (m.pair.size() != n) throw InvalidArgument("pair table has the wrong size");
          for (std::size_t i = 0; i < n; ++i) {
            if (!in_closed_unit(m.single[i])) throw InvalidArgument("P(A_" + std::to_string(i) + ") outside [0,1]");
            if (m.pair[i].size() != n) throw InvalidArgument("pair table row " + std::to_string(i) + " has the wrong size");
            if (m.pair[i][i] != m.single[i]) throw InvalidArgument("P(A_i A_i) must equal P(A_i)");
            for (std::size_t j = 0; j < n; ++j) {
              if (m.pair[i][j] != m.pair[j][i]) throw InvalidArgument("pair table is not symmetric");
              if (m.pair[i][j] < 0 || m.pair[i][j] > std::min(m.single[i], m.single[j])) {
                throw InvalidArgument("P(A_i A_j) exceeds min(P(A_i), P(A_j))");
              }
            }
          }
        }
      },
      model);
}

inline std::string describe(const PairwiseModel& model) {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, IndependentIdentical>) return "independent(" + to_string(m.p) + ")";
        else if constexpr (std::is_same_v<T, PairwiseFromBits>) return "parity-bits(" + std::to_string(m.k) + ")";
        else return "tables(" + std::to_string(m.single.size()) + ")";
      },
      model);
}

/// Largest valid event index, or nullopt when unbounded.
inline std::optional<std::uint64_t> model_horizon(const PairwiseModel& model) {
  if (const auto* b = std::get_if<PairwiseFromBits>(&model)) return (std::uint64_t{1} << b->k) - 2;
  if (const auto* t = std::get_if<ExplicitTables>(&model)) return t->single.size() - 1;
  return std::nullopt;
}

inline Rational single_prob(const PairwiseModel& model, std::uint64_t i) {
  return std::visit(
      [&](const auto& m) -> Rational {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, IndependentIdentical>) return m.p;
        else if constexpr (std::is_same_v<T, PairwiseFromBits>) return Rational(1, 2);
        else return m.single.at(i);
      },
      model);
}

inline Rational pair_prob(const PairwiseModel& model, std::uint64_t i, std::uint64_t j) {
  if (i == j) return single_prob(model, i);
  return std::visit(
      [&](const auto& m) -> Rational {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, IndependentIdentical>) return m.p * m.p;
        else if constexpr (std::is_same_v<T, PairwiseFromBits>) return Rational(1, 4);
        else return m.pair.at(i).at(j);
      },
      model);
}

namespace detail {

inline void check_er_index(const PairwiseModel& model, std::uint64_t n) {
  if (auto h = model_horizon(model); h && n > *h) {
    throw IndexOverflow("event index " + std::to_string(n) + " beyond the model's " + std::to_string(*h));
  }
}

/// Running sums for the ratio as n grows.
struct RatioAccumulator {
  const PairwiseModel& model;
  std::uint64_t next = 0;
  Rational singles = 0;
  Rational pairs = 0;

  void advance() {
    const std::uint64_t m = next++;
    singles += single_prob(model, m);
    Rational cross = 0;
    if (const auto* ii = std::get_if<IndependentIdentical>(&model)) {
      cross = Rational(Index(m)) * ii->p * ii->p;
    } else if (std::holds_alternative<PairwiseFromBits>(model)) {
      cross = Rational(Index(m), Index(4));
    } else {
      for (std::uint64_t i = 0; i < m; ++i) cross += pair_prob(model, i, m);
    }
    pairs += 2 * cross + single_prob(model, m);
  }

  Rational ratio() const {
    if (singles == 0) throw ZeroMass("sum of P(A_k) is zero up to index " + std::to_string(next - 1));
    return pairs / (singles * singles);
  }
};

}  // namespace detail

/// sum_{i,j<=n} P(A_i A_j) / (sum_{k<=n} P(A_k))^2, exactly.
inline Rational er_ratio(const PairwiseModel& model, std::uint64_t n) {
  validate(model);
  detail::check_er_index(model, n);
  if (const auto* ii = std::get_if<IndependentIdentical>(&model)) {
    const Rational m = Rational(Index(n + 1));
    if (ii->p == 0) throw ZeroMass("sum of P(A_k) is zero");
    return (m * ii->p + m * Rational(Index(n)) * ii->p * ii->p) / (m * m * ii->p * ii->p);
  }
  detail::RatioAccumulator acc{model};
  while (acc.next <= n) acc.advance();
  return acc.ratio();
}

/// Least m in [n, n + budget] with er_ratio(model, m) < 1 + lambda.
inline std::uint64_t find_phi(const PairwiseModel& model, const Rational& lambda, std::uint64_t n,
                              std::uint64_t budget = 1u << 20) {
  validate(model);
  if (!in_open_unit(lambda)) throw InvalidArgument("lambda must lie in (0,1)");
  const Rational target = 1 + lambda;
  const std::optional<std::uint64_t> horizon = model_horizon(model);
  if (const auto* ii = std::get_if<IndependentIdentical>(&model)) {
    if (ii->p == 0) throw ZeroMass("sum of P(A_k) is zero");
    for (std::uint64_t m = n; m - n <= budget; ++m) {
      if (er_ratio(model, m) < target) return m;
    }
    throw BudgetExhausted("no index in [" + std::to_string(n) + ", " + std::to_string(n + budget) +
                          "] has correlation ratio below " + to_string(target));
  }
  detail::RatioAccumulator acc{model};
  while (acc.next < n) acc.advance();
  for (std::uint64_t m = n; m - n <= budget; ++m) {
    if (horizon && m > *horizon) {
      throw BudgetExhausted("model horizon " + std::to_string(*horizon) + " reached before the ratio dropped below " +
                            to_string(target));
    }
    acc.advance();
    if (acc.singles > 0 && acc.ratio() < target) return m;
  }
  throw BudgetExhausted("no index in [" + std::to_string(n) + ", " + std::to_string(n + budget) +
                        "] has correlation ratio below " + to_string(target));
}

namespace detail {

inline bool parity(std::uint64_t x) { return std::popcount(x) & 1; }

/// P(A_n u ... u A_m) for the parity model by enumerating all 2^k bit vectors.
inline Rational parity_union(unsigned k, std::uint64_t n, std::uint64_t m) {
  if (k > max_enumerated_bits) throw CapabilityMissing("parity model too large to enumerate");
  std::uint64_t hits = 0;
  for (std::uint64_t w = 0; w < (std::uint64_t{1} << k); ++w) {
    for (std::uint64_t i = n; i <= m; ++i) {
      if (parity(w & (i + 1))) {
        ++hits;
        break;
      }
    }
  }
  return Rational(Index(hits), Index(1) << k);
}

inline Rational parity_joint(unsigned k, std::uint64_t n, std::uint64_t m, std::uint64_t l, std::uint64_t q) {
  if (k > max_enumerated_bits) throw CapabilityMissing("parity model too large to enumerate");
  std::uint64_t hits = 0;
  for (std::uint64_t w = 0; w < (std::uint64_t{1} << k); ++w) {
    bool a = false, b = false;
    for (std::uint64_t i = n; i <= m && !a; ++i) a = parity(w & (i + 1));
    for (std::uint64_t i = l; i <= q && !b; ++i) b = parity(w & (i + 1));
    hits += a && b;
  }
  return Rational(Index(hits), Index(1) << k);
}

}  // namespace detail

/// B(n,k) = A_n u ... u A_k for a pairwise model with union-probability access.
class ErUnionFamily final : public EventFamily {
 public:
  explicit ErUnionFamily(PairwiseModel model, Index horizon_cap = Index(1) << 32)
      : model_(std::move(model)), cap_(std::move(horizon_cap)) {
    validate(model_);
    if (std::holds_alternative<ExplicitTables>(model_)) {
      throw CapabilityMissing("pair tables do not determine union probabilities");
    }
    if (auto h = model_horizon(model_)) cap_ = std::min(cap_, Index(*h));
  }

  const PairwiseModel& model() const noexcept { return model_; }

  std::string name() const override { return "er:" + describe(model_); }
  Index horizon_cap() const override { return cap_; }
  Capabilities capabilities() const override {
    const auto* b = std::get_if<PairwiseFromBits>(&model_);
    const bool enumerable = !b || b->k <= max_enumerated_bits;
    return {enumerable, true, enumerable};
  }

  std::optional<ProbEstimate> exact_prob(const Index& n, const Index& k) const override {
    if (k < n) return ProbEstimate::exact(0);
    if (const auto* ii = std::get_if<IndependentIdentical>(&model_)) {
      const std::uint64_t len = to_u64(k - n + 1);
      if (len > 100000) return std::nullopt;
      Rational c = 1;
      const Rational q = 1 - ii->p;
      Rational base = q;
      for (std::uint64_t e = len; e > 0; e >>= 1) {
        if (e & 1) c *= base;
        if (e > 1) base *= base;
      }
      return ProbEstimate::exact(1 - c);
    }
    const auto& b = std::get<PairwiseFromBits>(model_);
    if (b.k > max_enumerated_bits) return std::nullopt;
    return ProbEstimate::exact(detail::parity_union(b.k, to_u64(n), to_u64(k)));
  }

  std::optional<ProbEstimate> exact_joint(const Index& n, const Index& m, const Index& l,
                                          const Index& k) const override {
    if (std::holds_alternative<IndependentIdentical>(model_)) {
      const auto a = exact_prob(n, m), b = exact_prob(l, k);
      if (!a || !b) return std::nullopt;
      return ProbEstimate::exact(a->lo * b->lo);
    }
    const auto& b = std::get<PairwiseFromBits>(model_);
    if (b.k > max_enumerated_bits) return std::nullopt;
    return ProbEstimate::exact(detail::parity_joint(b.k, to_u64(n), to_u64(m), to_u64(l), to_u64(k)));
  }

  std::unique_ptr<Configuration> draw_from_seed(std::uint64_t seed, SampleTag tag) const override {
    const std::uint64_t h = to_u64(tag.horizon);
    std::vector<std::uint32_t> prefix(h + 2, 0);
    if (const auto* ii = std::get_if<IndependentIdentical>(&model_)) {
      const std::uint64_t thr = rng::bernoulli_threshold(ii->p);
      for (std::uint64_t j = 0; j <= h; ++j) {
        prefix[j + 1] = prefix[j] + (rng::uniform53(rng::keyed(seed, j)) < thr ? 1u : 0u);
      }
    } else {
      const auto& b = std::get<PairwiseFromBits>(model_);
      const std::uint64_t w = rng::keyed(seed, 0) & ((std::uint64_t{1} << b.k) - 1);
      for (std::uint64_t j = 0; j <= h; ++j) prefix[j + 1] = prefix[j] + (detail::parity(w & (j + 1)) ? 1u : 0u);
    }
    return std::make_unique<Config>(std::move(tag), std::move(prefix));
  }

 private:
  class Config final : public Configuration {
   public:
    Config(SampleTag tag, std::vector<std::uint32_t> prefix) : Configuration(std::move(tag)), prefix_(std::move(prefix)) {}
    bool indicator(const Index& n, const Index& k) const override {
      const auto a = n.convert_to<std::size_t>(), b = k.convert_to<std::size_t>();
      return b >= a && prefix_.at(b + 1) > prefix_.at(a);
    }

   private:
    std::vector<std::uint32_t> prefix_;
  };

  PairwiseModel model_;
  Index cap_;
};

struct ErLemmaReport {
  /// "confirmed", "refuted", "undetermined" or "not-applicable"
  std::string status;
  Rational premise_sum;
  std::uint64_t phi = 0;
  std::optional<ProbEstimate> union_estimate;
  Rational threshold;
};

/**
 * Given sum_{i<=N} P(A_i) >= 2n, checks P(A_n u ... u A_phi) > 1 - lambda
 * with phi = phi(lambda/4, N) from find_phi. Exact for independent models and
 * enumerable parity models, Monte Carlo otherwise.
 */
inline ErLemmaReport verify_lemma_er(const PairwiseModel& model, const Rational& lambda, std::uint64_t n,
                                     std::uint64_t big_n, const SamplePlan& plan,
                                     std::uint64_t phi_budget = 1u << 20) {
  if (!in_open_unit(lambda)) throw InvalidArgument("lambda must lie in (0,1)");
  validate(model);
  detail::check_er_index(model, big_n);
  ErLemmaReport rep;
  rep.threshold = 1 - lambda;
  for (std::uint64_t i = 0; i <= big_n; ++i) rep.premise_sum += single_prob(model, i);
  if (rep.premise_sum < Rational(Index(2 * n))) {
    rep.status = "not-applicable";
    return rep;
  }
  rep.phi = find_phi(model, lambda / 4, big_n, phi_budget);
  const ErUnionFamily family(model);
  SamplePlan local = plan;
  local.total_comparisons = 1;
  rep.union_estimate = prob_of(family, Index(n), Index(rep.phi), local);
  if (certainly_above(*rep.union_estimate, rep.threshold)) rep.status = "confirmed";
  else if (certainly_not_above(*rep.union_estimate, rep.threshold)) rep.status = "refuted";
  else rep.status = "undetermined";
  return rep;
}

/// Moduli rho(n, lambda) = 2n and sigma(N, n, lambda) = phi(lambda/4, N).
inline Moduli erdos_moduli(const PairwiseModel& model, std::uint64_t phi_budget = 1u << 20) {
  Moduli m;
  m.rho = [](const Index& n, const Rational&) { return Rational(2 * n); };
  m.sigma = [model, phi_budget](const Index& big_n, const Index&, const Rational& lambda) {
    return Index(find_phi(model, lambda / 4, to_u64(big_n), phi_budget));
  };
  m.description = "rho(n,lambda) = 2n, sigma(N,n,lambda) = phi(lambda/4, N)";
  return m;
}

/// The implication verifier on B(n,k) = A_n u ... u A_k with the moduli above.
/// A first-disjunct index is at most g~^(floor(2r/eps))(r).
inline Verdict verify_erdos_quant(const PairwiseModel& model, const Tolerances& tol, const Index& r,
                                  const GapFunction& g, const SamplePlan& plan,
                                  std::uint64_t phi_budget = 1u << 20) {
  const ErUnionFamily family(model);
  return verify_implication(family, tol, r, g, erdos_moduli(model, phi_budget), plan);
}

}  // namespace zeroone
