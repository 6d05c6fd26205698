#pragma once

/**
 * @file bc.hpp
 * @brief Unions B(n,k) = A_n u ... u A_k of mutually independent events.
 *
 * Probabilities are exact rationals while the numbers stay small enough and
 * fall back to outward-rounded double enclosures otherwise (long windows or
 * very large denominators). The Specker-proxy sequences and the demo that
 * contrasts metastable bounds with direct rates live here as well.
 */

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
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

/// q_j = q_inf - (q_inf - q0) * ratio^j
struct GeometricApproach {
  Rational q0, q_inf, ratio;
  bool operator==(const GeometricApproach&) const = default;
};

/// q_j = q_inf - (q_inf - q0) / (j + 1)
struct HarmonicApproach {
  Rational q0, q_inf;
  bool operator==(const HarmonicApproach&) const = default;
};

using QSequence = std::variant<GeometricApproach, HarmonicApproach>;

inline Rational q_at(const QSequence& q, std::uint64_t j) {
  return std::visit(
      [&](const auto& s) -> Rational {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GeometricApproach>) {
          Rational pw = 1;
          // ratio^j by squaring
          Rational base = s.ratio;
          for (std::uint64_t e = j; e > 0; e >>= 1) {
            if (e & 1) pw *= base;
            if (e > 1) base *= base;
          }
          return s.q_inf - (s.q_inf - s.q0) * pw;
        } else {
          return s.q_inf - (s.q_inf - s.q0) / Rational(Index(j + 1));
        }
      },
      q);
}

inline Rational q_limit(const QSequence& q) {
  return std::visit([](const auto& s) { return s.q_inf; }, q);
}

inline Rational q_start(const QSequence& q) {
  return std::visit([](const auto& s) { return s.q0; }, q);
}

inline void validate(const QSequence& q) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if (!(s.q0 > 0 && s.q0 < s.q_inf && s.q_inf <= 1)) {
          throw InvalidArgument("q sequence needs 0 < q0 < q_inf <= 1");
        }
        if constexpr (std::is_same_v<T, GeometricApproach>) {
          if (!in_open_unit(s.ratio)) throw InvalidArgument("q sequence ratio must lie in (0,1)");
        }
      },
      q);
}

struct ConstantProb {
  Rational p;
  bool operator==(const ConstantProb&) const = default;
};

/// p_j = c * base^j
struct GeometricProb {
  Rational c, base;
  bool operator==(const GeometricProb&) const = default;
};

/// p_j = min(1, c / (j + 1))
struct HarmonicProb {
  Rational c;
  bool operator==(const HarmonicProb&) const = default;
};

/// p_j = q_{j+1} - q_j
struct SpeckerProxy {
  QSequence q;
  bool operator==(const SpeckerProxy&) const = default;
};

using ProbSequence = std::variant<ConstantProb, GeometricProb, HarmonicProb, SpeckerProxy>;

inline void validate(const ProbSequence& seq) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConstantProb>) {
          if (!in_closed_unit(s.p)) throw InvalidArgument("constant probability outside [0,1]");
        } else if constexpr (std::is_same_v<T, GeometricProb>) {
          if (!in_closed_unit(s.c)) throw InvalidArgument("geometric c outside [0,1]");
          if (s.base < 0 || s.base >= 1) throw InvalidArgument("geometric base outside [0,1)");
        } else if constexpr (std::is_same_v<T, HarmonicProb>) {
          if (s.c < 0) throw InvalidArgument("harmonic c must be nonnegative");
        } else {
          validate(s.q);
        }
      },
      seq);
}

inline Rational prob_at(const ProbSequence& seq, std::uint64_t j) {
  return std::visit(
      [&](const auto& s) -> Rational {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConstantProb>) {
          return s.p;
        } else if constexpr (std::is_same_v<T, GeometricProb>) {
          Rational pw = 1;
          Rational base = s.base;
          for (std::uint64_t e = j; e > 0; e >>= 1) {
            if (e & 1) pw *= base;
            if (e > 1) base *= base;
          }
          return s.c * pw;
        } else if constexpr (std::is_same_v<T, HarmonicProb>) {
          const Rational v = s.c / Rational(Index(j + 1));
          return v > 1 ? Rational(1) : v;
        } else {
          return q_at(s.q, j + 1) - q_at(s.q, j);
        }
      },
      seq);
}

inline std::string describe(const ProbSequence& seq) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConstantProb>) {
          return "constant(" + to_string(s.p) + ")";
        } else if constexpr (std::is_same_v<T, GeometricProb>) {
          return "geometric(" + to_string(s.c) + "," + to_string(s.base) + ")";
        } else if constexpr (std::is_same_v<T, HarmonicProb>) {
          return "harmonic(" + to_string(s.c) + ")";
        } else {
          return std::visit(
              [](const auto& q) -> std::string {
                using Q = std::decay_t<decltype(q)>;
                if constexpr (std::is_same_v<Q, GeometricApproach>) {
                  return "specker(geometric," + to_string(q.q0) + "," + to_string(q.q_inf) + "," +
                         to_string(q.ratio) + ")";
                } else {
                  return "specker(harmonic," + to_string(q.q0) + "," + to_string(q.q_inf) + ")";
                }
              },
              s.q);
        }
      },
      seq);
}

/// 1 - prod_{j=n}^{k} (1 - p_j), exactly; 0 when k < n.
inline Rational bc_exact_prob(const ProbSequence& seq, const Index& n, const Index& k) {
  if (k < n) return 0;
  const std::uint64_t lo = to_u64(n), hi = to_u64(k);
  Rational c = 1;
  for (std::uint64_t j = lo; j <= hi; ++j) {
    const Rational p = prob_at(seq, j);
    if (!in_closed_unit(p)) throw InvalidArgument("p_" + std::to_string(j) + " outside [0,1]");
    c *= 1 - p;
    if (c == 0) break;
  }
  return 1 - c;
}

namespace detail {

/// Outward-rounded double interval, closed under multiplication of nonnegatives.
struct DoubleInterval {
  double lo = 1.0, hi = 1.0;

  static DoubleInterval around(const Rational& q) {
    const double d = to_double(q);
    return {std::max(0.0, std::nextafter(d, 0.0)),
            std::nextafter(d, std::numeric_limits<double>::infinity())};
  }

  void multiply(const DoubleInterval& f) {
    lo = std::max(0.0, std::nextafter(lo * f.lo, 0.0));
    hi = std::nextafter(hi * f.hi, std::numeric_limits<double>::infinity());
  }
};

}  // namespace detail

struct BcLimits {
  /// Windows longer than this are evaluated as float enclosures.
  std::uint64_t exact_factor_limit = 10000;
  /// Exact products whose numerator plus denominator exceed this many bits
  /// fall back to enclosures as well.
  unsigned exact_bit_limit = 1u << 18;
};

/// Independent events A_j with P(A_j) = p_j and B(n,k) = A_n u ... u A_k.
class BorelCantelliFamily final : public EventFamily {
 public:
  explicit BorelCantelliFamily(ProbSequence seq, Index horizon_cap = Index(1) << 20,
                               BcLimits limits = {})
      : seq_(std::move(seq)), cap_(std::move(horizon_cap)), limits_(limits) {
    validate(seq_);
    if (cap_ < 0) throw InvalidArgument("negative horizon cap");
    to_u64(cap_, "horizon cap");
  }

  const ProbSequence& sequence() const noexcept { return seq_; }

  std::string name() const override { return "bc:" + describe(seq_); }
  Index horizon_cap() const override { return cap_; }
  Capabilities capabilities() const override { return {true, true, true}; }

  Rational p(std::uint64_t j) const {
    const Rational v = prob_at(seq_, j);
    if (!in_closed_unit(v)) throw InvalidArgument("p_" + std::to_string(j) + " outside [0,1]");
    return v;
  }

  /// Enclosure of prod_{j=n}^{k} (1 - p_j).
  ProbEstimate complement_product(std::uint64_t n, std::uint64_t k) const {
    if (k < n) return ProbEstimate::exact(1);
    if (k - n + 1 <= limits_.exact_factor_limit) {
      if (auto e = exact_complement(n, k)) return ProbEstimate::exact(*e);
    }
    detail::DoubleInterval acc;
    for (std::uint64_t j = n; j <= k; ++j) {
      const Rational q = 1 - p(j);
      if (q == 0) return ProbEstimate::exact(0);
      acc.multiply(detail::DoubleInterval::around(q));
    }
    return ProbEstimate::enclosure(from_double(acc.lo), from_double(std::min(1.0, acc.hi)),
                                   "outward-rounded float product");
  }

  std::optional<ProbEstimate> exact_prob(const Index& n, const Index& k) const override {
    if (k < n) return ProbEstimate::exact(0);
    return complement(complement_product(to_u64(n), to_u64(k)));
  }

  /// P(B(n,m) and B(l,k)) by inclusion-exclusion with the union B(n,m) u B(l,k),
  /// whose complement is the product over both index ranges.
  std::optional<ProbEstimate> exact_joint(const Index& n, const Index& m, const Index& l,
                                          const Index& k) const override {
    const ProbEstimate c1 = complement_product(to_u64(n), to_u64(m));
    const ProbEstimate c2 = complement_product(to_u64(l), to_u64(k));
    const Rational union_lo = 1 - c1.hi * c2.hi;
    const Rational union_hi = 1 - c1.lo * c2.lo;
    // P(B1 n B2) = P(B1) + P(B2) - P(B1 u B2)
    Rational lo = (1 - c1.hi) + (1 - c2.hi) - union_hi;
    Rational hi = (1 - c1.lo) + (1 - c2.lo) - union_lo;
    if (lo < 0) lo = 0;
    if (hi > 1) hi = 1;
    if (c1.is_exact() && c2.is_exact()) return ProbEstimate::exact(lo);
    return ProbEstimate::enclosure(lo, hi, "inclusion-exclusion over float products");
  }

  std::unique_ptr<Configuration> draw_from_seed(std::uint64_t seed, SampleTag tag) const override {
    const std::uint64_t h = to_u64(tag.horizon);
    const std::vector<std::uint64_t> thr = thresholds(h);
    std::vector<std::uint32_t> prefix(h + 2, 0);
    for (std::uint64_t j = 0; j <= h; ++j) {
      const bool hit = rng::uniform53(rng::keyed(seed, j)) < thr[j];
      prefix[j + 1] = prefix[j] + (hit ? 1u : 0u);
    }
    return std::make_unique<Config>(std::move(tag), std::move(prefix));
  }

 private:
  class Config final : public Configuration {
   public:
    Config(SampleTag tag, std::vector<std::uint32_t> prefix)
        : Configuration(std::move(tag)), prefix_(std::move(prefix)) {}

    bool indicator(const Index& n, const Index& k) const override {
      const auto a = n.convert_to<std::size_t>();
      const auto b = k.convert_to<std::size_t>();
      if (b < a) return false;
      return prefix_.at(b + 1) > prefix_.at(a);
    }

   private:
    std::vector<std::uint32_t> prefix_;
  };

  // Prefix products P[j] = prod_{i<j, p_i<1} (1 - p_i) and counts of p_i = 1,
  // extended lazily while they stay under the bit limit.
  std::optional<Rational> exact_complement(std::uint64_t n, std::uint64_t k) const {
    std::lock_guard lock(mu_);
    while (prefix_.size() <= k + 1 && !prefix_stopped_) {
      const std::uint64_t j = prefix_.size() - 1;
      const Rational q = 1 - p(j);
      if (q == 0) {
        prefix_.push_back(prefix_.back());
        certain_.push_back(certain_.back() + 1);
      } else {
        Rational next = prefix_.back() * q;
        if (msb_bits(next) > limits_.exact_bit_limit) {
          prefix_stopped_ = true;
          break;
        }
        prefix_.push_back(std::move(next));
        certain_.push_back(certain_.back());
      }
    }
    if (prefix_.size() > k + 1) {
      if (certain_[k + 1] > certain_[n]) return Rational(0);
      return prefix_[k + 1] / prefix_[n];
    }
    // direct product over the window, bounded by the same bit limit
    Rational c = 1;
    for (std::uint64_t j = n; j <= k; ++j) {
      c *= 1 - p(j);
      if (c == 0) return c;
      if (msb_bits(c) > limits_.exact_bit_limit) return std::nullopt;
    }
    return c;
  }

  static unsigned msb_bits(const Rational& q) {
    return detail::bit_length(abs(numerator(q))) + detail::bit_length(denominator(q));
  }

  std::vector<std::uint64_t> thresholds(std::uint64_t h) const {
    std::lock_guard lock(mu_);
    while (thresholds_.size() <= h) thresholds_.push_back(rng::bernoulli_threshold(p(thresholds_.size())));
    return {thresholds_.begin(), thresholds_.begin() + static_cast<std::ptrdiff_t>(h + 1)};
  }

  ProbSequence seq_;
  Index cap_;
  BcLimits limits_;
  mutable std::mutex mu_;
  mutable std::vector<Rational> prefix_{Rational(1)};
  mutable std::vector<std::uint64_t> certain_{0};
  mutable bool prefix_stopped_ = false;
  mutable std::vector<std::uint64_t> thresholds_;
};

/// Least n with P(B(n, horizon)) < eps, certified by the enclosure, scanning
/// n = 0..horizon. Monotonicity in n makes this the direct-rate index at
/// that horizon.
inline std::optional<std::uint64_t> direct_rate_index(const BorelCantelliFamily& family,
                                                      const Rational& eps, std::uint64_t horizon) {
  // backward cumulative complement products
  detail::DoubleInterval acc;
  std::vector<double> upper(horizon + 2, 0.0);  // upper bound on P(B(n, horizon))
  for (std::uint64_t j = horizon + 1; j-- > 0;) {
    acc.multiply(detail::DoubleInterval::around(1 - family.p(j)));
    upper[j] = std::nextafter(1.0 - acc.lo, 2.0);
  }
  std::optional<std::uint64_t> best;
  for (std::uint64_t n = horizon + 1; n-- > 0;) {
    if (from_double(std::min(1.0, upper[n])) < eps) best = n;
    else break;
  }
  return best;
}

struct SpeckerCell {
  Rational epsilon;
  std::string gap;
  std::optional<Verdict> verdict;
  std::string error;
};

struct SpeckerRate {
  Rational epsilon;
  std::optional<std::uint64_t> phi;
};

struct SpeckerReport {
  std::string label;
  std::string sequence;
  Rational lambda;
  std::uint64_t horizon = 0;
  Rational total_mass_upper;
  std::vector<SpeckerCell> cells;
  std::vector<SpeckerRate> rates;
};

/**
 * Metastable verdicts (r = 0, lambda = q_0) for every (eps, g) pair next to
 * the direct-rate index phi(eps) searched up to `horizon`. This illustrates
 * the separation between the two kinds of bound; it proves nothing about
 * the noncomputable Specker limit.
 */
inline SpeckerReport specker_demo(const QSequence& q, const std::vector<Rational>& eps_grid,
                                  const std::vector<GapFunction>& gaps, std::uint64_t horizon,
                                  const SamplePlan& plan, bool hypothesis_checks = true) {
  validate(q);
  BorelCantelliFamily family(SpeckerProxy{q}, Index(horizon));
  SpeckerReport rep;
  rep.label = "demonstration: computable proxy sequence, not a theorem check";
  rep.sequence = describe(family.sequence());
  rep.lambda = q_start(q);
  rep.horizon = horizon;
  rep.total_mass_upper = q_limit(q) - q_start(q);
  for (const auto& eps : eps_grid) {
    for (const auto& g : gaps) {
      SpeckerCell cell{eps, g.describe(), std::nullopt, {}};
      try {
        IndependentOptions opts;
        opts.hypothesis_checks = hypothesis_checks;
        cell.verdict = verify_independent(family, Tolerances(eps, rep.lambda), Index(0), g, plan, opts);
      } catch (const Error& e) {
        cell.error = e.what();
      }
      rep.cells.push_back(std::move(cell));
    }
    rep.rates.push_back({eps, direct_rate_index(family, eps, horizon)});
  }
  return rep;
}

}  // namespace zeroone
