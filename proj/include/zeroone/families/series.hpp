#pragma once

/**
 * @file series.hpp
 * @brief Random series S_n = X_0 + ... + X_n and the metastability events
 *        B^p(n,k) = { exists i,j in [n,k] : |S_i - S_j| >= 2^-p }.
 *
 * B^p(n,k) depends only on X_{n+1}, ..., X_k, so windows with m < l are
 * independent and the event grows with the window.
 */

#include <algorithm>
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
#include "zeroone/families/bc.hpp"
#include "zeroone/probability.hpp"
#include "zeroone/rational.hpp"
#include "zeroone/rng.hpp"
#include "zeroone/verifier.hpp"

namespace zeroone {

/// X_n = +-2^-n with fair signs.
struct SignedDyadic {
  bool operator==(const SignedDyadic&) const = default;
};

/// X_n = 1 iff U_n lies in [q_n, q_{n+1}) for independent uniforms U_n.
struct UniformIndicator {
  QSequence q;
  bool operator==(const UniformIndicator&) const = default;
};

/// X_n = +-c_n with fair signs for n < c.size(), and 0 afterwards.
struct ScaledSigns {
  std::vector<Rational> c;
  bool operator==(const ScaledSigns&) const = default;
};

using SeriesModel = std::variant<SignedDyadic, UniformIndicator, ScaledSigns>;

inline std::string describe(const SeriesModel& m) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SignedDyadic>) {
          return "signed-dyadic";
        } else if constexpr (std::is_same_v<T, UniformIndicator>) {
          return "uniform-indicator:" + describe(ProbSequence{SpeckerProxy{s.q}});
        } else {
          std::string out = "scaled-signs(";
          for (std::size_t i = 0; i < s.c.size(); ++i) out += (i ? "," : "") + to_string(s.c[i]);
          return out + ")";
        }
      },
      m);
}

/// Largest window length enumerated over all sign patterns.
inline constexpr std::uint64_t max_enumerated_signs = 20;

namespace detail {

/// Exhaustive P(max_{i,j in [0,w]} |T_i - T_j| >= t) for T_i = sum_{m<i} +-c_m.
inline Rational enumerate_sign_range(const std::vector<Rational>& c, const Rational& t) {
  const std::size_t w = c.size();
  std::uint64_t hits = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << w); ++mask) {
    Rational s = 0, lo = 0, hi = 0;
    for (std::size_t m = 0; m < w; ++m) {
      s += ((mask >> m) & 1) ? c[m] : -c[m];
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    if (hi - lo >= t) ++hits;
  }
  return Rational(Index(hits), Index(1) << w);
}

}  // namespace detail

/// The family B^p(n,k) of a series model.
class SeriesEventFamily final : public EventFamily {
 public:
  SeriesEventFamily(SeriesModel model, unsigned p, Index horizon_cap = default_index_cap())
      : model_(std::move(model)), p_(p), cap_(std::move(horizon_cap)), threshold_(pow2(-static_cast<long>(p))) {
    if (const auto* s = std::get_if<ScaledSigns>(&model_)) {
      if (s->c.empty()) throw InvalidArgument("scaled-signs needs at least one coefficient");
      cap_ = std::min(cap_, Index(s->c.size() - 1));
    }
    if (const auto* u = std::get_if<UniformIndicator>(&model_)) {
      validate(u->q);
      cap_ = std::min(cap_, Index(1) << 40);
      bc_ = std::make_shared<BorelCantelliFamily>(SpeckerProxy{u->q}, cap_ + 1);
    }
  }

  const SeriesModel& model() const noexcept { return model_; }
  unsigned precision() const noexcept { return p_; }

  std::string name() const override { return "series:" + describe(model_) + ":p=" + std::to_string(p_); }
  Index horizon_cap() const override { return cap_; }
  Capabilities capabilities() const override { return {true, true, true}; }

  std::optional<ProbEstimate> exact_prob(const Index& n, const Index& k) const override {
    if (k <= n) return ProbEstimate::exact(0);
    return std::visit(
        [&](const auto& s) -> std::optional<ProbEstimate> {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, SignedDyadic>) {
            // n >= p: |S_i - S_j| < 2^-n <= 2^-p. n < p: the single step
            // |X_{n+1}| = 2^-(n+1) >= 2^-p already qualifies.
            return ProbEstimate::exact(n >= Index(p_) ? 0 : 1);
          } else if constexpr (std::is_same_v<T, UniformIndicator>) {
            // 2^-p <= 1, so the event is "some X_m = 1 with m in (n,k]"
            return bc_->exact_prob(n + 1, k);
          } else {
            return scaled_exact(s, to_u64(n), to_u64(k));
          }
        },
        model_);
  }

  std::optional<ProbEstimate> exact_joint(const Index& n, const Index& m, const Index& l,
                                          const Index& k) const override {
    if (std::holds_alternative<UniformIndicator>(model_)) {
      if (m <= n || k <= l) return ProbEstimate::exact(0);
      return bc_->exact_joint(n + 1, m, l + 1, k);
    }
    const auto a = exact_prob(n, m);
    const auto b = exact_prob(l, k);
    // an event of probability 0 or 1 is independent of every other event
    auto degenerate = [](const std::optional<ProbEstimate>& e) {
      return e && e->is_exact() && (e->lo == 0 || e->lo == 1);
    };
    if (degenerate(a) && a->lo == 0) return ProbEstimate::exact(0);
    if (degenerate(b) && b->lo == 0) return ProbEstimate::exact(0);
    if (degenerate(a) && b && b->is_exact()) return ProbEstimate::exact(b->lo);
    if (degenerate(b) && a && a->is_exact()) return ProbEstimate::exact(a->lo);
    if (const auto* s = std::get_if<ScaledSigns>(&model_)) {
      const std::uint64_t n0 = to_u64(n), m0 = to_u64(m), l0 = to_u64(l), k0 = to_u64(k);
      if (k0 - n0 > max_enumerated_signs) return std::nullopt;
      return ProbEstimate::exact(enumerate_joint(*s, n0, m0, l0, k0));
    }
    return std::nullopt;
  }

  std::unique_ptr<Configuration> draw_from_seed(std::uint64_t seed, SampleTag tag) const override {
    const std::uint64_t h = to_u64(tag.horizon);
    return std::visit(
        [&](const auto& s) -> std::unique_ptr<Configuration> {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, SignedDyadic>) {
            return std::make_unique<DyadicConfig>(std::move(tag), p_);
          } else if constexpr (std::is_same_v<T, UniformIndicator>) {
            std::vector<std::uint32_t> prefix(h + 2, 0);
            std::uint64_t lo = rng::bernoulli_threshold(q_at(s.q, 0));
            for (std::uint64_t m = 0; m <= h; ++m) {
              const std::uint64_t hi = rng::bernoulli_threshold(q_at(s.q, m + 1));
              const std::uint64_t u = rng::uniform53(rng::keyed(seed, m));
              prefix[m + 1] = prefix[m] + ((u >= lo && u < hi) ? 1u : 0u);
              lo = hi;
            }
            return std::make_unique<CountConfig>(std::move(tag), std::move(prefix));
          } else {
            std::vector<Rational> partial(h + 1);
            Rational acc = 0;
            for (std::uint64_t m = 0; m <= h; ++m) {
              const bool plus = rng::keyed(seed, m) >> 63;
              acc += plus ? s.c[m] : -s.c[m];
              partial[m] = acc;
            }
            return std::make_unique<PathConfig>(std::move(tag), std::move(partial), threshold_);
          }
        },
        model_);
  }

 private:
  class DyadicConfig final : public Configuration {
   public:
    DyadicConfig(SampleTag tag, unsigned p) : Configuration(std::move(tag)), p_(p) {}
    bool indicator(const Index& n, const Index& k) const override { return k > n && n < Index(p_); }

   private:
    unsigned p_;
  };

  class CountConfig final : public Configuration {
   public:
    CountConfig(SampleTag tag, std::vector<std::uint32_t> prefix)
        : Configuration(std::move(tag)), prefix_(std::move(prefix)) {}
    bool indicator(const Index& n, const Index& k) const override {
      const auto a = n.convert_to<std::size_t>(), b = k.convert_to<std::size_t>();
      return b > a && prefix_.at(b + 1) > prefix_.at(a + 1);
    }

   private:
    std::vector<std::uint32_t> prefix_;
  };

  class PathConfig final : public Configuration {
   public:
    PathConfig(SampleTag tag, std::vector<Rational> partial, Rational threshold)
        : Configuration(std::move(tag)), s_(std::move(partial)), t_(std::move(threshold)) {}
    bool indicator(const Index& n, const Index& k) const override {
      const auto a = n.convert_to<std::size_t>(), b = k.convert_to<std::size_t>();
      if (b <= a) return false;
      const auto [lo, hi] = std::minmax_element(s_.begin() + static_cast<std::ptrdiff_t>(a),
                                                s_.begin() + static_cast<std::ptrdiff_t>(b) + 1);
      return *hi - *lo >= t_;
    }

   private:
    std::vector<Rational> s_;
    Rational t_;
  };

  std::optional<ProbEstimate> scaled_exact(const ScaledSigns& s, std::uint64_t n, std::uint64_t k) const {
    Rational total = 0;
    for (std::uint64_t m = n + 1; m <= k; ++m) {
      const Rational a = abs(s.c[m]);
      if (a >= threshold_) return ProbEstimate::exact(1);
      total += a;
    }
    if (total < threshold_) return ProbEstimate::exact(0);
    if (k - n > max_enumerated_signs) return std::nullopt;
    return ProbEstimate::exact(detail::enumerate_sign_range(
        {s.c.begin() + static_cast<std::ptrdiff_t>(n + 1), s.c.begin() + static_cast<std::ptrdiff_t>(k + 1)},
        threshold_));
  }

  Rational enumerate_joint(const ScaledSigns& s, std::uint64_t n, std::uint64_t m, std::uint64_t l,
                           std::uint64_t k) const {
    const std::uint64_t w = k - n;
    std::uint64_t hits = 0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << w); ++mask) {
      // S_i - S_n for i = n..k
      Rational acc = 0;
      Rational lo1 = 0, hi1 = 0, lo2, hi2;
      for (std::uint64_t i = n + 1; i <= k; ++i) {
        acc += ((mask >> (i - n - 1)) & 1) ? s.c[i] : -s.c[i];
        if (i <= m) {
          lo1 = std::min(lo1, acc);
          hi1 = std::max(hi1, acc);
        }
        if (i == l) {
          lo2 = hi2 = acc;
        } else if (i > l) {
          lo2 = std::min(lo2, acc);
          hi2 = std::max(hi2, acc);
        }
      }
      if (hi1 - lo1 >= threshold_ && hi2 - lo2 >= threshold_) ++hits;
    }
    return Rational(Index(hits), Index(1) << w);
  }

  SeriesModel model_;
  unsigned p_;
  Index cap_;
  Rational threshold_;
  std::shared_ptr<BorelCantelliFamily> bc_;
};

/// P(exists i,j in [n,k] : |S_i - S_j| >= 2^-p); exact where a closed form,
/// deterministic bound or enumeration applies, Monte Carlo otherwise.
inline ProbEstimate metastable_event_prob(const SeriesModel& model, const Index& n, const Index& k,
                                          unsigned p, const SamplePlan& plan,
                                          const Index& horizon_cap = default_index_cap()) {
  const SeriesEventFamily family(model, p, horizon_cap);
  return prob_of(family, n, k, plan);
}

/// Index maps p -> index used by the three-series moduli.
struct ConstantMap {
  Index value;
  bool operator==(const ConstantMap&) const = default;
};

/// p -> ceil(alpha * p + beta), clamped at 0.
struct AffineCeilMap {
  Rational alpha, beta;
  bool operator==(const AffineCeilMap&) const = default;
};

using IndexMap = std::variant<ConstantMap, AffineCeilMap>;

inline Index apply_map(const IndexMap& f, const Index& p) {
  return std::visit(
      [&](const auto& m) -> Index {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantMap>) {
          return m.value;
        } else {
          const Index v = ceil_rational(m.alpha * Rational(p) + m.beta);
          return v < 0 ? Index(0) : v;
        }
      },
      f);
}

inline std::string describe(const IndexMap& f) {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantMap>) return "const:" + m.value.str();
        else return "ceil:" + to_string(m.alpha) + ":" + to_string(m.beta);
      },
      f);
}

struct SeriesConvResult {
  Verdict verdict;
  /// Truncated necessary condition P(B^p(phi(p), H)) <= 1 - lambda.
  std::string truncation_status;  // "holds", "violated", "undetermined" or "skipped"
  Index truncation_horizon;
  std::optional<ProbEstimate> truncation_estimate;
};

/**
 * Runs the independent-block verifier on B^p with r = phi(p). The premise that
 * P(B^p(phi(p), infinity)) <= 1 - lambda cannot be sampled; a truncated
 * version at H = 4 * s is evaluated and reported as a necessary condition.
 */
inline SeriesConvResult verify_conv(const SeriesModel& model, const IndexMap& phi, const Rational& lambda,
                                    const Rational& epsilon, unsigned p, const GapFunction& g,
                                    const SamplePlan& plan, const IndependentOptions& opts = {},
                                    const Index& horizon_cap = default_index_cap()) {
  const SeriesEventFamily family(model, p, horizon_cap);
  const Index r = apply_map(phi, Index(p));
  SeriesConvResult out{verify_independent(family, Tolerances(epsilon, lambda), r, g, plan, opts), "skipped", 0,
                       std::nullopt};
  out.truncation_horizon = 4 * std::max(out.verdict.params.s, Index(1));
  if (out.truncation_horizon <= family.horizon_cap()) {
    out.truncation_estimate = prob_of(family, r, out.truncation_horizon, plan);
    const Rational bound = 1 - lambda;
    if (certainly_not_above(*out.truncation_estimate, bound)) out.truncation_status = "holds";
    else if (certainly_above(*out.truncation_estimate, bound)) out.truncation_status = "violated";
    else out.truncation_status = "undetermined";
  }
  out.verdict.notes.push_back("truncated premise at H = " + out.truncation_horizon.str() + ": " +
                              out.truncation_status + " (necessary condition only)");
  return out;
}

struct ThreeSeriesModuli {
  Rational a;
  Index n0;
  unsigned q = 0;
  IndexMap varphi;
  IndexMap xi;

  /// Phi(p) = max{n0, varphi(p+1), xi(2p+q+5)}
  Index phi(unsigned p) const {
    return std::max({n0, apply_map(varphi, Index(p + 1)), apply_map(xi, Index(2 * p + q + 5))});
  }
  Rational lambda() const { return pow2(-static_cast<long>(q) - 1); }

  bool operator==(const ThreeSeriesModuli&) const = default;
};

struct ConditionCheck {
  std::string condition;  // "i", "ii" or "iii"
  std::string status;     // "verified", "violated" or "unchecked"
  std::string detail;
};

struct ModuliValidation {
  std::vector<ConditionCheck> checks;
  /// Conditions (ii) and (iii) are checked for every p in [0, max_p].
  unsigned max_p = 0;

  bool any_violated() const {
    return std::any_of(checks.begin(), checks.end(), [](const auto& c) { return c.status == "violated"; });
  }
};

namespace detail {

inline Index ceil_log2_recip(const Rational& a) {
  // least m with 2^-m <= a, for 0 < a
  Index m = 0;
  while (pow2(-static_cast<long>(m.convert_to<long>())) > a) ++m;
  return m;
}

}  // namespace detail

/// Checks conditions (i)-(iii) of the three-series moduli where the model
/// makes them computable.
inline ModuliValidation validate_three_series(const SeriesModel& model, const ThreeSeriesModuli& mod,
                                              unsigned max_p) {
  if (mod.a <= 0) throw InvalidArgument("three-series truncation level a must be positive");
  ModuliValidation out;
  out.max_p = max_p;
  const Rational q_bound = 1 - pow2(-static_cast<long>(mod.q));
  auto verdict = [](bool ok) { return ok ? std::string("verified") : std::string("violated"); };

  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SignedDyadic>) {
          // |X_i| = 2^-i >= a exactly for i < first_small, plus i = first_small when 2^-i == a
          const Index first_small = detail::ceil_log2_recip(mod.a);  // least i with 2^-i <= a
          Index last_big = first_small - 1;
          if (pow2(-first_small.convert_to<long>()) == mod.a) last_big = first_small;
          const Index count = last_big >= mod.n0 ? Index(last_big - mod.n0 + 1) : Index(0);
          out.checks.push_back({"i", verdict(Rational(count) <= q_bound), "sum = " + count.str()});
          out.checks.push_back({"ii", "verified", "E[Y_i] = 0 by symmetry"});
          // Var(Y_n) = 4^-n when 2^-n <= a, else 0
          bool ok = true;
          std::string detail;
          for (unsigned p = 0; p <= max_p && ok; ++p) {
            const Index start = std::max(apply_map(mod.xi, Index(p)), first_small);
            const Rational tail = Rational(4, 3) * pow2(-2 * start.convert_to<long>());
            if (!(tail < pow2(-static_cast<long>(p)))) {
              ok = false;
              detail = "p = " + std::to_string(p) + ": variance tail " + to_string(tail);
            }
          }
          out.checks.push_back({"iii", verdict(ok), ok ? "geometric tail below 2^-p" : detail});
        } else if constexpr (std::is_same_v<T, ScaledSigns>) {
          Index count = 0;
          for (std::size_t i = 0; i < s.c.size(); ++i) {
            if (Index(i) >= mod.n0 && abs(s.c[i]) >= mod.a) ++count;
          }
          out.checks.push_back({"i", verdict(Rational(count) <= q_bound), "sum = " + count.str()});
          out.checks.push_back({"ii", "verified", "E[Y_i] = 0 by symmetry"});
          bool ok = true;
          std::string detail;
          for (unsigned p = 0; p <= max_p && ok; ++p) {
            Rational tail = 0;
            const Index start = apply_map(mod.xi, Index(p));
            for (std::size_t i = 0; i < s.c.size(); ++i) {
              if (Index(i) >= start && abs(s.c[i]) <= mod.a) tail += s.c[i] * s.c[i];
            }
            if (!(tail < pow2(-static_cast<long>(p)))) {
              ok = false;
              detail = "p = " + std::to_string(p) + ": variance tail " + to_string(tail);
            }
          }
          out.checks.push_back({"iii", verdict(ok), ok ? "finite variance tail below 2^-p" : detail});
        } else {
          // X_i in {0,1} with P(X_i = 1) = q_{i+1} - q_i; tails telescope to q_inf - q_m
          const Rational q_inf = q_limit(s.q);
          const auto tail_from = [&](const Index& m) { return q_inf - q_at(s.q, to_u64(m)); };
          if (mod.a <= 1) {
            const Rational sum = tail_from(mod.n0);
            out.checks.push_back({"i", verdict(sum <= q_bound), "sum = " + to_string(sum)});
          } else {
            out.checks.push_back({"i", "verified", "|X_i| <= 1 < a"});
          }
          if (mod.a < 1) {
            out.checks.push_back({"ii", "verified", "Y_i = 0"});
            out.checks.push_back({"iii", "verified", "Y_i = 0"});
            return;
          }
          bool ok2 = true;
          std::string d2;
          for (unsigned p = 0; p <= max_p && ok2; ++p) {
            const Rational sup = tail_from(apply_map(mod.varphi, Index(p)));
            if (!(sup < pow2(-static_cast<long>(p)))) {
              ok2 = false;
              d2 = "p = " + std::to_string(p) + ": mean tail " + to_string(sup);
            }
          }
          out.checks.push_back({"ii", verdict(ok2), ok2 ? "mean tails below 2^-p" : d2});
          // sum p_i (1 - p_i) <= sum p_i; a failing upper bound is inconclusive
          std::string status = "verified";
          std::string d3 = "variance tail bounded by mean tail";
          for (unsigned p = 0; p <= max_p; ++p) {
            const Index start = apply_map(mod.xi, Index(p));
            if (!(tail_from(start) < pow2(-static_cast<long>(p)))) {
              Rational partial = 0;
              const std::uint64_t first = to_u64(start);
              for (std::uint64_t i = first; i < first + 4096; ++i) {
                const Rational pi = q_at(s.q, i + 1) - q_at(s.q, i);
                partial += pi * (1 - pi);
              }
              if (partial >= pow2(-static_cast<long>(p))) {
                status = "violated";
                d3 = "p = " + std::to_string(p) + ": partial variance sum " + to_string(partial);
                break;
              }
              status = "unchecked";
              d3 = "p = " + std::to_string(p) + ": variance tail not certified";
            }
          }
          out.checks.push_back({"iii", status, d3});
        }
      },
      model);
  return out;
}

struct ThreeSeriesResult {
  SeriesConvResult conv;
  ModuliValidation validation;
  Index phi;
  Rational lambda;
};

/**
 * Validates the moduli (ModuliInvalid on a violated condition), sets
 * phi = Phi and lambda = 2^-(q+1), and delegates to verify_conv. Conditions
 * (ii) and (iii) are checked for p' in [0, 2p + q + 5].
 */
inline ThreeSeriesResult verify_three_series(const SeriesModel& model, const ThreeSeriesModuli& mod,
                                             const Rational& epsilon, unsigned p, const GapFunction& g,
                                             const SamplePlan& plan, const IndependentOptions& opts = {},
                                             const Index& horizon_cap = default_index_cap()) {
  ThreeSeriesResult out{{}, validate_three_series(model, mod, 2 * p + mod.q + 5), mod.phi(p), mod.lambda()};
  for (const auto& c : out.validation.checks) {
    if (c.status == "violated") throw ModuliInvalid("condition (" + c.condition + ") fails: " + c.detail);
  }
  out.conv = verify_conv(model, ConstantMap{out.phi}, out.lambda, epsilon, p, g, plan, opts, horizon_cap);
  return out;
}

struct MaximalInequalityRow {
  Rational t;
  Rational probability;  // P(max_{i<=m} |S_i| >= t)
  Rational bound;        // Var(S_m) / t^2
  bool holds = false;
};

/// Exhaustive check of Kolmogorov's maximal inequality for +-c_i fair signs.
inline std::vector<MaximalInequalityRow> maximal_inequality_check(const std::vector<Rational>& c,
                                                                  const std::vector<Rational>& t_grid) {
  if (c.size() > max_enumerated_signs) throw InvalidArgument("too many coefficients to enumerate");
  Rational var = 0;
  for (const auto& x : c) var += x * x;
  std::vector<MaximalInequalityRow> rows;
  for (const auto& t : t_grid) {
    if (t <= 0) throw InvalidArgument("threshold must be positive");
    std::uint64_t hits = 0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << c.size()); ++mask) {
      Rational s = 0;
      bool hit = false;
      for (std::size_t i = 0; i < c.size() && !hit; ++i) {
        s += ((mask >> i) & 1) ? c[i] : -c[i];
        hit = abs(s) >= t;
      }
      hits += hit;
    }
    MaximalInequalityRow row{t, Rational(Index(hits), Index(1) << c.size()), var / (t * t)};
    row.holds = row.probability <= row.bound;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace zeroone
