#pragma once

/**
 * @file probability.hpp
 * @brief Probabilities as certified intervals.
 *
 * A ProbEstimate is either exact (a width-0 rational), an exact enclosure
 * (a certified interval produced by outward-rounded floating point when exact
 * rationals would be too large), or a Monte Carlo confidence interval. Every
 * threshold decision downstream is made on the interval endpoints only.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "zeroone/bounds.hpp"
#include "zeroone/error.hpp"
#include "zeroone/rational.hpp"
#include "zeroone/rng.hpp"

namespace zeroone {

enum class IntervalKind { ClopperPearson, Hoeffding };

inline const char* to_string(IntervalKind k) {
  return k == IntervalKind::ClopperPearson ? "clopper-pearson" : "hoeffding";
}

struct ExactMethod {
  bool operator==(const ExactMethod&) const = default;
};

/// Certified enclosure from outward-rounded floating point.
struct EnclosureMethod {
  std::string note;
  bool operator==(const EnclosureMethod&) const = default;
};

struct MonteCarloMethod {
  std::uint64_t samples = 0;
  std::uint64_t successes = 0;
  std::uint64_t master_seed = 0;
  std::string stream_id;
  IntervalKind interval = IntervalKind::ClopperPearson;
  /// Set when the Clopper-Pearson inversion failed and Hoeffding was used instead.
  bool fallback = false;
  bool operator==(const MonteCarloMethod&) const = default;
};

using EstimateMethod = std::variant<ExactMethod, EnclosureMethod, MonteCarloMethod>;

struct ProbEstimate {
  Rational lo;
  Rational hi;
  Rational confidence{1};
  EstimateMethod method{ExactMethod{}};

  static ProbEstimate exact(Rational p) {
    if (!in_closed_unit(p)) throw InvalidArgument("probability " + to_string(p) + " outside [0,1]");
    ProbEstimate e;
    e.lo = p;
    e.hi = std::move(p);
    return e;
  }

  static ProbEstimate enclosure(Rational lo, Rational hi, std::string note) {
    if (!(0 <= lo && lo <= hi && hi <= 1)) throw InvalidArgument("malformed enclosure");
    ProbEstimate e;
    e.lo = std::move(lo);
    e.hi = std::move(hi);
    e.method = EnclosureMethod{std::move(note)};
    return e;
  }

  bool is_exact() const { return std::holds_alternative<ExactMethod>(method); }
  bool is_sampled() const { return std::holds_alternative<MonteCarloMethod>(method); }
  bool is_certain() const { return !is_sampled(); }
  Rational width() const { return hi - lo; }

  /// Error probability this interval contributes to a union bound.
  Rational error() const { return 1 - confidence; }

  const MonteCarloMethod* monte_carlo() const { return std::get_if<MonteCarloMethod>(&method); }

  std::string method_name() const {
    if (is_exact()) return "exact";
    if (std::holds_alternative<EnclosureMethod>(method)) return "enclosure";
    return "monte-carlo";
  }

  bool operator==(const ProbEstimate&) const = default;
};

/// Complement 1 - P, preserving provenance.
inline ProbEstimate complement(const ProbEstimate& e) {
  ProbEstimate c = e;
  c.lo = 1 - e.hi;
  c.hi = 1 - e.lo;
  return c;
}

struct ThresholdVerdict {
  enum class Kind { Below, Above, Inconclusive };
  Kind kind = Kind::Inconclusive;
  /// Width of the interval straddling the threshold (Inconclusive only).
  Rational gap;

  bool operator==(const ThresholdVerdict&) const = default;
};

inline const char* to_string(ThresholdVerdict::Kind k) {
  switch (k) {
    case ThresholdVerdict::Kind::Below: return "below";
    case ThresholdVerdict::Kind::Above: return "above";
    default: return "inconclusive";
  }
}

/// Below iff hi < theta, Above iff lo > theta, otherwise Inconclusive.
inline ThresholdVerdict compare(const ProbEstimate& est, const Rational& theta) {
  if (!in_closed_unit(theta)) throw InvalidArgument("threshold outside [0,1]");
  if (est.hi < theta) return {ThresholdVerdict::Kind::Below, Rational(0)};
  if (est.lo > theta) return {ThresholdVerdict::Kind::Above, Rational(0)};
  return {ThresholdVerdict::Kind::Inconclusive, est.hi - est.lo};
}

// Decision helpers. An exact estimate sitting on the threshold is certainly
// "not below" even though compare() reports it as Inconclusive.
inline bool certainly_below(const ProbEstimate& e, const Rational& t) { return e.hi < t; }
inline bool certainly_not_below(const ProbEstimate& e, const Rational& t) { return e.lo >= t; }
inline bool certainly_above(const ProbEstimate& e, const Rational& t) { return e.lo > t; }
inline bool certainly_not_above(const ProbEstimate& e, const Rational& t) { return e.hi <= t; }

struct SamplePlan {
  /// Initial number of samples per Monte Carlo estimate.
  std::uint64_t samples = 4096;
  /// Adaptive doubling stops once this many samples have been used.
  std::uint64_t max_samples = 65536;
  /// Total error probability allowed for all Monte Carlo claims of a verdict.
  Rational error_budget{1, 20};
  /// Bonferroni divisor; verifiers set it from the comparisons they will make.
  std::uint64_t total_comparisons = 1;
  std::uint64_t master_seed = 0;
  /// 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;
  IntervalKind interval = IntervalKind::ClopperPearson;
  /// Use Monte Carlo even where an exact path exists.
  bool force_sampling = false;
  /// Configurations drawn by the per-sample hypothesis checks.
  std::uint64_t hypothesis_samples = 256;
  /// Maximal number of (n,m,l,k) tuples the independence check evaluates.
  std::uint64_t hypothesis_tuple_budget = 50000;

  Rational per_comparison_error() const {
    if (total_comparisons == 0) throw InvalidArgument("total_comparisons must be >= 1");
    return error_budget / Rational(Index(total_comparisons));
  }
  Rational per_comparison_confidence() const { return 1 - per_comparison_error(); }

  void validate() const {
    if (samples < 1) throw InvalidArgument("plan needs samples >= 1");
    if (max_samples < samples) throw InvalidArgument("plan needs max_samples >= samples");
    if (!in_open_unit(error_budget)) throw InvalidArgument("error budget must lie in (0,1)");
  }

  bool operator==(const SamplePlan&) const = default;
};

namespace detail {

inline double widen_down(double x) { return std::max(0.0, x * (1.0 - std::ldexp(1.0, -40))); }
inline double widen_up(double x) { return std::min(1.0, x * (1.0 + std::ldexp(1.0, -40))); }

inline std::pair<double, double> hoeffding_interval(std::uint64_t k, std::uint64_t n, double alpha) {
  const double phat = static_cast<double>(k) / static_cast<double>(n);
  const double half = std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
  return {widen_down(std::max(0.0, phat - half)), widen_up(std::min(1.0, phat + half))};
}

inline std::pair<double, double> clopper_pearson_interval(std::uint64_t k, std::uint64_t n,
                                                          double alpha) {
  const auto nd = static_cast<double>(n);
  const auto kd = static_cast<double>(k);
  // At k = 0 or k = n one side carries no error, so the whole alpha goes to the other.
  if (k == 0) return {0.0, widen_up(-std::expm1(std::log(alpha) / nd))};
  if (k == n) return {widen_down(std::exp(std::log(alpha) / nd)), 1.0};
  const double lo = boost::math::ibeta_inv(kd, nd - kd + 1.0, alpha / 2.0);
  const double hi = boost::math::ibeta_inv(kd + 1.0, nd - kd, 1.0 - alpha / 2.0);
  return {widen_down(lo), widen_up(hi)};
}

}  // namespace detail

/// Two-sided interval for a Bernoulli mean from k successes in n trials.
inline ProbEstimate binomial_interval(std::uint64_t successes, std::uint64_t samples,
                                      const Rational& confidence, IntervalKind kind,
                                      MonteCarloMethod meta = {}) {
  if (samples < 1) throw InvalidArgument("need at least one sample");
  if (successes > samples) throw InvalidArgument("more successes than samples");
  if (!(confidence > 0 && confidence <= 1)) throw InvalidArgument("confidence must lie in (0,1]");
  meta.samples = samples;
  meta.successes = successes;
  meta.interval = kind;
  ProbEstimate e;
  e.confidence = confidence;
  if (confidence == 1) {
    e.lo = 0;
    e.hi = 1;
  } else {
    // Round alpha down so the interval can only get wider.
    const double alpha = std::nextafter(to_double(1 - confidence), 0.0);
    std::pair<double, double> iv;
    if (kind == IntervalKind::ClopperPearson) {
      try {
        iv = detail::clopper_pearson_interval(successes, samples, alpha);
      } catch (const std::exception&) {
        iv = detail::hoeffding_interval(successes, samples, alpha);
        meta.interval = IntervalKind::Hoeffding;
        meta.fallback = true;
      }
    } else {
      iv = detail::hoeffding_interval(successes, samples, alpha);
    }
    e.lo = from_double(iv.first);
    e.hi = from_double(iv.second);
  }
  e.method = std::move(meta);
  return e;
}

/// Runs `fn(sample_index, sample_seed, out)` for every sample and counts, per
/// slot of `out`, how many samples set it. Counting is order-independent, so the
/// result does not depend on the number of worker threads.
template <class Fn>
std::vector<std::uint64_t> count_successes(std::size_t slots, std::uint64_t first_sample,
                                           std::uint64_t samples, std::uint64_t master_seed,
                                           std::string_view stream_id, unsigned threads, Fn&& fn) {
  const std::uint64_t stream = rng::stream_hash(stream_id);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(1, samples / 64)));

  struct Failure {
    std::uint64_t index = std::numeric_limits<std::uint64_t>::max();
    std::string what;
  };

  auto run_chunk = [&](std::uint64_t begin, std::uint64_t end, std::vector<std::uint64_t>& counts,
                       Failure& failure) {
    std::vector<std::uint8_t> out(slots);
    for (std::uint64_t i = begin; i < end; ++i) {
      std::fill(out.begin(), out.end(), std::uint8_t{0});
      try {
        fn(i, rng::derive_seed(master_seed, stream, i), std::span<std::uint8_t>(out));
      } catch (const std::exception& ex) {
        failure = {i, ex.what()};
        return;
      }
      for (std::size_t s = 0; s < slots; ++s) counts[s] += out[s] ? 1 : 0;
    }
  };

  const std::uint64_t end = first_sample + samples;
  std::vector<std::vector<std::uint64_t>> partial(threads, std::vector<std::uint64_t>(slots, 0));
  std::vector<Failure> failures(threads);
  if (threads == 1) {
    run_chunk(first_sample, end, partial[0], failures[0]);
  } else {
    std::vector<std::jthread> pool;
    const std::uint64_t chunk = (samples + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::uint64_t b = first_sample + std::min<std::uint64_t>(samples, t * chunk);
      const std::uint64_t e = first_sample + std::min<std::uint64_t>(samples, (t + 1) * chunk);
      pool.emplace_back([&, b, e, t] { run_chunk(b, e, partial[t], failures[t]); });
    }
  }
  const auto worst = std::min_element(failures.begin(), failures.end(),
                                      [](const Failure& a, const Failure& b) { return a.index < b.index; });
  if (worst->index != std::numeric_limits<std::uint64_t>::max()) {
    throw SamplerFailure(worst->index, worst->what);
  }
  std::vector<std::uint64_t> total(slots, 0);
  for (const auto& p : partial) {
    for (std::size_t s = 0; s < slots; ++s) total[s] += p[s];
  }
  return total;
}

/**
 * Monte Carlo estimate of P(indicator = 1).
 *
 * `indicator(sample_index, sample_seed)` must be a pure function of its
 * arguments; sample i of stream s always receives derive_seed(master, hash(s), i).
 */
template <class Indicator>
ProbEstimate estimate(Indicator&& indicator, std::uint64_t samples, std::uint64_t master_seed,
                      const std::string& stream_id, const Rational& confidence,
                      IntervalKind kind = IntervalKind::ClopperPearson, unsigned threads = 0) {
  if (samples < 1) throw InvalidArgument("estimate needs samples >= 1");
  const auto counts = count_successes(
      1, 0, samples, master_seed, stream_id, threads,
      [&](std::uint64_t i, std::uint64_t seed, std::span<std::uint8_t> out) {
        out[0] = indicator(i, seed) ? 1 : 0;
      });
  MonteCarloMethod meta;
  meta.master_seed = master_seed;
  meta.stream_id = stream_id;
  return binomial_interval(counts[0], samples, confidence, kind, std::move(meta));
}

/// Hoeffding sample count ceil(ln(2/(1-confidence)) / (2 delta^2)); the log is
/// replaced by a certified upper bound, so the count is never too small.
inline std::uint64_t plan_samples(const Rational& delta, const Rational& confidence) {
  if (!in_open_unit(delta)) throw InvalidArgument("margin must lie in (0,1)");
  if (!in_open_unit(confidence)) throw InvalidArgument("confidence must lie in (0,1)");
  const Rational log_term = ln_recip_upper((1 - confidence) / 2);
  return to_u64(ceil_rational(log_term / (2 * delta * delta)), "sample count");
}

}  // namespace zeroone
