#pragma once

/**
 * @file percolation.hpp
 * @brief Bond percolation on Z^d inside finite l-infinity balls.
 *
 * Connectivity between the spheres S_n and S_k is annulus-restricted: a path
 * may only use edges whose endpoints x satisfy n <= |x|_inf <= k. With this
 * reading the events for [n,m] and [l,k], m < l, are functions of disjoint
 * edge sets and therefore independent, and every path from S_n to S_k
 * contains subpaths crossing each inner annulus. Probabilities computed here
 * are lower bounds for unrestricted connection probabilities.
 */

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "zeroone/bounds.hpp"
#include "zeroone/error.hpp"
#include "zeroone/events.hpp"
#include "zeroone/probability.hpp"
#include "zeroone/rational.hpp"
#include "zeroone/rng.hpp"
#include "zeroone/verifier.hpp"

namespace zeroone {

struct LatticeSpec {
  unsigned d = 2;
  Rational p;
  std::uint64_t radius_cap = 64;

  /// Largest ball (in vertices) a configuration may materialize.
  static constexpr std::uint64_t max_vertices = std::uint64_t{1} << 24;

  void validate() const {
    if (d < 1) throw InvalidArgument("lattice dimension must be >= 1");
    if (!in_closed_unit(p)) throw InvalidArgument("edge probability outside [0,1]");
    if (ball_vertices(radius_cap) > max_vertices) {
      throw InvalidArgument("ball of radius " + std::to_string(radius_cap) + " in dimension " +
                            std::to_string(d) + " exceeds the vertex budget");
    }
  }

  /// (2R+1)^d, saturating.
  Index ball_vertices(std::uint64_t radius) const {
    Index v = 1;
    for (unsigned i = 0; i < d; ++i) v *= Index(2 * radius + 1);
    return v;
  }

  bool operator==(const LatticeSpec&) const = default;
};

/// |S_n| = (2n+1)^d - (2n-1)^d for n >= 1, and 1 for n = 0.
inline Index sphere_size(unsigned d, std::uint64_t n) {
  if (n == 0) return 1;
  Index a = 1, b = 1;
  for (unsigned i = 0; i < d; ++i) {
    a *= Index(2 * n + 1);
    b *= Index(2 * n - 1);
  }
  return a - b;
}

/// Calls fn(coords) for every x in Z^d with |x|_inf = n, in lexicographic order.
inline void for_each_sphere_vertex(unsigned d, std::int64_t n,
                                   const std::function<void(const std::vector<std::int64_t>&)>& fn) {
  std::vector<std::int64_t> x(d, -n);
  while (true) {
    bool on_sphere = false;
    for (auto c : x) on_sphere = on_sphere || c == n || c == -n;
    if (on_sphere) fn(x);
    std::size_t i = d;
    while (i > 0) {
      --i;
      if (x[i] < n) {
        ++x[i];
        break;
      }
      x[i] = -n;
      if (i == 0) return;
    }
    if (d == 0) return;
  }
}

/// An edge {x, x + e_dir}, identified by its lower endpoint.
struct Edge {
  std::vector<std::int64_t> x;
  unsigned dir = 0;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

/// Horizon-independent key of an edge; the edge's coin is keyed(seed, key).
inline std::uint64_t edge_key(const std::int64_t* x, unsigned d, unsigned dir) {
  std::uint64_t h = rng::mix64(0xed9e000000000000ull + dir);
  for (unsigned i = 0; i < d; ++i) h = rng::mix64(h ^ static_cast<std::uint64_t>(x[i]));
  return h;
}

inline std::int64_t linf(const std::vector<std::int64_t>& x) {
  std::int64_t m = 0;
  for (auto c : x) m = std::max(m, c < 0 ? -c : c);
  return m;
}

/// Edges with both endpoints in the annulus n <= |x|_inf <= k, sorted.
inline std::vector<Edge> annulus_edges(unsigned d, std::int64_t n, std::int64_t k) {
  std::vector<Edge> out;
  for (std::int64_t m = n; m <= k; ++m) {
    for_each_sphere_vertex(d, m, [&](const std::vector<std::int64_t>& x) {
      for (unsigned j = 0; j < d; ++j) {
        auto y = x;
        ++y[j];
        const auto ny = linf(y);
        if (ny >= n && ny <= k) out.push_back({x, j});
      }
    });
  }
  std::sort(out.begin(), out.end());
  return out;
}

enum class Polarity {
  /// B(n,k) = "S_n and S_k are not connected inside the annulus" (union-closed).
  NotConnected,
  /// B(n,k) = "S_n and S_k are connected inside the annulus".
  Connected,
};

inline const char* to_string(Polarity p) {
  return p == Polarity::NotConnected ? "not-connected" : "connected";
}

/// One sampled edge configuration on the ball of radius tag().horizon.
class EdgeConfiguration final : public Configuration {
 public:
  EdgeConfiguration(SampleTag tag, unsigned d, std::uint64_t seed, std::uint64_t threshold)
      : Configuration(std::move(tag)), d_(d) {
    h_ = to_u64(this->tag().horizon);
    side_ = 2 * h_ + 1;
    std::uint64_t v = 1;
    for (unsigned i = 0; i < d_; ++i) v *= side_;
    vertices_ = v;
    norm_.resize(v);
    open_.assign(v * d_, 0);
    shells_.resize(h_ + 1);
    std::vector<std::int64_t> x(d_);
    for (std::uint64_t id = 0; id < v; ++id) {
      coords(id, x.data());
      std::int64_t m = 0;
      for (auto c : x) m = std::max(m, c < 0 ? -c : c);
      norm_[id] = static_cast<std::uint32_t>(m);
      shells_[m].push_back(id);
      for (unsigned j = 0; j < d_; ++j) {
        if (x[j] < static_cast<std::int64_t>(h_)) {
          open_[id * d_ + j] = rng::uniform53(rng::keyed(seed, edge_key(x.data(), d_, j))) < threshold;
        }
      }
    }
    rows_.resize(h_ + 1);
  }

  unsigned dimension() const noexcept { return d_; }
  std::uint64_t horizon() const noexcept { return h_; }

  /// Whether the edge from x in direction +e_dir is open; requires both endpoints in the ball.
  bool is_open(const std::vector<std::int64_t>& x, unsigned dir) const {
    return open_.at(id_of(x.data()) * d_ + dir) != 0;
  }

  /// 1 iff S_n and S_k are joined by open edges inside the annulus [n,k].
  bool connected(std::uint64_t n, std::uint64_t k) const {
    if (k < n || k > h_) throw InvalidArgument("annulus query outside the configuration");
    if (rows_[n].empty()) rows_[n] = connection_row(n);
    return rows_[n][k - n] != 0;
  }

  bool indicator(const Index& n, const Index& k) const override {
    return connected(n.convert_to<std::uint64_t>(), k.convert_to<std::uint64_t>());
  }

  /// Edge bits in canonical order: vertices lexicographic in coordinates
  /// (last coordinate fastest), then direction; only edges inside the ball.
  std::vector<std::uint8_t> edge_bits() const {
    std::vector<std::uint8_t> bits;
    std::vector<std::int64_t> x(d_);
    for (std::uint64_t id = 0; id < vertices_; ++id) {
      coords(id, x.data());
      for (unsigned j = 0; j < d_; ++j) {
        if (x[j] < static_cast<std::int64_t>(h_)) bits.push_back(open_[id * d_ + j]);
      }
    }
    return bits;
  }

 private:
  void coords(std::uint64_t id, std::int64_t* x) const {
    for (unsigned i = d_; i-- > 0;) {
      x[i] = static_cast<std::int64_t>(id % side_) - static_cast<std::int64_t>(h_);
      id /= side_;
    }
  }

  std::uint64_t id_of(const std::int64_t* x) const {
    std::uint64_t id = 0;
    for (unsigned i = 0; i < d_; ++i) id = id * side_ + static_cast<std::uint64_t>(x[i] + static_cast<std::int64_t>(h_));
    return id;
  }

  std::uint64_t find(std::vector<std::uint64_t>& parent, std::uint64_t a) const {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }

  void unite(std::vector<std::uint64_t>& parent, std::vector<std::uint32_t>& size, std::uint64_t a,
             std::uint64_t b) const {
    a = find(parent, a);
    b = find(parent, b);
    if (a == b) return;
    if (size[a] < size[b]) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
  }

  // Grows the annulus shell by shell from S_n; entry k - n says whether S_k
  // is reached. Vertex `vertices_` is the super-node of S_n.
  std::vector<std::uint8_t> connection_row(std::uint64_t n) const {
    std::vector<std::uint64_t> parent(vertices_ + 1);
    std::iota(parent.begin(), parent.end(), std::uint64_t{0});
    std::vector<std::uint32_t> size(vertices_ + 1, 1);
    const std::uint64_t super = vertices_;
    std::vector<std::uint8_t> row(h_ - n + 1, 0);
    std::vector<std::int64_t> x(d_);
    std::vector<std::uint64_t> stride(d_);
    for (unsigned i = d_, s = 0; i-- > 0; ++s) stride[i] = s == 0 ? 1 : stride[i + 1] * side_;
    for (std::uint64_t m = n; m <= h_; ++m) {
      for (const std::uint64_t id : shells_[m]) {
        if (m == n) unite(parent, size, id, super);
        coords(id, x.data());
        for (unsigned j = 0; j < d_; ++j) {
          // neighbour below (edge stored at the neighbour) and above (stored here)
          if (x[j] > -static_cast<std::int64_t>(h_)) {
            const std::uint64_t nb = id - stride[j];
            if (norm_[nb] >= n && norm_[nb] <= m && open_[nb * d_ + j]) unite(parent, size, id, nb);
          }
          if (x[j] < static_cast<std::int64_t>(h_)) {
            const std::uint64_t nb = id + stride[j];
            if (norm_[nb] >= n && norm_[nb] <= m && open_[id * d_ + j]) unite(parent, size, id, nb);
          }
        }
      }
      const std::uint64_t root = find(parent, super);
      for (const std::uint64_t id : shells_[m]) {
        if (find(parent, id) == root) {
          row[m - n] = 1;
          break;
        }
      }
    }
    return row;
  }

  unsigned d_;
  std::uint64_t h_ = 0, side_ = 1, vertices_ = 1;
  std::vector<std::uint32_t> norm_;
  std::vector<std::uint8_t> open_;
  std::vector<std::vector<std::uint64_t>> shells_;
  mutable std::vector<std::vector<std::uint8_t>> rows_;
};

/// Annulus connection events of a lattice, in either polarity.
class PercolationFamily final : public EventFamily {
 public:
  explicit PercolationFamily(LatticeSpec spec, Polarity polarity = Polarity::NotConnected)
      : spec_(std::move(spec)), polarity_(polarity) {
    spec_.validate();
    threshold_ = rng::bernoulli_threshold(spec_.p);
  }

  const LatticeSpec& spec() const noexcept { return spec_; }
  Polarity polarity() const noexcept { return polarity_; }

  std::string name() const override {
    return "percolation:d=" + std::to_string(spec_.d) + ":p=" + to_string(spec_.p) + ":" + to_string(polarity_);
  }
  Index horizon_cap() const override { return Index(spec_.radius_cap); }

  bool closed_form() const { return spec_.d == 1 || spec_.p == 0 || spec_.p == 1; }

  Capabilities capabilities() const override { return {true, true, closed_form()}; }

  /// P(S_n <-> S_k) when a closed form applies.
  std::optional<Rational> connection_closed_form(const Index& n, const Index& k) const {
    if (k < n) return std::nullopt;
    if (k == n) return Rational(1);
    if (spec_.p == 0) return Rational(0);
    if (spec_.p == 1) return Rational(1);
    if (spec_.d == 1) {
      // one of the two arms n..k must be fully open
      Rational arm = 1;
      for (Index e = 0; e < k - n; ++e) arm *= spec_.p;
      return 1 - (1 - arm) * (1 - arm);
    }
    return std::nullopt;
  }

  std::optional<ProbEstimate> exact_prob(const Index& n, const Index& k) const override {
    if (k < n) return ProbEstimate::exact(0);
    const auto c = connection_closed_form(n, k);
    if (!c) return std::nullopt;
    return ProbEstimate::exact(polarity_ == Polarity::Connected ? *c : 1 - *c);
  }

  /// Product of the marginals: the two events read disjoint edge sets.
  std::optional<ProbEstimate> exact_joint(const Index& n, const Index& m, const Index& l,
                                          const Index& k) const override {
    const auto a = exact_prob(n, m);
    const auto b = exact_prob(l, k);
    if (!a || !b) return std::nullopt;
    return ProbEstimate::exact(a->lo * b->lo);
  }

  std::unique_ptr<Configuration> draw_from_seed(std::uint64_t seed, SampleTag tag) const override {
    return std::make_unique<PolarConfig>(
        std::make_unique<EdgeConfiguration>(tag, spec_.d, seed, threshold_), polarity_, tag);
  }

  /// The underlying edge configuration of sample i.
  std::unique_ptr<EdgeConfiguration> draw_edges(std::uint64_t master_seed, std::uint64_t sample_index,
                                                std::uint64_t horizon) const {
    const std::uint64_t seed = rng::derive_seed(master_seed, rng::stream_hash(edge_stream()), sample_index);
    return std::make_unique<EdgeConfiguration>(SampleTag{master_seed, sample_index, Index(horizon)}, spec_.d,
                                               seed, threshold_);
  }

  /// Both polarities share one edge stream so their samples are complementary.
  std::string stream_id() const override { return edge_stream(); }

 private:
  std::string edge_stream() const { return "percolation:d=" + std::to_string(spec_.d); }

  class PolarConfig final : public Configuration {
   public:
    PolarConfig(std::unique_ptr<EdgeConfiguration> edges, Polarity polarity, SampleTag tag)
        : Configuration(std::move(tag)), edges_(std::move(edges)), polarity_(polarity) {}
    bool indicator(const Index& n, const Index& k) const override {
      const bool c = edges_->indicator(n, k);
      return polarity_ == Polarity::Connected ? c : !c;
    }

   private:
    std::unique_ptr<EdgeConfiguration> edges_;
    Polarity polarity_;
  };

  LatticeSpec spec_;
  Polarity polarity_;
  std::uint64_t threshold_ = 0;
};

/// P(S_n <-> S_k) inside the annulus; closed form when available, else Monte Carlo.
inline ProbEstimate connection_prob(const LatticeSpec& spec, const Index& n, const Index& k,
                                    const SamplePlan& plan) {
  const PercolationFamily family(spec, Polarity::Connected);
  return prob_of(family, n, k, plan);
}

/// Monte Carlo P(0 <-> S_R). This decreases to theta(p) as R grows, so it is
/// an upper bound on theta(p), never a lower bound.
inline ProbEstimate theta_upper_diagnostic(const LatticeSpec& spec, std::uint64_t radius, const SamplePlan& plan) {
  SamplePlan local = plan;
  local.force_sampling = !PercolationFamily(spec).closed_form();
  return connection_prob(spec, 0, Index(radius), local);
}

struct PercolationResult {
  Verdict verdict;
  /// The disjunct restated for connection probabilities.
  std::string statement;
  /// Set by the theta-based corollary when the second disjunct contradicts theta(p) >= lambda_p.
  bool lambda_p_refuted = false;
};

namespace detail {

inline std::string percolation_statement(const Verdict& v) {
  if (v.is_first()) {
    return "P(S_" + v.first().n.str() + " <-> S_g(" + v.first().n.str() + ")) > 1 - eps = " +
           to_string(1 - v.params.epsilon);
  }
  if (v.is_second()) {
    return "P(S_" + v.params.r.str() + " <-> S_" + v.params.s.str() + ") < lambda = " + to_string(v.params.lambda);
  }
  return v.outcome_name();
}

}  // namespace detail

/// Independent-block verifier on the non-connection events; s = b_J must
/// not exceed the lattice's radius cap.
inline PercolationResult verify_percolation1(const LatticeSpec& spec, const Tolerances& tol, const Index& r,
                                             const GapFunction& g, const SamplePlan& plan,
                                             const IndependentOptions& opts = {}) {
  const PercolationFamily family(spec, Polarity::NotConnected);
  PercolationResult out{verify_independent(family, tol, r, g, plan, opts), {}, false};
  out.statement = detail::percolation_statement(out.verdict);
  out.verdict.notes.push_back("connectivity is annulus-restricted");
  return out;
}

/// r = 0 and lambda = lambda_p. A second disjunct means P(0 <-> S_s) < lambda_p,
/// contradicting theta(p) >= lambda_p.
inline PercolationResult verify_percolation2(const LatticeSpec& spec, const Rational& lambda_p,
                                             const Rational& epsilon, const GapFunction& g,
                                             const SamplePlan& plan, const IndependentOptions& opts = {}) {
  if (!in_open_unit(lambda_p)) throw InvalidArgument("lambda_p must lie in (0,1)");
  PercolationResult out = verify_percolation1(spec, Tolerances(epsilon, lambda_p), Index(0), g, plan, opts);
  if (out.verdict.is_second()) {
    out.lambda_p_refuted = true;
    out.verdict.notes.push_back("supplied lambda_p refuted: P(S_0 <-> S_s) < lambda_p <= theta(p) is impossible");
  }
  return out;
}

/// Binary dump of an edge configuration:
///   "ZOED" | u32 version = 1 | u32 d | u64 horizon | u64 master_seed |
///   u64 sample_index | u64 edge_count | ceil(edge_count / 8) bytes,
/// all integers little-endian, bit i of the bitset at byte i/8, bit i%8,
/// edges in EdgeConfiguration::edge_bits() order.
inline void write_edge_dump(std::ostream& os, const EdgeConfiguration& cfg) {
  auto put = [&](std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  os.write("ZOED", 4);
  put(1, 4);
  put(cfg.dimension(), 4);
  put(cfg.horizon(), 8);
  put(cfg.tag().master_seed, 8);
  put(cfg.tag().sample_index, 8);
  const auto bits = cfg.edge_bits();
  put(bits.size(), 8);
  std::vector<std::uint8_t> bytes((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) bytes[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace zeroone
