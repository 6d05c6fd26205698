#pragma once

/**
 * @file scenario.hpp
 * @brief Declarative experiment descriptions: parsing (TOML or JSON),
 *        canonical JSON serialization, and execution into result artifacts.
 *
 * Rationals may be written as "p/q" strings, integers, or decimals; decimals
 * are read exactly as written ("0.8" is 4/5). Errors name the offending
 * field with a dotted path.
 */

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "zeroone/bounds.hpp"
#include "zeroone/error.hpp"
#include "zeroone/events.hpp"
#include "zeroone/families/bc.hpp"
#include "zeroone/families/er.hpp"
#include "zeroone/families/percolation.hpp"
#include "zeroone/families/series.hpp"
#include "zeroone/io.hpp"
#include "zeroone/verifier.hpp"

namespace zeroone::scenario {

using nlohmann::json;

struct BcSpec {
  ProbSequence sequence;
  Index horizon_cap = Index(1) << 20;
  bool operator==(const BcSpec&) const = default;
};

struct ErSpec {
  PairwiseModel model;
  bool operator==(const ErSpec&) const = default;
};

struct SeriesSpec {
  SeriesModel model;
  Index horizon_cap = default_index_cap();
  bool operator==(const SeriesSpec&) const = default;
};

struct PercolationSpec {
  LatticeSpec lattice;
  Polarity polarity = Polarity::NotConnected;
  bool operator==(const PercolationSpec&) const = default;
};

struct TableSpec {
  std::vector<std::vector<Rational>> rows;
  bool operator==(const TableSpec&) const = default;
};

using FamilySpec = std::variant<BcSpec, ErSpec, SeriesSpec, PercolationSpec, TableSpec>;

/// rho(n, lambda) = alpha * n + beta
struct RhoSpec {
  Rational alpha, beta;
  bool operator==(const RhoSpec&) const = default;
};

/// sigma(N, n, lambda) = N + offset
struct SigmaSpec {
  Index offset;
  bool operator==(const SigmaSpec&) const = default;
};

inline const std::vector<std::string>& verifier_names() {
  static const std::vector<std::string> names{"main",         "implication", "independent",  "erdos",
                                              "conv",         "three_series", "percolation1", "percolation2",
                                              "lemma_er",     "specker_demo"};
  return names;
}

struct Output {
  std::string dir;
  std::string format = "both";
  bool operator==(const Output&) const = default;
};

struct Scenario {
  std::string name;
  std::string verifier;
  FamilySpec family;
  std::optional<Rational> epsilon;
  std::optional<Rational> lambda;
  Index r = 0;
  std::optional<GapFunction> gap;
  SamplePlan plan;
  bool hypothesis_checks = true;
  // main
  std::optional<Rational> x;
  std::optional<Index> s;
  // implication
  std::optional<RhoSpec> rho;
  std::optional<SigmaSpec> sigma;
  // conv, three_series, and series families under the generic verifiers
  std::optional<unsigned> p;
  std::optional<IndexMap> phi;
  std::optional<ThreeSeriesModuli> moduli;
  // percolation2
  std::optional<Rational> lambda_p;
  // lemma_er
  std::optional<std::uint64_t> n;
  std::optional<std::uint64_t> big_n;
  std::optional<std::uint64_t> phi_budget;
  // specker_demo
  std::vector<Rational> epsilons;
  std::vector<GapFunction> gaps;
  std::optional<std::uint64_t> horizon;
  Output output;

  bool operator==(const Scenario&) const = default;
};

// ---------------------------------------------------------------------------
// reading

namespace detail {

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline std::string shortest_decimal(double d) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, res.ptr);
}

inline Rational read_rational(const json& j, const std::string& path) {
  try {
    if (j.is_string()) return parse_rational(j.get<std::string>());
    if (j.is_number_integer()) return Rational(Index(j.get<std::int64_t>()));
    if (j.is_number_unsigned()) return Rational(Index(j.get<std::uint64_t>()));
    if (j.is_number_float()) return parse_rational(shortest_decimal(j.get<double>()));
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(path, "expected a rational (\"p/q\", integer or decimal)");
}

inline Index read_index(const json& j, const std::string& path) {
  Index v;
  if (j.is_number_unsigned()) {
    v = Index(j.get<std::uint64_t>());
  } else if (j.is_number_integer()) {
    v = Index(j.get<std::int64_t>());
  } else if (j.is_string()) {
    try {
      const Rational q = parse_rational(j.get<std::string>());
      if (denominator(q) != 1) throw ConfigError(path, "expected an integer");
      v = numerator(q);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(path, e.what());
    }
  } else {
    throw ConfigError(path, "expected a nonnegative integer");
  }
  if (v < 0) throw ConfigError(path, "expected a nonnegative integer");
  return v;
}

inline std::uint64_t read_u64(const json& j, const std::string& path) {
  const Index v = read_index(j, path);
  if (v > Index(std::numeric_limits<std::uint64_t>::max())) throw ConfigError(path, "value too large");
  return v.convert_to<std::uint64_t>();
}

inline bool read_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

inline std::string read_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected a table");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join(path, key), "missing required field");
  return *it;
}

inline const json* optional_field(const json& obj, const std::string& key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

/// Rejects keys outside `allowed` so that typos do not pass silently.
inline void only_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected a table");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(join(path, k), "unknown field");
  }
}

inline QSequence read_qseq(const json& j, const std::string& path) {
  const std::string kind = read_string(require(j, "kind", path), join(path, "kind"));
  QSequence q;
  if (kind == "geometric") {
    only_keys(j, {"kind", "q0", "q_inf", "ratio"}, path);
    q = GeometricApproach{read_rational(require(j, "q0", path), join(path, "q0")),
                          read_rational(require(j, "q_inf", path), join(path, "q_inf")),
                          read_rational(require(j, "ratio", path), join(path, "ratio"))};
  } else if (kind == "harmonic") {
    only_keys(j, {"kind", "q0", "q_inf"}, path);
    q = HarmonicApproach{read_rational(require(j, "q0", path), join(path, "q0")),
                         read_rational(require(j, "q_inf", path), join(path, "q_inf"))};
  } else {
    throw ConfigError(join(path, "kind"), "unknown q sequence '" + kind + "' (geometric | harmonic)");
  }
  try {
    validate(q);
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  return q;
}

inline ProbSequence read_sequence(const json& j, const std::string& path) {
  const std::string kind = read_string(require(j, "kind", path), join(path, "kind"));
  ProbSequence seq;
  if (kind == "constant") {
    only_keys(j, {"kind", "p"}, path);
    seq = ConstantProb{read_rational(require(j, "p", path), join(path, "p"))};
  } else if (kind == "geometric") {
    only_keys(j, {"kind", "c", "base"}, path);
    seq = GeometricProb{read_rational(require(j, "c", path), join(path, "c")),
                        read_rational(require(j, "base", path), join(path, "base"))};
  } else if (kind == "harmonic") {
    only_keys(j, {"kind", "c"}, path);
    seq = HarmonicProb{read_rational(require(j, "c", path), join(path, "c"))};
  } else if (kind == "specker") {
    only_keys(j, {"kind", "q"}, path);
    seq = SpeckerProxy{read_qseq(require(j, "q", path), join(path, "q"))};
  } else {
    throw ConfigError(join(path, "kind"), "unknown sequence '" + kind + "' (constant | geometric | harmonic | specker)");
  }
  try {
    validate(seq);
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  return seq;
}

inline std::vector<Rational> read_rational_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  std::vector<Rational> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_rational(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline PairwiseModel read_pairwise(const json& j, const std::string& path) {
  const std::string kind = read_string(require(j, "kind", path), join(path, "kind"));
  PairwiseModel m;
  if (kind == "independent") {
    only_keys(j, {"kind", "p"}, path);
    m = IndependentIdentical{read_rational(require(j, "p", path), join(path, "p"))};
  } else if (kind == "parity") {
    only_keys(j, {"kind", "k"}, path);
    m = PairwiseFromBits{static_cast<unsigned>(read_u64(require(j, "k", path), join(path, "k")))};
  } else if (kind == "tables") {
    only_keys(j, {"kind", "single", "pair"}, path);
    ExplicitTables t;
    t.single = read_rational_list(require(j, "single", path), join(path, "single"));
    const json& pr = require(j, "pair", path);
    if (!pr.is_array()) throw ConfigError(join(path, "pair"), "expected an array of rows");
    for (std::size_t i = 0; i < pr.size(); ++i) {
      t.pair.push_back(read_rational_list(pr[i], join(path, "pair") + "[" + std::to_string(i) + "]"));
    }
    m = std::move(t);
  } else {
    throw ConfigError(join(path, "kind"), "unknown pairwise model '" + kind + "' (independent | parity | tables)");
  }
  try {
    validate(m);
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  return m;
}

inline SeriesModel read_series(const json& j, const std::string& path) {
  const std::string kind = read_string(require(j, "kind", path), join(path, "kind"));
  if (kind == "signed_dyadic") {
    only_keys(j, {"kind"}, path);
    return SignedDyadic{};
  }
  if (kind == "uniform_indicator") {
    only_keys(j, {"kind", "q"}, path);
    return UniformIndicator{read_qseq(require(j, "q", path), join(path, "q"))};
  }
  if (kind == "scaled_signs") {
    only_keys(j, {"kind", "c"}, path);
    auto c = read_rational_list(require(j, "c", path), join(path, "c"));
    if (c.empty()) throw ConfigError(join(path, "c"), "needs at least one coefficient");
    return ScaledSigns{std::move(c)};
  }
  throw ConfigError(join(path, "kind"),
                    "unknown series model '" + kind + "' (signed_dyadic | uniform_indicator | scaled_signs)");
}

inline FamilySpec read_family(const json& j, const std::string& path) {
  const std::string kind = read_string(require(j, "kind", path), join(path, "kind"));
  if (kind == "bc") {
    only_keys(j, {"kind", "sequence", "horizon_cap"}, path);
    BcSpec b{read_sequence(require(j, "sequence", path), join(path, "sequence"))};
    if (const json* h = optional_field(j, "horizon_cap")) b.horizon_cap = read_index(*h, join(path, "horizon_cap"));
    return b;
  }
  if (kind == "er") {
    only_keys(j, {"kind", "model"}, path);
    return ErSpec{read_pairwise(require(j, "model", path), join(path, "model"))};
  }
  if (kind == "series") {
    only_keys(j, {"kind", "model", "horizon_cap"}, path);
    SeriesSpec s{read_series(require(j, "model", path), join(path, "model"))};
    if (const json* h = optional_field(j, "horizon_cap")) s.horizon_cap = read_index(*h, join(path, "horizon_cap"));
    return s;
  }
  if (kind == "percolation") {
    only_keys(j, {"kind", "d", "p", "radius_cap", "polarity"}, path);
    PercolationSpec ps;
    ps.lattice.d = static_cast<unsigned>(read_u64(require(j, "d", path), join(path, "d")));
    ps.lattice.p = read_rational(require(j, "p", path), join(path, "p"));
    if (const json* rc = optional_field(j, "radius_cap")) ps.lattice.radius_cap = read_u64(*rc, join(path, "radius_cap"));
    if (const json* pol = optional_field(j, "polarity")) {
      const std::string v = read_string(*pol, join(path, "polarity"));
      if (v == "not-connected") ps.polarity = Polarity::NotConnected;
      else if (v == "connected") ps.polarity = Polarity::Connected;
      else throw ConfigError(join(path, "polarity"), "expected not-connected or connected");
    }
    try {
      ps.lattice.validate();
    } catch (const Error& e) {
      throw ConfigError(path, e.what());
    }
    return ps;
  }
  if (kind == "table") {
    only_keys(j, {"kind", "rows"}, path);
    const json& rows = require(j, "rows", path);
    if (!rows.is_array()) throw ConfigError(join(path, "rows"), "expected an array of rows");
    TableSpec t;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      t.rows.push_back(read_rational_list(rows[i], join(path, "rows") + "[" + std::to_string(i) + "]"));
    }
    try {
      ExactTableFamily check(t.rows);
    } catch (const Error& e) {
      throw ConfigError(join(path, "rows"), e.what());
    }
    return t;
  }
  throw ConfigError(join(path, "kind"), "unknown family '" + kind + "' (bc | er | series | percolation | table)");
}

inline GapFunction read_gap(const json& j, const std::string& path) {
  const std::string kind = read_string(require(j, "kind", path), join(path, "kind"));
  Index cap = default_index_cap();
  if (const json* c = optional_field(j, "cap")) cap = read_index(*c, join(path, "cap"));
  try {
    if (kind == "offset") {
      only_keys(j, {"kind", "c", "cap"}, path);
      return GapFunction::offset(read_index(require(j, "c", path), join(path, "c")), cap);
    }
    if (kind == "affine") {
      only_keys(j, {"kind", "alpha", "c", "cap"}, path);
      return GapFunction::affine(read_rational(require(j, "alpha", path), join(path, "alpha")),
                                 read_index(require(j, "c", path), join(path, "c")), cap);
    }
    if (kind == "table") {
      only_keys(j, {"kind", "entries", "tail", "cap"}, path);
      const json& e = require(j, "entries", path);
      if (!e.is_array()) throw ConfigError(join(path, "entries"), "expected an array of [k, g(k)] pairs");
      std::vector<std::pair<Index, Index>> entries;
      for (std::size_t i = 0; i < e.size(); ++i) {
        const std::string p = join(path, "entries") + "[" + std::to_string(i) + "]";
        if (!e[i].is_array() || e[i].size() != 2) throw ConfigError(p, "expected a [k, g(k)] pair");
        entries.emplace_back(read_index(e[i][0], p + "[0]"), read_index(e[i][1], p + "[1]"));
      }
      Index tail = 0;
      if (const json* t = optional_field(j, "tail")) tail = read_index(*t, join(path, "tail"));
      return GapFunction::table(std::move(entries), tail, cap);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(join(path, "kind"), "unknown gap function '" + kind + "' (offset | affine | table)");
}

inline IndexMap read_index_map(const json& j, const std::string& path) {
  const std::string kind = read_string(require(j, "kind", path), join(path, "kind"));
  if (kind == "const") {
    only_keys(j, {"kind", "value"}, path);
    return ConstantMap{read_index(require(j, "value", path), join(path, "value"))};
  }
  if (kind == "ceil") {
    only_keys(j, {"kind", "alpha", "beta"}, path);
    return AffineCeilMap{read_rational(require(j, "alpha", path), join(path, "alpha")),
                         read_rational(require(j, "beta", path), join(path, "beta"))};
  }
  throw ConfigError(join(path, "kind"), "unknown index map '" + kind + "' (const | ceil)");
}

inline SamplePlan read_plan(const json& j, const std::string& path) {
  only_keys(j,
            {"samples", "max_samples", "error_budget", "threads", "interval", "force_sampling", "hypothesis_samples",
             "hypothesis_tuple_budget"},
            path);
  SamplePlan plan;
  if (const json* v = optional_field(j, "samples")) plan.samples = read_u64(*v, join(path, "samples"));
  plan.max_samples = plan.samples;
  if (const json* v = optional_field(j, "max_samples")) plan.max_samples = read_u64(*v, join(path, "max_samples"));
  if (const json* v = optional_field(j, "error_budget")) plan.error_budget = read_rational(*v, join(path, "error_budget"));
  if (const json* v = optional_field(j, "threads")) plan.threads = static_cast<unsigned>(read_u64(*v, join(path, "threads")));
  if (const json* v = optional_field(j, "interval")) {
    const std::string s = read_string(*v, join(path, "interval"));
    if (s == "clopper-pearson") plan.interval = IntervalKind::ClopperPearson;
    else if (s == "hoeffding") plan.interval = IntervalKind::Hoeffding;
    else throw ConfigError(join(path, "interval"), "expected clopper-pearson or hoeffding");
  }
  if (const json* v = optional_field(j, "force_sampling")) plan.force_sampling = read_bool(*v, join(path, "force_sampling"));
  if (const json* v = optional_field(j, "hypothesis_samples")) {
    plan.hypothesis_samples = read_u64(*v, join(path, "hypothesis_samples"));
  }
  if (const json* v = optional_field(j, "hypothesis_tuple_budget")) {
    plan.hypothesis_tuple_budget = read_u64(*v, join(path, "hypothesis_tuple_budget"));
  }
  try {
    plan.validate();
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  return plan;
}

}  // namespace detail

/// Builds a scenario from its JSON form (the TOML reader converts to this form first).
inline Scenario from_json(const json& j) {
  using namespace detail;
  only_keys(j,
            {"name", "verifier", "family", "epsilon", "lambda", "r", "gap", "seed", "plan", "hypothesis_checks", "x",
             "s", "rho", "sigma", "p", "phi", "moduli", "lambda_p", "n", "N", "phi_budget", "epsilons", "gaps",
             "horizon", "output"},
            "");
  Scenario sc;
  if (const json* v = optional_field(j, "name")) sc.name = read_string(*v, "name");
  sc.verifier = read_string(require(j, "verifier", ""), "verifier");
  bool known = false;
  for (const auto& n : verifier_names()) known = known || n == sc.verifier;
  if (!known) throw ConfigError("verifier", "unknown verifier '" + sc.verifier + "'");
  sc.family = read_family(require(j, "family", ""), "family");
  if (const json* v = optional_field(j, "epsilon")) sc.epsilon = read_rational(*v, "epsilon");
  if (const json* v = optional_field(j, "lambda")) sc.lambda = read_rational(*v, "lambda");
  if (const json* v = optional_field(j, "r")) sc.r = read_index(*v, "r");
  if (const json* v = optional_field(j, "gap")) sc.gap = read_gap(*v, "gap");
  if (const json* v = optional_field(j, "plan")) sc.plan = read_plan(*v, "plan");
  if (const json* v = optional_field(j, "seed")) sc.plan.master_seed = read_u64(*v, "seed");
  if (const json* v = optional_field(j, "hypothesis_checks")) sc.hypothesis_checks = read_bool(*v, "hypothesis_checks");
  if (const json* v = optional_field(j, "x")) sc.x = read_rational(*v, "x");
  if (const json* v = optional_field(j, "s")) sc.s = read_index(*v, "s");
  if (const json* v = optional_field(j, "rho")) {
    only_keys(*v, {"alpha", "beta"}, "rho");
    sc.rho = RhoSpec{read_rational(require(*v, "alpha", "rho"), "rho.alpha"),
                     read_rational(require(*v, "beta", "rho"), "rho.beta")};
  }
  if (const json* v = optional_field(j, "sigma")) {
    only_keys(*v, {"offset"}, "sigma");
    sc.sigma = SigmaSpec{read_index(require(*v, "offset", "sigma"), "sigma.offset")};
  }
  if (const json* v = optional_field(j, "p")) sc.p = static_cast<unsigned>(read_u64(*v, "p"));
  if (const json* v = optional_field(j, "phi")) sc.phi = read_index_map(*v, "phi");
  if (const json* v = optional_field(j, "moduli")) {
    only_keys(*v, {"a", "n0", "q", "varphi", "xi"}, "moduli");
    ThreeSeriesModuli m;
    m.a = read_rational(require(*v, "a", "moduli"), "moduli.a");
    m.n0 = read_index(require(*v, "n0", "moduli"), "moduli.n0");
    m.q = static_cast<unsigned>(read_u64(require(*v, "q", "moduli"), "moduli.q"));
    m.varphi = read_index_map(require(*v, "varphi", "moduli"), "moduli.varphi");
    m.xi = read_index_map(require(*v, "xi", "moduli"), "moduli.xi");
    sc.moduli = std::move(m);
  }
  if (const json* v = optional_field(j, "lambda_p")) sc.lambda_p = read_rational(*v, "lambda_p");
  if (const json* v = optional_field(j, "n")) sc.n = read_u64(*v, "n");
  if (const json* v = optional_field(j, "N")) sc.big_n = read_u64(*v, "N");
  if (const json* v = optional_field(j, "phi_budget")) sc.phi_budget = read_u64(*v, "phi_budget");
  if (const json* v = optional_field(j, "epsilons")) sc.epsilons = read_rational_list(*v, "epsilons");
  if (const json* v = optional_field(j, "gaps")) {
    if (!v->is_array()) throw ConfigError("gaps", "expected an array of gap functions");
    for (std::size_t i = 0; i < v->size(); ++i) sc.gaps.push_back(read_gap((*v)[i], "gaps[" + std::to_string(i) + "]"));
  }
  if (const json* v = optional_field(j, "horizon")) sc.horizon = read_u64(*v, "horizon");
  if (const json* v = optional_field(j, "output")) {
    only_keys(*v, {"dir", "format"}, "output");
    if (const json* d = optional_field(*v, "dir")) sc.output.dir = read_string(*d, "output.dir");
    if (const json* f = optional_field(*v, "format")) {
      sc.output.format = read_string(*f, "output.format");
      if (sc.output.format != "json" && sc.output.format != "csv" && sc.output.format != "both") {
        throw ConfigError("output.format", "expected json, csv or both");
      }
    }
  }
  return sc;
}

namespace detail {

inline json toml_to_json(const toml::node& node, const std::string& path) {
  if (const auto* t = node.as_table()) {
    json obj = json::object();
    for (const auto& [k, v] : *t) obj[std::string(k.str())] = toml_to_json(v, join(path, std::string(k.str())));
    return obj;
  }
  if (const auto* a = node.as_array()) {
    json arr = json::array();
    for (std::size_t i = 0; i < a->size(); ++i) arr.push_back(toml_to_json((*a)[i], path + "[" + std::to_string(i) + "]"));
    return arr;
  }
  if (const auto* s = node.as_string()) return s->get();
  if (const auto* i = node.as_integer()) return i->get();
  if (const auto* f = node.as_floating_point()) return f->get();
  if (const auto* b = node.as_boolean()) return b->get();
  throw ConfigError(path, "unsupported TOML value type");
}

}  // namespace detail

inline Scenario parse_toml(const std::string& text, const std::string& source = "scenario") {
  toml::table tbl;
  try {
    tbl = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " (line " << e.source().begin.line << ", column " << e.source().begin.column << ")";
    throw ConfigError("", msg.str());
  }
  return from_json(detail::toml_to_json(tbl, ""));
}

inline Scenario parse_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", e.what());
  }
  return from_json(j);
}

/// Reads a scenario file; ".json" files are JSON, everything else TOML.
inline Scenario load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.extension() == ".json") return parse_json(buf.str());
  return parse_toml(buf.str(), path.string());
}

// ---------------------------------------------------------------------------
// writing

namespace detail {

inline json qseq_json(const QSequence& q) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GeometricApproach>) {
          return {{"kind", "geometric"}, {"q0", to_string(s.q0)}, {"q_inf", to_string(s.q_inf)}, {"ratio", to_string(s.ratio)}};
        } else {
          return {{"kind", "harmonic"}, {"q0", to_string(s.q0)}, {"q_inf", to_string(s.q_inf)}};
        }
      },
      q);
}

inline json rationals_json(const std::vector<Rational>& v) {
  json a = json::array();
  for (const auto& q : v) a.push_back(to_string(q));
  return a;
}

inline json family_json(const FamilySpec& f) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BcSpec>) {
          json seq = std::visit(
              [](const auto& q) -> json {
                using Q = std::decay_t<decltype(q)>;
                if constexpr (std::is_same_v<Q, ConstantProb>) return {{"kind", "constant"}, {"p", to_string(q.p)}};
                else if constexpr (std::is_same_v<Q, GeometricProb>)
                  return {{"kind", "geometric"}, {"c", to_string(q.c)}, {"base", to_string(q.base)}};
                else if constexpr (std::is_same_v<Q, HarmonicProb>) return {{"kind", "harmonic"}, {"c", to_string(q.c)}};
                else return {{"kind", "specker"}, {"q", qseq_json(q.q)}};
              },
              s.sequence);
          return {{"kind", "bc"}, {"sequence", std::move(seq)}, {"horizon_cap", io::index_json(s.horizon_cap)}};
        } else if constexpr (std::is_same_v<T, ErSpec>) {
          json m = std::visit(
              [](const auto& q) -> json {
                using Q = std::decay_t<decltype(q)>;
                if constexpr (std::is_same_v<Q, IndependentIdentical>) return {{"kind", "independent"}, {"p", to_string(q.p)}};
                else if constexpr (std::is_same_v<Q, PairwiseFromBits>) return {{"kind", "parity"}, {"k", q.k}};
                else {
                  json pair = json::array();
                  for (const auto& row : q.pair) pair.push_back(rationals_json(row));
                  return {{"kind", "tables"}, {"single", rationals_json(q.single)}, {"pair", std::move(pair)}};
                }
              },
              s.model);
          return {{"kind", "er"}, {"model", std::move(m)}};
        } else if constexpr (std::is_same_v<T, SeriesSpec>) {
          json m = std::visit(
              [](const auto& q) -> json {
                using Q = std::decay_t<decltype(q)>;
                if constexpr (std::is_same_v<Q, SignedDyadic>) return {{"kind", "signed_dyadic"}};
                else if constexpr (std::is_same_v<Q, UniformIndicator>) return {{"kind", "uniform_indicator"}, {"q", qseq_json(q.q)}};
                else return {{"kind", "scaled_signs"}, {"c", rationals_json(q.c)}};
              },
              s.model);
          return {{"kind", "series"}, {"model", std::move(m)}, {"horizon_cap", io::index_json(s.horizon_cap)}};
        } else if constexpr (std::is_same_v<T, PercolationSpec>) {
          return {{"kind", "percolation"},
                  {"d", s.lattice.d},
                  {"p", to_string(s.lattice.p)},
                  {"radius_cap", s.lattice.radius_cap},
                  {"polarity", to_string(s.polarity)}};
        } else {
          json rows = json::array();
          for (const auto& row : s.rows) rows.push_back(rationals_json(row));
          return {{"kind", "table"}, {"rows", std::move(rows)}};
        }
      },
      f);
}

inline json gap_json(const GapFunction& g) {
  json j = std::visit(
      [](const auto& d) -> json {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, OffsetGap>) {
          return {{"kind", "offset"}, {"c", io::index_json(d.c)}};
        } else if constexpr (std::is_same_v<T, AffineGap>) {
          return {{"kind", "affine"}, {"alpha", to_string(d.alpha)}, {"c", io::index_json(d.c)}};
        } else {
          json e = json::array();
          for (const auto& [k, v] : d.entries) e.push_back(json::array({io::index_json(k), io::index_json(v)}));
          return {{"kind", "table"}, {"entries", std::move(e)}, {"tail", io::index_json(d.tail_offset)}};
        }
      },
      g.descriptor());
  j["cap"] = io::index_json(g.index_cap());
  return j;
}

inline json index_map_json(const IndexMap& m) {
  return std::visit(
      [](const auto& f) -> json {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantMap>) return {{"kind", "const"}, {"value", io::index_json(f.value)}};
        else return {{"kind", "ceil"}, {"alpha", to_string(f.alpha)}, {"beta", to_string(f.beta)}};
      },
      m);
}

}  // namespace detail

/// Canonical JSON form; from_json(to_json(s)) == s for every valid scenario.
inline json to_json(const Scenario& sc) {
  using namespace detail;
  json j;
  if (!sc.name.empty()) j["name"] = sc.name;
  j["verifier"] = sc.verifier;
  j["family"] = family_json(sc.family);
  if (sc.epsilon) j["epsilon"] = to_string(*sc.epsilon);
  if (sc.lambda) j["lambda"] = to_string(*sc.lambda);
  j["r"] = io::index_json(sc.r);
  if (sc.gap) j["gap"] = gap_json(*sc.gap);
  j["seed"] = sc.plan.master_seed;
  j["plan"] = {{"samples", sc.plan.samples},
               {"max_samples", sc.plan.max_samples},
               {"error_budget", to_string(sc.plan.error_budget)},
               {"threads", sc.plan.threads},
               {"interval", to_string(sc.plan.interval)},
               {"force_sampling", sc.plan.force_sampling},
               {"hypothesis_samples", sc.plan.hypothesis_samples},
               {"hypothesis_tuple_budget", sc.plan.hypothesis_tuple_budget}};
  j["hypothesis_checks"] = sc.hypothesis_checks;
  if (sc.x) j["x"] = to_string(*sc.x);
  if (sc.s) j["s"] = io::index_json(*sc.s);
  if (sc.rho) j["rho"] = {{"alpha", to_string(sc.rho->alpha)}, {"beta", to_string(sc.rho->beta)}};
  if (sc.sigma) j["sigma"] = {{"offset", io::index_json(sc.sigma->offset)}};
  if (sc.p) j["p"] = *sc.p;
  if (sc.phi) j["phi"] = index_map_json(*sc.phi);
  if (sc.moduli) {
    j["moduli"] = {{"a", to_string(sc.moduli->a)},
                   {"n0", io::index_json(sc.moduli->n0)},
                   {"q", sc.moduli->q},
                   {"varphi", index_map_json(sc.moduli->varphi)},
                   {"xi", index_map_json(sc.moduli->xi)}};
  }
  if (sc.lambda_p) j["lambda_p"] = to_string(*sc.lambda_p);
  if (sc.n) j["n"] = *sc.n;
  if (sc.big_n) j["N"] = *sc.big_n;
  if (sc.phi_budget) j["phi_budget"] = *sc.phi_budget;
  if (!sc.epsilons.empty()) j["epsilons"] = rationals_json(sc.epsilons);
  if (!sc.gaps.empty()) {
    json g = json::array();
    for (const auto& x : sc.gaps) g.push_back(gap_json(x));
    j["gaps"] = std::move(g);
  }
  if (sc.horizon) j["horizon"] = *sc.horizon;
  json out{{"format", sc.output.format}};
  if (!sc.output.dir.empty()) out["dir"] = sc.output.dir;
  j["output"] = std::move(out);
  return j;
}

// ---------------------------------------------------------------------------
// running

/// Exit codes shared by the CLI and run().
enum ExitCode : int { Conclusive = 0, Failure = 1, Undecided = 2, PremiseOrHypothesis = 3 };

inline int exit_code_for(const Verdict& v) {
  if (v.conclusive()) return Conclusive;
  if (v.is_inconclusive()) return Undecided;
  return PremiseOrHypothesis;
}

struct RunResult {
  json result;
  /// CSV rows including the header row.
  std::vector<std::vector<std::string>> csv;
  std::string summary;
  int exit_code = Failure;
};

namespace detail {

template <class T>
const T& need(const std::optional<T>& v, const std::string& field, const std::string& verifier) {
  if (!v) throw ConfigError(field, "required by verifier '" + verifier + "'");
  return *v;
}

template <class Spec>
const Spec& need_family(const Scenario& sc, const std::string& kind) {
  const auto* s = std::get_if<Spec>(&sc.family);
  if (!s) throw ConfigError("family.kind", "verifier '" + sc.verifier + "' needs a " + kind + " family");
  return *s;
}

inline std::unique_ptr<EventFamily> make_family(const Scenario& sc) {
  return std::visit(
      [&](const auto& s) -> std::unique_ptr<EventFamily> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BcSpec>) {
          return std::make_unique<BorelCantelliFamily>(s.sequence, s.horizon_cap);
        } else if constexpr (std::is_same_v<T, ErSpec>) {
          return std::make_unique<ErUnionFamily>(s.model);
        } else if constexpr (std::is_same_v<T, SeriesSpec>) {
          return std::make_unique<SeriesEventFamily>(s.model, need(sc.p, "p", sc.verifier), s.horizon_cap);
        } else if constexpr (std::is_same_v<T, PercolationSpec>) {
          return std::make_unique<PercolationFamily>(s.lattice, s.polarity);
        } else {
          return std::make_unique<ExactTableFamily>(s.rows);
        }
      },
      sc.family);
}

inline std::vector<std::string> csv_header() {
  return {"role", "block", "n", "k", "lo", "hi", "lo_approx", "hi_approx", "threshold", "comparison", "method"};
}

inline std::string approx(const Rational& q) {
  std::ostringstream os;
  os.precision(17);
  os << to_double(q);
  return os.str();
}

inline void audit_rows(const Verdict& v, std::vector<std::vector<std::string>>& rows) {
  for (const auto& a : v.audit) {
    rows.push_back({a.role, a.block ? std::to_string(*a.block) : "", a.n.str(), a.k.str(), to_string(a.estimate.lo),
                    to_string(a.estimate.hi), approx(a.estimate.lo), approx(a.estimate.hi), to_string(a.threshold),
                    to_string(a.verdict.kind), a.estimate.method_name()});
  }
}

inline std::string verdict_summary(const Verdict& v) {
  std::ostringstream os;
  os << "verdict: " << v.outcome_name();
  if (v.is_first()) {
    os << " n = " << v.first().n << " with P(B(n,g(n))) in [" << approx(v.first().estimate.lo) << ", "
       << approx(v.first().estimate.hi) << "]";
  } else if (v.is_second()) {
    os << " s = " << v.second().s << " with P(B(r,s)) in [" << approx(v.second().estimate.lo) << ", "
       << approx(v.second().estimate.hi) << "]";
  } else if (const auto* p = std::get_if<PremiseViolated>(&v.outcome)) {
    os << ": " << p->reason;
  } else if (const auto* h = std::get_if<HypothesisFailed>(&v.outcome)) {
    os << ": " << h->reason;
  } else if (const auto* i = std::get_if<Inconclusive>(&v.outcome)) {
    os << " (" << i->margins.size() << " unresolved comparison(s))";
  }
  os << "\nparams: eps = " << to_string(v.params.epsilon) << ", lambda = " << to_string(v.params.lambda)
     << ", r = " << v.params.r << ", g = " << v.params.gap << ", J = " << v.params.j << ", s = " << v.params.s
     << ", bound = " << v.params.bound << "\n";
  if (v.samples_used) {
    os << "monte carlo: " << v.samples_used << " samples, " << v.rounds << " round(s), error spent "
       << approx(v.error_spent) << " of " << to_string(v.error_budget) << "\n";
  }
  if (v.closure) os << "closure check: " << v.closure->method << ", " << v.closure->violation_count << " violation(s)\n";
  if (v.independence) {
    os << "independence check: " << v.independence->method << ", " << v.independence->tuples_checked << " tuple(s)"
       << (v.independence->exhaustive ? "" : " (spot check)") << ", " << v.independence->failure_count
       << " failure(s)\n";
  }
  for (const auto& n : v.notes) os << "note: " << n << "\n";
  return os.str();
}

inline RunResult from_verdict(const Verdict& v) {
  RunResult out;
  out.result["verdict"] = io::verdict_json(v);
  out.csv.push_back(csv_header());
  audit_rows(v, out.csv);
  out.summary = verdict_summary(v);
  out.exit_code = exit_code_for(v);
  return out;
}

inline IndependentOptions independent_options(const Scenario& sc) {
  IndependentOptions o;
  o.hypothesis_checks = sc.hypothesis_checks;
  return o;
}

}  // namespace detail

/// Runs a validated scenario. Library errors propagate as exceptions.
inline RunResult run(const Scenario& sc) {
  using namespace detail;
  const std::string& ver = sc.verifier;
  const auto tolerances = [&] { return Tolerances(need(sc.epsilon, "epsilon", ver), need(sc.lambda, "lambda", ver)); };
  const auto gap = [&]() -> const GapFunction& { return need(sc.gap, "gap", ver); };

  RunResult out;
  if (ver == "main") {
    const auto family = make_family(sc);
    out = from_verdict(verify_main(*family, tolerances(), sc.r, gap(), need(sc.x, "x", ver), need(sc.s, "s", ver), sc.plan));
  } else if (ver == "implication") {
    const auto family = make_family(sc);
    const RhoSpec rho = need(sc.rho, "rho", ver);
    const SigmaSpec sigma = need(sc.sigma, "sigma", ver);
    Moduli m;
    m.rho = [rho](const Index& n, const Rational&) { return rho.alpha * Rational(n) + rho.beta; };
    m.sigma = [sigma](const Index& big_n, const Index&, const Rational&) { return big_n + sigma.offset; };
    m.description = "rho(n,lambda) = " + to_string(rho.alpha) + "*n + " + to_string(rho.beta) +
                    ", sigma(N,n,lambda) = N + " + sigma.offset.str();
    out = from_verdict(verify_implication(*family, tolerances(), sc.r, gap(), m, sc.plan));
  } else if (ver == "independent") {
    const auto family = make_family(sc);
    out = from_verdict(verify_independent(*family, tolerances(), sc.r, gap(), sc.plan, independent_options(sc)));
  } else if (ver == "erdos") {
    const auto& er = need_family<ErSpec>(sc, "er");
    out = from_verdict(verify_erdos_quant(er.model, tolerances(), sc.r, gap(), sc.plan, sc.phi_budget.value_or(1u << 20)));
  } else if (ver == "conv") {
    const auto& se = need_family<SeriesSpec>(sc, "series");
    const auto res = verify_conv(se.model, need(sc.phi, "phi", ver), need(sc.lambda, "lambda", ver),
                                 need(sc.epsilon, "epsilon", ver), need(sc.p, "p", ver), gap(), sc.plan,
                                 independent_options(sc), se.horizon_cap);
    out = from_verdict(res.verdict);
    out.result["truncation"] = {{"status", res.truncation_status}, {"horizon", io::index_json(res.truncation_horizon)}};
    if (res.truncation_estimate) out.result["truncation"]["estimate"] = io::estimate_json(*res.truncation_estimate);
  } else if (ver == "three_series") {
    const auto& se = need_family<SeriesSpec>(sc, "series");
    const auto res = verify_three_series(se.model, need(sc.moduli, "moduli", ver), need(sc.epsilon, "epsilon", ver),
                                         need(sc.p, "p", ver), gap(), sc.plan, independent_options(sc), se.horizon_cap);
    out = from_verdict(res.conv.verdict);
    json checks = json::array();
    for (const auto& c : res.validation.checks) {
      checks.push_back({{"condition", c.condition}, {"status", c.status}, {"detail", c.detail}});
    }
    out.result["moduli"] = {{"phi", io::index_json(res.phi)}, {"lambda", to_string(res.lambda)}, {"checks", checks}};
    out.result["truncation"] = {{"status", res.conv.truncation_status},
                                {"horizon", io::index_json(res.conv.truncation_horizon)}};
  } else if (ver == "percolation1" || ver == "percolation2") {
    const auto& pc = need_family<PercolationSpec>(sc, "percolation");
    if (pc.polarity != Polarity::NotConnected) {
      throw ConfigError("family.polarity", "the percolation verifiers use the not-connected events");
    }
    const PercolationResult res =
        ver == "percolation1"
            ? verify_percolation1(pc.lattice, tolerances(), sc.r, gap(), sc.plan, independent_options(sc))
            : verify_percolation2(pc.lattice, need(sc.lambda_p, "lambda_p", ver), need(sc.epsilon, "epsilon", ver),
                                  gap(), sc.plan, independent_options(sc));
    out = from_verdict(res.verdict);
    out.result["statement"] = res.statement;
    out.result["lambda_p_refuted"] = res.lambda_p_refuted;
    out.summary += "statement: " + res.statement + "\n";
  } else if (ver == "lemma_er") {
    const auto& er = need_family<ErSpec>(sc, "er");
    const auto rep = verify_lemma_er(er.model, need(sc.lambda, "lambda", ver), need(sc.n, "n", ver),
                                     need(sc.big_n, "N", ver), sc.plan, sc.phi_budget.value_or(1u << 20));
    out.result["lemma"] = {{"status", rep.status},
                           {"premise_sum", to_string(rep.premise_sum)},
                           {"phi", rep.phi},
                           {"threshold", to_string(rep.threshold)}};
    out.csv.push_back({"status", "n", "phi", "lo", "hi", "threshold"});
    if (rep.union_estimate) {
      out.result["lemma"]["union"] = io::estimate_json(*rep.union_estimate);
      out.csv.push_back({rep.status, std::to_string(*sc.n), std::to_string(rep.phi), to_string(rep.union_estimate->lo),
                         to_string(rep.union_estimate->hi), to_string(rep.threshold)});
    } else {
      out.csv.push_back({rep.status, std::to_string(*sc.n), "", "", "", to_string(rep.threshold)});
    }
    out.summary = "lemma: " + rep.status + " (premise sum " + to_string(rep.premise_sum) + ", phi = " +
                  std::to_string(rep.phi) + ")\n";
    out.exit_code = rep.status == "confirmed" ? Conclusive : rep.status == "undetermined" ? Undecided : PremiseOrHypothesis;
  } else {  // specker_demo
    const auto& bc = need_family<BcSpec>(sc, "bc");
    const auto* sp = std::get_if<SpeckerProxy>(&bc.sequence);
    if (!sp) throw ConfigError("family.sequence.kind", "specker_demo needs a specker sequence");
    if (sc.epsilons.empty()) throw ConfigError("epsilons", "required by verifier 'specker_demo'");
    if (sc.gaps.empty()) throw ConfigError("gaps", "required by verifier 'specker_demo'");
    const auto rep = specker_demo(sp->q, sc.epsilons, sc.gaps, need(sc.horizon, "horizon", ver), sc.plan, sc.hypothesis_checks);
    json cells = json::array();
    out.csv.push_back({"epsilon", "g", "outcome", "n", "bound", "phi"});
    bool all_ok = true;
    std::ostringstream sum;
    sum << rep.label << "\n";
    for (const auto& c : rep.cells) {
      json cell{{"epsilon", to_string(c.epsilon)}, {"g", c.gap}};
      std::string phi;
      for (const auto& r : rep.rates) {
        if (r.epsilon == c.epsilon && r.phi) phi = std::to_string(*r.phi);
      }
      if (c.verdict) {
        cell["verdict"] = io::verdict_json(*c.verdict);
        all_ok = all_ok && c.verdict->conclusive();
        out.csv.push_back({to_string(c.epsilon), c.gap, c.verdict->outcome_name(),
                           c.verdict->is_first() ? c.verdict->first().n.str() : "", c.verdict->params.bound.str(), phi});
        sum << "eps = " << to_string(c.epsilon) << ", g = " << c.gap << ": " << c.verdict->outcome_name()
            << (c.verdict->is_first() ? " n = " + c.verdict->first().n.str() : "") << " (bound "
            << c.verdict->params.bound << ")\n";
      } else {
        cell["error"] = c.error;
        all_ok = false;
        out.csv.push_back({to_string(c.epsilon), c.gap, "error", "", "", phi});
        sum << "eps = " << to_string(c.epsilon) << ", g = " << c.gap << ": error: " << c.error << "\n";
      }
      cells.push_back(std::move(cell));
    }
    json rates = json::array();
    for (const auto& r : rep.rates) {
      rates.push_back({{"epsilon", to_string(r.epsilon)}, {"phi", r.phi ? json(*r.phi) : json(nullptr)}});
      sum << "direct-rate index phi(" << to_string(r.epsilon) << ") = " << (r.phi ? std::to_string(*r.phi) : "none")
          << " at horizon " << rep.horizon << "\n";
      all_ok = all_ok && r.phi.has_value();
    }
    out.result["specker"] = {{"label", rep.label},
                             {"sequence", rep.sequence},
                             {"lambda", to_string(rep.lambda)},
                             {"horizon", rep.horizon},
                             {"total_mass_upper", to_string(rep.total_mass_upper)},
                             {"cells", std::move(cells)},
                             {"rates", std::move(rates)}};
    out.summary = sum.str();
    out.exit_code = all_ok ? Conclusive : Undecided;
  }
  out.result["exit_code"] = out.exit_code;
  return out;
}

/// results.json content: scenario, result and a timestamp that reproducibility
/// comparisons must ignore.
inline json results_document(const Scenario& sc, const RunResult& res, const std::string& timestamp) {
  return {{"tool", "zeroone"}, {"format_version", 1}, {"timestamp", timestamp}, {"scenario", to_json(sc)},
          {"result", res.result}};
}

inline std::string csv_text(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += io::csv_field(row[i]);
    }
    out += "\n";
  }
  return out;
}

}  // namespace zeroone::scenario
