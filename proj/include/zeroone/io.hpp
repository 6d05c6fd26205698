#pragma once

// JSON encodings of estimates, reports and verdicts. Rationals are written
// as exact "p/q" strings next to a float approximation; indices are numbers
// when they fit in 64 bits and decimal strings otherwise.

#include <cstdint>
#include <limits>
#include <string>

#include <json.hpp>

#include "zeroone/events.hpp"
#include "zeroone/probability.hpp"
#include "zeroone/rational.hpp"
#include "zeroone/verifier.hpp"

namespace zeroone::io {

using nlohmann::json;

inline json index_json(const Index& i) {
  if (i >= 0 && i <= Index(std::numeric_limits<std::int64_t>::max())) return i.convert_to<std::int64_t>();
  return i.str();
}

inline json rational_json(const Rational& q) { return to_string(q); }

inline json estimate_json(const ProbEstimate& e) {
  json j{{"lo", rational_json(e.lo)},
         {"hi", rational_json(e.hi)},
         {"lo_approx", to_double(e.lo)},
         {"hi_approx", to_double(e.hi)},
         {"confidence", rational_json(e.confidence)},
         {"method", e.method_name()}};
  if (const auto* mc = e.monte_carlo()) {
    j["samples"] = mc->samples;
    j["successes"] = mc->successes;
    j["master_seed"] = mc->master_seed;
    j["stream"] = mc->stream_id;
    j["interval"] = to_string(mc->interval);
    j["fallback"] = mc->fallback;
  } else if (const auto* enc = std::get_if<EnclosureMethod>(&e.method)) {
    j["note"] = enc->note;
  }
  return j;
}

inline json tuple_json(const IndexTuple& t) {
  return json::array({index_json(t.n), index_json(t.m), index_json(t.l), index_json(t.k)});
}

inline json closure_json(const ClosureReport& r) {
  json v = json::array();
  for (const auto& x : r.violations) {
    json e{{"tuple", tuple_json(x.tuple)}, {"detail", x.detail}};
    if (x.sample_index) e["sample"] = *x.sample_index;
    v.push_back(std::move(e));
  }
  return {{"r", index_json(r.r)},          {"s", index_json(r.s)},
          {"method", r.method},            {"samples", r.samples},
          {"violation_count", r.violation_count}, {"violations", std::move(v)},
          {"note", r.note}};
}

inline json independence_json(const IndependenceReport& r) {
  json f = json::array();
  for (const auto& x : r.failures) {
    f.push_back({{"tuple", tuple_json(x.tuple)},
                 {"joint", estimate_json(x.joint)},
                 {"first", estimate_json(x.first)},
                 {"second", estimate_json(x.second)},
                 {"discrepancy", rational_json(x.discrepancy)},
                 {"tolerance", rational_json(x.tolerance)}});
  }
  return {{"r", index_json(r.r)},
          {"s", index_json(r.s)},
          {"method", r.method},
          {"tuples_total", index_json(r.tuples_total)},
          {"tuples_checked", r.tuples_checked},
          {"exhaustive", r.exhaustive},
          {"failure_count", r.failure_count},
          {"failures", std::move(f)},
          {"note", r.note}};
}

inline json outcome_json(const Verdict& v) {
  json o{{"kind", v.outcome_name()}};
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, FirstDisjunct>) {
          o["n"] = index_json(x.n);
          o["block"] = x.block;
          o["estimate"] = estimate_json(x.estimate);
        } else if constexpr (std::is_same_v<T, SecondDisjunct>) {
          o["s"] = index_json(x.s);
          o["estimate"] = estimate_json(x.estimate);
        } else if constexpr (std::is_same_v<T, PremiseViolated> || std::is_same_v<T, HypothesisFailed>) {
          o["reason"] = x.reason;
        } else {
          json m = json::array();
          for (const auto& g : x.margins) {
            json e{{"role", g.role},
                   {"n", index_json(g.n)},
                   {"k", index_json(g.k)},
                   {"lo", rational_json(g.lo)},
                   {"hi", rational_json(g.hi)},
                   {"threshold", rational_json(g.threshold)}};
            if (g.block) e["block"] = *g.block;
            m.push_back(std::move(e));
          }
          o["margins"] = std::move(m);
        }
      },
      v.outcome);
  return o;
}

inline json verdict_json(const Verdict& v) {
  json audit = json::array();
  for (const auto& a : v.audit) {
    json row{{"role", a.role},
             {"n", index_json(a.n)},
             {"k", index_json(a.k)},
             {"estimate", estimate_json(a.estimate)},
             {"threshold", rational_json(a.threshold)},
             {"comparison", to_string(a.verdict.kind)}};
    if (a.block) row["block"] = *a.block;
    audit.push_back(std::move(row));
  }
  json params{{"theorem", v.params.theorem},
              {"epsilon", rational_json(v.params.epsilon)},
              {"lambda", rational_json(v.params.lambda)},
              {"r", index_json(v.params.r)},
              {"g", v.params.gap},
              {"J", index_json(v.params.j)},
              {"s", index_json(v.params.s)},
              {"bound", index_json(v.params.bound)}};
  if (v.params.x) params["x"] = rational_json(*v.params.x);
  json premise{{"status", v.premise.status},
               {"sum_lo", rational_json(v.premise.sum_lo)},
               {"sum_hi", rational_json(v.premise.sum_hi)}};
  if (v.premise.x) premise["x"] = rational_json(*v.premise.x);
  json j{{"outcome", outcome_json(v)},
         {"params", std::move(params)},
         {"premise", std::move(premise)},
         {"audit", std::move(audit)},
         {"error_spent", rational_json(v.error_spent)},
         {"error_budget", rational_json(v.error_budget)},
         {"rounds", v.rounds},
         {"samples_used", v.samples_used},
         {"notes", v.notes}};
  if (v.closure) j["closure"] = closure_json(*v.closure);
  if (v.independence) j["independence"] = independence_json(*v.independence);
  return j;
}

/// Quotes a CSV field when it contains a separator, quote or newline.
inline std::string csv_field(const std::string& f) {
  if (f.find_first_of(",\"\n") == std::string::npos) return f;
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// outcome,theorem,epsilon,lambda,r,g,J,s,bound,n
inline std::string verdict_csv_header() { return "outcome,theorem,epsilon,lambda,r,g,J,s,bound,n"; }

inline std::string verdict_csv_line(const Verdict& v) {
  const std::string n = v.is_first() ? v.first().n.str() : "";
  return v.outcome_name() + "," + v.params.theorem + "," + to_string(v.params.epsilon) + "," +
         to_string(v.params.lambda) + "," + v.params.r.str() + "," + csv_field(v.params.gap) + "," + v.params.j.str() + "," +
         v.params.s.str() + "," + v.params.bound.str() + "," + n;
}

}  // namespace zeroone::io
