// zeroone: scenario runner and bounds calculator.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "zeroone/scenario.hpp"

namespace fs = std::filesystem;
using namespace zeroone;

namespace {

constexpr const char* out_dir_env = "ZEROONE_OUT_DIR";
constexpr const char* default_out_dir = "zeroone-out";

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// "offset:C", "affine:ALPHA:C"
GapFunction parse_gap(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "offset" && !rest.empty()) return GapFunction::offset(detail::parse_integer(rest, text));
  if (kind == "affine") {
    const auto c2 = rest.find(':');
    if (c2 != std::string::npos) {
      return GapFunction::affine(parse_rational(rest.substr(0, c2)), detail::parse_integer(rest.substr(c2 + 1), text));
    }
  }
  throw ConfigError("--gap", "expected offset:C or affine:ALPHA:C, got '" + text + "'");
}

struct RunOptions {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> samples;
  std::optional<std::uint64_t> budget;
  std::optional<unsigned> threads;
  std::string out;
  std::string format;
  bool quiet = false;
};

int run_command(const RunOptions& o) {
  scenario::Scenario sc = scenario::load(o.scenario);
  if (o.seed) sc.plan.master_seed = *o.seed;
  if (o.samples) {
    sc.plan.samples = *o.samples;
    if (sc.plan.max_samples < sc.plan.samples) sc.plan.max_samples = sc.plan.samples;
  }
  if (o.budget) sc.plan.max_samples = *o.budget;
  if (o.threads) sc.plan.threads = *o.threads;
  if (!o.format.empty()) sc.output.format = o.format;
  sc.plan.validate();

  fs::path dir;
  if (!o.out.empty()) dir = o.out;
  else if (!sc.output.dir.empty()) dir = sc.output.dir;
  else if (const char* env = std::getenv(out_dir_env); env && *env) dir = env;
  else dir = default_out_dir;

  const scenario::RunResult res = scenario::run(sc);
  fs::create_directories(dir);
  if (sc.output.format != "csv") {
    std::ofstream(dir / "results.json") << scenario::results_document(sc, res, utc_timestamp()).dump(2) << "\n";
  }
  if (sc.output.format != "json") std::ofstream(dir / "results.csv") << scenario::csv_text(res.csv);
  if (!o.quiet) {
    std::cout << "scenario: " << (sc.name.empty() ? o.scenario : sc.name) << " (" << sc.verifier << ")\n"
              << res.summary << "results: " << dir.string() << "\n";
  }
  return res.exit_code;
}

int bounds_command(const std::string& eps, const std::string& lam, const std::string& r, const std::string& gap) {
  const Tolerances tol(parse_rational(eps), parse_rational(lam));
  const Index r0 = detail::parse_integer(r, r);
  const GapFunction g = parse_gap(gap);
  const Index j = counter_independent(tol.epsilon, tol.lambda);
  const IndexSchedule sch = schedule(g, r0, to_u64(j, "J") + 1);
  std::cout << "epsilon = " << to_string(tol.epsilon) << ", lambda = " << to_string(tol.lambda) << ", r = " << r0
            << ", g = " << g.describe() << "\n"
            << "J = " << j << "\n"
            << "i,a_i,b_i\n";
  for (std::size_t i = 0; i < sch.size(); ++i) std::cout << i << "," << sch.a[i] << "," << sch.b[i] << "\n";
  std::cout << "s = " << sch.b.back() << "\n"
            << "bound = " << sch.a.back() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finitary zero-one law verifiers"};
  app.require_subcommand(1);

  RunOptions ro;
  auto* run = app.add_subcommand("run", "Run a scenario file (TOML, or JSON by extension)");
  run->add_option("--scenario", ro.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", ro.seed, "Master seed (overrides the file)");
  run->add_option("--samples", ro.samples, "Initial Monte Carlo samples per estimate");
  run->add_option("--budget", ro.budget, "Adaptive-doubling sample cap");
  run->add_option("--threads", ro.threads, "Worker threads (0 = hardware concurrency)");
  run->add_option("--out", ro.out, std::string("Output directory (else the scenario's, else $") + out_dir_env +
                                       ", else ./" + default_out_dir + ")");
  run->add_option("--format", ro.format, "json, csv or both")->check(CLI::IsMember({"json", "csv", "both"}));
  run->add_flag("--quiet", ro.quiet, "Suppress the summary");

  std::string eps, lam, r = "0", gap = "offset:1";
  auto* bounds = app.add_subcommand("bounds", "Print the index schedule and bounds (no probabilities)");
  bounds->add_option("--epsilon", eps, "epsilon in (0,1), e.g. 1/10")->required();
  bounds->add_option("--lambda", lam, "lambda in (0,1)")->required();
  bounds->add_option("--r", r, "start index")->capture_default_str();
  bounds->add_option("--gap", gap, "offset:C or affine:ALPHA:C")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }
  try {
    if (*run) return run_command(ro);
    return bounds_command(eps, lam, r, gap);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 1;
}
