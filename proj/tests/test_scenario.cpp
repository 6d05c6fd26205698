#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "zeroone/scenario.hpp"

using namespace zeroone;
using namespace zeroone::scenario;
namespace fs = std::filesystem;

namespace {

const fs::path source_dir = ZEROONE_SOURCE_DIR;

std::vector<fs::path> bundled_scenarios() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(source_dir / "scenarios")) {
    if (e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + ZEROONE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("zeroone-test-" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("every bundled scenario parses and round-trips through canonical JSON") {
  const auto files = bundled_scenarios();
  REQUIRE(files.size() >= 10);
  for (const auto& f : files) {
    INFO(f.string());
    const Scenario sc = load(f);
    const json canon = to_json(sc);
    const Scenario back = from_json(canon);
    CHECK(back == sc);
    CHECK(to_json(back) == canon);
  }
}

TEST_CASE("TOML and JSON forms of one scenario agree") {
  Scenario a = load(source_dir / "scenarios/bc_const_half.toml"), b = load(source_dir / "scenarios/bc_const_half.json");
  CHECK(a.name != b.name);
  b.name = a.name;
  CHECK(a == b);
}

TEST_CASE("decimals are read exactly") {
  const Scenario sc = parse_toml(R"(
verifier = "independent"
epsilon = 0.1
lambda = "1/10"
[family]
kind = "bc"
sequence = { kind = "constant", p = 0.5 }
)");
  CHECK(*sc.epsilon == Rational(1, 10));
  CHECK(*sc.lambda == Rational(1, 10));
}

TEST_CASE("configuration errors name the offending field") {
  auto path_of = [](const std::string& text) -> std::string {
    try {
      parse_toml(text);
    } catch (const ConfigError& e) {
      return e.path();
    }
    return "<none>";
  };
  const std::string family = "\n[family]\nkind = \"bc\"\nsequence = { kind = \"constant\", p = \"1/2\" }\n";
  CHECK(path_of("verifier = \"independent\"\nepsilon = \"1/2\"\nlambda = \"1/2\"\nbogus = 1" + family) == "bogus");
  CHECK(path_of("verifier = \"nope\"" + family) == "verifier");
  CHECK(path_of("verifier = \"independent\"\nepsilon = \"x/2\"" + family) == "epsilon");
  CHECK(path_of("verifier = \"independent\"\n[family]\nkind = \"bc\"\nsequence = { kind = \"constant\", p = \"3/2\" }")
            .rfind("family.sequence", 0) == 0);
  CHECK(path_of("verifier = \"independent\"\n[family]\nkind = \"bc\"\nsequence = { kind = \"constant\" }") ==
        "family.sequence.p");
  CHECK_THROWS_AS(load(source_dir / "scenarios/invalid/bad_gap_table.toml"), ConfigError);
}

TEST_CASE("in-process run of the d = 2 percolation scenario matches the golden result") {
  const Scenario sc = load(source_dir / "scenarios/perc2_d2_p09.toml");
  const RunResult res = run(sc);
  CHECK(res.exit_code == Conclusive);
  const json golden = read_json(source_dir / "tests/golden/perc2_d2_p09.json");
  CHECK(res.result == golden);
}

TEST_CASE("CLI exit codes") {
  const auto out = scratch("exit");
  CHECK(cli("run --quiet --scenario " + (source_dir / "scenarios/bc_const_half.toml").string() + " --out " +
            out.string()) == 0);
  CHECK(fs::exists(out / "results.json"));
  CHECK(fs::exists(out / "results.csv"));
  CHECK(cli("run --quiet --scenario " + (source_dir / "scenarios/invalid/bad_gap_table.toml").string() + " --out " +
            out.string()) == 1);
  CHECK(cli("run --scenario /nonexistent.toml") == 1);
  CHECK(cli("frobnicate") == 1);
  CHECK(cli("bounds --epsilon 1/10 --lambda 1/10") == 0);
  CHECK(cli("bounds --epsilon 2 --lambda 1/10") == 1);

  // every block sits at 1/2 while the tail stays at 1/2 <= 1 - lambda: the sum premise fails
  const fs::path pv = out / "premise.toml";
  std::string rows;
  for (int n = 0; n < 8; ++n) {
    rows += n ? ", [" : "[";
    for (int k = n; k < 8; ++k) rows += k > n ? ", \"1/2\"" : "\"1/2\"";
    rows += "]";
  }
  std::ofstream(pv) << "verifier = \"main\"\nepsilon = \"1/4\"\nlambda = \"1/4\"\nx = 1\ns = 5\n"
                       "[family]\nkind = \"table\"\nrows = [" << rows << "]\n[gap]\nkind = \"offset\"\nc = 0\n";
  CHECK(cli("run --quiet --scenario " + pv.string() + " --out " + out.string()) == 3);
}

TEST_CASE("CLI output is reproducible modulo the timestamp") {
  const auto scen = (source_dir / "scenarios/perc_d2_p08.toml").string();
  const auto a = scratch("repro-a"), b = scratch("repro-b"), c = scratch("repro-c");
  REQUIRE(cli("run --quiet --scenario " + scen + " --samples 2000 --threads 1 --out " + a.string()) == 0);
  REQUIRE(cli("run --quiet --scenario " + scen + " --samples 2000 --threads 2 --out " + b.string()) == 0);
  REQUIRE(cli("run --quiet --scenario " + scen + " --samples 2000 --seed 7 --out " + c.string()) == 0);
  json ja = read_json(a / "results.json"), jb = read_json(b / "results.json"), jc = read_json(c / "results.json");
  for (json* j : {&ja, &jb, &jc}) j->erase("timestamp");
  // thread count is part of the echoed plan
  ja["scenario"]["plan"].erase("threads");
  jb["scenario"]["plan"].erase("threads");
  CHECK(ja == jb);
  CHECK(slurp(a / "results.csv") == slurp(b / "results.csv"));
  CHECK(jc["scenario"]["seed"] != ja["scenario"]["seed"]);
}

TEST_CASE("output directory falls back to the environment variable") {
  const auto dir = scratch("env");
  const std::string cmd = "cd " + fs::temp_directory_path().string() + " && ZEROONE_OUT_DIR=" + dir.string() + " \"" +
                          ZEROONE_CLI_PATH + "\" run --quiet --scenario " +
                          (source_dir / "scenarios/bc_const_half.toml").string() + " > /dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(dir / "results.json"));
}
