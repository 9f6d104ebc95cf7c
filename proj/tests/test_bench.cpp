#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pbr/bench.hpp"

using namespace pbr;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("pbr_test_bench_" + name);
  fs::remove_all(d);
  return d;
}

const char* kSmallSuite = R"({
  "name": "small",
  "groups": [
    {"problem": "linear", "d": [2, 3], "loss": ["abs", "sq"], "templates": ["linear"],
     "seeds": {"from": 0, "count": 2}, "hp": {"delta": 0.5, "eta_norm": 0.4, "two_point": true},
     "max_queries": 20000},
    {"problem": "xor", "templates": ["tree", "flat-tree", "ucb"], "height": 2, "seeds": [4],
     "hp": {"delta": 0.1, "eta": 0.001}, "max_queries": 1500}
  ]
})";

}  // namespace

TEST_CASE("suite expansion") {
  SuiteSpec s = parse_suite(kSmallSuite);
  CHECK(s.name == "small");
  CHECK(s.cells.size() == 2 * 2 * 2 + 3);
  CHECK(s.cells[0].problem.id() == "linear-d2-abs");
  CHECK(s.cells[0].eta_norm.value() == 0.4);
  CHECK(s.cells[0].hp.two_point);
  CHECK(s.cells.back().tmpl == "ucb");
  CHECK(s.cells.back().hp.delta == 0.1);
}

TEST_CASE("suite errors") {
  CHECK_THROWS_AS(parse_suite("{"), UsageError);
  CHECK_THROWS_AS(parse_suite(R"({"groups":[{"problem":"linear","templates":["linear"],"colour":1}]})"), UsageError);
  CHECK_THROWS_AS(parse_suite(R"({"groups":[{"problem":"maze","templates":["linear"]}]})"), UsageError);
  CHECK_THROWS_AS(parse_suite(R"({"groups":[{"problem":"xor","templates":["forest"]}]})"), UsageError);
  CHECK_THROWS_AS(parse_suite(R"({"groups":[{"problem":"xor","templates":["tree"],"hp":{"delta":-1}}]})"),
                  UsageError);
  CHECK_THROWS_AS(load_suite("/nonexistent/suite.json"), UsageError);
}

TEST_CASE("empty suite writes only the header") {
  fs::path out = scratch("empty");
  auto res = run_benchmark(parse_suite(R"({"name":"e"})"), out.string(), {});
  CHECK(res.empty());
  CHECK(slurp(out / "results.csv") == std::string(kCsvHeader) + "\n");
}

TEST_CASE("benchmark output is reproducible across runs and job counts") {
  SuiteSpec s = parse_suite(kSmallSuite);
  BenchOptions o1;
  o1.timing = false;
  BenchOptions o2 = o1;
  o2.jobs = 3;
  fs::path a = scratch("a"), b = scratch("b");
  auto ra = run_benchmark(s, a.string(), o1);
  run_benchmark(s, b.string(), o2);
  CHECK(slurp(a / "results.csv") == slurp(b / "results.csv"));
  for (const auto& r : ra) {
    CHECK(r.error.empty());
    std::string curve = "curve_" + r.problem + "_" + r.tmpl + "_" + std::to_string(r.seed) + ".csv";
    CHECK(fs::exists(a / curve));
    CHECK(slurp(a / curve) == slurp(b / curve));
    CHECK(r.curve.size() == r.queries);
  }
  // header plus one row per cell
  std::string csv = slurp(a / "results.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(s.cells.size() + 1));
}

TEST_CASE("small linear cells are solved") {
  SuiteSpec s = parse_suite(kSmallSuite);
  for (const auto& c : s.cells) {
    if (c.problem.kind != "linear") continue;
    BenchResult r = run_cell(c);
    CHECK(r.solved.value_or(false));
    CHECK(r.queries <= c.max_queries);
  }
}

TEST_CASE("ucb cell on xor uses a 9 x 9 grid") {
  BenchCell c;
  c.problem.kind = "xor";
  c.tmpl = "ucb";
  c.max_queries = 200;
  BenchResult r = run_cell(c);
  CHECK(r.error.empty());
  CHECK(r.metrics["arms"] == 81);
  CHECK(r.queries == 200);
}

TEST_CASE("failed cells are reported, not thrown") {
  BenchCell c;
  c.problem.kind = "thermostat";
  c.tmpl = "ucb";
  c.ucb_bins = 200;  // 200^3 arms
  BenchResult r = run_cell(c);
  CHECK_FALSE(r.error.empty());
  CHECK(csv_row(r, false).find(",error,") != std::string::npos);
}

TEST_CASE("csv row format") {
  BenchResult r;
  r.problem = "linear-d2-sq";
  r.tmpl = "linear";
  r.seed = 3;
  r.rounds = 10;
  r.queries = 20;
  r.final_reward = -0.25;
  r.solved = true;
  r.wall_ms = 12.4;
  CHECK(csv_row(r, true) == "linear-d2-sq,linear,3,10,20,-0.25,1,12");
  CHECK(csv_row(r, false) == "linear-d2-sq,linear,3,10,20,-0.25,1,0");
}

TEST_CASE("helpers") {
  CHECK(mean_tail({1, 2, 3, 4}, 2) == 3.5);
  CHECK(mean_tail({1, 2}, 10) == 1.5);
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == 2.5);
}
