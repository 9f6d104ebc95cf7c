#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pbr/learners.hpp"
#include "pbr/oracles.hpp"

namespace pbr {

struct ProblemSpec {
  std::string kind;  // linear | xor | slates | parrot | thermostat
  std::size_t d = 2;
  std::size_t n = 0;  // linear examples; 0 selects 2d
  Loss loss = Loss::Sq;

  std::string id() const;
};

struct BenchCell {
  ProblemSpec problem;
  // const | linear | tree | flat-linear | flat-tree | ucb
  std::string tmpl;
  std::size_t height = 0;
  std::uint64_t seed = 0;
  Hyperparams hp;
  // When set, eta = eta_norm / max ||augment(x)||^2 over the problem's examples.
  std::optional<double> eta_norm;
  std::size_t max_queries = 10000;
  bool stop_rule = false;
  double init_scale = 1.0;
  std::size_t ucb_bins = 9;
  double ucb_lo = -1.0;
  double ucb_hi = 1.0;
};

struct BenchResult {
  std::string problem;
  std::string tmpl;
  std::uint64_t seed = 0;
  std::size_t rounds = 0;
  std::size_t queries = 0;
  double final_reward = 0.0;  // mean over the last (up to) 1000 query rewards
  std::optional<bool> solved;
  double wall_ms = 0.0;
  std::vector<double> curve;  // reward per query
  std::map<std::string, double> metrics;
  std::string error;  // set when the cell failed
  Model model;
};

BenchResult run_cell(const BenchCell& cell);

struct SuiteSpec {
  std::string name;
  std::vector<BenchCell> cells;
};

// Suite files are JSON; see docs/suite-format.md.
SuiteSpec parse_suite(const std::string& json_text);
SuiteSpec load_suite(const std::string& path);

struct BenchOptions {
  int jobs = 1;
  bool timing = true;  // false writes wall_ms as 0 for byte-reproducible output
  bool curves = true;
};

extern const char* const kCsvHeader;
std::string csv_row(const BenchResult& r, bool timing);

std::vector<BenchResult> run_benchmark(const SuiteSpec& suite, const std::string& out_dir, const BenchOptions& opts);

double mean_tail(const std::vector<double>& v, std::size_t n);
double median(std::vector<double> v);

}  // namespace pbr
