#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pbr/bench.hpp"
#include "pbr/child_process.hpp"
#include "pbr/learners.hpp"
#include "pbr/session.hpp"

using namespace pbr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitCorrupt = 3;
constexpr int kExitOracle = 4;

std::uint64_t default_seed() {
  if (const char* s = std::getenv("PBR_SEED")) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s, s + std::strlen(s), v);
    if (ec != std::errc() || *p != '\0') throw UsageError(std::string("PBR_SEED is not an unsigned integer: ") + s);
    return v;
  }
  return 0;
}

std::string format_decimal(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<Vec> read_features(const std::string& path, std::size_t p) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read features file " + path);
  std::vector<Vec> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    Vec row;
    double v;
    while (ss >> v) row.push_back(v);
    if (!ss.eof() || row.size() != p)
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(p) + " numbers");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw UsageError("features file " + path + " has no rows");
  return rows;
}

// Each query runs the command once: one line of decimals in, one reward line out.
class CommandOracle : public RewardOracle {
 public:
  CommandOracle(std::string cmd, std::size_t m, std::vector<Vec> features, std::chrono::milliseconds timeout)
      : cmd_(std::move(cmd)), m_(m), features_(std::move(features)), timeout_(timeout) {}
  std::size_t m() const override { return m_; }
  std::size_t p() const override { return features_.empty() ? 0 : features_[0].size(); }
  Vec observe() override {
    if (features_.empty()) return {};
    return features_[next_++ % features_.size()];
  }

 protected:
  double reward(const Vec& a) override {
    std::string line;
    for (std::size_t j = 0; j < a.size(); ++j) line += (j ? " " : "") + format_decimal(a[j]);
    line += "\n";
    const std::size_t q = query_count();
    std::string out = run_child(cmd_, line, timeout_);
    std::string first = trim(out.substr(0, out.find('\n')));
    double r = 0.0;
    auto [p, ec] = std::from_chars(first.data(), first.data() + first.size(), r);
    if (first.empty() || ec != std::errc() || p != first.data() + first.size() || !std::isfinite(r))
      throw ChildError("malformed reward line at query " + std::to_string(q) + ": '" + first + "'");
    return r;
  }

 private:
  std::string cmd_;
  std::size_t m_;
  std::vector<Vec> features_;
  std::size_t next_ = 0;
  std::chrono::milliseconds timeout_;
};

struct TuneArgs {
  std::string tmpl = "const";
  std::size_t height = 2;
  std::size_t m = 1;
  std::size_t p = 0;
  std::size_t rounds = 1000;
  double delta = Hyperparams{}.delta;
  double eta = Hyperparams{}.eta;
  bool two_point = false;
  std::optional<std::uint64_t> seed;
  std::string reward_cmd;
  std::string features;
  std::string recovery = "pbr-tune-recovery.txt";
  long timeout_ms = 60000;
};

int cmd_tune(const TuneArgs& a) {
  Template tmpl = Template::parse(a.tmpl, a.height);
  std::vector<Vec> features;
  if (a.p > 0) {
    if (a.features.empty()) throw UsageError("--features is required when --p > 0");
    features = read_features(a.features, a.p);
  }
  Hyperparams hp;
  hp.delta = a.delta;
  hp.eta = a.eta;
  hp.two_point = a.two_point;
  hp.max_rounds = a.rounds;
  hp.seed = a.seed ? *a.seed : default_seed();
  Learner learner(tmpl, a.p, a.m, hp);
  CommandOracle oracle(a.reward_cmd, a.m, std::move(features), std::chrono::milliseconds(a.timeout_ms));
  StopRule no_stop;
  no_stop.enabled = false;
  const auto names = default_names(a.p);
  try {
    learn_in_rounds(learner, oracle, no_stop);
  } catch (const OracleFailure& e) {
    std::ofstream rec(a.recovery);
    rec << emit_code(learner.model().program(), names);
    std::cerr << "pbr tune: " << e.what() << "\n"
              << "partial model (" << learner.round() << " rounds) written to " << a.recovery << "\n";
    return kExitOracle;
  }
  std::cout << emit_code(learner.model().program(), names);
  return kExitOk;
}

int cmd_bench(const std::string& suite_path, const std::string& out, int jobs, bool deterministic, bool curves) {
  if (!std::filesystem::exists(suite_path)) throw UsageError("suite file not found: " + suite_path);
  SuiteSpec suite = load_suite(suite_path);
  BenchOptions opts;
  opts.jobs = jobs;
  opts.timing = !deterministic;
  opts.curves = curves;
  auto results = run_benchmark(suite, out, opts);
  std::size_t failed = 0, solved = 0, judged = 0;
  for (const auto& r : results) {
    if (!r.error.empty()) {
      ++failed;
      std::cerr << "cell " << r.problem << " " << r.tmpl << " seed " << r.seed << " failed: " << r.error << "\n";
    }
    if (r.solved) {
      ++judged;
      solved += *r.solved;
    }
  }
  std::cout << suite.name << ": " << results.size() << " cells, " << failed << " failed";
  if (judged) std::cout << ", " << solved << "/" << judged << " solved";
  std::cout << "\n";
  return failed ? kExitOracle : kExitOk;
}

int cmd_serve(const std::string& path) {
  Store store = Store::open(path);
  serve_loop(std::cin, std::cout, store);
  return kExitOk;
}

void require_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw UsageError("store file not found: " + path);
}

int cmd_emit(const std::string& path, const std::string& id) {
  require_file(path);
  Store store = Store::load(path);
  std::cout << store.connect(id).get_expr_tree();
  return kExitOk;
}

int cmd_inspect(const std::string& path) {
  require_file(path);
  Store store = Store::load(path);
  auto ids = store.ids();
  std::cout << "instances: " << ids.size() << "\n";
  for (const auto& id : ids) {
    Instance in = store.snapshot(id);
    std::size_t rewarded = 0;
    for (const auto& inv : in.log) rewarded += inv.reward.has_value();
    std::string tmpl = in.spec.tmpl.name();
    if (in.spec.tmpl.kind == TemplateKind::Tree) tmpl += "-h" + std::to_string(in.spec.tmpl.h);
    std::cout << id << " param=" << in.spec.param_name << " template=" << tmpl << " p=" << in.spec.p()
              << " m=" << in.spec.m << " version=" << in.model_version << " invocations=" << in.log.size()
              << " rewarded=" << rewarded << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn decision-function parameters from black-box rewards"};
  app.require_subcommand(1);

  std::string suite, out_dir;
  int jobs = 1;
  bool deterministic = false, no_curves = false;
  auto* bench = app.add_subcommand("bench", "Run a benchmark suite");
  bench->add_option("--suite", suite, "Suite file (JSON)")->required();
  bench->add_option("--out", out_dir, "Output directory")->required();
  bench->add_option("--jobs", jobs, "Cells run in parallel")->check(CLI::PositiveNumber);
  bench->add_flag("--deterministic", deterministic, "Write wall_ms as 0");
  bench->add_flag("--no-curves", no_curves, "Skip per-cell curve files");

  TuneArgs ta;
  auto* tune = app.add_subcommand("tune", "Learn against an external reward command");
  tune->add_option("--template", ta.tmpl)->check(CLI::IsMember({"const", "linear", "tree"}));
  tune->add_option("--height", ta.height);
  tune->add_option("--m", ta.m);
  tune->add_option("--p", ta.p);
  tune->add_option("--rounds", ta.rounds);
  tune->add_option("--delta", ta.delta);
  tune->add_option("--eta", ta.eta);
  tune->add_flag("--two-point", ta.two_point);
  tune->add_option("--seed", ta.seed);
  tune->add_option("--reward-cmd", ta.reward_cmd, "Shell command; reads decisions, prints a reward")->required();
  tune->add_option("--features", ta.features, "Whitespace-separated feature rows, cycled per round");
  tune->add_option("--recovery", ta.recovery, "Where the partial model goes if the oracle fails");
  tune->add_option("--timeout-ms", ta.timeout_ms, "Per-query timeout")->check(CLI::PositiveNumber);

  std::string store_path, inst_id;
  auto* serve = app.add_subcommand("serve", "Serve the session API over stdin/stdout");
  serve->add_option("--store", store_path)->required();
  auto* emit = app.add_subcommand("emit", "Print the current model of an instance as code");
  emit->add_option("--store", store_path)->required();
  emit->add_option("--id", inst_id)->required();
  auto* inspect = app.add_subcommand("inspect", "Summarize a store");
  inspect->add_option("--store", store_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*bench) return cmd_bench(suite, out_dir, jobs, deterministic, !no_curves);
    if (*tune) return cmd_tune(ta);
    if (*serve) return cmd_serve(store_path);
    if (*emit) return cmd_emit(store_path, inst_id);
    if (*inspect) return cmd_inspect(store_path);
  } catch (const CorruptStore& e) {
    std::cerr << "pbr: corrupt store: " << e.what() << "\n";
    return kExitCorrupt;
  } catch (const UsageError& e) {
    std::cerr << "pbr: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "pbr: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
