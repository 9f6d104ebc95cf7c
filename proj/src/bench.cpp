#include "pbr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

namespace pbr {

using nlohmann::json;

const char* const kCsvHeader = "problem,template,seed,rounds,queries,final_reward,solved,wall_ms";

std::string ProblemSpec::id() const {
  if (kind == "linear") return "linear-d" + std::to_string(d) + "-" + loss_name(loss);
  return kind;
}

double mean_tail(const std::vector<double>& v, std::size_t n) {
  if (v.empty()) return std::nan("");
  std::size_t k = std::min(n, v.size());
  double s = 0.0;
  for (std::size_t i = v.size() - k; i < v.size(); ++i) s += v[i];
  return s / static_cast<double>(k);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

std::unique_ptr<RewardOracle> make_problem(const ProblemSpec& ps, std::uint64_t seed) {
  if (ps.kind == "linear") {
    RngStream rng(derive_seed(seed, 10));
    return std::make_unique<LinearLossProblem>(ps.d, ps.n, ps.loss, rng);
  }
  if (ps.kind == "xor") return std::make_unique<XorProblem>(derive_seed(seed, 11));
  if (ps.kind == "slates") return std::make_unique<SlatesProblem>(derive_seed(seed, 12));
  if (ps.kind == "parrot") return std::make_unique<ParrotProblem>(derive_seed(seed, 13));
  if (ps.kind == "thermostat") return std::make_unique<ThermostatProblem>(derive_seed(seed, 14));
  throw UsageError("unknown problem '" + ps.kind + "'");
}

std::string template_label(const BenchCell& c) {
  if (c.tmpl == "tree" || c.tmpl == "flat-tree") return c.tmpl + "-h" + std::to_string(c.height);
  return c.tmpl;
}

double median_relative_error(const ParrotProblem& pp, const Model& model) {
  std::vector<double> rel;
  for (const auto& pt : pp.points()) rel.push_back(std::fabs(model.eval(pt.features)[0] - pt.target) / std::fabs(pt.target));
  return median(rel);
}

void finish_metrics(const BenchCell& c, RewardOracle& oracle, BenchResult& r) {
  if (auto* lp = dynamic_cast<LinearLossProblem*>(&oracle)) {
    if (r.model.tmpl.kind == TemplateKind::Linear) r.solved = lp->solved_by(r.model.weights);
  } else if (auto* pp = dynamic_cast<ParrotProblem*>(&oracle)) {
    if (r.model.tmpl.kind == TemplateKind::Tree || r.model.tmpl.kind == TemplateKind::Linear) {
      double e = median_relative_error(*pp, r.model);
      r.metrics["median_rel_error"] = e;
      r.solved = e <= 0.6;
    }
  } else if (auto* tp = dynamic_cast<ThermostatProblem*>(&oracle)) {
    if (r.model.tmpl.kind == TemplateKind::Const && r.model.weights.size() == 3) {
      double e = tp->mean_error(r.model.weights);
      r.metrics["error"] = e;
      r.solved = e <= 5.0;
    }
  }
  (void)c;
}

void run_learner_cell(const BenchCell& c, RewardOracle& oracle, BenchResult& r) {
  Hyperparams hp = c.hp;
  hp.seed = derive_seed(c.seed, 99);
  auto* lp = dynamic_cast<LinearLossProblem*>(&oracle);
  if (c.eta_norm) {
    if (!lp) throw UsageError("eta_norm applies to linear problems only");
    hp.eta = *c.eta_norm / lp->max_augmented_norm2();
  }
  hp.max_rounds = c.max_queries / (hp.two_point ? 2 : 1);
  const std::size_t p = oracle.p(), m = oracle.m();

  LearnerOptions opts;
  opts.init_scale = c.init_scale;
  std::unique_ptr<FlattenedOracle> flat;
  RewardOracle* target = &oracle;
  Template tmpl;
  std::size_t lp_dim = 0;
  Template model_tmpl;
  if (c.tmpl == "const") {
    tmpl = model_tmpl = Template::constant();
    if (dynamic_cast<ThermostatProblem*>(&oracle)) {
      RngStream init_rng(derive_seed(c.seed, 5));
      opts.init = ThermostatProblem::sample_init(init_rng);
    }
  } else if (c.tmpl == "linear") {
    tmpl = model_tmpl = Template::linear();
  } else if (c.tmpl == "tree") {
    tmpl = model_tmpl = Template::tree(c.height);
  } else if (c.tmpl == "flat-linear") {
    model_tmpl = Template::linear();
    lp_dim = model_tmpl.param_count(p, m);
    flat = std::make_unique<FlattenedOracle>(oracle, lp_dim, linear_evaluator(p, m));
    tmpl = Template::constant();
  } else if (c.tmpl == "flat-tree") {
    model_tmpl = Template::tree(c.height);
    lp_dim = model_tmpl.param_count(p, m);
    flat = std::make_unique<FlattenedOracle>(oracle, lp_dim, tree_evaluator(c.height, p, m));
    tmpl = Template::constant();
    // same starting tree as the structured learner with this seed
    opts.init = default_init(model_tmpl, p, m, c.init_scale, hp.seed);
  } else {
    throw UsageError("unknown template '" + c.tmpl + "'");
  }
  if (flat) target = flat.get();

  Learner learner(tmpl, flat ? 0 : p, flat ? lp_dim : m, hp, opts);
  RoundCallback cb;
  if (lp && (model_tmpl.kind == TemplateKind::Linear)) {
    const std::size_t n = lp->features().size();
    cb = [&, n](const Learner& l, const RoundRecord& rec) {
      if ((rec.t + 1) % n != 0 || !lp->solved_by(l.params())) return false;
      r.metrics["solved_queries"] = static_cast<double>(lp->query_count());
      return true;
    };
  }
  StopRule stop;
  stop.enabled = c.stop_rule;
  RoundTrace trace = learn_in_rounds(learner, *target, stop, cb);
  r.rounds = trace.rounds.size();
  r.queries = trace.query_count;
  r.curve.reserve(trace.query_count);
  for (const auto& rec : trace.rounds) {
    r.curve.push_back(rec.r_plus);
    if (rec.r_minus) r.curve.push_back(*rec.r_minus);
  }
  r.metrics["stopped"] = trace.stopped ? 1.0 : 0.0;
  if (flat) {
    r.model = Model{model_tmpl, p, m, {}, {}};
    if (model_tmpl.kind == TemplateKind::Tree) {
      r.model.tree = DecisionTree::zeros(c.height, p, m);
      set_tree_params(r.model.tree, learner.params());
    } else {
      r.model.weights = learner.params();
    }
  } else {
    r.model = learner.model();
  }
}

void run_ucb_cell(const BenchCell& c, RewardOracle& oracle, BenchResult& r) {
  const std::size_t p = oracle.p(), m = oracle.m();
  Vec axis = linspace(c.ucb_lo, c.ucb_hi, c.ucb_bins);
  UcbResult u;
  if (p > 0) {
    if (m != 1) throw UsageError("contextual UCB supports m = 1");
    // arms are weight vectors of a bias-free linear model
    std::vector<Vec> grid(p, axis);
    u = ucb_baseline(oracle, grid, c.max_queries, [](const Vec& w, const Vec& x) { return Vec{dot(w, x)}; });
  } else {
    std::vector<Vec> grid(m, axis);
    u = ucb_baseline(oracle, grid, c.max_queries);
  }
  r.rounds = r.queries = u.curve.size();
  r.curve = std::move(u.curve);
  r.metrics["arms"] = static_cast<double>(u.arms);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

BenchResult run_cell(const BenchCell& c) {
  BenchResult r;
  r.problem = c.problem.id();
  r.tmpl = template_label(c);
  r.seed = c.seed;
  auto t0 = std::chrono::steady_clock::now();
  try {
    auto oracle = make_problem(c.problem, c.seed);
    if (c.tmpl == "ucb")
      run_ucb_cell(c, *oracle, r);
    else
      run_learner_cell(c, *oracle, r);
    finish_metrics(c, *oracle, r);
    r.final_reward = mean_tail(r.curve, 1000);
  } catch (const std::exception& e) {
    r.error = e.what();
    r.final_reward = std::nan("");
  }
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string csv_row(const BenchResult& r, bool timing) {
  std::ostringstream os;
  std::string solved = !r.error.empty() ? "error" : r.solved ? (*r.solved ? "1" : "0") : "";
  os << r.problem << ',' << r.tmpl << ',' << r.seed << ',' << r.rounds << ',' << r.queries << ','
     << fmt_double(r.final_reward) << ',' << solved << ','
     << (timing ? static_cast<long long>(std::llround(r.wall_ms)) : 0LL);
  return os.str();
}

namespace {

template <typename T>
std::vector<T> as_list(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return {fallback};
  const json& v = j.at(key);
  if (v.is_array()) {
    if (v.empty()) throw UsageError(std::string("'") + key + "' must not be empty");
    return v.get<std::vector<T>>();
  }
  return {v.get<T>()};
}

std::vector<std::uint64_t> parse_seeds(const json& g) {
  if (!g.contains("seeds")) return {0};
  const json& s = g.at("seeds");
  if (s.is_array()) return s.get<std::vector<std::uint64_t>>();
  if (s.is_object()) {
    std::uint64_t from = s.value("from", std::uint64_t{0});
    std::uint64_t count = s.at("count").get<std::uint64_t>();
    std::vector<std::uint64_t> out;
    for (std::uint64_t i = 0; i < count; ++i) out.push_back(from + i);
    return out;
  }
  return {s.get<std::uint64_t>()};
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw UsageError("unknown key '" + it.key() + "' in " + where);
}

}  // namespace

SuiteSpec parse_suite(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("suite is not valid JSON: ") + e.what());
  }
  SuiteSpec suite;
  try {
    check_keys(j, {"name", "groups"}, "suite");
    suite.name = j.value("name", std::string("suite"));
    if (!j.contains("groups")) return suite;
    for (const json& g : j.at("groups")) {
      check_keys(g,
                 {"problem", "d", "n", "loss", "templates", "height", "seeds", "hp", "max_queries", "stop_rule",
                  "ucb"},
                 "group");
      std::string kind = g.at("problem").get<std::string>();
      if (!std::set<std::string>{"linear", "xor", "slates", "parrot", "thermostat"}.count(kind))
        throw UsageError("unknown problem '" + kind + "'");
      auto ds = as_list<std::size_t>(g, "d", 2);
      auto losses = as_list<std::string>(g, "loss", "sq");
      auto templates = g.at("templates").get<std::vector<std::string>>();
      auto seeds = parse_seeds(g);
      BenchCell base;
      base.height = g.value("height", std::size_t{0});
      base.max_queries = g.value("max_queries", std::size_t{10000});
      base.stop_rule = g.value("stop_rule", false);
      if (g.contains("hp")) {
        const json& h = g.at("hp");
        check_keys(h, {"delta", "eta", "eta_norm", "radius", "two_point", "init_scale"}, "hp");
        base.hp.delta = h.value("delta", base.hp.delta);
        base.hp.eta = h.value("eta", base.hp.eta);
        base.hp.radius = h.value("radius", base.hp.radius);
        base.hp.two_point = h.value("two_point", false);
        base.init_scale = h.value("init_scale", 1.0);
        if (h.contains("eta_norm")) base.eta_norm = h.at("eta_norm").get<double>();
        base.hp.validate();
      }
      if (g.contains("ucb")) {
        const json& u = g.at("ucb");
        check_keys(u, {"bins", "lo", "hi"}, "ucb");
        base.ucb_bins = u.value("bins", std::size_t{9});
        base.ucb_lo = u.value("lo", -1.0);
        base.ucb_hi = u.value("hi", 1.0);
      }
      for (const auto& t : templates)
        if (!std::set<std::string>{"const", "linear", "tree", "flat-linear", "flat-tree", "ucb"}.count(t))
          throw UsageError("unknown template '" + t + "'");
      for (std::size_t d : ds)
        for (const auto& l : losses)
          for (const auto& t : templates)
            for (auto s : seeds) {
              BenchCell c = base;
              c.problem.kind = kind;
              c.problem.d = d;
              c.problem.n = g.value("n", std::size_t{0});
              c.problem.loss = parse_loss(l);
              c.tmpl = t;
              c.seed = s;
              suite.cells.push_back(c);
            }
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad suite: ") + e.what());
  }
  return suite;
}

SuiteSpec load_suite(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read suite file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_suite(ss.str());
}

std::vector<BenchResult> run_benchmark(const SuiteSpec& suite, const std::string& out_dir, const BenchOptions& opts) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<BenchResult> results(suite.cells.size());
  const long n = static_cast<long>(suite.cells.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, opts.jobs))
  for (long i = 0; i < n; ++i) results[i] = run_cell(suite.cells[i]);

  std::ofstream csv(fs::path(out_dir) / "results.csv", std::ios::binary);
  if (!csv) throw UsageError("cannot write to '" + out_dir + "'");
  csv << kCsvHeader << '\n';
  for (const auto& r : results) csv << csv_row(r, opts.timing) << '\n';
  if (opts.curves) {
    for (const auto& r : results) {
      if (!r.error.empty()) continue;
      std::ofstream cf(fs::path(out_dir) / ("curve_" + r.problem + "_" + r.tmpl + "_" + std::to_string(r.seed) + ".csv"),
                       std::ios::binary);
      cf << "query,reward\n";
      for (std::size_t q = 0; q < r.curve.size(); ++q) cf << q + 1 << ',' << fmt_double(r.curve[q]) << '\n';
    }
  }
  return results;
}

}  // namespace pbr
