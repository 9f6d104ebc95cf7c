#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "pbr/oracles.hpp"
#include "pbr/session.hpp"

using namespace pbr;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_file(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("pbr_test_session_" + name + ".json");
  fs::remove(p);
  return p;
}

InstanceSpec const_spec(const std::string& name, double init = 0.0) {
  InstanceSpec s;
  s.param_name = name;
  s.tmpl = Template::constant();
  s.init_values = Vec{init};
  return s;
}

StopRule no_stop() {
  StopRule s;
  s.enabled = false;
  return s;
}

// Deterministic contextual oracle: features cycle through a fixed list.
class ScriptOracle : public RewardOracle {
 public:
  ScriptOracle(std::vector<Vec> xs, std::function<double(const Vec&, const Vec&)> r)
      : xs_(std::move(xs)), r_(std::move(r)) {}
  std::size_t m() const override { return 1; }
  std::size_t p() const override { return xs_[0].size(); }
  Vec observe() override { return x_ = xs_[i_++ % xs_.size()]; }

 protected:
  double reward(const Vec& a) override { return r_(x_, a); }

 private:
  std::vector<Vec> xs_;
  std::function<double(const Vec&, const Vec&)> r_;
  std::size_t i_ = 0;
  Vec x_;
};

}  // namespace

TEST_CASE("create and first predictions") {
  Store store;
  std::string id = store.create(const_spec("timeout"));
  CHECK(id == "i0");
  Handle h = store.connect(id);
  auto [inv0, d0] = h.predict({});
  auto [inv1, d1] = h.predict({});
  CHECK(inv0 == 0);
  CHECK(inv1 == 1);
  // the unperturbed model is the init value; the served decision is a + delta u
  Instance snap = store.snapshot(id);
  CHECK(snap.params == Vec{0.0});
  CHECK(std::abs(d0[0]) == doctest::Approx(0.5));
  CHECK(d0 == Vec{snap.log[0].u[0] * 0.5});
  CHECK(h.get_expr_tree() == "return 0;\n");
  CHECK_THROWS_AS(store.create(const_spec("timeout")), UsageError);
  CHECK_THROWS_AS(store.connect("i7"), UsageError);
  CHECK_THROWS_AS(store.connect("bogus"), UsageError);
}

TEST_CASE("model shapes") {
  Store store;
  InstanceSpec lin;
  lin.param_name = "lin";
  lin.tmpl = Template::linear();
  lin.feature_names = {"selection", "lines"};
  CHECK(store.snapshot(store.create(lin)).params.size() == 3);
  InstanceSpec tr;
  tr.param_name = "tr";
  tr.tmpl = Template::tree(2);
  tr.feature_names = {"a", "b"};
  CHECK(store.snapshot(store.create(tr)).params.size() == 21);
  tr.param_name = "too_tall";
  tr.tmpl = Template::tree(13);
  CHECK_THROWS_AS(store.create(tr), UsageError);
  InstanceSpec two = const_spec("two");
  two.hp.two_point = true;
  CHECK_THROWS_AS(store.create(two), UsageError);
  InstanceSpec badname = const_spec("bad");
  badname.tmpl = Template::linear();
  badname.init_values.reset();
  badname.feature_names = {"if"};
  CHECK_THROWS_AS(store.create(badname), UsageError);
}

TEST_CASE("linear instance emits named code") {
  Store store;
  InstanceSpec s;
  s.param_name = "fmt";
  s.tmpl = Template::linear();
  s.feature_names = {"sel", "lines"};
  s.init_values = Vec{0.25, 1.5, 0.0};
  Handle h = store.connect(store.create(s));
  CHECK(h.get_expr_tree() == "double decide(double sel, double lines) {\n  return 0.25 * sel + 1.5 * lines;\n}\n");
  CHECK_THROWS_AS(h.predict({1.0}), UsageError);
}

TEST_CASE("constraints apply to served decisions") {
  Store store;
  InstanceSpec s = const_spec("threads", 3.3);
  s.constraints = {Constraints{1.0, 8.0, true}};
  Handle h = store.connect(store.create(s));
  for (int i = 0; i < 20; ++i) {
    Vec d = h.predict({}).second;
    CHECK((d[0] == 3.0 || d[0] == 4.0));
  }
}

TEST_CASE("reward assignment") {
  Store store;
  Handle h = store.connect(store.create(const_spec("r")));
  for (int i = 0; i < 6; ++i) h.predict({});
  h.assign_reward(0, -1.0);
  h.assign_reward(5, -2.0);
  CHECK(store.snapshot("i0").log[0].reward == -1.0);
  CHECK(store.snapshot("i0").log[5].reward == -2.0);
  CHECK_FALSE(store.snapshot("i0").log[3].reward.has_value());
  CHECK_THROWS_AS(h.assign_reward(0, -3.0), UsageError);
  CHECK_THROWS_AS(h.assign_reward(6, -3.0), UsageError);
  CHECK_THROWS_AS(h.assign_reward(2, NAN), UsageError);
  CHECK_FALSE(store.snapshot("i0").log[2].reward.has_value());
}

TEST_CASE("refresh without rewards bumps the version only") {
  Store store;
  Handle h = store.connect(store.create(const_spec("v", 1.5)));
  h.predict({});
  Vec before = store.snapshot("i0").params;
  CHECK(h.refresh() == 1);
  CHECK(store.snapshot("i0").params == before);
  CHECK(store.snapshot("i0").model_version == 1);
}

TEST_CASE("caches are per handle and invalidated by refresh") {
  Store store;
  std::string id = store.create(const_spec("c"));
  Handle a = store.connect(id), b = store.connect(id);
  CHECK_FALSE(a.cached_version().has_value());
  a.predict({});
  a.predict({});
  CHECK(a.cache_loads() == 1);
  CHECK(b.cache_loads() == 0);
  a.assign_reward(0, 1.0);
  b.predict({});
  CHECK(b.cached_version() == 0u);
  b.refresh();
  auto [inv, d] = a.predict({});
  CHECK(a.cache_loads() == 2);
  CHECK(a.cached_version() == 1u);
  CHECK(store.snapshot(id).log[inv].model_version == 1);
  // the new model moved: r = 1 at a + delta u pushes a along u
  Instance snap = store.snapshot(id);
  CHECK(snap.params[0] == doctest::Approx(2e-3 / 0.5 * snap.log[0].u[0]));
}

TEST_CASE("refresh every round reproduces the online driver bitwise") {
  std::vector<Vec> xs{{0.5, -1.0}, {1.5, 0.25}, {-0.75, 2.0}, {0.0, -0.5}};
  auto r = [](const Vec& x, const Vec& a) {
    double y = 2.0 * x[0] - x[1] + 1.0;
    return -(a[0] - y) * (a[0] - y);
  };
  for (Template tmpl : {Template::constant(), Template::linear(), Template::tree(2)}) {
    CAPTURE(tmpl.name());
    const std::size_t rounds = 300;
    InstanceSpec s;
    s.param_name = "eq";
    s.tmpl = tmpl;
    if (tmpl.kind != TemplateKind::Const) s.feature_names = {"u", "v"};
    s.hp.delta = tmpl.kind == TemplateKind::Tree ? 0.1 : 0.5;
    s.hp.eta = tmpl.kind == TemplateKind::Tree ? 1e-3 : 2e-3;
    s.hp.seed = 42;

    std::vector<Vec> feats = tmpl.kind == TemplateKind::Const ? std::vector<Vec>{Vec{}} : xs;
    ScriptOracle oracle(feats, [&](const Vec& x, const Vec& a) { return r(x.empty() ? Vec{0, 0} : x, a); });
    Hyperparams hp = s.hp;
    hp.max_rounds = rounds;
    Learner driver(tmpl, s.p(), 1, hp, LearnerOptions{s.sched, s.init_scale, std::nullopt});
    auto trace = learn_in_rounds(driver, oracle, no_stop());

    Store store;
    Handle h = store.connect(store.create(s));
    ScriptOracle replay(feats, [&](const Vec& x, const Vec& a) { return r(x.empty() ? Vec{0, 0} : x, a); });
    for (std::size_t t = 0; t < rounds; ++t) {
      Vec x = replay.observe();
      auto [id, d] = h.predict(x);
      CHECK(id == t);
      double rew = replay.query(d);
      CHECK(rew == trace.rounds[t].r_plus);
      h.assign_reward(id, rew);
      h.refresh();
    }
    CHECK(store.snapshot("i0").params == driver.params());
  }
}

TEST_CASE("one refresh after many rounds improves the model") {
  Store store;
  Handle h = store.connect(store.create(const_spec("batch")));
  // All 1000 tuples come from version 0, so the replay extrapolates the
  // gradient measured there; the abs reward keeps that gradient valid up to
  // the optimum, which the total step eta * 1000 = 2 does not reach.
  auto r = [](double a) { return -std::abs(a - 10.0); };
  for (int i = 0; i < 1000; ++i) {
    auto [id, d] = h.predict({});
    h.assign_reward(id, r(d[0]));
  }
  double before = r(store.snapshot("i0").params[0]);
  h.refresh();
  double after = r(store.snapshot("i0").params[0]);
  CHECK(after > before);
}

TEST_CASE("persistence round trip") {
  fs::path p = scratch_file("persist");
  {
    Store store = Store::open(p.string());
    InstanceSpec s;
    s.param_name = "p";
    s.tmpl = Template::tree(2);
    s.feature_names = {"a"};
    s.constraints = {Constraints{std::nullopt, 4.0, false}};
    Handle h = store.connect(store.create(s));
    for (int i = 0; i < 10; ++i) {
      auto [id, d] = h.predict({0.1 * i - 0.3});
      if (i % 3) h.assign_reward(id, -0.1 * i);
    }
    h.refresh();
  }
  std::string first = slurp(p);
  Store again = Store::load(p.string());
  CHECK(again.serialize() == first);
  again.save();
  CHECK(slurp(p) == first);
  CHECK(Store::from_text(first).serialize() == first);
  Handle h = again.connect("i0");
  h.predict({0.0});
  CHECK(again.snapshot("i0").log.back().model_version == 1);
  CHECK(h.cached_version() == 1u);

  fs::remove(p);
  CHECK_THROWS_AS(again.connect("i0"), UsageError);
}

TEST_CASE("corrupt stores are rejected") {
  CHECK_THROWS_AS(Store::from_text("{"), CorruptStore);
  CHECK_THROWS_AS(Store::from_text(R"({"format":"pbr-store/0","next_instance":0,"instances":[]})"), CorruptStore);
  CHECK_THROWS_AS(Store::from_text(R"({"next_instance":0,"instances":[]})"), CorruptStore);
  CHECK_NOTHROW(Store::from_text(R"({"format":"pbr-store/1","next_instance":0,"instances":[]})"));
  Store s;
  Handle h = s.connect(s.create(const_spec("x")));
  h.predict({});
  h.predict({});
  std::string text = s.serialize();
  std::string gap = text;
  gap.replace(gap.rfind("\"id\": 1"), 7, "\"id\": 4");
  CHECK_THROWS_AS(Store::from_text(gap), CorruptStore);
  std::string params = text;
  params.replace(params.find("\"params\": ["), 11, "\"params\": [1,");
  CHECK_THROWS_AS(Store::from_text(params), CorruptStore);
  CHECK_THROWS_AS(Store::load("/nonexistent/store.json"), CorruptStore);
}

TEST_CASE("concurrent predictions get dense unique ids") {
  Store store;
  std::string id = store.create(const_spec("mt"));
  std::vector<std::thread> threads;
  std::vector<std::vector<std::size_t>> got(4);
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      Handle h = store.connect(id);
      for (int i = 0; i < 200; ++i) got[t].push_back(h.predict({}).first);
    });
  for (auto& th : threads) th.join();
  std::set<std::size_t> all;
  for (const auto& g : got) {
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
    all.insert(g.begin(), g.end());
  }
  CHECK(all.size() == 800);
  CHECK(*all.rbegin() == 799);
}

TEST_CASE("serve transcript matches the golden file") {
  std::ifstream in(std::string(PBR_GOLDEN_DIR) + "/serve_session.in");
  REQUIRE(in);
  fs::path p = scratch_file("golden");
  Store store = Store::open(p.string());
  std::ostringstream out;
  serve_loop(in, out, store);
  CHECK(out.str() == slurp(std::string(PBR_GOLDEN_DIR) + "/serve_session.out"));
  CHECK(slurp(p) == slurp(std::string(PBR_GOLDEN_DIR) + "/serve_session.store.json"));
}
