#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pbr/tree.hpp"
#include "test_util.hpp"

using namespace pbr;
using pbr::testing::max_abs_diff;
using pbr::testing::random_point;
using pbr::testing::random_tree;

TEST_CASE("parameter counts") {
  // 3 predicates + 4 leaves, 3 coefficients each
  CHECK(DecisionTree::zeros(2, 2, 1).param_count() == 21);
  CHECK(DecisionTree::zeros(4, 15, 1).param_count() == 496);
  CHECK(DecisionTree::zeros(0, 3, 2).param_count() == 8);
  CHECK(tree_to_net(DecisionTree::zeros(3, 2, 2), 1.0).param_count() == 7 * 3 + 8 * 6);
}

TEST_CASE("eval_tree goes left iff the predicate is positive") {
  DecisionTree t = DecisionTree::zeros(1, 2, 1);
  t.node_w[0] = {1.0, 0.0, -0.5};  // x0 - 0.5 > 0
  t.leaf_theta[0] = {0.0, 0.0, 3.0};
  t.leaf_theta[1] = {2.0, 0.0, 0.0};
  CHECK(eval_tree(t, {1.0, 0.0}) == Vec{3.0});
  CHECK(eval_tree(t, {0.25, 5.0}) == Vec{0.5});
  // exactly zero goes right
  CHECK(eval_tree(t, {0.5, 0.0}) == Vec{1.0});
}

TEST_CASE("heap layout of a height-2 tree") {
  DecisionTree t = DecisionTree::zeros(2, 1, 1);
  t.node_w[0] = {1.0, 0.0};   // x > 0
  t.node_w[1] = {1.0, -1.0};  // x > 1
  t.node_w[2] = {1.0, 1.0};   // x > -1
  for (std::size_t l = 0; l < 4; ++l) t.leaf_theta[l] = {0.0, static_cast<double>(l)};
  CHECK(eval_tree(t, {2.0}) == Vec{0.0});
  CHECK(eval_tree(t, {0.5}) == Vec{1.0});
  CHECK(eval_tree(t, {-0.5}) == Vec{2.0});
  CHECK(eval_tree(t, {-2.0}) == Vec{3.0});
}

TEST_CASE("leaf path matrix") {
  using Row = std::vector<std::int8_t>;
  auto w1 = leaf_path_matrix(1);
  CHECK(w1 == std::vector<Row>{{1}, {-1}});
  auto w2 = leaf_path_matrix(2);
  CHECK(w2 == std::vector<Row>{{1, 1, 0}, {1, -1, 0}, {-1, 0, 1}, {-1, 0, -1}});
  // every row has exactly h nonzero entries
  auto w4 = leaf_path_matrix(4);
  for (const auto& r : w4) {
    int nz = 0;
    for (auto v : r) nz += v != 0;
    CHECK(nz == 4);
  }
}

TEST_CASE("flat parameters round-trip") {
  RngStream rng(4);
  DecisionTree t = random_tree(3, 2, 2, rng);
  Vec p = tree_params(t);
  CHECK(p.size() == t.param_count());
  DecisionTree u = DecisionTree::zeros(3, 2, 2);
  set_tree_params(u, p);
  CHECK(u == t);
  CHECK_THROWS_AS(set_tree_params(u, Vec(3)), UsageError);
}

TEST_CASE("hard net equals the tree on random trees") {
  RngStream rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t h = 1 + rng.index(4), p = 1 + rng.index(8), m = 1 + rng.index(2);
    DecisionTree t = random_tree(h, p, m, rng);
    double eps = rng.uniform(0.05, 1.0);
    EntropyNet net = tree_to_net(t, eps);
    for (int i = 0; i < 200; ++i) {
      Vec x = random_point(p, rng);
      CHECK(max_abs_diff(net_forward_hard(net, x), eval_tree(t, x)) <= 1e-9);
    }
    CHECK(infer_tree(net) == t);
  }
}

TEST_CASE("soft net approaches the hard net as s grows") {
  RngStream rng(8);
  DecisionTree t = random_tree(3, 2, 1, rng);
  EntropyNet net = tree_to_net(t, 0.5);
  net.hard = false;
  for (int i = 0; i < 50; ++i) {
    Vec x = random_point(2, rng);
    bool margin = true;
    for (const auto& w : t.node_w) margin = margin && std::abs(dot(w, augment(x))) > 0.05;
    if (!margin) continue;
    net.s = 1e4;
    CHECK(max_abs_diff(net_forward_soft(net, x), eval_tree(t, x)) <= 1e-6);
  }
}

TEST_CASE("net_gradient matches central differences") {
  RngStream rng(123);
  int checked = 0;
  while (checked < 20) {
    std::size_t h = 1 + rng.index(3), p = 1 + rng.index(3), m = 1 + rng.index(2);
    EntropyNet net = tree_to_net(random_tree(h, p, m, rng), rng.uniform(0.2, 1.0));
    net.hard = false;
    net.s = rng.uniform(0.5, 3.0);
    Vec x = random_point(p, rng, 1.0);
    NetCache c;
    net_forward_soft(net, x, &c);
    bool ok = true;
    for (double pre : c.pre) ok = ok && std::abs(pre) >= 1e-3;
    if (!ok) continue;
    auto grad = net_gradient(net, c);
    Vec theta = net_params(net);
    const double hstep = 1e-6;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      EntropyNet a = net, b = net;
      Vec tp = theta, tm = theta;
      tp[i] += hstep;
      tm[i] -= hstep;
      set_net_params(a, tp);
      set_net_params(b, tm);
      Vec fp = net_forward_soft(a, x), fm = net_forward_soft(b, x);
      for (std::size_t j = 0; j < m; ++j) {
        double fd = (fp[j] - fm[j]) / (2 * hstep);
        CHECK(std::abs(fd - grad[j][i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
    ++checked;
  }
}

TEST_CASE("schedule steps every period and saturates") {
  AnnealSchedule s;
  CHECK(step_schedule(s, 0) == std::pair<double, double>{1.0, 0.5});
  CHECK(step_schedule(s, 499) == std::pair<double, double>{1.0, 0.5});
  CHECK(step_schedule(s, 500) == std::pair<double, double>{2.0, 0.25});
  auto [s_end, e_end] = step_schedule(s, 1000000);
  CHECK(s_end == s.s_max);
  CHECK(e_end == s.eps_min);
  AnnealSchedule bad;
  bad.period = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = {};
  bad.eps0 = 1.5;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("tree_to_net rejects eps outside (0, 1]") {
  auto t = DecisionTree::zeros(1, 1, 1);
  CHECK_THROWS_AS(tree_to_net(t, 0.0), UsageError);
  CHECK_THROWS_AS(tree_to_net(t, 1.5), UsageError);
}
