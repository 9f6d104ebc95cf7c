#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <omp.h>

#include "pbr/kernels.hpp"
#include "pbr/oracles.hpp"
#include "test_util.hpp"

using namespace pbr;

TEST_CASE("thermostat run matches an independent simulation") {
  // Python reference of the 40-step loop for h=5, offsets (-1, 1), lin=60, ltarget=75.
  ThermostatOutcome out = thermostat_run({5.0, -1.0, 1.0}, {60.0, 75.0});
  CHECK(out.error == doctest::Approx(0.9380273890871393).epsilon(1e-12));
}

TEST_CASE("parallel kernels equal their serial references bitwise") {
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    CAPTURE(threads);

    ThermostatProblem prob(5, 3000, false);
    RngStream rng(2);
    for (int i = 0; i < 3; ++i) {
      Vec a = ThermostatProblem::sample_init(rng);
      CHECK(kernels::thermostat_mean_loss(a, prob.inputs()) == kernels::thermostat_mean_loss_serial(a, prob.inputs()));
    }

    DecisionTree t = pbr::testing::random_tree(4, 3, 2, rng);
    std::vector<Vec> xs;
    for (int i = 0; i < 1000; ++i) xs.push_back(pbr::testing::random_point(3, rng));
    CHECK(kernels::eval_tree_batch(t, xs) == kernels::eval_tree_batch_serial(t, xs));

    auto r = [](const Vec& a) { return -(a[0] - 1) * (a[0] - 1) - 3 * a[1] * a[1]; };
    for (auto kind : {kernels::Estimator::OnePoint, kernels::Estimator::TwoPoint}) {
      auto p = kernels::estimator_stats(kind, r, {0.2, 0.1}, 0.5, 20000, 9);
      auto s = kernels::estimator_stats_serial(kind, r, {0.2, 0.1}, 0.5, 20000, 9);
      CHECK(p.mean == s.mean);
      CHECK(p.variance == s.variance);
    }
  }
}

TEST_CASE("batch tree evaluation matches per-point evaluation") {
  RngStream rng(6);
  DecisionTree t = pbr::testing::random_tree(3, 2, 1, rng);
  std::vector<Vec> xs;
  for (int i = 0; i < 100; ++i) xs.push_back(pbr::testing::random_point(2, rng));
  auto out = kernels::eval_tree_batch(t, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(out[i] == eval_tree(t, xs[i]));
}

TEST_CASE("estimator stats on a linear reward") {
  // r(a) = c.a: the two-point estimate m/(2 delta) (r+ - r-) u = m (c.u) u has mean c
  const Vec c{2.0, -1.0, 0.5};
  auto r = [&](const Vec& a) { return dot(c, a); };
  auto st = kernels::estimator_stats(kernels::Estimator::TwoPoint, r, {0.0, 0.0, 0.0}, 0.5, 200000, 4);
  for (std::size_t i = 0; i < 3; ++i) CHECK(st.mean[i] == doctest::Approx(c[i]).epsilon(0.02));
}
