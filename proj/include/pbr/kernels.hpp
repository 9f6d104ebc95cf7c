#pragma once

#include <functional>
#include <vector>

#include "pbr/core.hpp"
#include "pbr/tree.hpp"

namespace pbr {

struct ThermostatInput;

namespace kernels {

// Each pair computes bitwise-identical results: the parallel version maps
// independent items and then reduces in the serial order.

double thermostat_mean_loss(const Vec& a, const std::vector<ThermostatInput>& inputs);
double thermostat_mean_loss_serial(const Vec& a, const std::vector<ThermostatInput>& inputs);

std::vector<Vec> eval_tree_batch(const DecisionTree& tree, const std::vector<Vec>& xs);
std::vector<Vec> eval_tree_batch_serial(const DecisionTree& tree, const std::vector<Vec>& xs);

enum class Estimator { OnePoint, TwoPoint };

struct EstimatorStats {
  Vec mean;
  Vec variance;  // per coordinate
};

// Monte-Carlo moments of the sphere gradient estimator at a. Samples are
// drawn in fixed chunks, each from its own forked stream.
EstimatorStats estimator_stats(Estimator kind, const std::function<double(const Vec&)>& r, const Vec& a,
                               double delta, std::size_t samples, std::uint64_t seed);
EstimatorStats estimator_stats_serial(Estimator kind, const std::function<double(const Vec&)>& r, const Vec& a,
                                      double delta, std::size_t samples, std::uint64_t seed);

}  // namespace kernels
}  // namespace pbr
