#include "pbr/kernels.hpp"

#include <algorithm>

#include "pbr/learners.hpp"
#include "pbr/oracles.hpp"

namespace pbr::kernels {

namespace {

double sum_ordered(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

constexpr std::size_t kChunk = 4096;

struct ChunkMoments {
  Vec sum;
  Vec sum_sq;
};

ChunkMoments run_chunk(Estimator kind, const std::function<double(const Vec&)>& r, const Vec& a, double delta,
                       std::size_t count, std::uint64_t seed) {
  RngStream rng(seed);
  ChunkMoments cm{Vec(a.size(), 0.0), Vec(a.size(), 0.0)};
  for (std::size_t i = 0; i < count; ++i) {
    Vec u = sample_unit_sphere(a.size(), rng);
    Vec g = kind == Estimator::OnePoint ? one_point_estimate(r, a, delta, u) : two_point_estimate(r, a, delta, u);
    for (std::size_t j = 0; j < g.size(); ++j) {
      cm.sum[j] += g[j];
      cm.sum_sq[j] += g[j] * g[j];
    }
  }
  return cm;
}

EstimatorStats finish(const std::vector<ChunkMoments>& chunks, std::size_t dim, std::size_t samples) {
  EstimatorStats st{Vec(dim, 0.0), Vec(dim, 0.0)};
  Vec sq(dim, 0.0);
  for (const auto& c : chunks)
    for (std::size_t j = 0; j < dim; ++j) {
      st.mean[j] += c.sum[j];
      sq[j] += c.sum_sq[j];
    }
  double n = static_cast<double>(samples);
  for (std::size_t j = 0; j < dim; ++j) {
    st.mean[j] /= n;
    st.variance[j] = sq[j] / n - st.mean[j] * st.mean[j];
  }
  return st;
}

}  // namespace

double thermostat_mean_loss(const Vec& a, const std::vector<ThermostatInput>& inputs) {
  const long n = static_cast<long>(inputs.size());
  Vec losses(inputs.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) losses[i] = thermostat_run(a, inputs[i]).loss;
  return sum_ordered(losses) / static_cast<double>(n);
}

double thermostat_mean_loss_serial(const Vec& a, const std::vector<ThermostatInput>& inputs) {
  Vec losses(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) losses[i] = thermostat_run(a, inputs[i]).loss;
  return sum_ordered(losses) / static_cast<double>(inputs.size());
}

std::vector<Vec> eval_tree_batch(const DecisionTree& tree, const std::vector<Vec>& xs) {
  std::vector<Vec> out(xs.size());
  const long n = static_cast<long>(xs.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) out[i] = eval_tree(tree, xs[i]);
  return out;
}

std::vector<Vec> eval_tree_batch_serial(const DecisionTree& tree, const std::vector<Vec>& xs) {
  std::vector<Vec> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(eval_tree(tree, x));
  return out;
}

EstimatorStats estimator_stats(Estimator kind, const std::function<double(const Vec&)>& r, const Vec& a,
                               double delta, std::size_t samples, std::uint64_t seed) {
  const std::size_t n_chunks = (samples + kChunk - 1) / kChunk;
  std::vector<ChunkMoments> chunks(n_chunks);
  const long nc = static_cast<long>(n_chunks);
#pragma omp parallel for schedule(dynamic)
  for (long c = 0; c < nc; ++c) {
    std::size_t lo = static_cast<std::size_t>(c) * kChunk;
    std::size_t count = std::min(kChunk, samples - lo);
    chunks[c] = run_chunk(kind, r, a, delta, count, derive_seed(seed, static_cast<std::uint64_t>(c)));
  }
  return finish(chunks, a.size(), samples);
}

EstimatorStats estimator_stats_serial(Estimator kind, const std::function<double(const Vec&)>& r, const Vec& a,
                                      double delta, std::size_t samples, std::uint64_t seed) {
  const std::size_t n_chunks = (samples + kChunk - 1) / kChunk;
  std::vector<ChunkMoments> chunks;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    std::size_t lo = c * kChunk;
    chunks.push_back(run_chunk(kind, r, a, delta, std::min(kChunk, samples - lo), derive_seed(seed, c)));
  }
  return finish(chunks, a.size(), samples);
}

}  // namespace pbr::kernels
