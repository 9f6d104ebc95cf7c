#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pbr/core.hpp"

namespace pbr {

// Complete binary tree of height h. Internal node (i, j) lives at heap index
// 2^i + j - 1. Each leaf holds an m x (p+1) row-major matrix.
struct DecisionTree {
  std::size_t h = 0;
  std::size_t p = 0;
  std::size_t m = 1;
  std::vector<Vec> node_w;
  std::vector<Vec> leaf_theta;

  static DecisionTree zeros(std::size_t h, std::size_t p, std::size_t m);
  std::size_t internal_count() const { return (std::size_t{1} << h) - 1; }
  std::size_t leaf_count() const { return std::size_t{1} << h; }
  std::size_t param_count() const;
  void validate() const;
  bool operator==(const DecisionTree&) const = default;
};

Vec eval_tree(const DecisionTree& tree, const Vec& x);
// Index of the leaf reached by x.
std::size_t tree_leaf(const DecisionTree& tree, const Vec& xa);

// Flat parameter layout: node rows in heap order, then leaves.
Vec tree_params(const DecisionTree& tree);
void set_tree_params(DecisionTree& tree, const Vec& params);

struct EntropyNet {
  std::size_t h = 0;
  std::size_t p = 0;
  std::size_t m = 1;
  std::vector<Vec> w1;
  // leaf_count x internal_count, entries in {-1, 0, +1}; never trained
  std::vector<std::vector<std::int8_t>> w21;
  std::vector<Vec> w22;
  double eps = 0.5;
  double s = 1.0;
  bool hard = true;

  std::size_t internal_count() const { return (std::size_t{1} << h) - 1; }
  std::size_t leaf_count() const { return std::size_t{1} << h; }
  std::size_t param_count() const;
};

std::vector<std::vector<std::int8_t>> leaf_path_matrix(std::size_t h);

EntropyNet tree_to_net(const DecisionTree& tree, double eps);
DecisionTree infer_tree(const EntropyNet& net);

Vec net_params(const EntropyNet& net);
void set_net_params(EntropyNet& net, const Vec& params);

struct NetCache {
  Vec xa;
  Vec v;    // predicate pre-activations
  Vec z1;
  Vec pre;  // leaf pre-activations before ReLU
  Vec z21;
  std::vector<Vec> z22;  // per leaf, length m
};

Vec net_forward_hard(const EntropyNet& net, const Vec& x, NetCache* cache = nullptr);
Vec net_forward_soft(const EntropyNet& net, const Vec& x, NetCache* cache = nullptr);

// grad[j] is d out_j / d params in the net_params layout.
std::vector<Vec> net_gradient(const EntropyNet& net, const NetCache& cache);

struct AnnealSchedule {
  double s0 = 1.0;
  double s_max = 64.0;
  double s_growth = 2.0;
  double eps0 = 0.5;
  double eps_min = 1e-3;
  double eps_decay = 0.5;
  std::size_t period = 500;

  void validate() const;
};

std::pair<double, double> step_schedule(const AnnealSchedule& sched, std::size_t t);

}  // namespace pbr
