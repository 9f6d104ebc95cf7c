#include "pbr/tree.hpp"

#include <algorithm>
#include <cmath>

namespace pbr {

DecisionTree DecisionTree::zeros(std::size_t h, std::size_t p, std::size_t m) {
  if (m == 0) throw UsageError("tree needs m >= 1");
  DecisionTree t;
  t.h = h;
  t.p = p;
  t.m = m;
  t.node_w.assign(t.internal_count(), Vec(p + 1, 0.0));
  t.leaf_theta.assign(t.leaf_count(), Vec(m * (p + 1), 0.0));
  return t;
}

std::size_t DecisionTree::param_count() const {
  return internal_count() * (p + 1) + leaf_count() * m * (p + 1);
}

void DecisionTree::validate() const {
  if (node_w.size() != internal_count() || leaf_theta.size() != leaf_count())
    throw UsageError("tree is not complete for its height");
  for (const auto& w : node_w)
    if (w.size() != p + 1 || !all_finite(w)) throw UsageError("bad predicate row");
  for (const auto& th : leaf_theta)
    if (th.size() != m * (p + 1) || !all_finite(th)) throw UsageError("bad leaf row");
}

std::size_t tree_leaf(const DecisionTree& tree, const Vec& xa) {
  std::size_t node = 0;
  for (std::size_t d = 0; d < tree.h; ++d)
    node = 2 * node + (dot(tree.node_w[node], xa) > 0.0 ? 1 : 2);
  return node - tree.internal_count();
}

Vec eval_tree(const DecisionTree& tree, const Vec& x) {
  if (x.size() != tree.p) throw UsageError("feature length mismatch");
  Vec xa = augment(x);
  const Vec& th = tree.leaf_theta[tree_leaf(tree, xa)];
  std::size_t k = tree.p + 1;
  Vec out(tree.m, 0.0);
  for (std::size_t j = 0; j < tree.m; ++j)
    for (std::size_t c = 0; c < k; ++c) out[j] += th[j * k + c] * xa[c];
  return out;
}

Vec tree_params(const DecisionTree& tree) {
  Vec out;
  out.reserve(tree.param_count());
  for (const auto& w : tree.node_w) out.insert(out.end(), w.begin(), w.end());
  for (const auto& th : tree.leaf_theta) out.insert(out.end(), th.begin(), th.end());
  return out;
}

void set_tree_params(DecisionTree& tree, const Vec& params) {
  if (params.size() != tree.param_count()) throw UsageError("tree parameter count mismatch");
  auto it = params.begin();
  for (auto& w : tree.node_w)
    for (auto& v : w) v = *it++;
  for (auto& th : tree.leaf_theta)
    for (auto& v : th) v = *it++;
}

std::size_t EntropyNet::param_count() const {
  return internal_count() * (p + 1) + leaf_count() * m * (p + 1);
}

std::vector<std::vector<std::int8_t>> leaf_path_matrix(std::size_t h) {
  std::size_t leaves = std::size_t{1} << h;
  std::vector<std::vector<std::int8_t>> w21(leaves, std::vector<std::int8_t>(leaves - 1, 0));
  for (std::size_t k = 0; k < leaves; ++k) {
    std::size_t node = 0;
    for (std::size_t d = 0; d < h; ++d) {
      bool right = (k >> (h - 1 - d)) & 1;
      w21[k][node] = right ? -1 : 1;
      node = 2 * node + (right ? 2 : 1);
    }
  }
  return w21;
}

EntropyNet tree_to_net(const DecisionTree& tree, double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) throw UsageError("eps must lie in (0, 1]");
  EntropyNet net;
  net.h = tree.h;
  net.p = tree.p;
  net.m = tree.m;
  net.w1 = tree.node_w;
  net.w21 = leaf_path_matrix(tree.h);
  net.w22 = tree.leaf_theta;
  net.eps = eps;
  net.hard = true;
  return net;
}

DecisionTree infer_tree(const EntropyNet& net) {
  DecisionTree t;
  t.h = net.h;
  t.p = net.p;
  t.m = net.m;
  t.node_w = net.w1;
  t.leaf_theta = net.w22;
  return t;
}

Vec net_params(const EntropyNet& net) {
  Vec out;
  out.reserve(net.param_count());
  for (const auto& w : net.w1) out.insert(out.end(), w.begin(), w.end());
  for (const auto& th : net.w22) out.insert(out.end(), th.begin(), th.end());
  return out;
}

void set_net_params(EntropyNet& net, const Vec& params) {
  if (params.size() != net.param_count()) throw UsageError("net parameter count mismatch");
  auto it = params.begin();
  for (auto& w : net.w1)
    for (auto& v : w) v = *it++;
  for (auto& th : net.w22)
    for (auto& v : th) v = *it++;
}

namespace {

Vec forward(const EntropyNet& net, const Vec& x, bool hard, NetCache* cache) {
  if (x.size() != net.p) throw UsageError("feature length mismatch");
  NetCache local;
  NetCache& c = cache ? *cache : local;
  const std::size_t n_int = net.internal_count(), n_leaf = net.leaf_count(), k = net.p + 1;
  c.xa = augment(x);
  c.v.resize(n_int);
  c.z1.resize(n_int);
  for (std::size_t n = 0; n < n_int; ++n) {
    c.v[n] = dot(net.w1[n], c.xa);
    if (hard) {
      c.z1[n] = c.v[n] > 0.0 ? 1.0 : -1.0;
    } else {
      double sig = 1.0 / (1.0 + std::exp(-net.s * c.v[n]));
      c.z1[n] = 2.0 * sig - 1.0;
    }
  }
  c.pre.resize(n_leaf);
  c.z21.resize(n_leaf);
  c.z22.assign(n_leaf, Vec(net.m, 0.0));
  Vec out(net.m, 0.0);
  const double h = static_cast<double>(net.h);
  for (std::size_t l = 0; l < n_leaf; ++l) {
    double acc = 0.0;
    const auto& row = net.w21[l];
    for (std::size_t n = 0; n < n_int; ++n)
      if (row[n] != 0) acc += row[n] * c.z1[n];
    c.pre[l] = acc - h + net.eps;
    c.z21[l] = std::max(c.pre[l], 0.0);
    const Vec& th = net.w22[l];
    for (std::size_t j = 0; j < net.m; ++j) {
      double y = 0.0;
      for (std::size_t q = 0; q < k; ++q) y += th[j * k + q] * c.xa[q];
      c.z22[l][j] = y;
    }
    if (c.z21[l] > 0.0)
      for (std::size_t j = 0; j < net.m; ++j) out[j] += c.z21[l] * c.z22[l][j];
  }
  for (auto& o : out) o /= net.eps;
  return out;
}

}  // namespace

Vec net_forward_hard(const EntropyNet& net, const Vec& x, NetCache* cache) {
  return forward(net, x, true, cache);
}

Vec net_forward_soft(const EntropyNet& net, const Vec& x, NetCache* cache) {
  if (!(net.s > 0.0)) throw UsageError("sharpness s must be > 0");
  return forward(net, x, false, cache);
}

std::vector<Vec> net_gradient(const EntropyNet& net, const NetCache& c) {
  const std::size_t n_int = net.internal_count(), n_leaf = net.leaf_count(), k = net.p + 1;
  const std::size_t leaf_off = n_int * k;
  std::vector<Vec> grad(net.m, Vec(net.param_count(), 0.0));
  Vec dz1(n_int);
  for (std::size_t n = 0; n < n_int; ++n) {
    double sig = 1.0 / (1.0 + std::exp(-net.s * c.v[n]));
    dz1[n] = 2.0 * net.s * sig * (1.0 - sig);
  }
  for (std::size_t j = 0; j < net.m; ++j) {
    Vec& g = grad[j];
    Vec dv(n_int, 0.0);
    for (std::size_t l = 0; l < n_leaf; ++l) {
      double a = c.z21[l] / net.eps;
      if (a != 0.0) {
        double* row = &g[leaf_off + l * net.m * k + j * k];
        for (std::size_t q = 0; q < k; ++q) row[q] = a * c.xa[q];
      }
      if (c.pre[l] > 0.0) {
        double dpre = c.z22[l][j] / net.eps;
        const auto& w = net.w21[l];
        for (std::size_t n = 0; n < n_int; ++n)
          if (w[n] != 0) dv[n] += w[n] * dpre;
      }
    }
    for (std::size_t n = 0; n < n_int; ++n) {
      double d = dv[n] * dz1[n];
      if (d == 0.0) continue;
      for (std::size_t q = 0; q < k; ++q) g[n * k + q] = d * c.xa[q];
    }
  }
  return grad;
}

void AnnealSchedule::validate() const {
  if (!(s0 > 0 && s0 <= s_max && s_growth > 1)) throw UsageError("bad sharpness schedule");
  if (!(eps_min > 0 && eps_min <= eps0 && eps0 <= 1 && eps_decay > 0 && eps_decay < 1))
    throw UsageError("bad eps schedule");
  if (period == 0) throw UsageError("schedule period must be >= 1");
}

std::pair<double, double> step_schedule(const AnnealSchedule& sched, std::size_t t) {
  double k = static_cast<double>(t / sched.period);
  double s = std::min(sched.s_max, sched.s0 * std::pow(sched.s_growth, k));
  double eps = std::max(sched.eps_min, sched.eps0 * std::pow(sched.eps_decay, k));
  return {s, eps};
}

}  // namespace pbr
