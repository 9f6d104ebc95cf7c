#include "pbr/oracles.hpp"

#include <cmath>
#include <limits>

#include "pbr/kernels.hpp"

namespace pbr {

Loss parse_loss(const std::string& s) {
  if (s == "sq") return Loss::Sq;
  if (s == "abs") return Loss::Abs;
  throw UsageError("unknown loss '" + s + "'");
}

std::string loss_name(Loss l) { return l == Loss::Sq ? "sq" : "abs"; }

double loss_value(Loss l, double y, double target) {
  double e = y - target;
  return l == Loss::Sq ? e * e : std::fabs(e);
}

LinearLossProblem::LinearLossProblem(std::size_t d, std::size_t n, Loss loss, RngStream& rng) : loss_(loss) {
  if (d == 0) throw UsageError("linear problem needs d >= 1");
  if (n == 0) n = 2 * d;
  for (std::size_t i = 0; i < d; ++i) w_star_.push_back(rng.uniform_int(0, 10));
  for (std::size_t i = 0; i < n; ++i) {
    Vec x(d);
    for (auto& v : x) v = static_cast<double>(rng.uniform_int(-10, 10));
    xs_.push_back(std::move(x));
  }
  for (const auto& x : xs_) {
    double y = 0.0;
    for (std::size_t k = 0; k < d; ++k) y += static_cast<double>(w_star_[k]) * x[k];
    ys_.push_back(y);
  }
}

LinearLossProblem::LinearLossProblem(std::vector<long> w_star, std::vector<Vec> features, Loss loss)
    : w_star_(std::move(w_star)), xs_(std::move(features)), loss_(loss) {
  if (w_star_.empty() || xs_.empty()) throw UsageError("linear problem needs weights and examples");
  for (const auto& x : xs_) {
    if (x.size() != w_star_.size()) throw UsageError("feature length mismatch");
    double y = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) y += static_cast<double>(w_star_[k]) * x[k];
    ys_.push_back(y);
  }
}

Vec LinearLossProblem::observe() {
  cur_ = next_;
  next_ = (next_ + 1) % xs_.size();
  return xs_[cur_];
}

double LinearLossProblem::reward(const Vec& a) { return -loss_value(loss_, a.at(0), ys_[cur_]); }

double LinearLossProblem::max_augmented_norm2() const {
  double best = 0.0;
  for (const auto& x : xs_) best = std::max(best, dot(x, x) + 1.0);
  return best;
}

bool LinearLossProblem::solved_by(const Vec& w) const {
  if (w.size() != w_star_.size() + 1) return false;
  for (std::size_t k = 0; k < w_star_.size(); ++k)
    if (std::round(w[k]) != static_cast<double>(w_star_[k])) return false;
  return std::round(w.back()) == 0.0;
}

Vec TargetProblem::observe() {
  sample(x_, target_);
  return x_;
}

double TargetProblem::reward(const Vec& a) {
  double e = a.at(0) - target_;
  return -e * e;
}

double xor_target(const Vec& x) { return (x[0] > 0) == (x[1] > 0) ? 1.0 : 0.0; }

void XorProblem::sample(Vec& x, double& target) {
  x = {rng().uniform(-1, 1), rng().uniform(-1, 1)};
  target = xor_target(x);
}

DecisionTree slates_tree() {
  DecisionTree t = DecisionTree::zeros(3, 2, 1);
  // rows are (wx, wy, bias); left branch iff row . (x, y, 1) > 0
  t.node_w = {{1, 0, 0},   {0, 1, 0},    {0, 1, 0},   {1, 0, -1.5},
              {0, 1, 1.5}, {0, 1, -1.5}, {1, 0, 1.5}};
  const double leaves[8] = {0.5, 0.1, 0.81, 1.0, 0.3, 0.81, 0.47, 0.1};
  for (std::size_t k = 0; k < 8; ++k) t.leaf_theta[k] = {0, 0, leaves[k]};
  return t;
}

double slates_target(const Vec& x) {
  static const DecisionTree t = slates_tree();
  return eval_tree(t, x)[0];
}

void SlatesProblem::sample(Vec& x, double& target) {
  x = {rng().uniform(-3, 3), rng().uniform(-3, 3)};
  target = slates_target(x);
}

double inversek2j(double x, double y) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double r2 = x * x + y * y;
  if (r2 == 0.0) return nan;
  double c = (r2 - 0.5) / 0.5;
  if (c < -1.0 || c > 1.0) return nan;
  double th2 = std::acos(c);
  double s = (y * (0.5 + 0.5 * std::cos(th2)) - 0.5 * x * std::sin(th2)) / r2;
  if (s < -1.0 || s > 1.0) return nan;
  return std::asin(s);
}

Vec monomial_features(double x, double y) {
  Vec f;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) f.push_back(std::pow(x, i) * std::pow(y, j));
  return f;
}

ParrotProblem::ParrotProblem(std::uint64_t seed) : TargetProblem(15, derive_seed(seed, 1)) {
  RngStream pts(derive_seed(seed, 0));
  while (points_.size() < kPoints) {
    double x = pts.uniform(-1, 1), y = pts.uniform(-1, 1);
    double t = inversek2j(x, y);
    if (std::isnan(t)) continue;
    Vec f = monomial_features(x, y);
    f.erase(f.begin());
    points_.push_back({x, y, std::move(f), t});
  }
}

void ParrotProblem::sample(Vec& x, double& target) {
  const Point& pt = points_[rng().index(points_.size())];
  x = pt.features;
  target = pt.target;
}

ThermostatOutcome thermostat_run(const Vec& a, const ThermostatInput& in) {
  const double h = a[0], t_on = in.ltarget + a[1], t_off = in.ltarget + a[2], K = 0.1;
  double penalty = 0.0;
  if (!(t_on < t_off)) penalty += 1000.0;
  if (!(h > 0)) penalty += 1000.0;
  if (!(h < 20)) penalty += 1000.0;
  bool on = false;
  double cur = in.lin;
  for (int i = 0; i < 40; ++i) {
    if (on) {
      cur = cur + (h - K * (cur - in.lin));
      if (cur > t_off) on = false;
    } else {
      cur = cur - K * (cur - in.lin);
      if (cur < t_on) on = true;
    }
    if (!(cur < 120)) penalty += 1000.0;
  }
  double err = std::fabs(cur - in.ltarget);
  return {err * err + penalty, err};
}

ThermostatProblem::ThermostatProblem(std::uint64_t seed, std::size_t n, bool parallel) : parallel_(parallel) {
  RngStream rng(seed);
  inputs_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double lin = rng.uniform(65, 75);
    double lt = rng.uniform(75, 90);
    inputs_.push_back({lin, lt});
  }
}

double ThermostatProblem::mean_loss(const Vec& a) const {
  if (a.size() != 3) throw UsageError("thermostat decision has 3 entries");
  return parallel_ ? kernels::thermostat_mean_loss(a, inputs_) : kernels::thermostat_mean_loss_serial(a, inputs_);
}

double ThermostatProblem::mean_error(const Vec& a) const {
  double s = 0.0;
  for (const auto& in : inputs_) s += thermostat_run(a, in).error;
  return s / static_cast<double>(inputs_.size());
}

Vec ThermostatProblem::sample_init(RngStream& rng) {
  return {rng.uniform(0, 10), rng.uniform(-10, 0), rng.uniform(0, 10)};
}

FlattenedOracle::Evaluator linear_evaluator(std::size_t p, std::size_t m) {
  return [p, m](const Vec& w, const Vec& x) { return Model{Template::linear(), p, m, w, {}}.eval(x); };
}

FlattenedOracle::Evaluator tree_evaluator(std::size_t h, std::size_t p, std::size_t m) {
  return [h, p, m](const Vec& w, const Vec& x) {
    DecisionTree t = DecisionTree::zeros(h, p, m);
    set_tree_params(t, w);
    return eval_tree(t, x);
  };
}

std::size_t grid_size(const std::vector<Vec>& grid) {
  std::size_t n = 1;
  for (const auto& g : grid) {
    if (g.empty()) return 0;
    if (n > kMaxArms) return n;
    n *= g.size();
  }
  return n;
}

UcbResult ucb_baseline(RewardOracle& oracle, const std::vector<Vec>& grid, std::size_t T,
                       const FlattenedOracle::Evaluator& to_decision) {
  std::size_t arms = grid_size(grid);
  if (arms == 0) throw UsageError("UCB grid has an empty dimension");
  if (arms > kMaxArms)
    throw UsageError("UCB grid has at least " + std::to_string(arms) + " arms, above the limit of " +
                     std::to_string(kMaxArms));
  auto point = [&](std::size_t arm) {
    Vec v(grid.size());
    for (std::size_t d = grid.size(); d-- > 0;) {
      v[d] = grid[d][arm % grid[d].size()];
      arm /= grid[d].size();
    }
    return v;
  };
  std::vector<double> sum(arms, 0.0);
  std::vector<std::size_t> plays(arms, 0);
  UcbResult res;
  res.arms = arms;
  res.curve.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t pick = 0;
    if (t < arms) {
      pick = t;
    } else {
      double best = -std::numeric_limits<double>::infinity();
      double log_t = std::log(static_cast<double>(t));
      for (std::size_t k = 0; k < arms; ++k) {
        double n = static_cast<double>(plays[k]);
        double score = sum[k] / n + std::sqrt(2.0 * log_t / n);
        if (score > best) {
          best = score;
          pick = k;
        }
      }
    }
    Vec x = oracle.observe();
    Vec arm_point = point(pick);
    double r = oracle.query(to_decision ? to_decision(arm_point, x) : arm_point);
    sum[pick] += r;
    ++plays[pick];
    res.curve.push_back(r);
  }
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < arms; ++k)
    if (plays[k] && sum[k] / static_cast<double>(plays[k]) > best_mean) {
      best_mean = sum[k] / static_cast<double>(plays[k]);
      res.best_arm = k;
    }
  return res;
}

Vec linspace(double lo, double hi, std::size_t n) {
  Vec v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

}  // namespace pbr
