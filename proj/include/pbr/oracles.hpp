#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pbr/learners.hpp"

namespace pbr {

enum class Loss { Sq, Abs };
Loss parse_loss(const std::string& s);
std::string loss_name(Loss l);
double loss_value(Loss l, double y, double target);

// Integer linear regression problem; examples are cycled in order.
class LinearLossProblem : public RewardOracle {
 public:
  LinearLossProblem(std::size_t d, std::size_t n, Loss loss, RngStream& rng);
  LinearLossProblem(std::vector<long> w_star, std::vector<Vec> features, Loss loss);

  std::size_t m() const override { return 1; }
  std::size_t p() const override { return w_star_.size(); }
  Vec observe() override;
  std::optional<double> best_value() const override { return 0.0; }

  // Harness-side knowledge; not visible through RewardOracle.
  const std::vector<long>& w_star() const { return w_star_; }
  const std::vector<Vec>& features() const { return xs_; }
  double max_augmented_norm2() const;
  bool solved_by(const Vec& weights) const;  // rounded weights equal w*, bias rounds to 0

 protected:
  double reward(const Vec& a) override;

 private:
  std::vector<long> w_star_;
  std::vector<Vec> xs_;
  Vec ys_;
  Loss loss_;
  std::size_t next_ = 0;
  std::size_t cur_ = 0;
};

// Problems with a fixed scalar target per context and squared loss.
class TargetProblem : public RewardOracle {
 public:
  std::size_t m() const override { return 1; }
  std::size_t p() const override { return p_; }
  Vec observe() override;
  std::optional<double> best_value() const override { return 0.0; }
  double current_target() const { return target_; }

 protected:
  TargetProblem(std::size_t p, std::uint64_t seed) : p_(p), rng_(seed) {}
  double reward(const Vec& a) override;
  virtual void sample(Vec& x, double& target) = 0;
  RngStream& rng() { return rng_; }

 private:
  std::size_t p_;
  RngStream rng_;
  Vec x_;
  double target_ = 0.0;
};

double xor_target(const Vec& x);
class XorProblem : public TargetProblem {
 public:
  explicit XorProblem(std::uint64_t seed) : TargetProblem(2, seed) {}

 protected:
  void sample(Vec& x, double& target) override;
};

// Fixed height-3 axis-aligned tree over [-3, 3]^2.
double slates_target(const Vec& x);
DecisionTree slates_tree();
class SlatesProblem : public TargetProblem {
 public:
  explicit SlatesProblem(std::uint64_t seed) : TargetProblem(2, seed) {}

 protected:
  void sample(Vec& x, double& target) override;
};

// Returns NaN where the function is undefined.
double inversek2j(double x, double y);
// x^i y^j for 0 <= i, j <= 3, i-major; entry 0 is the constant 1.
Vec monomial_features(double x, double y);

class ParrotProblem : public TargetProblem {
 public:
  static constexpr std::size_t kPoints = 100;
  // Features drop the constant monomial; augmentation supplies it.
  explicit ParrotProblem(std::uint64_t seed);

  struct Point {
    double x, y;
    Vec features;
    double target;
  };
  const std::vector<Point>& points() const { return points_; }

 protected:
  void sample(Vec& x, double& target) override;

 private:
  std::vector<Point> points_;
};

struct ThermostatInput {
  double lin, ltarget;
};
struct ThermostatOutcome {
  double loss;
  double error;
};

ThermostatOutcome thermostat_run(const Vec& a, const ThermostatInput& in);

class ThermostatProblem : public RewardOracle {
 public:
  static constexpr std::size_t kInputs = 10000;
  ThermostatProblem(std::uint64_t seed, std::size_t n = kInputs, bool parallel = true);
  std::size_t m() const override { return 3; }

  const std::vector<ThermostatInput>& inputs() const { return inputs_; }
  double mean_loss(const Vec& a) const;
  double mean_error(const Vec& a) const;
  // Uniform over the hole hint ranges h in (0,10), tOn in (-10,0), tOff in (0,10).
  static Vec sample_init(RngStream& rng);

 protected:
  double reward(const Vec& a) override { return -mean_loss(a); }

 private:
  std::vector<ThermostatInput> inputs_;
  bool parallel_;
};

// Wraps a contextual oracle so that a constants learner can drive a model's
// parameters directly: the decision vector is the flat parameter vector.
class FlattenedOracle : public RewardOracle {
 public:
  using Evaluator = std::function<Vec(const Vec& params, const Vec& x)>;
  FlattenedOracle(RewardOracle& inner, std::size_t d, Evaluator eval)
      : inner_(inner), d_(d), eval_(std::move(eval)) {}
  std::size_t m() const override { return d_; }
  Vec observe() override {
    x_ = inner_.observe();
    return {};
  }
  std::optional<double> best_value() const override { return inner_.best_value(); }

 protected:
  double reward(const Vec& params) override { return inner_.query(eval_(params, x_)); }

 private:
  RewardOracle& inner_;
  std::size_t d_;
  Evaluator eval_;
  Vec x_;
};

FlattenedOracle::Evaluator linear_evaluator(std::size_t p, std::size_t m);
FlattenedOracle::Evaluator tree_evaluator(std::size_t h, std::size_t p, std::size_t m);

struct UcbResult {
  std::size_t arms = 0;
  std::size_t best_arm = 0;
  std::vector<double> curve;  // reward per query
};

constexpr std::size_t kMaxArms = 1000000;
std::size_t grid_size(const std::vector<Vec>& grid);

// UCB1 over the product grid. to_decision maps (arm point, context) to the
// decision; by default the arm point is the decision itself.
UcbResult ucb_baseline(RewardOracle& oracle, const std::vector<Vec>& grid, std::size_t T,
                       const FlattenedOracle::Evaluator& to_decision = {});

Vec linspace(double lo, double hi, std::size_t n);

}  // namespace pbr
