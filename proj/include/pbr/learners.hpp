#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbr/core.hpp"
#include "pbr/imp.hpp"
#include "pbr/tree.hpp"

namespace pbr {

enum class TemplateKind { Const, Linear, Tree };

struct Template {
  TemplateKind kind = TemplateKind::Const;
  std::size_t h = 0;  // Tree only

  static Template constant() { return {TemplateKind::Const, 0}; }
  static Template linear() { return {TemplateKind::Linear, 0}; }
  static Template tree(std::size_t h) { return {TemplateKind::Tree, h}; }
  // "const", "linear" or "tree"; height is supplied separately
  static Template parse(const std::string& name, std::size_t h = 0);
  std::string name() const;
  std::size_t param_count(std::size_t p, std::size_t m) const;
  bool operator==(const Template&) const = default;
};

// Black-box reward. Learners may call observe() and query() and nothing else.
class RewardOracle {
 public:
  virtual ~RewardOracle() = default;
  virtual std::size_t m() const = 0;
  virtual std::size_t p() const { return 0; }
  // Advances the feature stream; the context stays fixed until the next call.
  virtual Vec observe() { return {}; }
  double query(const Vec& a) {
    ++queries_;
    return reward(a);
  }
  std::size_t query_count() const { return queries_; }
  virtual std::optional<double> best_value() const { return std::nullopt; }

 protected:
  virtual double reward(const Vec& a) = 0;

 private:
  std::size_t queries_ = 0;
};

// Context-free oracle over a plain function.
class FunctionOracle : public RewardOracle {
 public:
  FunctionOracle(std::size_t m, std::function<double(const Vec&)> f, std::optional<double> best = {})
      : m_(m), f_(std::move(f)), best_(best) {}
  std::size_t m() const override { return m_; }
  std::optional<double> best_value() const override { return best_; }

 protected:
  double reward(const Vec& a) override { return f_(a); }

 private:
  std::size_t m_;
  std::function<double(const Vec&)> f_;
  std::optional<double> best_;
};

constexpr double kRewardClip = 1e6;
double clip_reward(double r);

struct Model {
  Template tmpl;
  std::size_t p = 0;
  std::size_t m = 1;
  Vec weights;        // Const: m values; Linear: m x (p+1) row-major
  DecisionTree tree;  // Tree

  Vec eval(const Vec& x) const;
  ImpProgram program() const;
};

struct LearnerOptions {
  AnnealSchedule sched;
  double init_scale = 1.0;  // std-dev of the random predicate init for trees
  std::optional<Vec> init;  // flat parameters; overrides the default init
};

class Learner {
 public:
  Learner(Template tmpl, std::size_t p, std::size_t m, Hyperparams hp, LearnerOptions opts = {});

  const Template& tmpl() const { return tmpl_; }
  std::size_t p() const { return p_; }
  std::size_t m() const { return m_; }
  const Hyperparams& hp() const { return hp_; }
  std::size_t round() const { return round_; }
  const Vec& params() const { return params_; }

  // Current unperturbed decision. Trees use the soft net at the scheduled (s, eps).
  Vec decide(const Vec& x) const;
  // Perturbation direction for round t, a pure function of (seed, t).
  Vec perturbation(std::size_t t) const;
  // One ascent step from the reward(s) observed at decide(x) +/- delta*u.
  void update(const Vec& x, const Vec& u, double r_plus, std::optional<double> r_minus = std::nullopt);

  // Replaces parameters and round counter, e.g. when loading a stored model.
  void restore(Vec params, std::size_t round);

  Model model() const;
  EntropyNet net() const;  // Tree only, at the current schedule point

 private:
  Template tmpl_;
  std::size_t p_, m_;
  Hyperparams hp_;
  LearnerOptions opts_;
  Vec params_;
  std::size_t round_ = 0;
  EntropyNet net_;  // structure for trees; weights mirror params_
};

Vec default_init(Template tmpl, std::size_t p, std::size_t m, double init_scale, std::uint64_t seed);

struct RoundRecord {
  std::size_t t = 0;
  Vec x;
  Vec a;
  Vec u;
  double r_plus = 0.0;
  std::optional<double> r_minus;

  // Reward credited to the round: the query in one-point mode, the mean of
  // the symmetric pair in two-point mode.
  double reward() const { return r_minus ? 0.5 * (r_plus + *r_minus) : r_plus; }
};

struct RoundTrace {
  std::vector<RoundRecord> rounds;
  std::size_t query_count = 0;
  bool stopped = false;  // stop rule or callback fired before max_rounds
};

struct StopRule {
  bool enabled = true;
  std::size_t window = 25;
  std::size_t patience = 100;
};

class OracleFailure : public std::runtime_error {
 public:
  OracleFailure(std::size_t round, const std::string& what, RoundTrace partial)
      : std::runtime_error("oracle failure in round " + std::to_string(round) + ": " + what),
        round(round),
        partial(std::move(partial)) {}
  std::size_t round;
  RoundTrace partial;
};

// Called after each update; returning true ends the run.
using RoundCallback = std::function<bool(const Learner&, const RoundRecord&)>;

RoundTrace learn_in_rounds(Learner& learner, RewardOracle& oracle, const StopRule& stop = {},
                           const RoundCallback& on_round = {});

// Tracks the smoothed-reward stop condition incrementally.
class StopTracker {
 public:
  explicit StopTracker(StopRule rule) : rule_(rule) {}
  // Returns true once the rule fires.
  bool push(double reward);

 private:
  StopRule rule_;
  std::vector<double> recent_;
  double window_sum_ = 0.0;
  double best_ = 0.0;
  bool have_best_ = false;
  std::size_t since_best_ = 0;
  std::size_t n_ = 0;
};

std::vector<double> regret_trace(const std::vector<double>& rewards, double best_value);
std::vector<double> regret_trace(const RoundTrace& trace, double best_value);

struct RegretEstimates {
  double W, D, C, L;
  std::size_t T;
};

// Step sizes from the linear regret bound; the fallback without estimates is (0.5, 2e-3).
Hyperparams theorem3_defaults(std::size_t m, const std::optional<RegretEstimates>& est);

// Unbiased sphere estimators of the smoothed gradient (used for Monte-Carlo checks).
Vec one_point_estimate(const std::function<double(const Vec&)>& r, const Vec& a, double delta, const Vec& u);
Vec two_point_estimate(const std::function<double(const Vec&)>& r, const Vec& a, double delta, const Vec& u);

}  // namespace pbr
