#include "pbr/learners.hpp"

#include <algorithm>
#include <cmath>

namespace pbr {

namespace {
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kPerturbStream = 2;
}  // namespace

Template Template::parse(const std::string& name, std::size_t h) {
  if (name == "const") return constant();
  if (name == "linear") return linear();
  if (name == "tree") return tree(h);
  throw UsageError("unknown template '" + name + "'");
}

std::string Template::name() const {
  switch (kind) {
    case TemplateKind::Const:
      return "const";
    case TemplateKind::Linear:
      return "linear";
    case TemplateKind::Tree:
      return "tree";
  }
  return "?";
}

std::size_t Template::param_count(std::size_t p, std::size_t m) const {
  switch (kind) {
    case TemplateKind::Const:
      return m;
    case TemplateKind::Linear:
      return m * (p + 1);
    case TemplateKind::Tree:
      return ((std::size_t{1} << h) - 1) * (p + 1) + (std::size_t{1} << h) * m * (p + 1);
  }
  return 0;
}

double clip_reward(double r) {
  if (std::isnan(r)) throw UsageError("reward is NaN");
  return std::clamp(r, -kRewardClip, kRewardClip);
}

Vec Model::eval(const Vec& x) const {
  switch (tmpl.kind) {
    case TemplateKind::Const:
      return weights;
    case TemplateKind::Linear: {
      Vec xa = augment(x);
      Vec out(m, 0.0);
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t c = 0; c <= p; ++c) out[j] += weights[j * (p + 1) + c] * xa[c];
      return out;
    }
    case TemplateKind::Tree:
      return eval_tree(tree, x);
  }
  return {};
}

ImpProgram Model::program() const {
  switch (tmpl.kind) {
    case TemplateKind::Const:
      return linear_program(0, m, weights);
    case TemplateKind::Linear:
      return linear_program(p, m, weights);
    case TemplateKind::Tree:
      return tree_to_program(tree);
  }
  return {};
}

Vec default_init(Template tmpl, std::size_t p, std::size_t m, double init_scale, std::uint64_t seed) {
  Vec w(tmpl.param_count(p, m), 0.0);
  if (tmpl.kind == TemplateKind::Tree) {
    // zero predicates give zero output and zero gradient, so they are drawn at random
    RngStream rng(derive_seed(seed, kInitStream));
    std::size_t n = ((std::size_t{1} << tmpl.h) - 1) * (p + 1);
    for (std::size_t i = 0; i < n; ++i) w[i] = init_scale * rng.normal();
  }
  return w;
}

Learner::Learner(Template tmpl, std::size_t p, std::size_t m, Hyperparams hp, LearnerOptions opts)
    : tmpl_(tmpl), p_(p), m_(m), hp_(hp), opts_(std::move(opts)) {
  if (m == 0) throw UsageError("learner needs m >= 1");
  hp_.validate();
  if (hp_.radius == 0.0) hp_.radius = 100.0 * static_cast<double>(m);
  if (tmpl_.kind == TemplateKind::Tree) opts_.sched.validate();
  params_ = opts_.init ? *opts_.init : default_init(tmpl_, p, m, opts_.init_scale, hp_.seed);
  if (params_.size() != tmpl_.param_count(p, m)) throw UsageError("initial parameter count mismatch");
  if (tmpl_.kind == TemplateKind::Tree) {
    net_ = tree_to_net(DecisionTree::zeros(tmpl_.h, p, m), 1.0);
    net_.hard = false;
  }
}

EntropyNet Learner::net() const {
  if (tmpl_.kind != TemplateKind::Tree) throw UsageError("net() on a non-tree learner");
  EntropyNet n = net_;
  set_net_params(n, params_);
  auto [s, eps] = step_schedule(opts_.sched, round_);
  n.s = s;
  n.eps = eps;
  return n;
}

Vec Learner::decide(const Vec& x) const {
  if (tmpl_.kind != TemplateKind::Const && x.size() != p_) throw UsageError("feature length mismatch");
  switch (tmpl_.kind) {
    case TemplateKind::Const:
      return params_;
    case TemplateKind::Linear:
      return Model{tmpl_, p_, m_, params_, {}}.eval(x);
    case TemplateKind::Tree:
      return net_forward_soft(net(), x);
  }
  return {};
}

Vec Learner::perturbation(std::size_t t) const {
  RngStream rng = RngStream(derive_seed(hp_.seed, kPerturbStream)).fork(t);
  return sample_unit_sphere(m_, rng);
}

void Learner::update(const Vec& x, const Vec& u, double r_plus, std::optional<double> r_minus) {
  double g = clip_reward(r_plus);
  if (hp_.two_point) {
    if (!r_minus) throw UsageError("two-point update needs both rewards");
    g -= clip_reward(*r_minus);
  }
  const double md = static_cast<double>(m_);
  switch (tmpl_.kind) {
    case TemplateKind::Const: {
      double k = hp_.eta / hp_.delta * g;
      for (std::size_t j = 0; j < m_; ++j) params_[j] += k * u[j];
      break;
    }
    case TemplateKind::Linear: {
      Vec xa = augment(x);
      double k = hp_.eta * md / hp_.delta * g;
      for (std::size_t j = 0; j < m_; ++j)
        for (std::size_t c = 0; c <= p_; ++c) params_[j * (p_ + 1) + c] += k * u[j] * xa[c];
      break;
    }
    case TemplateKind::Tree: {
      EntropyNet n = net();
      NetCache cache;
      net_forward_soft(n, x, &cache);
      std::vector<Vec> grad = net_gradient(n, cache);
      // scalar decisions use u in {-1, +1} with factor 1/delta; vectors use m/delta
      double k = hp_.eta / hp_.delta * g * (m_ == 1 ? 1.0 : md);
      for (std::size_t j = 0; j < m_; ++j) {
        double kj = k * u[j];
        if (kj == 0.0) continue;
        const Vec& gj = grad[j];
        for (std::size_t i = 0; i < params_.size(); ++i) params_[i] += kj * gj[i];
      }
      break;
    }
  }
  params_ = project_ball(std::move(params_), hp_.radius);
  ++round_;
}

void Learner::restore(Vec params, std::size_t round) {
  if (params.size() != tmpl_.param_count(p_, m_)) throw UsageError("parameter count mismatch");
  params_ = std::move(params);
  round_ = round;
}

Model Learner::model() const {
  Model md{tmpl_, p_, m_, {}, {}};
  if (tmpl_.kind == TemplateKind::Tree) {
    md.tree = infer_tree(net());
  } else {
    md.weights = params_;
  }
  return md;
}

bool StopTracker::push(double reward) {
  if (!rule_.enabled) return false;
  if (recent_.size() < rule_.window)
    recent_.push_back(reward);
  else
    recent_[n_ % rule_.window] = reward;
  ++n_;
  if (n_ < rule_.window) return false;
  double sum = 0.0;
  for (double r : recent_) sum += r;
  double mean = sum / static_cast<double>(rule_.window);
  if (!have_best_ || mean > best_) {
    best_ = mean;
    have_best_ = true;
    since_best_ = 0;
    return false;
  }
  return ++since_best_ >= rule_.patience;
}

RoundTrace learn_in_rounds(Learner& learner, RewardOracle& oracle, const StopRule& stop,
                           const RoundCallback& on_round) {
  RoundTrace trace;
  StopTracker tracker(stop);
  const bool two = learner.hp().two_point;
  for (std::size_t t = 0; t < learner.hp().max_rounds; ++t) {
    RoundRecord rec;
    rec.t = t;
    try {
      rec.x = oracle.observe();
      rec.a = learner.decide(rec.x);
      rec.u = learner.perturbation(learner.round());
      const double d = learner.hp().delta;
      Vec q(rec.a);
      for (std::size_t j = 0; j < q.size(); ++j) q[j] += d * rec.u[j];
      rec.r_plus = oracle.query(q);
      ++trace.query_count;
      if (two) {
        for (std::size_t j = 0; j < q.size(); ++j) q[j] = rec.a[j] - d * rec.u[j];
        rec.r_minus = oracle.query(q);
        ++trace.query_count;
      }
      learner.update(rec.x, rec.u, rec.r_plus, rec.r_minus);
    } catch (const OracleFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw OracleFailure(t, e.what(), std::move(trace));
    }
    trace.rounds.push_back(std::move(rec));
    const RoundRecord& last = trace.rounds.back();
    bool halt = tracker.push(last.reward());
    if (on_round && on_round(learner, last)) halt = true;
    if (halt) {
      trace.stopped = true;
      break;
    }
  }
  return trace;
}

std::vector<double> regret_trace(const std::vector<double>& rewards, double best_value) {
  std::vector<double> out;
  out.reserve(rewards.size());
  double sum = 0.0;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    sum += rewards[t];
    out.push_back(best_value - sum / static_cast<double>(t + 1));
  }
  return out;
}

std::vector<double> regret_trace(const RoundTrace& trace, double best_value) {
  std::vector<double> r;
  r.reserve(trace.rounds.size());
  for (const auto& rec : trace.rounds) r.push_back(rec.reward());
  return regret_trace(r, best_value);
}

Hyperparams theorem3_defaults(std::size_t m, const std::optional<RegretEstimates>& est) {
  Hyperparams hp;
  if (!est) {
    hp.delta = 0.5;
    hp.eta = 2e-3;
    return hp;
  }
  const auto& e = *est;
  if (!(e.W > 0 && e.D > 0 && e.C > 0 && e.L > 0) || e.T == 0 || m == 0)
    throw UsageError("regret estimates must be positive");
  double sqrt_t = std::sqrt(static_cast<double>(e.T));
  hp.delta = static_cast<double>(m) * std::sqrt(e.W * e.D * e.C / (2.0 * e.L * sqrt_t));
  hp.eta = e.W * hp.delta / (e.D * e.C * sqrt_t);
  hp.max_rounds = e.T;
  return hp;
}

Vec one_point_estimate(const std::function<double(const Vec&)>& r, const Vec& a, double delta, const Vec& u) {
  Vec q(a);
  for (std::size_t j = 0; j < q.size(); ++j) q[j] += delta * u[j];
  double k = static_cast<double>(a.size()) / delta * r(q);
  Vec g(u);
  for (auto& v : g) v *= k;
  return g;
}

Vec two_point_estimate(const std::function<double(const Vec&)>& r, const Vec& a, double delta, const Vec& u) {
  Vec qp(a), qm(a);
  for (std::size_t j = 0; j < a.size(); ++j) {
    qp[j] += delta * u[j];
    qm[j] -= delta * u[j];
  }
  double k = static_cast<double>(a.size()) / (2.0 * delta) * (r(qp) - r(qm));
  Vec g(u);
  for (auto& v : g) v *= k;
  return g;
}

}  // namespace pbr
