#include "pbr/session.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace pbr {

using nlohmann::json;

const char* const kStoreFormat = "pbr-store/1";

struct Store::State {
  std::mutex mu;
  std::string path;
  bool autosave = true;
  std::size_t next_instance = 0;
  std::map<std::size_t, Instance> instances;

  Instance& find(const std::string& id) {
    if (id.size() < 2 || id[0] != 'i') throw UsageError("unknown instance id: " + id);
    std::size_t idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoull(id.substr(1), &used);
      if (used != id.size() - 1) throw UsageError("unknown instance id: " + id);
    } catch (const std::logic_error&) {
      throw UsageError("unknown instance id: " + id);
    }
    auto it = instances.find(idx);
    if (it == instances.end()) throw UsageError("unknown instance id: " + id);
    return it->second;
  }

  void persist() const;
  std::string dump() const;
};

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_double(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json instance_json(const Instance& inst) {
  const InstanceSpec& s = inst.spec;
  json cons = json::array();
  for (const auto& c : s.constraints) cons.push_back({{"min", opt_json(c.min)}, {"max", opt_json(c.max)}, {"is_int", c.is_int}});
  json log = json::array();
  for (const auto& r : inst.log)
    log.push_back({{"id", r.id},
                   {"features", r.features},
                   {"decision", r.decision},
                   {"u", r.u},
                   {"model_version", r.model_version},
                   {"reward", opt_json(r.reward)}});
  const auto& sc = s.sched;
  return {{"id", inst.id},
          {"param_name", s.param_name},
          {"template", {{"kind", s.tmpl.name()}, {"height", s.tmpl.h}}},
          {"feature_names", s.feature_names},
          {"m", s.m},
          {"constraints", cons},
          {"init_values", s.init_values ? json(*s.init_values) : json(nullptr)},
          {"hp",
           {{"delta", s.hp.delta},
            {"eta", s.hp.eta},
            {"radius", s.hp.radius},
            {"two_point", s.hp.two_point},
            {"max_rounds", s.hp.max_rounds},
            {"seed", s.hp.seed}}},
          {"schedule",
           {{"s0", sc.s0},
            {"s_max", sc.s_max},
            {"s_growth", sc.s_growth},
            {"eps0", sc.eps0},
            {"eps_min", sc.eps_min},
            {"eps_decay", sc.eps_decay},
            {"period", sc.period}}},
          {"init_scale", s.init_scale},
          {"params", inst.params},
          {"rounds", inst.rounds},
          {"model_version", inst.model_version},
          {"log", log}};
}

void check_spec(const InstanceSpec& s) {
  if (s.param_name.empty()) throw UsageError("param_name must be non-empty");
  if (s.m == 0) throw UsageError("m must be >= 1");
  if (s.tmpl.kind == TemplateKind::Tree && (s.tmpl.h < 1 || s.tmpl.h > 12))
    throw UsageError("tree height must be in [1, 12]");
  std::set<std::string> seen;
  for (const auto& n : s.feature_names) {
    if (n.empty()) throw UsageError("feature names must be non-empty");
    if (!seen.insert(n).second) throw UsageError("duplicate feature name: " + n);
  }
  // Names must be usable in emitted code.
  emit_code(linear_program(s.p(), 1, Vec(s.p() + 1, 0.0)), s.feature_names);
  if (!s.constraints.empty() && s.constraints.size() != s.m)
    throw UsageError("constraints must be empty or one per output");
  for (const auto& c : s.constraints) c.validate();
  s.hp.validate();
  if (s.hp.two_point) throw UsageError("sessions support one-point feedback only");
  if (s.tmpl.kind == TemplateKind::Tree) s.sched.validate();
  if (s.init_values) {
    if (s.init_values->size() != s.tmpl.param_count(s.p(), s.m))
      throw UsageError("init_values has " + std::to_string(s.init_values->size()) + " entries, template needs " +
                       std::to_string(s.tmpl.param_count(s.p(), s.m)));
    if (!all_finite(*s.init_values)) throw UsageError("init_values must be finite");
  }
}

Instance instance_from_json(const json& j) {
  Instance inst;
  inst.id = j.at("id").get<std::string>();
  InstanceSpec& s = inst.spec;
  s.param_name = j.at("param_name").get<std::string>();
  const json& t = j.at("template");
  s.tmpl = Template::parse(t.at("kind").get<std::string>(), t.at("height").get<std::size_t>());
  s.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  s.m = j.at("m").get<std::size_t>();
  for (const auto& c : j.at("constraints"))
    s.constraints.push_back({opt_double(c.at("min")), opt_double(c.at("max")), c.at("is_int").get<bool>()});
  if (!j.at("init_values").is_null()) s.init_values = j.at("init_values").get<Vec>();
  const json& hp = j.at("hp");
  s.hp.delta = hp.at("delta").get<double>();
  s.hp.eta = hp.at("eta").get<double>();
  s.hp.radius = hp.at("radius").get<double>();
  s.hp.two_point = hp.at("two_point").get<bool>();
  s.hp.max_rounds = hp.at("max_rounds").get<std::size_t>();
  s.hp.seed = hp.at("seed").get<std::uint64_t>();
  const json& sc = j.at("schedule");
  s.sched.s0 = sc.at("s0").get<double>();
  s.sched.s_max = sc.at("s_max").get<double>();
  s.sched.s_growth = sc.at("s_growth").get<double>();
  s.sched.eps0 = sc.at("eps0").get<double>();
  s.sched.eps_min = sc.at("eps_min").get<double>();
  s.sched.eps_decay = sc.at("eps_decay").get<double>();
  s.sched.period = sc.at("period").get<std::size_t>();
  s.init_scale = j.at("init_scale").get<double>();
  check_spec(s);

  inst.params = j.at("params").get<Vec>();
  if (inst.params.size() != s.tmpl.param_count(s.p(), s.m)) throw CorruptStore(inst.id + ": params has wrong length");
  inst.rounds = j.at("rounds").get<std::size_t>();
  inst.model_version = j.at("model_version").get<std::size_t>();
  std::size_t rewarded = 0;
  for (const auto& r : j.at("log")) {
    Invocation inv;
    inv.id = r.at("id").get<std::size_t>();
    inv.features = r.at("features").get<Vec>();
    inv.decision = r.at("decision").get<Vec>();
    inv.u = r.at("u").get<Vec>();
    inv.model_version = r.at("model_version").get<std::size_t>();
    inv.reward = opt_double(r.at("reward"));
    if (inv.id != inst.log.size()) throw CorruptStore(inst.id + ": invocation ids are not dense");
    if (inv.features.size() != s.p() || inv.decision.size() != s.m || inv.u.size() != s.m)
      throw CorruptStore(inst.id + ": invocation " + std::to_string(inv.id) + " has wrong dimensions");
    if (inv.model_version > inst.model_version)
      throw CorruptStore(inst.id + ": invocation " + std::to_string(inv.id) + " is ahead of the model");
    if (inv.reward) ++rewarded;
    inst.log.push_back(std::move(inv));
  }
  if (inst.rounds > rewarded) throw CorruptStore(inst.id + ": more rounds than rewarded invocations");
  return inst;
}

std::size_t instance_index(const std::string& id) {
  if (id.size() < 2 || id[0] != 'i' || id.find_first_not_of("0123456789", 1) != std::string::npos)
    throw CorruptStore("bad instance id: " + id);
  return std::stoull(id.substr(1));
}

std::shared_ptr<Store::State> parse_state(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw CorruptStore(std::string("store is not valid JSON: ") + e.what());
  }
  auto st = std::make_shared<Store::State>();
  try {
    if (!j.is_object() || !j.contains("format")) throw CorruptStore("missing format tag");
    if (j.at("format") != kStoreFormat)
      throw CorruptStore("unsupported format " + j.at("format").dump() + ", expected " + kStoreFormat);
    st->next_instance = j.at("next_instance").get<std::size_t>();
    std::set<std::string> names;
    for (const auto& ij : j.at("instances")) {
      Instance inst = instance_from_json(ij);
      std::size_t idx = instance_index(inst.id);
      if (idx >= st->next_instance) throw CorruptStore(inst.id + ": id beyond next_instance");
      if (!names.insert(inst.spec.param_name).second) throw CorruptStore("duplicate param_name " + inst.spec.param_name);
      if (!st->instances.emplace(idx, std::move(inst)).second) throw CorruptStore("duplicate instance id");
    }
  } catch (const CorruptStore&) {
    throw;
  } catch (const std::exception& e) {
    throw CorruptStore(std::string("schema error: ") + e.what());
  }
  return st;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptStore("cannot read store " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string Store::State::dump() const {
  json inst = json::array();
  for (const auto& [idx, in] : instances) inst.push_back(instance_json(in));
  json j = {{"format", kStoreFormat}, {"next_instance", next_instance}, {"instances", inst}};
  return j.dump(1) + "\n";
}

void Store::State::persist() const {
  if (path.empty()) return;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << dump();
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Learner make_learner(const InstanceSpec& spec) {
  LearnerOptions opts;
  opts.sched = spec.sched;
  opts.init_scale = spec.init_scale;
  opts.init = spec.init_values;
  return Learner(spec.tmpl, spec.p(), spec.m, spec.hp, opts);
}

Model instance_model(const Instance& inst) {
  Learner l = make_learner(inst.spec);
  l.restore(inst.params, inst.rounds);
  return l.model();
}

Store::Store() : st_(std::make_shared<State>()) {}

Store Store::open(const std::string& path) {
  if (std::filesystem::exists(path)) return load(path);
  auto st = std::make_shared<State>();
  st->path = path;
  st->persist();
  return Store(st);
}

Store Store::load(const std::string& path) {
  auto st = parse_state(read_file(path));
  st->path = path;
  return Store(st);
}

Store Store::from_text(const std::string& text) { return Store(parse_state(text)); }

std::string Store::create(const InstanceSpec& spec) {
  check_spec(spec);
  std::lock_guard<std::mutex> lock(st_->mu);
  for (const auto& [idx, in] : st_->instances)
    if (in.spec.param_name == spec.param_name) throw UsageError("duplicate param_name: " + spec.param_name);
  Instance inst;
  inst.id = "i" + std::to_string(st_->next_instance);
  inst.spec = spec;
  inst.params = make_learner(spec).params();
  std::string id = inst.id;
  st_->instances.emplace(st_->next_instance++, std::move(inst));
  if (st_->autosave) st_->persist();
  return id;
}

Handle Store::connect(const std::string& id) {
  std::lock_guard<std::mutex> lock(st_->mu);
  if (!st_->path.empty() && !std::filesystem::exists(st_->path))
    throw UsageError("store file is missing: " + st_->path);
  st_->find(id);
  return Handle(st_, id);
}

std::string Store::serialize() const {
  std::lock_guard<std::mutex> lock(st_->mu);
  return st_->dump();
}

void Store::save() const {
  std::lock_guard<std::mutex> lock(st_->mu);
  st_->persist();
}

const std::string& Store::path() const { return st_->path; }

void Store::set_autosave(bool on) {
  std::lock_guard<std::mutex> lock(st_->mu);
  st_->autosave = on;
}

std::vector<std::string> Store::ids() const {
  std::lock_guard<std::mutex> lock(st_->mu);
  std::vector<std::string> out;
  for (const auto& [idx, in] : st_->instances) out.push_back(in.id);
  return out;
}

Instance Store::snapshot(const std::string& id) const {
  std::lock_guard<std::mutex> lock(st_->mu);
  return st_->find(id);
}

std::pair<std::size_t, Vec> Handle::predict(const Vec& features) {
  std::lock_guard<std::mutex> lock(st_->mu);
  Instance& inst = st_->find(id_);
  const InstanceSpec& spec = inst.spec;
  if (features.size() != spec.p())
    throw UsageError("expected " + std::to_string(spec.p()) + " features, got " + std::to_string(features.size()));
  if (!all_finite(features)) throw UsageError("features must be finite");
  if (!cache_ || cache_version_ != inst.model_version) {
    auto l = std::make_shared<Learner>(make_learner(spec));
    l->restore(inst.params, inst.rounds);
    cache_ = std::move(l);
    cache_version_ = inst.model_version;
    ++cache_loads_;
  }
  Invocation inv;
  inv.id = inst.log.size();
  inv.features = features;
  inv.u = cache_->perturbation(inv.id);
  inv.decision = cache_->decide(features);
  for (std::size_t j = 0; j < spec.m; ++j) {
    inv.decision[j] += spec.hp.delta * inv.u[j];
    if (!spec.constraints.empty()) inv.decision[j] = apply_constraints(inv.decision[j], spec.constraints[j]);
  }
  inv.model_version = inst.model_version;
  std::pair<std::size_t, Vec> out{inv.id, inv.decision};
  inst.log.push_back(std::move(inv));
  if (st_->autosave) st_->persist();
  return out;
}

void Handle::assign_reward(std::size_t invocation_id, double reward) {
  if (!std::isfinite(reward)) throw UsageError("reward must be finite");
  std::lock_guard<std::mutex> lock(st_->mu);
  Instance& inst = st_->find(id_);
  if (invocation_id >= inst.log.size()) throw UsageError("unknown invocation id " + std::to_string(invocation_id));
  Invocation& inv = inst.log[invocation_id];
  if (inv.reward) throw UsageError("reward already assigned to invocation " + std::to_string(invocation_id));
  inv.reward = reward;
  if (st_->autosave) st_->persist();
}

std::size_t Handle::refresh() {
  std::lock_guard<std::mutex> lock(st_->mu);
  Instance& inst = st_->find(id_);
  Learner l = make_learner(inst.spec);
  for (const auto& inv : inst.log)
    if (inv.reward) l.update(inv.features, inv.u, *inv.reward);
  inst.params = l.params();
  inst.rounds = l.round();
  ++inst.model_version;
  cache_.reset();
  if (st_->autosave) st_->persist();
  return inst.model_version;
}

std::string Handle::get_expr_tree() {
  std::lock_guard<std::mutex> lock(st_->mu);
  const Instance& inst = st_->find(id_);
  return emit_code(instance_model(inst).program(), inst.spec.feature_names);
}

std::optional<std::size_t> Handle::cached_version() const {
  if (!cache_) return std::nullopt;
  return cache_version_;
}

}  // namespace pbr
