#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pbr/learners.hpp"

namespace pbr {

// The store file is unreadable or fails schema checks.
class CorruptStore : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

extern const char* const kStoreFormat;

struct InstanceSpec {
  std::string param_name;
  Template tmpl;
  std::vector<std::string> feature_names;
  std::size_t m = 1;
  std::vector<Constraints> constraints;  // empty, or one per output
  std::optional<Vec> init_values;
  Hyperparams hp;
  AnnealSchedule sched;
  double init_scale = 1.0;

  std::size_t p() const { return feature_names.size(); }
};

struct Invocation {
  std::size_t id = 0;
  Vec features;
  Vec decision;
  Vec u;  // perturbation applied to the model output
  std::size_t model_version = 0;
  std::optional<double> reward;
};

struct Instance {
  std::string id;
  InstanceSpec spec;
  Vec params;
  std::size_t rounds = 0;  // updates folded into params
  std::size_t model_version = 0;
  std::vector<Invocation> log;
};

class Handle;

class Store {
 public:
  // In-memory store; save() is a no-op.
  Store();
  // Loads path, or starts an empty store there when the file is missing.
  static Store open(const std::string& path);
  // Loads an existing file; throws CorruptStore on any schema problem.
  static Store load(const std::string& path);
  static Store from_text(const std::string& text);

  std::string create(const InstanceSpec& spec);
  Handle connect(const std::string& id);

  std::string serialize() const;
  void save() const;
  const std::string& path() const;
  void set_autosave(bool on);

  std::vector<std::string> ids() const;
  Instance snapshot(const std::string& id) const;

  struct State;

 private:
  explicit Store(std::shared_ptr<State> st) : st_(std::move(st)) {}
  std::shared_ptr<State> st_;
  friend class Handle;
};

class Handle {
 public:
  std::pair<std::size_t, Vec> predict(const Vec& features);
  void assign_reward(std::size_t invocation_id, double reward);
  // Returns the new model version.
  std::size_t refresh();
  std::string get_expr_tree();

  const std::string& instance_id() const { return id_; }
  std::size_t cache_loads() const { return cache_loads_; }
  std::optional<std::size_t> cached_version() const;

 private:
  Handle(std::shared_ptr<Store::State> st, std::string id) : st_(std::move(st)), id_(std::move(id)) {}
  std::shared_ptr<Store::State> st_;
  std::string id_;
  std::shared_ptr<Learner> cache_;
  std::size_t cache_version_ = 0;
  std::size_t cache_loads_ = 0;
  friend class Store;
};

Learner make_learner(const InstanceSpec& spec);
Model instance_model(const Instance& inst);

// Newline-delimited JSON request/response loop; see docs/serve-protocol.md.
void serve_loop(std::istream& in, std::ostream& out, Store& store);
std::string serve_request(const std::string& line, Store& store, std::map<std::string, Handle>& handles);

}  // namespace pbr
