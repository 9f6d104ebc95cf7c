#include <istream>
#include <set>
#include <ostream>

#include "json.hpp"
#include "pbr/session.hpp"

namespace pbr {

using nlohmann::json;

namespace {

InstanceSpec spec_from_args(const json& a) {
  static const std::set<std::string> known = {"param_name", "template", "height",      "feature_names",
                                              "m",          "constraints", "init_values", "hp"};
  for (const auto& [k, v] : a.items())
    if (!known.count(k)) throw UsageError("unknown create argument '" + k + "'");
  InstanceSpec s;
  s.param_name = a.at("param_name").get<std::string>();
  s.tmpl = Template::parse(a.value("template", std::string("const")), a.value("height", std::size_t{0}));
  s.feature_names = a.value("feature_names", std::vector<std::string>{});
  s.m = a.value("m", std::size_t{1});
  if (a.contains("constraints"))
    for (const auto& c : a.at("constraints")) {
      Constraints k;
      if (c.contains("min") && !c.at("min").is_null()) k.min = c.at("min").get<double>();
      if (c.contains("max") && !c.at("max").is_null()) k.max = c.at("max").get<double>();
      k.is_int = c.value("is_int", false);
      s.constraints.push_back(k);
    }
  if (a.contains("init_values") && !a.at("init_values").is_null()) s.init_values = a.at("init_values").get<Vec>();
  if (a.contains("hp")) {
    const json& h = a.at("hp");
    for (const auto& [k, v] : h.items())
      if (k != "delta" && k != "eta" && k != "radius" && k != "seed") throw UsageError("unknown hp field '" + k + "'");
    s.hp.delta = h.value("delta", s.hp.delta);
    s.hp.eta = h.value("eta", s.hp.eta);
    s.hp.radius = h.value("radius", s.hp.radius);
    s.hp.seed = h.value("seed", s.hp.seed);
  }
  return s;
}

Handle& handle_of(const json& a, std::map<std::string, Handle>& handles) {
  const std::string name = a.at("handle").get<std::string>();
  auto it = handles.find(name);
  if (it == handles.end()) throw UsageError("unknown handle " + name);
  return it->second;
}

json dispatch(const std::string& op, const json& a, Store& store, std::map<std::string, Handle>& handles) {
  if (op == "create") return store.create(spec_from_args(a));
  if (op == "connect") {
    Handle h = store.connect(a.at("id").get<std::string>());
    std::string name = "h" + std::to_string(handles.size());
    handles.emplace(name, std::move(h));
    return name;
  }
  if (op == "predict") {
    Handle& h = handle_of(a, handles);
    auto [id, decision] = h.predict(a.at("features").get<Vec>());
    return {{"invocation_id", id}, {"decision", decision}, {"model_version", *h.cached_version()}};
  }
  if (op == "assign_reward") {
    Handle& h = handle_of(a, handles);
    std::size_t id = 0;
    if (a.contains("invocation_id")) {
      id = a.at("invocation_id").get<std::size_t>();
    } else {
      std::size_t n = store.snapshot(h.instance_id()).log.size();
      if (n == 0) throw UsageError("no invocation to reward");
      id = n - 1;
    }
    const json& r = a.at("reward");
    if (!r.is_number()) throw UsageError("reward must be a number");
    h.assign_reward(id, r.get<double>());
    return nullptr;
  }
  if (op == "refresh") return {{"model_version", handle_of(a, handles).refresh()}};
  if (op == "get_expr_tree") return handle_of(a, handles).get_expr_tree();
  throw UsageError("unknown op '" + op + "'");
}

}  // namespace

std::string serve_request(const std::string& line, Store& store, std::map<std::string, Handle>& handles) {
  json reply;
  try {
    json req = json::parse(line);
    if (!req.is_object() || !req.contains("op")) throw UsageError("request needs an 'op' field");
    json args = req.value("args", json::object());
    if (!args.is_object()) throw UsageError("'args' must be an object");
    reply = {{"ok", true}, {"value", dispatch(req.at("op").get<std::string>(), args, store, handles)}};
  } catch (const std::exception& e) {
    reply = {{"ok", false}, {"error", e.what()}};
  }
  return reply.dump();
}

void serve_loop(std::istream& in, std::ostream& out, Store& store) {
  std::map<std::string, Handle> handles;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out << serve_request(line, store, handles) << "\n";
    out.flush();
  }
}

}  // namespace pbr
