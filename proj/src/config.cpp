#include "addtree/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace addtree::bench {

using nlohmann::json;

namespace {

std::string zero_dim_name(ZeroDimPolicy p) { return p == ZeroDimPolicy::Constant ? "constant" : "ignore"; }

ZeroDimPolicy zero_dim_from(const std::string& s) {
  if (s == "constant") return ZeroDimPolicy::Constant;
  if (s == "ignore") return ZeroDimPolicy::Ignore;
  throw ConfigError("zero_dim must be 'constant' or 'ignore', got '" + s + "'");
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Reads known keys of one object and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError("config " + label("") + " must be an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config field " + label(key) + ": " + e.what());
    }
  }

  void get(const std::string& key, std::optional<double>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    double v = 0.0;
    get(key, v);
    out = v;
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config field " + label(k));
  }

  std::string label(const std::string& key) const { return "'" + where_ + key + "'"; }
  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

json config_to_json(const RunConfig& c) {
  json j;
  j["objective"] = c.objective;
  j["tree_spec"] = c.tree_spec;
  j["objective_cmd"] = c.objective_cmd;
  j["noise_std"] = c.noise_std;
  j["algorithms"] = c.algorithms;
  j["iterations"] = c.iterations;
  j["seeds"] = c.seeds;
  j["n_init"] = c.bo.n_init;
  j["kernel"] = to_string(c.bo.kernel);
  j["zero_dim"] = zero_dim_name(c.bo.zero_dim);
  j["tie_output_scales"] = c.bo.tie_output_scales;
  j["schedule"] = {{"theta0", c.bo.theta0},
                   {"B0", c.bo.B0},
                   {"delta", c.bo.delta},
                   {"gamma_g", nullable(c.bo.gamma_g)},
                   {"gamma_b", nullable(c.bo.gamma_b)},
                   {"reference_exponent", c.bo.reference_exponent},
                   {"b_share", c.bo.b_share}};
  j["fit"] = {{"restarts", c.bo.fit_restarts},
              {"evaluations", c.bo.fit_evaluations},
              {"noise_floor", c.bo.noise_floor}};
  j["propose"] = {{"starts", c.bo.propose.starts},
                  {"candidates", c.bo.propose.candidates},
                  {"max_evaluations", c.bo.propose.max_evaluations},
                  {"parallel", c.bo.propose.parallel}};
  j["regression"] = {{"train_sizes", c.regression.train_sizes},
                     {"test_size", c.regression.test_size},
                     {"seeds", c.regression.seeds},
                     {"kernel", to_string(c.regression.kernel)},
                     {"zero_dim", zero_dim_name(c.regression.zero_dim)},
                     {"tie_output_scales", c.regression.tie_output_scales},
                     {"restarts", c.regression.restarts},
                     {"noise_floor", c.regression.noise_floor}};
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Reader r(j, "");
  r.get("objective", c.objective);
  r.get("tree_spec", c.tree_spec);
  r.get("objective_cmd", c.objective_cmd);
  r.get("noise_std", c.noise_std);
  r.get("algorithms", c.algorithms);
  r.get("iterations", c.iterations);
  r.get("seeds", c.seeds);
  r.get("n_init", c.bo.n_init);
  std::string kernel = to_string(c.bo.kernel), zd = zero_dim_name(c.bo.zero_dim);
  r.get("kernel", kernel);
  r.get("zero_dim", zd);
  r.get("tie_output_scales", c.bo.tie_output_scales);
  try {
    c.bo.kernel = kernel_kind_from_string(kernel);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config field 'kernel': ") + e.what());
  }
  c.bo.zero_dim = zero_dim_from(zd);
  if (const json* s = r.child("schedule")) {
    Reader rs(*s, "schedule.");
    rs.get("theta0", c.bo.theta0);
    rs.get("B0", c.bo.B0);
    rs.get("delta", c.bo.delta);
    rs.get("gamma_g", c.bo.gamma_g);
    rs.get("gamma_b", c.bo.gamma_b);
    rs.get("reference_exponent", c.bo.reference_exponent);
    rs.get("b_share", c.bo.b_share);
    rs.finish();
  }
  if (const json* f = r.child("fit")) {
    Reader rf(*f, "fit.");
    rf.get("restarts", c.bo.fit_restarts);
    rf.get("evaluations", c.bo.fit_evaluations);
    rf.get("noise_floor", c.bo.noise_floor);
    rf.finish();
  }
  if (const json* p = r.child("propose")) {
    Reader rp(*p, "propose.");
    rp.get("starts", c.bo.propose.starts);
    rp.get("candidates", c.bo.propose.candidates);
    rp.get("max_evaluations", c.bo.propose.max_evaluations);
    rp.get("parallel", c.bo.propose.parallel);
    rp.finish();
  }
  if (const json* g = r.child("regression")) {
    Reader rg(*g, "regression.");
    rg.get("train_sizes", c.regression.train_sizes);
    rg.get("test_size", c.regression.test_size);
    rg.get("seeds", c.regression.seeds);
    std::string rk = to_string(c.regression.kernel), rz = zero_dim_name(c.regression.zero_dim);
    rg.get("kernel", rk);
    rg.get("zero_dim", rz);
    try {
      c.regression.kernel = kernel_kind_from_string(rk);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config field 'regression.kernel': ") + e.what());
    }
    c.regression.zero_dim = zero_dim_from(rz);
    rg.get("tie_output_scales", c.regression.tie_output_scales);
    rg.get("restarts", c.regression.restarts);
    rg.get("noise_floor", c.regression.noise_floor);
    rg.finish();
  }
  r.get("output_dir", c.output_dir);
  r.get("workers", c.workers);
  r.finish();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void validate_config(const RunConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  if (!c.tree_spec.empty()) {
    need(std::filesystem::exists(c.tree_spec), "tree-spec file not found: " + c.tree_spec);
    need(!c.objective_cmd.empty(), "a tree spec needs an objective command (--objective-cmd)");
  } else {
    need(c.objective == "jenatton", "unknown builtin objective '" + c.objective + "'");
    need(c.objective_cmd.empty(), "an objective command needs a tree spec (--tree-spec)");
  }
  need(c.noise_std >= 0.0, "noise_std must be >= 0");
  need(!c.algorithms.empty(), "at least one algorithm is required");
  std::set<std::string> algos;
  for (const auto& a : c.algorithms) {
    try {
      (void)algorithm_from_string(a);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    need(algos.insert(a).second, "algorithm '" + a + "' listed twice");
  }
  need(c.iterations >= 1, "iterations must be >= 1");
  need(!c.seeds.empty(), "at least one seed is required");
  need(std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() == c.seeds.size(), "seeds must be distinct");
  need(c.bo.n_init >= -1, "n_init must be >= 0 (or -1 for 4 + total dims)");
  need(c.bo.theta0 > 0.0, "schedule.theta0 must be > 0");
  need(c.bo.B0 > 0.0, "schedule.B0 must be > 0");
  need(c.bo.delta > 0.0 && c.bo.delta < 1.0, "schedule.delta must lie in (0, 1)");
  need(!c.bo.gamma_g || *c.bo.gamma_g >= 0.0, "schedule.gamma_g must be >= 0");
  need(!c.bo.gamma_b || *c.bo.gamma_b >= 0.0, "schedule.gamma_b must be >= 0");
  need(c.bo.reference_exponent > 0.0 && c.bo.reference_exponent < 1.0,
       "schedule.reference_exponent must lie in (0, 1)");
  need(c.bo.b_share >= 0.0 && c.bo.b_share <= 1.0, "schedule.b_share must lie in [0, 1]");
  need(c.bo.fit_restarts >= 1, "fit.restarts must be >= 1");
  need(c.bo.fit_evaluations >= 1, "fit.evaluations must be >= 1");
  need(c.bo.noise_floor > 0.0 && c.bo.noise_floor < 10.0, "fit.noise_floor must lie in (0, 10)");
  need(c.bo.propose.starts >= 1, "propose.starts must be >= 1");
  need(c.bo.propose.candidates >= 1, "propose.candidates must be >= 1");
  need(c.bo.propose.max_evaluations >= 1, "propose.max_evaluations must be >= 1");
  need(!c.regression.train_sizes.empty(), "regression.train_sizes must not be empty");
  for (int n : c.regression.train_sizes) need(n >= 0, "regression.train_sizes must be >= 0");
  need(c.regression.test_size >= 1, "regression.test_size must be >= 1");
  need(!c.regression.seeds.empty(), "regression.seeds must not be empty");
  need(c.regression.restarts >= 1, "regression.restarts must be >= 1");
  need(c.regression.noise_floor > 0.0 && c.regression.noise_floor < 10.0,
       "regression.noise_floor must lie in (0, 10)");
  need(!c.output_dir.empty(), "output_dir must not be empty");
  need(c.workers >= 1, "workers must be >= 1");
}

json result_config(const RunConfig& c) {
  json j = config_to_json(c);
  j.erase("output_dir");
  j.erase("workers");
  return j;
}

std::string canonical_json(const json& j) { return j.dump(); }

std::string digest(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_json(j)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Objective make_objective(const RunConfig& c) {
  Objective o;
  if (!c.tree_spec.empty())
    o = process_objective(make_space(load_tree_spec(c.tree_spec)), c.objective_cmd);
  else
    o = builtin_objective(c.objective);
  o.noise_std = c.noise_std;
  return o;
}

json kernel_params_to_json(const AddTreeKernel& k) {
  json j = json::object();
  const TreeSpec& spec = k.space().spec;
  for (int v = 0; v < spec.size(); ++v) {
    const BaseKernelParams& p = k.params(v);
    j[spec.vertex(v).id] = {{"kernel", to_string(p.kind)},
                            {"lengthscales", std::vector<double>(p.lengthscales.begin(), p.lengthscales.end())},
                            {"output_scale", p.output_scale}};
  }
  return j;
}

void apply_kernel_params(AddTreeKernel& k, const json& j) {
  if (!j.is_object()) throw ConfigError("kernel parameters must be an object keyed by vertex id");
  const TreeSpec& spec = k.space().spec;
  for (const auto& [id, rec] : j.items()) {
    if (!spec.contains(id)) throw ConfigError("kernel parameters name unknown vertex '" + id + "'");
    const int v = spec.index_of(id);
    BaseKernelParams p = k.params(v);
    Reader r(rec, id + ".");
    std::string kind = to_string(p.kind);
    std::vector<double> ls(p.lengthscales.begin(), p.lengthscales.end());
    r.get("kernel", kind);
    r.get("lengthscales", ls);
    r.get("output_scale", p.output_scale);
    r.finish();
    try {
      p.kind = kernel_kind_from_string(kind);
    } catch (const std::exception& e) {
      throw ConfigError(r.label("kernel") + ": " + e.what());
    }
    if (static_cast<int>(ls.size()) != spec.vertex(v).dim)
      throw ConfigError(r.label("lengthscales") + " needs " + std::to_string(spec.vertex(v).dim) + " entries");
    p.lengthscales = Eigen::Map<const Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
    try {
      k.set_params(v, std::move(p));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(id + ": " + e.what());
    }
  }
}

}  // namespace addtree::bench
