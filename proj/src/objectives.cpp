#include "addtree/objectives.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <sys/wait.h>

namespace addtree::bench {

TreeSpec jenatton_spec() {
  const Bound unit{0.0, 1.0}, sym{-1.0, 1.0};
  std::vector<VertexDecl> v = {
      {"x1", {}},    {"x2", {unit}}, {"x3", {unit}}, {"x4", {sym}},
      {"x5", {sym}}, {"x6", {sym}},  {"x7", {sym}},
  };
  std::vector<EdgeDecl> e = {
      {"x1", 0, "x2"}, {"x1", 1, "x3"}, {"x2", 0, "x4"},
      {"x2", 1, "x5"}, {"x3", 0, "x6"}, {"x3", 1, "x7"},
  };
  return TreeSpec::build(v, e);
}

Objective jenatton_objective() {
  Objective o;
  o.name = "jenatton";
  o.space = make_space(jenatton_spec());
  const std::map<std::string, double> offset = {{"x4", 0.1}, {"x5", 0.2}, {"x6", 0.3}, {"x7", 0.4}};
  std::vector<double> c;
  for (int leaf : o.space->index.leaf_vertices) c.push_back(offset.at(o.space->spec.vertex(leaf).id));
  // path values are (r, x): r8 or r9 on the middle vertex, then the leaf's x
  o.eval = [c](int leaf, const Eigen::VectorXd& x) {
    return x[1] * x[1] + c.at(static_cast<std::size_t>(leaf)) + x[0];
  };
  o.known_optimum = 0.1;
  return o;
}

TreeSpec fig1_spec() {
  const Bound sym{-1.0, 1.0};
  return TreeSpec::build({{"r", {sym, sym}}, {"p1", {sym, sym}}, {"p2", {sym, sym, sym}}},
                         {{"r", 0, "p1"}, {"r", 1, "p2"}});
}

Objective random_tree_objective(int depth, int fanout, int dims, std::uint64_t seed) {
  if (depth < 1) throw std::invalid_argument("random tree depth must be >= 1");
  if (fanout < 1 || dims < 0) throw std::invalid_argument("random tree needs fanout >= 1 and dims >= 0");
  std::vector<VertexDecl> decls;
  std::vector<EdgeDecl> edges;
  std::vector<std::string> level = {"v0"};
  decls.push_back({"v0", std::vector<Bound>(static_cast<std::size_t>(dims), Bound{-1.0, 1.0})});
  for (int l = 1; l < depth; ++l) {
    std::vector<std::string> next;
    for (const auto& p : level)
      for (int k = 0; k < fanout; ++k) {
        std::string id = "v" + std::to_string(decls.size());
        decls.push_back({id, std::vector<Bound>(static_cast<std::size_t>(dims), Bound{-1.0, 1.0})});
        edges.push_back({p, k, id});
        next.push_back(id);
      }
    level = std::move(next);
  }

  Objective o;
  o.name = "random_tree";
  o.space = make_space(TreeSpec::build(decls, edges));
  const auto& spec = o.space->spec;

  struct Bowl {
    double a;
    Eigen::VectorXd c;
    double offset;
  };
  Rng rng(seed);
  std::vector<Bowl> bowls;
  for (int v = 0; v < spec.size(); ++v) {
    Bowl b{rng.uniform(0.5, 2.0), Eigen::VectorXd(dims), rng.uniform()};
    for (int j = 0; j < dims; ++j) b.c[j] = rng.uniform(-0.8, 0.8);
    bowls.push_back(std::move(b));
  }

  const auto& index = o.space->index;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& path : index.leaf_paths) {
    double s = 0.0;
    for (int v : path) s += bowls[static_cast<std::size_t>(v)].offset;
    best = std::min(best, s);
  }
  o.known_optimum = best;

  auto space = o.space;
  o.eval = [space, bowls](int leaf, const Eigen::VectorXd& x) {
    double f = 0.0;
    Eigen::Index k = 0;
    for (int v : space->index.leaf_paths.at(static_cast<std::size_t>(leaf))) {
      const auto& b = bowls[static_cast<std::size_t>(v)];
      f += b.a * (x.segment(k, b.c.size()) - b.c).squaredNorm() + b.offset;
      k += b.c.size();
    }
    return f;
  };
  return o;
}

Objective process_objective(SpacePtr space, std::string command, std::string name) {
  Objective o;
  o.name = std::move(name);
  o.space = std::move(space);
  o.eval = [command = std::move(command)](int leaf, const Eigen::VectorXd& x) {
    std::string cmd = command + " " + std::to_string(leaf);
    char buf[64];
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      std::snprintf(buf, sizeof buf, " %.17g", x[i]);
      cmd += buf;
    }
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw ObjectiveError("cannot start objective command: " + command);
    std::string out;
    while (std::fgets(buf, sizeof buf, pipe)) out += buf;
    const int status = pclose(pipe);
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0)
      throw ObjectiveError("objective command failed: " + cmd);
    std::istringstream lines(out);
    std::string line, last;
    while (std::getline(lines, line))
      if (line.find_first_not_of(" \t\r") != std::string::npos) last = line;
    try {
      std::size_t used = 0;
      const double y = std::stod(last, &used);
      if (last.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(last);
      return y;
    } catch (const std::exception&) {
      throw ObjectiveError("objective command printed no number: '" + last + "'");
    }
  };
  return o;
}

Objective builtin_objective(const std::string& name) {
  if (name == "jenatton") return jenatton_objective();
  throw std::invalid_argument("unknown builtin objective '" + name + "'");
}

namespace {

Eigen::VectorXd sample_path(const TreeSpace& space, int leaf, Rng& rng) {
  Eigen::VectorXd x(space.index.effective_dims[static_cast<std::size_t>(leaf)]);
  Eigen::Index k = 0;
  for (int v : space.index.leaf_paths[static_cast<std::size_t>(leaf)])
    for (const auto& b : space.spec.vertex(v).bounds) x[k++] = rng.uniform(b.lo, b.hi);
  return x;
}

}  // namespace

Sample uniform_sample(const TreeSpace& space, Rng& rng) {
  Sample s;
  s.leaf = rng.index(space.index.num_leaves());
  s.values = sample_path(space, s.leaf, rng);
  return s;
}

Sample branching_sample(const TreeSpace& space, Rng& rng) {
  int v = space.spec.root();
  while (!space.spec.vertex(v).is_leaf()) {
    const auto& ch = space.spec.vertex(v).children;
    v = ch[static_cast<std::size_t>(rng.index(static_cast<int>(ch.size())))];
  }
  const auto& lv = space.index.leaf_vertices;
  Sample s;
  s.leaf = static_cast<int>(std::find(lv.begin(), lv.end(), v) - lv.begin());
  s.values = sample_path(space, s.leaf, rng);
  return s;
}

}  // namespace addtree::bench
