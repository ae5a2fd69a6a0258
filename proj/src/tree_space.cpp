#include "addtree/tree_space.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

namespace addtree {

namespace {

// Off-path tags are drawn from a process-wide counter mapped onto the
// negative reals; exactly representable up to 2^53 draws.
std::atomic<std::int64_t> sentinel_counter{0};

double next_sentinel() {
  return -1.0 - static_cast<double>(sentinel_counter.fetch_add(1, std::memory_order_relaxed));
}

}  // namespace

TreeSpec TreeSpec::build(const std::vector<VertexDecl>& vertices,
                         const std::vector<EdgeDecl>& edges) {
  if (vertices.empty()) throw SpecValidationError("tree spec has no vertices");

  std::map<std::string, int> by_id;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const auto& v = vertices[i];
    if (v.id.empty()) throw SpecValidationError("vertex " + std::to_string(i) + " has an empty id");
    if (!by_id.emplace(v.id, static_cast<int>(i)).second)
      throw SpecValidationError("duplicate vertex id '" + v.id + "'");
    for (std::size_t k = 0; k < v.bounds.size(); ++k) {
      const auto& b = v.bounds[k];
      if (!std::isfinite(b.lo) || !std::isfinite(b.hi))
        throw SpecValidationError("vertex '" + v.id + "' dimension " + std::to_string(k) +
                                  " has a non-finite bound");
      if (!(b.lo < b.hi))
        throw SpecValidationError("vertex '" + v.id + "' dimension " + std::to_string(k) +
                                  " has lower bound >= upper bound");
    }
  }

  const std::size_t n = vertices.size();
  std::vector<int> parent(n, -1);
  std::vector<int> label(n, -1);
  std::vector<std::map<int, int>> children(n);
  for (const auto& e : edges) {
    auto p = by_id.find(e.parent);
    if (p == by_id.end()) throw SpecValidationError("edge references unknown parent '" + e.parent + "'");
    auto c = by_id.find(e.child);
    if (c == by_id.end()) throw SpecValidationError("edge references unknown child '" + e.child + "'");
    if (e.label < 0)
      throw SpecValidationError("vertex '" + e.parent + "' has negative branch label " +
                                std::to_string(e.label));
    if (p->second == c->second) throw SpecValidationError("vertex '" + e.child + "' is its own parent (cycle)");
    const auto ci = static_cast<std::size_t>(c->second);
    if (parent[ci] != -1)
      throw SpecValidationError("vertex '" + e.child + "' has more than one parent");
    auto& out = children[static_cast<std::size_t>(p->second)];
    if (!out.emplace(e.label, c->second).second)
      throw SpecValidationError("vertex '" + e.parent + "' has duplicate branch label " +
                                std::to_string(e.label));
    parent[ci] = p->second;
    label[ci] = e.label;
  }

  for (std::size_t i = 0; i < n; ++i) {
    int expect = 0;
    for (const auto& [l, c] : children[i]) {
      if (l != expect)
        throw SpecValidationError("vertex '" + vertices[i].id +
                                  "' branch labels are not contiguous from 0 (missing " +
                                  std::to_string(expect) + ")");
      ++expect;
    }
  }

  int root = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (parent[i] != -1) continue;
    if (root != -1)
      throw SpecValidationError("tree has more than one root ('" + vertices[static_cast<std::size_t>(root)].id +
                                "' and '" + vertices[i].id + "')");
    root = static_cast<int>(i);
  }
  if (root == -1) throw SpecValidationError("tree has no root (every vertex has a parent: cycle)");

  // Breadth-first relabelling; anything not reached sits on a cycle.
  std::vector<int> new_index(n, -1);
  std::vector<int> order;
  order.reserve(n);
  std::deque<int> queue{root};
  new_index[static_cast<std::size_t>(root)] = 0;
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    order.push_back(v);
    for (const auto& [l, c] : children[static_cast<std::size_t>(v)]) {
      new_index[static_cast<std::size_t>(c)] = static_cast<int>(order.size() + queue.size());
      queue.push_back(c);
    }
  }
  if (order.size() != n) {
    for (std::size_t i = 0; i < n; ++i)
      if (new_index[i] == -1)
        throw SpecValidationError("vertex '" + vertices[i].id + "' is not reachable from the root (cycle)");
  }

  TreeSpec spec;
  spec.vertices_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto old = static_cast<std::size_t>(order[k]);
    VertexSpec& vs = spec.vertices_[k];
    vs.id = vertices[old].id;
    vs.bounds = vertices[old].bounds;
    vs.dim = static_cast<int>(vs.bounds.size());
    vs.parent = parent[old] == -1 ? -1 : new_index[static_cast<std::size_t>(parent[old])];
    vs.branch_label = label[old];
    // Labels are contiguous from zero, so the sibling rank equals the label.
    vs.tag = parent[old] == -1 ? 0 : label[old];
    for (const auto& [l, c] : children[old]) vs.children.push_back(new_index[static_cast<std::size_t>(c)]);
    vs.depth = vs.parent == -1 ? 0 : spec.vertices_[static_cast<std::size_t>(vs.parent)].depth + 1;
  }
  return spec;
}

int TreeSpec::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < vertices_.size(); ++i)
    if (vertices_[i].id == id) return static_cast<int>(i);
  throw std::out_of_range("unknown vertex id '" + std::string(id) + "'");
}

bool TreeSpec::contains(std::string_view id) const {
  return std::any_of(vertices_.begin(), vertices_.end(), [&](const auto& v) { return v.id == id; });
}

int TreeSpec::total_dim() const {
  int d = 0;
  for (const auto& v : vertices_) d += v.dim;
  return d;
}

int TreeSpec::space_dim() const {
  int d = total_dim();
  for (const auto& v : vertices_) d += v.is_leaf() ? 0 : 1;
  return d;
}

int PathIndex::path_offset(const TreeSpec& spec, int leaf, int vertex) const {
  int offset = 0;
  for (int u : leaf_paths[static_cast<std::size_t>(leaf)]) {
    if (u == vertex) return offset;
    offset += spec.vertex(u).dim;
  }
  throw std::out_of_range("vertex '" + spec.vertex(vertex).id + "' is not on leaf path " +
                          std::to_string(leaf));
}

PathIndex build_path_index(const TreeSpec& spec) {
  PathIndex index;
  const int n = spec.size();

  index.vertex_offsets.resize(static_cast<std::size_t>(n));
  int cursor = 0;
  for (int v = 0; v < n; ++v) {
    auto& off = index.vertex_offsets[static_cast<std::size_t>(v)];
    off.tag = cursor;
    off.begin = cursor + 1;
    off.end = off.begin + spec.vertex(v).dim;
    cursor = off.end;
  }
  index.width = cursor;

  // Depth-first leaf enumeration.
  std::vector<int> stack{spec.root()};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    const auto& vs = spec.vertex(v);
    if (vs.is_leaf()) {
      std::vector<int> path;
      for (int u = v; u != -1; u = spec.vertex(u).parent) path.push_back(u);
      std::reverse(path.begin(), path.end());
      index.leaf_vertices.push_back(v);
      index.leaf_paths.push_back(std::move(path));
      continue;
    }
    for (auto it = vs.children.rbegin(); it != vs.children.rend(); ++it) stack.push_back(*it);
  }

  const int leaves = index.num_leaves();
  index.on_path.assign(static_cast<std::size_t>(leaves), std::vector<bool>(static_cast<std::size_t>(n), false));
  for (int i = 0; i < leaves; ++i) {
    int dim = 0;
    for (int u : index.leaf_paths[static_cast<std::size_t>(i)]) {
      index.on_path[static_cast<std::size_t>(i)][static_cast<std::size_t>(u)] = true;
      dim += spec.vertex(u).dim;
    }
    index.effective_dims.push_back(dim);
  }

  index.lca_table.assign(static_cast<std::size_t>(leaves * leaves), 0);
  for (int i = 0; i < leaves; ++i) {
    for (int j = 0; j < leaves; ++j) {
      int a = index.leaf_vertices[static_cast<std::size_t>(i)];
      int b = index.leaf_vertices[static_cast<std::size_t>(j)];
      while (spec.vertex(a).depth > spec.vertex(b).depth) a = spec.vertex(a).parent;
      while (spec.vertex(b).depth > spec.vertex(a).depth) b = spec.vertex(b).parent;
      while (a != b) {
        a = spec.vertex(a).parent;
        b = spec.vertex(b).parent;
      }
      index.lca_table[static_cast<std::size_t>(i * leaves + j)] = a;
    }
  }
  return index;
}

SpacePtr make_space(TreeSpec spec) { return std::make_shared<const TreeSpace>(std::move(spec)); }

LinearizedPoint linearize(const TreeSpec& spec, const PathIndex& index, int leaf,
                          const Eigen::Ref<const Eigen::VectorXd>& values) {
  if (leaf < 0 || leaf >= index.num_leaves())
    throw std::out_of_range("leaf index " + std::to_string(leaf) + " out of range");
  const auto leaf_u = static_cast<std::size_t>(leaf);
  if (values.size() != index.effective_dims[leaf_u])
    throw std::invalid_argument("leaf " + std::to_string(leaf) + " expects " +
                                std::to_string(index.effective_dims[leaf_u]) + " values, got " +
                                std::to_string(values.size()));

  LinearizedPoint point;
  point.leaf = leaf;
  point.slots = Eigen::VectorXd::Zero(index.width);
  const double sentinel = next_sentinel();
  for (int v = 0; v < spec.size(); ++v)
    point.slots[index.vertex_offsets[static_cast<std::size_t>(v)].tag] = sentinel;

  Eigen::Index k = 0;
  for (int v : index.leaf_paths[leaf_u]) {
    const auto& vs = spec.vertex(v);
    const auto& off = index.vertex_offsets[static_cast<std::size_t>(v)];
    point.slots[off.tag] = vs.tag;
    for (int j = 0; j < vs.dim; ++j, ++k) {
      const double x = values[k];
      if (!vs.bounds[static_cast<std::size_t>(j)].contains(x)) {
        std::ostringstream msg;
        msg << "value " << x << " for vertex '" << vs.id << "' dimension " << j << " is outside ["
            << vs.bounds[static_cast<std::size_t>(j)].lo << ", " << vs.bounds[static_cast<std::size_t>(j)].hi
            << "]";
        throw std::out_of_range(msg.str());
      }
      point.slots[off.begin + j] = x;
    }
  }
  return point;
}

Eigen::VectorXd path_values(const TreeSpec& spec, const PathIndex& index, const LinearizedPoint& point) {
  const auto leaf_u = static_cast<std::size_t>(point.leaf);
  Eigen::VectorXd values(index.effective_dims[leaf_u]);
  Eigen::Index k = 0;
  for (int v : index.leaf_paths[leaf_u]) {
    const auto& off = index.vertex_offsets[static_cast<std::size_t>(v)];
    const int dim = spec.vertex(v).dim;
    values.segment(k, dim) = point.slots.segment(off.begin, dim);
    k += dim;
  }
  return values;
}

bool is_active(const PathIndex& index, const LinearizedPoint& point, int vertex) {
  return point.slots[index.vertex_offsets[static_cast<std::size_t>(vertex)].tag] >= 0.0;
}

std::optional<Eigen::VectorXd> restrict_to(const PathIndex& index, const LinearizedPoint& point,
                                           int vertex) {
  if (vertex < 0 || vertex >= static_cast<int>(index.vertex_offsets.size()))
    throw std::out_of_range("unknown vertex index " + std::to_string(vertex));
  if (!is_active(index, point, vertex)) return std::nullopt;
  const auto& off = index.vertex_offsets[static_cast<std::size_t>(vertex)];
  return Eigen::VectorXd(point.slots.segment(off.begin, off.end - off.begin));
}

std::optional<Eigen::VectorXd> restrict_to(const TreeSpec& spec, const PathIndex& index,
                                           const LinearizedPoint& point, std::string_view vertex) {
  return restrict_to(index, point, spec.index_of(vertex));
}

std::vector<int> lca_path(const PathIndex& index, int leaf_i, int leaf_j) {
  const int a = index.lca(leaf_i, leaf_j);
  const auto& path = index.leaf_paths[static_cast<std::size_t>(leaf_i)];
  auto end = std::find(path.begin(), path.end(), a);
  return {path.begin(), end + 1};
}

TreeSpec parse_tree_spec(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw SpecParseError(std::string("malformed tree spec: ") + e.what());
  }
  if (!doc.is_object()) throw SpecParseError("tree spec must be a JSON object");
  if (!doc.contains("vertices") || !doc["vertices"].is_array())
    throw SpecParseError("tree spec needs a \"vertices\" array");

  std::vector<VertexDecl> vertices;
  for (const auto& jv : doc["vertices"]) {
    if (!jv.is_object() || !jv.contains("id") || !jv["id"].is_string())
      throw SpecParseError("every vertex needs a string \"id\"");
    VertexDecl decl;
    decl.id = jv["id"].get<std::string>();
    if (jv.contains("bounds")) {
      if (!jv["bounds"].is_array()) throw SpecParseError("vertex '" + decl.id + "': \"bounds\" must be an array");
      for (const auto& jb : jv["bounds"]) {
        if (!jb.is_array() || jb.size() != 2 || !jb[0].is_number() || !jb[1].is_number())
          throw SpecParseError("vertex '" + decl.id + "': each bound must be a [lo, hi] number pair");
        decl.bounds.push_back({jb[0].get<double>(), jb[1].get<double>()});
      }
    }
    if (jv.contains("dim")) {
      if (!jv["dim"].is_number_integer()) throw SpecParseError("vertex '" + decl.id + "': \"dim\" must be an integer");
      const auto dim = jv["dim"].get<long>();
      if (dim < 0) throw SpecValidationError("vertex '" + decl.id + "' has negative dimension");
      if (dim != static_cast<long>(decl.bounds.size()))
        throw SpecValidationError("vertex '" + decl.id + "' declares dim " + std::to_string(dim) + " but has " +
                                  std::to_string(decl.bounds.size()) + " bounds");
    }
    vertices.push_back(std::move(decl));
  }

  std::vector<EdgeDecl> edges;
  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) throw SpecParseError("\"edges\" must be an array");
    for (const auto& je : doc["edges"]) {
      if (!je.is_object() || !je.contains("parent") || !je.contains("label") || !je.contains("child") ||
          !je["parent"].is_string() || !je["child"].is_string() || !je["label"].is_number_integer())
        throw SpecParseError("every edge needs string \"parent\"/\"child\" and integer \"label\"");
      edges.push_back({je["parent"].get<std::string>(), je["label"].get<int>(), je["child"].get<std::string>()});
    }
  }
  return TreeSpec::build(vertices, edges);
}

TreeSpec load_tree_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tree spec '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_tree_spec(buf.str());
}

std::string tree_spec_to_json(const TreeSpec& spec) {
  using nlohmann::json;
  json doc;
  doc["vertices"] = json::array();
  doc["edges"] = json::array();
  for (const auto& v : spec.vertices()) {
    json bounds = json::array();
    for (const auto& b : v.bounds) bounds.push_back({b.lo, b.hi});
    doc["vertices"].push_back({{"id", v.id}, {"dim", v.dim}, {"bounds", bounds}});
    if (v.parent != -1)
      doc["edges"].push_back({{"parent", spec.vertex(v.parent).id}, {"label", v.branch_label}, {"child", v.id}});
  }
  return doc.dump(2);
}

}  // namespace addtree
