#pragma once

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace addtree {

class SpecParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SpecValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Bound {
  double lo = 0.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

// Declarations as they appear in a spec document, before validation.
struct VertexDecl {
  std::string id;
  std::vector<Bound> bounds;
};

struct EdgeDecl {
  std::string parent;
  int label = 0;
  std::string child;
};

struct VertexSpec {
  std::string id;
  int dim = 0;
  std::vector<Bound> bounds;
  // Rank among siblings under the parent's branch-label order; 0 for the root.
  int tag = 0;
  int parent = -1;
  int branch_label = -1;
  // Indexed by branch label.
  std::vector<int> children;
  int depth = 0;

  bool is_leaf() const { return children.empty(); }
};

// A validated tree-structured space. Vertices are stored in breadth-first
// order (children visited in ascending branch label), so a vertex index is
// also its BFS rank and the root is index 0.
class TreeSpec {
 public:
  static TreeSpec build(const std::vector<VertexDecl>& vertices,
                        const std::vector<EdgeDecl>& edges);

  const std::vector<VertexSpec>& vertices() const { return vertices_; }
  const VertexSpec& vertex(int v) const { return vertices_.at(static_cast<std::size_t>(v)); }
  int size() const { return static_cast<int>(vertices_.size()); }
  int root() const { return 0; }

  // Throws std::out_of_range for unknown ids.
  int index_of(std::string_view id) const;
  bool contains(std::string_view id) const;

  // Continuous dimensions summed over all vertices.
  int total_dim() const;
  // One categorical variable per internal vertex plus total_dim().
  int space_dim() const;

 private:
  std::vector<VertexSpec> vertices_;
};

struct SlotRange {
  int tag = 0;    // position of the tag slot
  int begin = 0;  // first value slot
  int end = 0;    // one past the last value slot
};

struct PathIndex {
  // Leaves are numbered in depth-first order with ascending branch labels, so
  // leaf order matches the lexicographic order of the categorical choices.
  std::vector<int> leaf_vertices;
  std::vector<std::vector<int>> leaf_paths;
  std::vector<SlotRange> vertex_offsets;
  // Row-major |P| x |P| table of LCA vertex indices.
  std::vector<int> lca_table;
  std::vector<int> effective_dims;
  // For each leaf, whether each vertex lies on its path.
  std::vector<std::vector<bool>> on_path;
  int width = 0;

  int num_leaves() const { return static_cast<int>(leaf_vertices.size()); }
  int lca(int leaf_i, int leaf_j) const {
    return lca_table[static_cast<std::size_t>(leaf_i * num_leaves() + leaf_j)];
  }
  bool contains(int leaf, int vertex) const {
    return on_path[static_cast<std::size_t>(leaf)][static_cast<std::size_t>(vertex)];
  }
  // Offset of a vertex's values inside a path-ordered value vector.
  int path_offset(const TreeSpec& spec, int leaf, int vertex) const;
};

PathIndex build_path_index(const TreeSpec& spec);

// Spec and index bundled together; shared immutably by kernels, models and
// objectives.
struct TreeSpace {
  TreeSpec spec;
  PathIndex index;

  explicit TreeSpace(TreeSpec s) : spec(std::move(s)), index(build_path_index(spec)) {}
};

using SpacePtr = std::shared_ptr<const TreeSpace>;
SpacePtr make_space(TreeSpec spec);

// Fixed-width tag+value encoding of one configuration. Tags of vertices on
// the active path hold the sibling rank (>= 0); tags of off-path vertices hold
// a negative sentinel that is unique to this point.
struct LinearizedPoint {
  Eigen::VectorXd slots;
  int leaf = 0;
};

LinearizedPoint linearize(const TreeSpec& spec, const PathIndex& index, int leaf,
                          const Eigen::Ref<const Eigen::VectorXd>& values);
inline LinearizedPoint linearize(const TreeSpace& space, int leaf,
                                 const Eigen::Ref<const Eigen::VectorXd>& values) {
  return linearize(space.spec, space.index, leaf, values);
}

// Inverse of linearize: the path-ordered value vector of the active leaf.
Eigen::VectorXd path_values(const TreeSpec& spec, const PathIndex& index,
                            const LinearizedPoint& point);

bool is_active(const PathIndex& index, const LinearizedPoint& point, int vertex);

// Values of `vertex` when it lies on the point's active path, std::nullopt
// otherwise. A zero-dimensional active vertex yields an empty vector.
std::optional<Eigen::VectorXd> restrict_to(const TreeSpec& spec, const PathIndex& index,
                                           const LinearizedPoint& point, std::string_view vertex);
std::optional<Eigen::VectorXd> restrict_to(const PathIndex& index, const LinearizedPoint& point,
                                           int vertex);

// Vertices from the root to the LCA of two leaves, inclusive.
std::vector<int> lca_path(const PathIndex& index, int leaf_i, int leaf_j);

// Tree-spec documents are JSON:
//   {"vertices": [{"id": "r", "bounds": [[-1, 1], [-1, 1]]}, ...],
//    "edges":    [{"parent": "r", "label": 0, "child": "p1"}, ...]}
// A vertex may also give "dim" explicitly; it must then match the bounds.
TreeSpec parse_tree_spec(std::string_view text);
TreeSpec load_tree_spec(const std::string& path);
std::string tree_spec_to_json(const TreeSpec& spec);

}  // namespace addtree
