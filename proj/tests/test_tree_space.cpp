#include "helpers.hpp"

#include "addtree/objectives.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace addtree;
using bench::fig1_spec;
using bench::jenatton_spec;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), x.data());
  return x;
}

std::vector<std::string> ids(const TreeSpec& s, const std::vector<int>& vs) {
  std::vector<std::string> out;
  for (int v : vs) out.push_back(s.vertex(v).id);
  return out;
}

bool is_sentinel(double v) { return v < 0.0; }

}  // namespace

TEST_CASE("two-leaf fixture parses with the expected dimensions") {
  const TreeSpec s = load_tree_spec(ADDTREE_DATA_DIR "/fig1.json");
  CHECK(s.size() == 3);
  CHECK(s.total_dim() == 7);
  CHECK(s.space_dim() == 8);
  const PathIndex idx = build_path_index(s);
  CHECK(idx.effective_dims == std::vector<int>{4, 5});
  CHECK(idx.width == 3 + 7);
  CHECK(s.vertex(s.index_of("p1")).tag == 0);
  CHECK(s.vertex(s.index_of("p2")).tag == 1);
  CHECK(s.vertex(0).tag == 0);
}

TEST_CASE("jenatton fixture matches the builtin tree") {
  const TreeSpec a = load_tree_spec(ADDTREE_DATA_DIR "/jenatton.json");
  const TreeSpec b = jenatton_spec();
  CHECK(tree_spec_to_json(a) == tree_spec_to_json(b));
  const PathIndex idx = build_path_index(a);
  CHECK(idx.num_leaves() == 4);
  CHECK(idx.effective_dims == std::vector<int>{2, 2, 2, 2});
}

TEST_CASE("single vertex tree") {
  const TreeSpec s = parse_tree_spec(R"({"vertices":[{"id":"a","bounds":[[0,1]]}]})");
  const PathIndex idx = build_path_index(s);
  REQUIRE(idx.num_leaves() == 1);
  CHECK(idx.leaf_vertices[0] == 0);
  CHECK(idx.effective_dims[0] == 1);
  const auto p = linearize(s, idx, 0, vec({0.5}));
  REQUIRE(p.slots.size() == 2);
  CHECK(p.slots[0] == 0.0);
  CHECK(p.slots[1] == 0.5);
}

TEST_CASE("perfect binary tree of depth 3") {
  std::vector<VertexDecl> v;
  std::vector<EdgeDecl> e;
  for (int i = 0; i < 7; ++i) v.push_back({"v" + std::to_string(i), {Bound{0, 1}}});
  for (int i = 0; i < 3; ++i) {
    e.push_back({"v" + std::to_string(i), 0, "v" + std::to_string(2 * i + 1)});
    e.push_back({"v" + std::to_string(i), 1, "v" + std::to_string(2 * i + 2)});
  }
  const TreeSpec s = TreeSpec::build(v, e);
  const PathIndex idx = build_path_index(s);
  CHECK(idx.num_leaves() == 4);
  for (int d : idx.effective_dims) CHECK(d == 3);
  CHECK(s.space_dim() == 3 * 4 - 2);
}

TEST_CASE("validation errors name the offender") {
  auto msg = [](const char* text) {
    try {
      parse_tree_spec(text);
    } catch (const SpecValidationError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(msg(R"({"vertices":[{"id":"r"},{"id":"a"},{"id":"b"}],
               "edges":[{"parent":"r","label":0,"child":"a"},{"parent":"r","label":0,"child":"b"}]})")
            .find("'r'") != std::string::npos);
  CHECK(msg(R"({"vertices":[{"id":"r"},{"id":"a"}],
               "edges":[{"parent":"r","label":1,"child":"a"}]})") != "no error");
  CHECK(msg(R"({"vertices":[{"id":"r","bounds":[[1,0]]}]})").find("'r'") != std::string::npos);
  CHECK(msg(R"({"vertices":[{"id":"r"},{"id":"a"},{"id":"b"}],
               "edges":[{"parent":"r","label":0,"child":"a"},{"parent":"a","label":0,"child":"b"},
                        {"parent":"b","label":0,"child":"a"}]})") != "no error");
  CHECK(msg(R"({"vertices":[{"id":"r","bounds":[[0,1]],"dim":2}]})").find("'r'") != std::string::npos);
  CHECK_THROWS_AS(parse_tree_spec("{not json"), SpecParseError);
  CHECK_THROWS_AS(parse_tree_spec(R"({"edges":[]})"), SpecParseError);
}

TEST_CASE("linearization of the two-leaf tree") {
  const TreeSpec s = fig1_spec();
  const PathIndex idx = build_path_index(s);
  const auto a = linearize(s, idx, 0, vec({0.1, 0.2, 0.3, 0.4}));
  REQUIRE(a.slots.size() == 10);
  CHECK(a.slots[0] == 0.0);
  CHECK(a.slots[1] == 0.1);
  CHECK(a.slots[2] == 0.2);
  CHECK(a.slots[3] == 0.0);
  CHECK(a.slots[4] == 0.3);
  CHECK(a.slots[5] == 0.4);
  CHECK(is_sentinel(a.slots[6]));

  const auto b = linearize(s, idx, 1, vec({0.5, 0.6, 0.7, 0.8, 0.9}));
  CHECK(b.slots[0] == 0.0);
  CHECK(b.slots[1] == 0.5);
  CHECK(b.slots[2] == 0.6);
  CHECK(is_sentinel(b.slots[3]));
  CHECK(b.slots[6] == 1.0);
  CHECK(b.slots[7] == 0.7);
  CHECK(b.slots[8] == 0.8);
  CHECK(b.slots[9] == 0.9);

  CHECK(*restrict_to(s, idx, a, "r") == vec({0.1, 0.2}));
  CHECK(!restrict_to(s, idx, a, "p2").has_value());
  CHECK_THROWS_AS(restrict_to(s, idx, a, "nope"), std::out_of_range);
  CHECK(path_values(s, idx, b) == vec({0.5, 0.6, 0.7, 0.8, 0.9}));
}

TEST_CASE("linearize rejects bad input") {
  const TreeSpec s = fig1_spec();
  const PathIndex idx = build_path_index(s);
  CHECK_THROWS_AS(linearize(s, idx, 0, vec({0.1, 0.2, 0.3})), std::invalid_argument);
  try {
    linearize(s, idx, 0, vec({0.1, 0.2, 0.3, 1.5}));
    FAIL("expected out_of_range");
  } catch (const std::out_of_range& e) {
    CHECK(std::string(e.what()).find("p1") != std::string::npos);
  }
  CHECK_THROWS(linearize(s, idx, 2, vec({0.1})));
}

TEST_CASE("zero-dim vertex on the path restricts to an empty vector") {
  const TreeSpec s = parse_tree_spec(R"({"vertices":[{"id":"r"},{"id":"a","bounds":[[0,1]]},{"id":"b","bounds":[[0,1]]}],
      "edges":[{"parent":"r","label":0,"child":"a"},{"parent":"r","label":1,"child":"b"}]})");
  const PathIndex idx = build_path_index(s);
  const auto p = linearize(s, idx, 0, vec({0.25}));
  const auto r = restrict_to(s, idx, p, "r");
  REQUIRE(r.has_value());
  CHECK(r->size() == 0);
  CHECK(is_active(idx, p, 0));
  CHECK(!restrict_to(s, idx, p, "b").has_value());
  CHECK(p.slots[idx.vertex_offsets[0].tag] == 0.0);
}

TEST_CASE("lca paths") {
  const TreeSpec f = fig1_spec();
  const PathIndex fi = build_path_index(f);
  CHECK(ids(f, lca_path(fi, 0, 1)) == std::vector<std::string>{"r"});
  CHECK(ids(f, lca_path(fi, 0, 0)) == std::vector<std::string>{"r", "p1"});

  const TreeSpec j = jenatton_spec();
  const PathIndex ji = build_path_index(j);
  CHECK(ids(j, lca_path(ji, 0, 1)) == std::vector<std::string>{"x1", "x2"});
  CHECK(ids(j, lca_path(ji, 2, 3)) == std::vector<std::string>{"x1", "x3"});
  CHECK(ids(j, lca_path(ji, 1, 2)) == std::vector<std::string>{"x1"});
  // depth-first leaf order
  CHECK(ids(j, ji.leaf_vertices) == std::vector<std::string>{"x4", "x5", "x6", "x7"});
}

TEST_CASE("random trees: path and lca invariants") {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const TreeSpec s = testing::random_spec(rng, 4, 3, 2);
    const PathIndex idx = build_path_index(s);
    int width = 0;
    for (const auto& v : s.vertices()) width += 1 + v.dim;
    CHECK(idx.width == width);
    const bool single_path = idx.num_leaves() == 1;
    for (int i = 0; i < idx.num_leaves(); ++i) {
      const auto& p = idx.leaf_paths[static_cast<std::size_t>(i)];
      CHECK(p.front() == 0);
      CHECK(p.back() == idx.leaf_vertices[static_cast<std::size_t>(i)]);
      int d = 0;
      for (int v : p) d += s.vertex(v).dim;
      CHECK(idx.effective_dims[static_cast<std::size_t>(i)] == d);
      CHECK(d <= s.total_dim());
      if (single_path) CHECK(d == s.total_dim());
      for (int j = 0; j < idx.num_leaves(); ++j) {
        const auto a = lca_path(idx, i, j), b = lca_path(idx, j, i);
        CHECK(a == b);
        const auto& q = idx.leaf_paths[static_cast<std::size_t>(j)];
        CHECK(std::equal(a.begin(), a.end(), p.begin()));
        CHECK(std::equal(a.begin(), a.end(), q.begin()));
        CHECK(idx.lca(i, j) == a.back());
      }
    }
    // effective dim < total whenever some vertex with dims is off the path
    for (int i = 0; i < idx.num_leaves(); ++i) {
      int off = 0;
      for (int v = 0; v < s.size(); ++v)
        if (!idx.contains(i, v)) off += s.vertex(v).dim;
      CHECK(idx.effective_dims[static_cast<std::size_t>(i)] + off == s.total_dim());
    }
  }
}

TEST_CASE("round trip and sentinel uniqueness over 1000 linearizations") {
  Rng rng(5);
  const auto space = make_space(testing::random_spec(rng, 3, 3, 2));
  const auto space2 = make_space(jenatton_spec());
  std::set<double> sentinels;
  int sentinel_slots = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& sp = (i % 2) ? *space : *space2;
    const auto s = bench::uniform_sample(sp, rng);
    const auto p = linearize(sp, s.leaf, s.values);
    Eigen::VectorXd cat(0);
    for (int v : sp.index.leaf_paths[static_cast<std::size_t>(s.leaf)]) {
      const auto r = restrict_to(sp.index, p, v);
      REQUIRE(r.has_value());
      Eigen::VectorXd next(cat.size() + r->size());
      next << cat, *r;
      cat = next;
    }
    CHECK(cat == s.values);
    std::set<double> own;
    for (int v = 0; v < sp.spec.size(); ++v) {
      const double tag = p.slots[sp.index.vertex_offsets[static_cast<std::size_t>(v)].tag];
      if (sp.index.contains(s.leaf, v)) {
        CHECK(tag == sp.spec.vertex(v).tag);
      } else {
        CHECK(tag < 0.0);
        own.insert(tag);
        ++sentinel_slots;
      }
    }
    CHECK(own.size() <= 1);
    for (double t : own) CHECK(sentinels.insert(t).second);
  }
  CHECK(sentinel_slots > 0);
}

TEST_CASE("spec json round trip") {
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const TreeSpec s = testing::random_spec(rng);
    const std::string text = tree_spec_to_json(s);
    CHECK(tree_spec_to_json(parse_tree_spec(text)) == text);
  }
}
