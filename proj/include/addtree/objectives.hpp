#pragma once

#include "addtree/rng.hpp"
#include "addtree/tree_space.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

namespace addtree::bench {

class ObjectiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Black-box function on a tree space. `eval` receives the leaf index and the
// path-ordered continuous values of that leaf and is deterministic; additive
// observation noise, when declared, is drawn by the caller.
struct Objective {
  std::string name;
  SpacePtr space;
  std::function<double(int leaf, const Eigen::VectorXd& values)> eval;
  std::optional<double> known_optimum;  // minimum value
  double noise_std = 0.0;
};

TreeSpec jenatton_spec();
Objective jenatton_objective();

// Root r (2 dims) with leaves p1 (2 dims) and p2 (3 dims), all on [-1, 1].
TreeSpec fig1_spec();

// Complete tree of `depth` levels, `fanout` children per internal vertex and
// `dims` continuous dims per vertex on [-1, 1]. Each vertex adds a bowl
// a_v |x - c_v|^2 + o_v, so the optimum of a leaf is the sum of its offsets.
Objective random_tree_objective(int depth, int fanout, int dims, std::uint64_t seed);

// Runs `command leaf v1 v2 ...` per evaluation and parses the last line of
// its standard output as the value.
Objective process_objective(SpacePtr space, std::string command, std::string name = "external");

// "jenatton" is the only builtin.
Objective builtin_objective(const std::string& name);

// Uniform leaf and uniform values inside the leaf's boxes.
struct Sample {
  int leaf = 0;
  Eigen::VectorXd values;
};
Sample uniform_sample(const TreeSpace& space, Rng& rng);
// Branch chosen uniformly at every split (Bernoulli(0.5) on binary trees).
Sample branching_sample(const TreeSpace& space, Rng& rng);

}  // namespace addtree::bench
