#pragma once

#include "addtree/gp.hpp"
#include "addtree/kernels.hpp"
#include "addtree/objectives.hpp"
#include "addtree/rng.hpp"
#include "addtree/tree_space.hpp"

#include <Eigen/Eigenvalues>

#include <string>
#include <vector>

namespace testing {

using namespace addtree;

// Random tree: up to `max_depth` levels, 1..max_fanout children, 0..max_dim
// dims per vertex with random bounds.
inline TreeSpec random_spec(Rng& rng, int max_depth = 3, int max_fanout = 3, int max_dim = 2,
                            bool root_dim_positive = false) {
  std::vector<VertexDecl> decls;
  std::vector<EdgeDecl> edges;
  auto make_vertex = [&](bool need_dim) {
    const int dim = need_dim ? 1 + rng.index(max_dim) : rng.index(max_dim + 1);
    std::vector<Bound> b;
    for (int j = 0; j < dim; ++j) {
      const double lo = rng.uniform(-2.0, 1.0);
      b.push_back({lo, lo + rng.uniform(0.5, 3.0)});
    }
    const std::string id = "n" + std::to_string(decls.size());
    decls.push_back({id, b});
    return id;
  };
  std::vector<std::string> level = {make_vertex(root_dim_positive)};
  const int depth = 1 + rng.index(max_depth);
  for (int l = 1; l < depth; ++l) {
    std::vector<std::string> next;
    for (const auto& p : level) {
      if (l > 1 && rng.bernoulli(0.3)) continue;  // ragged trees
      const int fan = 1 + rng.index(max_fanout);
      for (int k = 0; k < fan; ++k) {
        const std::string c = make_vertex(false);
        edges.push_back({p, k, c});
        next.push_back(c);
      }
    }
    if (next.empty()) break;
    level = std::move(next);
  }
  return TreeSpec::build(decls, edges);
}

inline std::vector<BaseKernelParams> random_params(const TreeSpec& spec, Rng& rng) {
  std::vector<BaseKernelParams> out;
  const KernelKind kinds[] = {KernelKind::SquaredExponential, KernelKind::Matern32, KernelKind::Matern52};
  for (const auto& v : spec.vertices()) {
    BaseKernelParams p;
    p.kind = kinds[rng.index(3)];
    p.lengthscales.resize(v.dim);
    for (int j = 0; j < v.dim; ++j) p.lengthscales[j] = std::exp(rng.uniform(std::log(0.1), std::log(5.0)));
    p.output_scale = std::exp(rng.uniform(std::log(0.2), std::log(3.0)));
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<LinearizedPoint> random_points(const TreeSpace& space, Rng& rng, int n) {
  std::vector<LinearizedPoint> pts;
  for (int i = 0; i < n; ++i) {
    const auto s = bench::uniform_sample(space, rng);
    pts.push_back(linearize(space, s.leaf, s.values));
  }
  return pts;
}

inline LinearizedPoint random_point_on(const TreeSpace& space, Rng& rng, int leaf) {
  const auto& path = space.index.leaf_paths[static_cast<std::size_t>(leaf)];
  std::vector<double> v;
  for (int u : path)
    for (const auto& b : space.spec.vertex(u).bounds) v.push_back(rng.uniform(b.lo, b.hi));
  return linearize(space, leaf, Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

inline double min_max_eig_ratio(const Eigen::MatrixXd& K) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return ev.minCoeff() / std::max(ev.maxCoeff(), 1e-300);
}

inline Dataset random_dataset(const TreeSpace& space, Rng& rng, int n, double noise) {
  Dataset d;
  d.points = random_points(space, rng, n);
  d.targets.resize(n);
  for (int i = 0; i < n; ++i) d.targets[i] = rng.normal();
  d.noise = Eigen::VectorXd::Constant(n, noise);
  return d;
}

}  // namespace testing
