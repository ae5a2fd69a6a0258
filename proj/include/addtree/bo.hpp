#pragma once

#include "addtree/acquisition.hpp"
#include "addtree/kernels.hpp"
#include "addtree/objectives.hpp"
#include "addtree/trace.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace addtree::bench {

enum class Algorithm { AddTree, Independent, Random };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

struct BoConfig {
  int n_init = -1;  // < 0: 4 + total continuous dims
  KernelKind kernel = KernelKind::Matern52;
  // Per-vertex output scales of rarely visited vertices collapse under the
  // evidence fit, and constant offsets along a path are not identifiable;
  // both inflate or deflate the summed component UCBs. A shared scale and
  // routing-only dim-0 vertices keep the path sums comparable.
  ZeroDimPolicy zero_dim = ZeroDimPolicy::Ignore;
  bool tie_output_scales = true;

  // schedule
  double theta0 = 1.0;
  double B0 = 2.5;
  double delta = 0.1;
  // Unset: refitted every iteration by matching the regret estimate to
  // t^reference_exponent.
  std::optional<double> gamma_g;
  std::optional<double> gamma_b;
  double reference_exponent = 0.9;
  double b_share = 0.5;

  // hyperparameter fitting
  int fit_restarts = 2;
  int fit_evaluations = 60;
  double noise_floor = 1e-6;

  ProposeOptions propose{.starts = 5, .candidates = 64, .max_evaluations = 300};
};

using RecordSink = std::function<void(const IterationRecord&)>;

// Minimizes the objective. Initial points come from Rng(seed) and are shared
// by every algorithm; the model and the observation noise draw from their
// own streams. If an evaluation throws, records already produced have been
// passed to `sink` and the exception propagates.
RunTrace run_bo(const Objective& objective, Algorithm algorithm, int iterations, std::uint64_t seed,
                const BoConfig& config = {}, const RecordSink& sink = {});

// Chain-shaped space holding one leaf's path of `space`, vertex ids kept.
SpacePtr path_space(const TreeSpace& space, int leaf);

int initial_points(const BoConfig& config, const TreeSpace& space);

}  // namespace addtree::bench
