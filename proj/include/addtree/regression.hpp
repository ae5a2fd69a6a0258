#pragma once

#include "addtree/kernels.hpp"
#include "addtree/objectives.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace addtree::bench {

struct RegressionOptions {
  std::vector<int> train_sizes = {4, 8, 12, 16, 20, 24, 28, 32, 36, 40, 44};
  int test_size = 50;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  KernelKind kernel = KernelKind::SquaredExponential;
  // same reasoning as BoConfig; untied scales lose roughly half a decade at n=20
  ZeroDimPolicy zero_dim = ZeroDimPolicy::Ignore;
  bool tie_output_scales = true;
  int restarts = 5;
  double noise_floor = 1e-6;
};

struct RegressionRow {
  std::string method;  // "addtree" or "independent"
  int n_train = 0;
  double median_log10_mse = 0.0;
  std::vector<double> mse;  // per seed, in seed order
};

// For every seed, draws nested training sets (branch uniform at each split,
// values uniform) and a separate test set, fits both models on the same
// data and scores the posterior mean on the test set.
std::vector<RegressionRow> run_regression_study(const Objective& objective, const RegressionOptions& options);

// Test-set MSE of the two models for one seed and training size.
struct RegressionScores {
  double addtree = 0.0;
  double independent = 0.0;
};
RegressionScores regression_scores(const Objective& objective, const RegressionOptions& options, std::uint64_t seed,
                                   int n_train);

nlohmann::ordered_json row_to_json(const RegressionRow& row);
RegressionRow row_from_json(const nlohmann::json& j);
// One row per line.
void write_rows(std::ostream& out, const std::vector<RegressionRow>& rows);
std::vector<RegressionRow> read_rows(std::istream& in);
std::string render_rows(const std::vector<RegressionRow>& rows);

}  // namespace addtree::bench
