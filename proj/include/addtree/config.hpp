#pragma once

#include "addtree/bo.hpp"
#include "addtree/regression.hpp"

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace addtree::bench {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything a run or study depends on. Missing JSON keys keep these
// defaults; unknown keys are rejected.
struct RunConfig {
  std::string objective = "jenatton";  // builtin, used when tree_spec is empty
  std::string tree_spec;               // spec file for an external objective
  std::string objective_cmd;           // see process_objective
  double noise_std = 0.0;
  std::vector<std::string> algorithms = {"addtree"};
  int iterations = 80;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  BoConfig bo = default_bo();
  RegressionOptions regression;
  std::string output_dir = "out";
  int workers = 1;

  static BoConfig default_bo() {
    BoConfig c;
    c.n_init = 4;
    return c;
  }
};

nlohmann::json config_to_json(const RunConfig& c);
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Throws ConfigError naming the offending field or path.
void validate_config(const RunConfig& c);

// The part of the config that determines results: everything except
// output_dir and workers. Stored in trace headers.
nlohmann::json result_config(const RunConfig& c);

// Compact JSON with sorted keys.
std::string canonical_json(const nlohmann::json& j);
// FNV-1a 64 of the canonical form, 16 hex digits.
std::string digest(const nlohmann::json& j);
inline std::string config_digest(const RunConfig& c) { return digest(result_config(c)); }

Objective make_objective(const RunConfig& c);

// Hyperparameters keyed by vertex id:
//   {"r": {"kernel": "se", "lengthscales": [..], "output_scale": 1.0}, ...}
nlohmann::json kernel_params_to_json(const AddTreeKernel& k);
// Overwrites the listed vertices; unknown ids or bad shapes throw ConfigError.
void apply_kernel_params(AddTreeKernel& k, const nlohmann::json& j);

}  // namespace addtree::bench
