#pragma once

#include "addtree/compare.hpp"
#include "addtree/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace addtree::cli {

enum ExitCode { kSuccess = 0, kUserError = 1, kInternalError = 2 };

// Entry point of the `addtree` tool: subcommands run, compare, regression.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Runs every (algorithm, seed) pair on a pool of `config.workers` threads,
// writing <output_dir>/<algorithm>/seed_<seed>.jsonl. Returns the traces in
// (algorithm, seed) order.
std::vector<bench::RunTrace> cmd_run(const bench::RunConfig& config, std::ostream& out);

bench::ComparisonReport cmd_compare(const std::vector<std::string>& directories, const std::vector<int>& iterations);

// Writes <output_dir>/regression.jsonl.
std::vector<bench::RegressionRow> cmd_regression(const bench::RunConfig& config, std::ostream& out);

std::string trace_path(const std::string& output_dir, const std::string& algorithm, std::uint64_t seed);

}  // namespace addtree::cli
