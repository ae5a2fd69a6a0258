#pragma once

#include "addtree/trace.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace addtree::bench {

struct IncumbentStats {
  int iteration = 0;
  double median = 0.0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct AlgorithmSummary {
  std::string label;
  std::vector<double> median_curve;  // median incumbent at t = 1..T
  std::vector<double> mean_curve;
  std::vector<IncumbentStats> at;    // at the requested iterations
};

// p-value for H1: `better` has lower incumbents than `worse`, paired by seed.
struct PairwiseTest {
  std::string better;
  std::string worse;
  int iteration = 0;
  std::optional<double> p;  // empty when undefined
  std::string note;
};

struct ComparisonReport {
  std::vector<std::uint64_t> seeds;
  std::vector<AlgorithmSummary> algorithms;
  std::vector<PairwiseTest> tests;
};

struct LabeledRuns {
  std::string label;
  std::vector<RunTrace> runs;
};

// Needs >= 2 groups over identical seed sets, each trace reaching every
// requested iteration. Throws std::invalid_argument otherwise.
ComparisonReport compare_runs(const std::vector<LabeledRuns>& groups, const std::vector<int>& iterations);

std::string render_report(const ComparisonReport& report);
nlohmann::ordered_json report_to_json(const ComparisonReport& report);

}  // namespace addtree::bench
