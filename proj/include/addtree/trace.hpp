#pragma once

#include "addtree/tree_space.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace addtree::bench {

// One evaluation. `values` are the path-ordered continuous values of `leaf`;
// `best` is the incumbent (minimum) so far; `beta` is empty for initial
// random points and baselines without a model.
struct IterationRecord {
  int t = 0;
  int leaf = 0;
  Eigen::VectorXd values;
  double y = 0.0;
  double best = 0.0;
  std::optional<double> beta;
  double wall_time = 0.0;  // seconds since the run started
};

struct RunTrace {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::string objective;
  nlohmann::json config = nlohmann::json::object();
  std::string config_digest;
  std::vector<IterationRecord> records;
};

inline constexpr const char* kTraceFormat = "addtree-trace";
inline constexpr int kTraceVersion = 1;

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON lines: a header object, then one object per record.
nlohmann::ordered_json trace_header(const RunTrace& trace);
nlohmann::ordered_json record_to_json(const IterationRecord& r);
IterationRecord record_from_json(const nlohmann::json& j);

std::string format_trace(const RunTrace& trace);
RunTrace parse_trace(std::istream& in);
void write_trace(const std::string& path, const RunTrace& trace);
RunTrace read_trace(const std::string& path);

// Appends records as they arrive, so an aborted run leaves a valid prefix.
class TraceWriter {
 public:
  TraceWriter(const std::string& path, const RunTrace& header);
  void append(const IterationRecord& r);

 private:
  std::ofstream out_;
  std::string path_;
};

// Post-hoc checks: record numbering, monotone incumbent, valid leaves and
// in-bounds values. Throws TraceError naming the first bad record.
void validate_trace(const RunTrace& trace, const TreeSpace& space);

}  // namespace addtree::bench
