#include "addtree/trace.hpp"

#include <cmath>
#include <sstream>

namespace addtree::bench {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json trace_header(const RunTrace& trace) {
  ordered_json h;
  h["format"] = kTraceFormat;
  h["version"] = kTraceVersion;
  h["algorithm"] = trace.algorithm;
  h["seed"] = trace.seed;
  h["objective"] = trace.objective;
  h["config"] = trace.config;
  h["config_digest"] = trace.config_digest;
  return h;
}

ordered_json record_to_json(const IterationRecord& r) {
  ordered_json j;
  j["t"] = r.t;
  j["leaf"] = r.leaf;
  j["values"] = std::vector<double>(r.values.data(), r.values.data() + r.values.size());
  j["y"] = r.y;
  j["best"] = r.best;
  j["beta"] = r.beta ? json(*r.beta) : json(nullptr);
  j["wall_time"] = r.wall_time;
  return j;
}

IterationRecord record_from_json(const json& j) {
  IterationRecord r;
  r.t = j.at("t").get<int>();
  r.leaf = j.at("leaf").get<int>();
  const auto v = j.at("values").get<std::vector<double>>();
  r.values = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  r.y = j.at("y").get<double>();
  r.best = j.at("best").get<double>();
  if (!j.at("beta").is_null()) r.beta = j.at("beta").get<double>();
  r.wall_time = j.at("wall_time").get<double>();
  return r;
}

std::string format_trace(const RunTrace& trace) {
  std::string s = trace_header(trace).dump() + "\n";
  for (const auto& r : trace.records) s += record_to_json(r).dump() + "\n";
  return s;
}

RunTrace parse_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw TraceError("empty trace");
  RunTrace t;
  try {
    const json h = json::parse(line);
    if (h.at("format") != kTraceFormat) throw TraceError("not an addtree trace");
    if (h.at("version").get<int>() != kTraceVersion)
      throw TraceError("unsupported trace version " + h.at("version").dump());
    t.algorithm = h.at("algorithm").get<std::string>();
    t.seed = h.at("seed").get<std::uint64_t>();
    t.objective = h.at("objective").get<std::string>();
    t.config = h.at("config");
    t.config_digest = h.at("config_digest").get<std::string>();
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        t.records.push_back(record_from_json(json::parse(line)));
      } catch (const json::exception& e) {
        throw TraceError("bad record on line " + std::to_string(lineno) + ": " + e.what());
      }
    }
  } catch (const json::exception& e) {
    throw TraceError(std::string("bad trace header: ") + e.what());
  }
  return t;
}

void write_trace(const std::string& path, const RunTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError("cannot write " + path);
  out << format_trace(trace);
  if (!out) throw TraceError("write failed: " + path);
}

RunTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot read " + path);
  try {
    return parse_trace(in);
  } catch (const TraceError& e) {
    throw TraceError(path + ": " + e.what());
  }
}

TraceWriter::TraceWriter(const std::string& path, const RunTrace& header) : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw TraceError("cannot write " + path);
  out_ << trace_header(header).dump() << '\n' << std::flush;
}

void TraceWriter::append(const IterationRecord& r) {
  out_ << record_to_json(r).dump() << '\n' << std::flush;
  if (!out_) throw TraceError("write failed: " + path_);
}

void validate_trace(const RunTrace& trace, const TreeSpace& space) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    auto fail = [&](const std::string& why) {
      throw TraceError("record " + std::to_string(i + 1) + ": " + why);
    };
    if (r.t != static_cast<int>(i + 1)) fail("iteration numbers are not consecutive");
    if (r.leaf < 0 || r.leaf >= space.index.num_leaves()) fail("invalid leaf " + std::to_string(r.leaf));
    try {
      (void)linearize(space, r.leaf, r.values);
    } catch (const std::exception& e) {
      fail(e.what());
    }
    if (!std::isfinite(r.y)) fail("non-finite observation");
    best = std::min(best, r.y);
    if (r.best != best) fail("incumbent does not match the running minimum");
  }
}

}  // namespace addtree::bench
