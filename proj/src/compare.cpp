#include "addtree/compare.hpp"

#include "addtree/stats.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

namespace addtree::bench {

namespace {

std::map<std::uint64_t, const RunTrace*> by_seed(const LabeledRuns& g) {
  std::map<std::uint64_t, const RunTrace*> m;
  for (const auto& r : g.runs)
    if (!m.emplace(r.seed, &r).second)
      throw std::invalid_argument(g.label + ": seed " + std::to_string(r.seed) + " appears twice");
  return m;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

ComparisonReport compare_runs(const std::vector<LabeledRuns>& groups, const std::vector<int>& iterations) {
  if (groups.size() < 2) throw std::invalid_argument("comparison needs at least two algorithms");
  std::vector<std::map<std::uint64_t, const RunTrace*>> maps;
  for (const auto& g : groups) maps.push_back(by_seed(g));

  ComparisonReport rep;
  for (const auto& [s, _] : maps[0]) rep.seeds.push_back(s);
  if (rep.seeds.empty()) throw std::invalid_argument(groups[0].label + ": no traces");
  for (std::size_t k = 1; k < maps.size(); ++k) {
    std::vector<std::uint64_t> seeds;
    for (const auto& [s, _] : maps[k]) seeds.push_back(s);
    if (seeds != rep.seeds)
      throw std::invalid_argument("seed sets differ between " + groups[0].label + " and " + groups[k].label);
  }

  std::size_t horizon = std::numeric_limits<std::size_t>::max();
  for (const auto& m : maps)
    for (const auto& [_, t] : m) horizon = std::min(horizon, t->records.size());
  for (int it : iterations)
    if (it < 1 || static_cast<std::size_t>(it) > horizon)
      throw std::invalid_argument("iteration " + std::to_string(it) + " is outside every trace's range 1.." +
                                  std::to_string(horizon));

  // incumbents[k][t-1] = per-seed incumbents of group k at iteration t
  auto incumbents = [&](std::size_t k, int t) {
    std::vector<double> v;
    for (std::uint64_t s : rep.seeds) v.push_back(maps[k].at(s)->records[static_cast<std::size_t>(t - 1)].best);
    return v;
  };

  for (std::size_t k = 0; k < groups.size(); ++k) {
    AlgorithmSummary a;
    a.label = groups[k].label;
    for (std::size_t t = 1; t <= horizon; ++t) {
      const auto v = incumbents(k, static_cast<int>(t));
      a.median_curve.push_back(median(v));
      a.mean_curve.push_back(mean(v));
    }
    for (int it : iterations) {
      const auto v = incumbents(k, it);
      a.at.push_back({it, median(v), mean(v), *std::min_element(v.begin(), v.end()),
                      *std::max_element(v.begin(), v.end())});
    }
    rep.algorithms.push_back(std::move(a));
  }

  for (std::size_t i = 0; i < groups.size(); ++i)
    for (std::size_t j = 0; j < groups.size(); ++j) {
      if (i == j) continue;
      for (int it : iterations) {
        PairwiseTest pt{groups[i].label, groups[j].label, it, std::nullopt, ""};
        try {
          pt.p = wilcoxon_one_sided(incumbents(j, it), incumbents(i, it)).p;
        } catch (const UndefinedTestError&) {
          pt.note = "undefined: all paired differences are zero";
        } catch (const std::invalid_argument& e) {
          pt.note = std::string("undefined: ") + e.what();
        }
        rep.tests.push_back(std::move(pt));
      }
    }
  return rep;
}

std::string render_report(const ComparisonReport& rep) {
  std::string s = "seeds: " + std::to_string(rep.seeds.size()) + "\n\n";
  s += "incumbent (median / mean / min / max)\n";
  for (const auto& a : rep.algorithms)
    for (const auto& st : a.at)
      s += "  " + a.label + "  t=" + std::to_string(st.iteration) + "  " + fmt(st.median) + " / " + fmt(st.mean) +
           " / " + fmt(st.min) + " / " + fmt(st.max) + "\n";
  s += "\none-sided Wilcoxon signed-rank, H1: first lower than second\n";
  for (const auto& t : rep.tests)
    s += "  " + t.better + " < " + t.worse + "  t=" + std::to_string(t.iteration) + "  p=" +
         (t.p ? fmt(*t.p) : t.note) + "\n";
  return s;
}

nlohmann::ordered_json report_to_json(const ComparisonReport& rep) {
  nlohmann::ordered_json j;
  j["seeds"] = rep.seeds;
  j["algorithms"] = nlohmann::ordered_json::array();
  for (const auto& a : rep.algorithms) {
    nlohmann::ordered_json ja;
    ja["label"] = a.label;
    ja["median_curve"] = a.median_curve;
    ja["mean_curve"] = a.mean_curve;
    ja["at"] = nlohmann::ordered_json::array();
    for (const auto& st : a.at)
      ja["at"].push_back({{"iteration", st.iteration}, {"median", st.median}, {"mean", st.mean},
                          {"min", st.min}, {"max", st.max}});
    j["algorithms"].push_back(std::move(ja));
  }
  j["tests"] = nlohmann::ordered_json::array();
  for (const auto& t : rep.tests) {
    nlohmann::ordered_json jt;
    jt["better"] = t.better;
    jt["worse"] = t.worse;
    jt["iteration"] = t.iteration;
    jt["p"] = t.p ? nlohmann::ordered_json(*t.p) : nlohmann::ordered_json(nullptr);
    if (!t.note.empty()) jt["note"] = t.note;
    j["tests"].push_back(std::move(jt));
  }
  return j;
}

}  // namespace addtree::bench
