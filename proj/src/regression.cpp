#include "addtree/regression.hpp"

#include "addtree/bo.hpp"
#include "addtree/gp.hpp"
#include "addtree/rng.hpp"
#include "addtree/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

namespace addtree::bench {

namespace {

struct Labeled {
  int leaf;
  Eigen::VectorXd x;
  double y;
};

std::vector<Labeled> draw(const Objective& o, Rng& rng, int n) {
  std::vector<Labeled> out;
  for (int i = 0; i < n; ++i) {
    Sample s = branching_sample(*o.space, rng);
    const double y = o.eval(s.leaf, s.values);
    out.push_back({s.leaf, std::move(s.values), y});
  }
  return out;
}

GpModel fit_on(const SpacePtr& space, const std::vector<LinearizedPoint>& pts, const std::vector<double>& ys,
               const RegressionOptions& opt, std::uint64_t seed) {
  auto params = AddTreeKernel::uniform(space, opt.kernel, 0.5, 1.0, opt.zero_dim).all_params();
  AddTreeKernel k(space, std::move(params), opt.zero_dim, opt.tie_output_scales);
  Dataset data{pts, Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size())),
               Eigen::VectorXd::Constant(static_cast<Eigen::Index>(ys.size()), 1e-4)};
  if (ys.size() >= 2) {
    FitOptions fo;
    fo.restarts = opt.restarts;
    fo.seed = seed;
    fo.log_noise_min = std::log(opt.noise_floor);
    fo.init_log_range = std::make_pair(std::log(0.05), std::log(5.0));
    const FitResult fit = fit_hyperparameters(k, data, fo);
    k = fit.kernel;
    data.set_noise(fit.noise);
  }
  return GpModel::fit(std::move(k), std::move(data));
}

}  // namespace

RegressionScores regression_scores(const Objective& o, const RegressionOptions& opt, std::uint64_t seed,
                                   int n_train) {
  if (opt.test_size < 1) throw std::invalid_argument("test size must be >= 1");
  if (n_train < 0) throw std::invalid_argument("training size must be >= 0");
  Rng train_rng(seed), test_rng(derive_seed(seed, 7));
  const auto train = draw(o, train_rng, n_train);
  const auto test = draw(o, test_rng, opt.test_size);
  const TreeSpace& space = *o.space;
  const std::uint64_t fit_seed = derive_seed(seed, 8);

  RegressionScores sc;
  {
    std::vector<LinearizedPoint> pts;
    std::vector<double> ys;
    for (const auto& s : train) {
      pts.push_back(linearize(space, s.leaf, s.x));
      ys.push_back(s.y);
    }
    const GpModel m = fit_on(o.space, pts, ys, opt, fit_seed);
    for (const auto& s : test) {
      const double e = m.posterior(linearize(space, s.leaf, s.x)).mean - s.y;
      sc.addtree += e * e;
    }
    sc.addtree /= static_cast<double>(test.size());
  }
  {
    std::vector<GpModel> models;
    std::vector<SpacePtr> spaces;
    for (int l = 0; l < space.index.num_leaves(); ++l) {
      spaces.push_back(path_space(space, l));
      std::vector<LinearizedPoint> pts;
      std::vector<double> ys;
      for (const auto& s : train)
        if (s.leaf == l) {
          pts.push_back(linearize(*spaces.back(), 0, s.x));
          ys.push_back(s.y);
        }
      models.push_back(fit_on(spaces.back(), pts, ys, opt, derive_seed(fit_seed, static_cast<std::uint64_t>(l) + 1)));
    }
    for (const auto& s : test) {
      const auto& m = models[static_cast<std::size_t>(s.leaf)];
      const double e = m.posterior(linearize(*spaces[static_cast<std::size_t>(s.leaf)], 0, s.x)).mean - s.y;
      sc.independent += e * e;
    }
    sc.independent /= static_cast<double>(test.size());
  }
  return sc;
}

std::vector<RegressionRow> run_regression_study(const Objective& o, const RegressionOptions& opt) {
  if (opt.test_size < 1) throw std::invalid_argument("test size must be >= 1");
  if (opt.seeds.empty()) throw std::invalid_argument("regression study needs at least one seed");
  std::vector<RegressionRow> rows;
  for (int n : opt.train_sizes) {
    RegressionRow a{"addtree", n, 0.0, {}}, b{"independent", n, 0.0, {}};
    for (std::uint64_t s : opt.seeds) {
      const auto sc = regression_scores(o, opt, s, n);
      a.mse.push_back(sc.addtree);
      b.mse.push_back(sc.independent);
    }
    for (auto* r : {&a, &b}) {
      std::vector<double> logs;
      for (double m : r->mse) logs.push_back(std::log10(m));
      r->median_log10_mse = median(logs);
    }
    rows.push_back(std::move(a));
    rows.push_back(std::move(b));
  }
  return rows;
}

nlohmann::ordered_json row_to_json(const RegressionRow& r) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["n_train"] = r.n_train;
  j["median_log10_mse"] = r.median_log10_mse;
  j["mse"] = r.mse;
  return j;
}

RegressionRow row_from_json(const nlohmann::json& j) {
  return {j.at("method").get<std::string>(), j.at("n_train").get<int>(), j.at("median_log10_mse").get<double>(),
          j.at("mse").get<std::vector<double>>()};
}

void write_rows(std::ostream& out, const std::vector<RegressionRow>& rows) {
  for (const auto& r : rows) out << row_to_json(r).dump() << '\n';
}

std::vector<RegressionRow> read_rows(std::istream& in) {
  std::vector<RegressionRow> rows;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(row_from_json(nlohmann::json::parse(line)));
  return rows;
}

std::string render_rows(const std::vector<RegressionRow>& rows) {
  std::string s = "method        n_train  median log10 MSE\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-12s  %7d  %16.3f\n", r.method.c_str(), r.n_train, r.median_log10_mse);
    s += buf;
  }
  return s;
}

}  // namespace addtree::bench
