#include "addtree/bo.hpp"

#include "addtree/gp.hpp"
#include "addtree/rng.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace addtree::bench {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::AddTree: return "addtree";
    case Algorithm::Independent: return "independent";
    case Algorithm::Random: return "random";
  }
  throw std::logic_error("unknown algorithm");
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "addtree") return Algorithm::AddTree;
  if (name == "independent") return Algorithm::Independent;
  if (name == "random") return Algorithm::Random;
  throw std::invalid_argument("unknown algorithm '" + name + "' (expected addtree, independent or random)");
}

int initial_points(const BoConfig& config, const TreeSpace& space) {
  return config.n_init >= 0 ? config.n_init : 4 + space.spec.total_dim();
}

SpacePtr path_space(const TreeSpace& space, int leaf) {
  const auto& path = space.index.leaf_paths.at(static_cast<std::size_t>(leaf));
  std::vector<VertexDecl> decls;
  std::vector<EdgeDecl> edges;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto& v = space.spec.vertex(path[i]);
    decls.push_back({v.id, v.bounds});
    if (i > 0) edges.push_back({decls[i - 1].id, 0, v.id});
  }
  return make_space(TreeSpec::build(decls, edges));
}

namespace {

// Observations are minimized; the models see standardized -y.
struct Standardizer {
  double mean = 0.0;
  double scale = 1.0;

  explicit Standardizer(const std::vector<double>& ys) {
    if (ys.empty()) return;
    for (double y : ys) mean += -y;
    mean /= static_cast<double>(ys.size());
    double ss = 0.0;
    for (double y : ys) ss += (-y - mean) * (-y - mean);
    const double sd = std::sqrt(ss / static_cast<double>(ys.size()));
    if (sd > 1e-12) scale = sd;
  }
  double operator()(double y) const { return (-y - mean) / scale; }
};

// Fitted hyperparameters carried between iterations as warm starts.
struct ModelState {
  AddTreeKernel kernel;
  double noise = 1e-3;
};

AddTreeKernel kernel_template(SpacePtr space, const BoConfig& c) {
  auto params = AddTreeKernel::uniform(space, c.kernel, c.theta0, 1.0, c.zero_dim).all_params();
  return AddTreeKernel(std::move(space), std::move(params), c.zero_dim, c.tie_output_scales);
}

UcbSchedule fixed_schedule(const BoConfig& c, int d, double gamma_g, double gamma_b) {
  return UcbSchedule::logarithmic(c.theta0, c.B0, c.delta, gamma_g, gamma_b, d);
}

GpModel fit_model(ModelState& state, const std::vector<LinearizedPoint>& points, const Eigen::VectorXd& z,
                  const BoConfig& c, std::uint64_t seed) {
  Dataset data{points, z, Eigen::VectorXd::Constant(z.size(), state.noise)};
  if (z.size() >= 2) {
    FitOptions fo;
    fo.restarts = c.fit_restarts;
    fo.seed = seed;
    fo.log_noise_min = std::log(c.noise_floor);
    fo.init_log_range = std::make_pair(std::log(0.05), std::log(5.0));
    fo.optimizer.max_evaluations = c.fit_evaluations;
    fo.optimizer.max_iterations = c.fit_evaluations;
    const FitResult fit = fit_hyperparameters(state.kernel, data, fo);
    state.kernel = fit.kernel;
    state.noise = fit.noise;
    data.set_noise(state.noise);
  }
  return GpModel::fit(state.kernel, std::move(data));
}

// Schedule for iteration t. With unset growth rates the rates are fitted so
// the regret estimate tracks t^reference_exponent; lengthscales are then
// capped at theta0 / g(t) whenever g grows.
UcbSchedule realize_schedule(GpModel& model, ModelState& state, const BoConfig& c, int d, double t) {
  double gg = c.gamma_g.value_or(0.0), gb = c.gamma_b.value_or(0.0);
  if ((!c.gamma_g || !c.gamma_b) && model.size() > 0) {
    const UcbSchedule base = fixed_schedule(c, d, 0.0, 0.0);
    const double e = c.reference_exponent;
    const auto r = select_schedule([e](double s) { return std::pow(s, e); }, model, base, c.b_share, c.noise_floor);
    if (!c.gamma_g) gg = fit_log_growth(r.t, r.g);
    if (!c.gamma_b) gb = fit_log_growth(r.t, r.b);
  }
  UcbSchedule s = fixed_schedule(c, d, gg, gb);
  if (gg > 0.0 && model.size() > 0) {
    state.kernel = cap_lengthscales(state.kernel, s.lengthscale_cap(t));
    model = GpModel::fit(state.kernel, model.data());
  }
  return s;
}

}  // namespace

RunTrace run_bo(const Objective& objective, Algorithm algorithm, int iterations, std::uint64_t seed,
                const BoConfig& c, const RecordSink& sink) {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (!objective.space || !objective.eval) throw std::invalid_argument("objective has no space or function");
  const TreeSpace& space = *objective.space;
  const int d = space.spec.total_dim();
  const int n_init = initial_points(c, space);
  const int L = space.index.num_leaves();

  Rng init_rng(seed);
  Rng model_rng(derive_seed(seed, 1));
  Rng noise_rng(derive_seed(seed, 2));

  RunTrace trace;
  trace.algorithm = to_string(algorithm);
  trace.seed = seed;
  trace.objective = objective.name;

  std::vector<int> leaves;
  std::vector<Eigen::VectorXd> xs;
  std::vector<double> ys;

  ModelState joint{kernel_template(objective.space, c)};
  std::vector<SpacePtr> leaf_spaces;
  std::vector<ModelState> per_leaf;
  if (algorithm == Algorithm::Independent)
    for (int l = 0; l < L; ++l) {
      leaf_spaces.push_back(path_space(space, l));
      per_leaf.push_back({kernel_template(leaf_spaces.back(), c)});
    }

  const auto start = std::chrono::steady_clock::now();
  double best = std::numeric_limits<double>::infinity();

  for (int t = 1; t <= iterations; ++t) {
    int leaf = 0;
    Eigen::VectorXd values;
    std::optional<double> beta_t;

    if (algorithm == Algorithm::Random || t <= n_init) {
      const Sample s = uniform_sample(space, init_rng);
      leaf = s.leaf;
      values = s.values;
    } else {
      const Standardizer st(ys);
      ProposeOptions po = c.propose;
      po.noise_floor = c.noise_floor;
      if (algorithm == Algorithm::AddTree) {
        std::vector<LinearizedPoint> pts;
        Eigen::VectorXd z(static_cast<Eigen::Index>(ys.size()));
        for (std::size_t i = 0; i < ys.size(); ++i) {
          pts.push_back(linearize(space, leaves[i], xs[i]));
          z[static_cast<Eigen::Index>(i)] = st(ys[i]);
        }
        GpModel model = fit_model(joint, pts, z, c, model_rng.next());
        const UcbSchedule sched = realize_schedule(model, joint, c, d, t);
        po.seed = model_rng.next();
        const Proposal p = propose(model, sched, t, po);
        leaf = p.leaf;
        values = p.values;
        beta_t = p.beta;
      } else {
        double best_u = -std::numeric_limits<double>::infinity();
        for (int l = 0; l < L; ++l) {
          const TreeSpace& ls = *leaf_spaces[static_cast<std::size_t>(l)];
          std::vector<LinearizedPoint> pts;
          std::vector<double> zl;
          for (std::size_t i = 0; i < ys.size(); ++i)
            if (leaves[i] == l) {
              pts.push_back(linearize(ls, 0, xs[i]));
              zl.push_back(st(ys[i]));
            }
          const Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(zl.data(), static_cast<Eigen::Index>(zl.size()));
          auto& state = per_leaf[static_cast<std::size_t>(l)];
          GpModel model = fit_model(state, pts, z, c, model_rng.next());
          const UcbSchedule sched = realize_schedule(model, state, c, ls.spec.total_dim(), t);
          po.seed = model_rng.next();
          const Proposal p = propose(model, sched, t, po);
          if (p.path_values[0] > best_u) {
            best_u = p.path_values[0];
            leaf = l;
            values = p.values;
            beta_t = p.beta;
          }
        }
      }
    }

    double y = objective.eval(leaf, values);
    if (!std::isfinite(y)) throw ObjectiveError("objective returned a non-finite value at iteration " + std::to_string(t));
    if (objective.noise_std > 0.0) y += objective.noise_std * noise_rng.normal();

    leaves.push_back(leaf);
    xs.push_back(values);
    ys.push_back(y);
    best = std::min(best, y);

    IterationRecord r;
    r.t = t;
    r.leaf = leaf;
    r.values = values;
    r.y = y;
    r.best = best;
    r.beta = beta_t;
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (sink) sink(r);
    trace.records.push_back(std::move(r));
  }
  return trace;
}

}  // namespace addtree::bench
