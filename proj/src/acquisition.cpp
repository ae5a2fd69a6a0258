#include "addtree/acquisition.hpp"

#include "addtree/optimize.hpp"
#include "addtree/rng.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>

namespace addtree {

UcbSchedule UcbSchedule::logarithmic(double theta0, double B0, double delta, double gamma_g, double gamma_b, int d) {
  if (gamma_g < 0.0 || gamma_b < 0.0) throw std::invalid_argument("schedule growth rates must be non-negative");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  UcbSchedule s;
  s.theta0 = theta0;
  s.B0 = B0;
  s.delta = delta;
  s.d = d;
  s.g = [gamma_g](double t) { return 1.0 + gamma_g * std::log1p(t); };
  s.b = [gamma_b](double t) { return 1.0 + gamma_b * std::log1p(t); };
  return s;
}

double UcbSchedule::norm_bound(double t) const { return b(t) * std::pow(g(t), d) * B0; }

double beta(const UcbSchedule& schedule, double t, double info_gain, double noise_std) {
  if (info_gain < 0.0) throw std::invalid_argument("information gain must be non-negative");
  const double root = schedule.norm_bound(t) +
                      4.0 * noise_std * std::sqrt(info_gain + 1.0 + std::log(1.0 / schedule.delta));
  return root * root;
}

namespace {

double homoscedastic_variance(const GpModel& model, double noise_floor) {
  const auto& noise = model.data().noise;
  double var = noise_floor;
  if (noise.size() > 0) {
    const double hi = noise.maxCoeff();
    const double lo = noise.minCoeff();
    if (hi - lo > 1e-12 * std::max(hi, 1e-300))
      throw std::invalid_argument("mutual information needs homoscedastic observation noise");
    var = std::max(hi, noise_floor);
  }
  if (!(var > 0.0)) throw std::domain_error("mutual information is undefined for zero noise; floor the noise variance");
  return var;
}

Eigen::LLT<Eigen::MatrixXd> information_factor(const GpModel& model, double sigma2) {
  const auto n = static_cast<Eigen::Index>(model.size());
  Eigen::MatrixXd A = gram(model.kernel(), model.data().points) / sigma2;
  A.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (n > 0 && llt.info() != Eigen::Success) throw FactorizationError("I + K / sigma^2 is not positive definite");
  return llt;
}

}  // namespace

double noise_std(const GpModel& model, double noise_floor) {
  return std::sqrt(homoscedastic_variance(model, noise_floor));
}

double mutual_information(const GpModel& model, double noise_floor) {
  if (model.size() == 0) return 0.0;
  const double sigma2 = homoscedastic_variance(model, noise_floor);
  const auto llt = information_factor(model, sigma2);
  return llt.matrixLLT().diagonal().array().log().sum();
}

double ucb(const GpModel& model, const LinearizedPoint& point, double beta) {
  if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
  const Posterior p = model.posterior(point);
  return p.mean + std::sqrt(beta) * std::sqrt(p.variance);
}

VertexProposal maximize_component_ucb(const GpModel& model, int vertex, double beta, const ProposeOptions& opt) {
  if (opt.max_evaluations < 1) throw std::invalid_argument("per-vertex optimizer budget must allow an evaluation");
  const auto& space = model.kernel().space();
  const auto& vs = space.spec.vertex(vertex);
  const double sqrt_beta = std::sqrt(beta);

  VertexProposal best;
  int evaluations = 0;
  auto value_at = [&](const Eigen::VectorXd& x) {
    ++evaluations;
    const auto cp = model.component_posterior(vertex, x);
    return cp.mean + sqrt_beta * std::sqrt(cp.variance);
  };

  if (vs.dim == 0) {
    best.x = Eigen::VectorXd();
    best.value = value_at(best.x);
    best.evaluations = evaluations;
    return best;
  }

  Eigen::VectorXd lo(vs.dim), hi(vs.dim);
  for (int j = 0; j < vs.dim; ++j) {
    lo[j] = vs.bounds[static_cast<std::size_t>(j)].lo;
    hi[j] = vs.bounds[static_cast<std::size_t>(j)].hi;
  }

  // Candidate screening: rotated Halton points plus the incumbent's restriction.
  Rng rng(opt.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(vertex + 1)));
  Eigen::VectorXd rotation(vs.dim);
  for (int j = 0; j < vs.dim; ++j) rotation[j] = rng.uniform();
  std::vector<Eigen::VectorXd> candidates;
  for (auto& u : halton_points(std::max(opt.candidates, 1), vs.dim, rotation))
    candidates.push_back(lo + (hi - lo).cwiseProduct(u));
  const auto& data = model.data();
  if (!data.empty()) {
    Eigen::Index inc = -1;
    for (Eigen::Index i = 0; i < data.targets.size(); ++i)
      if (is_active(space.index, data.points[static_cast<std::size_t>(i)], vertex) &&
          (inc < 0 || data.targets[i] > data.targets[inc]))
        inc = i;
    if (inc >= 0) candidates.insert(candidates.begin(), *restrict_to(space.index, data.points[static_cast<std::size_t>(inc)], vertex));
  }

  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t c = 0; c < candidates.size() && evaluations < opt.max_evaluations; ++c)
    scored.emplace_back(value_at(candidates[c]), c);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  best.x = candidates[scored.front().second];
  best.value = scored.front().first;

  auto negative_ucb = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) -> double {
    ++evaluations;
    const auto cp = model.component_posterior(vertex, x, true);
    const double sd = std::sqrt(cp.variance);
    grad = -cp.mean_gradient;
    if (sd > 1e-12) grad -= sqrt_beta * cp.variance_gradient / (2.0 * sd);
    return -(cp.mean + sqrt_beta * sd);
  };

  const int starts = std::min<int>(opt.starts, static_cast<int>(scored.size()));
  for (int s = 0; s < starts; ++s) {
    const int remaining = opt.max_evaluations - evaluations;
    if (remaining <= 0) break;
    BoundedLbfgsOptions lopt;
    lopt.max_evaluations = std::max(1, remaining / (starts - s));
    lopt.max_iterations = 100;
    lopt.projected_gradient_tol = 1e-7;
    lopt.relative_function_tol = 1e-12;
    const auto res = minimize_bounded(negative_ucb, candidates[scored[static_cast<std::size_t>(s)].second], lo, hi, lopt);
    if (-res.value > best.value) {
      best.value = -res.value;
      best.x = res.x;
    }
  }
  best.evaluations = evaluations;
  return best;
}

Proposal propose_with_beta(const GpModel& model, double beta_value, const ProposeOptions& opt) {
  const auto& space = model.kernel().space();
  const int nv = space.spec.size();

  Proposal out;
  out.beta = beta_value;
  out.vertices.resize(static_cast<std::size_t>(nv));
  if (opt.parallel) {
    std::vector<std::future<VertexProposal>> jobs;
    for (int v = 0; v < nv; ++v)
      jobs.push_back(std::async(std::launch::async, [&, v] { return maximize_component_ucb(model, v, beta_value, opt); }));
    for (int v = 0; v < nv; ++v) out.vertices[static_cast<std::size_t>(v)] = jobs[static_cast<std::size_t>(v)].get();
  } else {
    for (int v = 0; v < nv; ++v) out.vertices[static_cast<std::size_t>(v)] = maximize_component_ucb(model, v, beta_value, opt);
  }

  const auto& index = space.index;
  for (int leaf = 0; leaf < index.num_leaves(); ++leaf) {
    double U = 0.0;
    for (int v : index.leaf_paths[static_cast<std::size_t>(leaf)]) U += out.vertices[static_cast<std::size_t>(v)].value;
    out.path_values.push_back(U);
  }
  out.leaf = static_cast<int>(std::max_element(out.path_values.begin(), out.path_values.end()) - out.path_values.begin());

  out.values.resize(index.effective_dims[static_cast<std::size_t>(out.leaf)]);
  Eigen::Index k = 0;
  for (int v : index.leaf_paths[static_cast<std::size_t>(out.leaf)]) {
    const auto& x = out.vertices[static_cast<std::size_t>(v)].x;
    out.values.segment(k, x.size()) = x;
    k += x.size();
  }
  out.point = linearize(space, out.leaf, out.values);
  return out;
}

Proposal propose(const GpModel& model, const UcbSchedule& schedule, double t, const ProposeOptions& opt) {
  const double info = mutual_information(model, opt.noise_floor);
  const double sigma = noise_std(model, opt.noise_floor);
  Proposal p = propose_with_beta(model, beta(schedule, t, info, sigma), opt);
  p.info_gain = info;
  return p;
}

std::pair<double, double> split_slack(double ratio, double b_share, int d) {
  if (!(ratio > 1.0)) return {1.0, 1.0};
  const double b = std::pow(ratio, b_share);
  const double g = std::pow(ratio, (1.0 - b_share) / std::max(d, 1));
  return {g, b};
}

std::vector<double> regret_estimate(const GpModel& model, const UcbSchedule& base, double noise_floor) {
  const double sigma2 = homoscedastic_variance(model, noise_floor);
  const double sigma = std::sqrt(sigma2);
  const double c1 = 8.0 / std::log1p(1.0 / sigma2);
  const auto llt = information_factor(model, sigma2);
  const Eigen::VectorXd logdiag = llt.matrixLLT().diagonal().array().log();
  std::vector<double> est;
  double info = 0.0;
  for (Eigen::Index t = 1; t <= logdiag.size(); ++t) {
    info += logdiag[t - 1];  // prefix of 1/2 log det
    const double root = base.B0 + 4.0 * sigma * std::sqrt(info + 1.0 + std::log(1.0 / base.delta));
    est.push_back(std::sqrt(c1 * static_cast<double>(t) * root * root * info));
  }
  return est;
}

ScheduleRealization select_schedule(const std::function<double(double)>& reference, const std::vector<double>& estimate,
                                    int d, double b_share) {
  if (!(b_share >= 0.0 && b_share <= 1.0)) throw std::invalid_argument("b_share must lie in [0, 1]");
  ScheduleRealization out;
  double g_run = 1.0, b_run = 1.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double t = static_cast<double>(i + 1);
    const double ref = reference(t);
    if (!(ref > 0.0)) throw std::invalid_argument("reference regret must be positive");
    const double ratio = estimate[i] > 0.0 ? ref / estimate[i] : 1.0;
    const auto [g, b] = split_slack(ratio, b_share, d);
    g_run = std::max(g_run, g);
    b_run = std::max(b_run, b);
    out.t.push_back(t);
    out.estimate.push_back(estimate[i]);
    out.reference.push_back(ref);
    out.g.push_back(g_run);
    out.b.push_back(b_run);
  }
  return out;
}

ScheduleRealization select_schedule(const std::function<double(double)>& reference, const GpModel& model,
                                    const UcbSchedule& base, double b_share, double noise_floor) {
  return select_schedule(reference, regret_estimate(model, base, noise_floor), base.d, b_share);
}

double fit_log_growth(const std::vector<double>& t, const std::vector<double>& values) {
  if (t.size() != values.size()) throw std::invalid_argument("t and values differ in length");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double l = std::log1p(t[i]);
    num += l * (values[i] - 1.0);
    den += l * l;
  }
  return den > 0.0 ? std::max(0.0, num / den) : 0.0;
}

}  // namespace addtree
