#include "addtree/gp.hpp"

#include "addtree/rng.hpp"

#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <sstream>

namespace addtree {

void Dataset::add(LinearizedPoint x, double y, double noise_variance) {
  points.push_back(std::move(x));
  const auto n = static_cast<Eigen::Index>(points.size());
  targets.conservativeResize(n);
  noise.conservativeResize(n);
  targets[n - 1] = y;
  noise[n - 1] = noise_variance;
}

void Dataset::validate() const {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (targets.size() != n || noise.size() != n)
    throw std::invalid_argument("dataset has " + std::to_string(n) + " points, " + std::to_string(targets.size()) +
                                " targets and " + std::to_string(noise.size()) + " noise entries");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(noise[i] >= 0.0)) throw std::invalid_argument("negative noise variance at observation " + std::to_string(i));
    if (!std::isfinite(targets[i])) throw std::invalid_argument("non-finite target at observation " + std::to_string(i));
  }
}

double factorize_with_jitter(const Eigen::MatrixXd& A, Eigen::LLT<Eigen::MatrixXd>& llt, const JitterPolicy& policy) {
  llt.compute(A);
  if (llt.info() == Eigen::Success) return 0.0;
  const double mean_diag = A.rows() > 0 ? std::max(A.diagonal().mean(), 1e-300) : 1.0;
  for (double rel = policy.initial; rel <= policy.maximum * (1 + 1e-12); rel *= policy.factor) {
    const double jitter = rel * mean_diag;
    Eigen::MatrixXd B = A;
    B.diagonal().array() += jitter;
    llt.compute(B);
    if (llt.info() == Eigen::Success) return jitter;
  }
  std::ostringstream msg;
  msg << "Cholesky factorization failed after jitter up to " << policy.maximum << " x mean diagonal"
      << " (degenerate hyperparameters or duplicate noiseless points)";
  throw FactorizationError(msg.str());
}

GpModel GpModel::fit(AddTreeKernel kernel, Dataset data, const JitterPolicy& jitter) {
  data.validate();
  GpModel m;
  m.kernel_ = std::move(kernel);
  m.data_ = std::move(data);

  const auto n = static_cast<Eigen::Index>(m.data_.size());
  m.ky_ = gram(m.kernel_, m.data_.points);
  m.ky_.diagonal() += m.data_.noise;
  m.jitter_ = factorize_with_jitter(m.ky_, m.full_.llt, jitter);
  if (m.jitter_ > 0.0) m.ky_.diagonal().array() += m.jitter_;
  m.full_.is_full = true;
  m.full_.rows.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) m.full_.rows[static_cast<std::size_t>(i)] = i;
  m.full_.alpha = n > 0 ? Eigen::VectorXd(m.full_.llt.solve(m.data_.targets)) : Eigen::VectorXd();

  const int leaves = m.kernel_.space().index.num_leaves();
  m.per_leaf_.resize(static_cast<std::size_t>(leaves));
  for (int leaf = 0; leaf < leaves; ++leaf) {
    auto f = std::make_shared<Factor>();
    for (Eigen::Index i = 0; i < n; ++i)
      if (m.kernel_.leaves_interact(leaf, m.data_.points[static_cast<std::size_t>(i)].leaf)) f->rows.push_back(i);
    if (static_cast<Eigen::Index>(f->rows.size()) == n) {
      m.per_leaf_[static_cast<std::size_t>(leaf)] = nullptr;
      continue;
    }
    const auto s = static_cast<Eigen::Index>(f->rows.size());
    if (s > 0) {
      Eigen::MatrixXd sub(s, s);
      Eigen::VectorXd ys(s);
      for (Eigen::Index a = 0; a < s; ++a) {
        ys[a] = m.data_.targets[f->rows[static_cast<std::size_t>(a)]];
        for (Eigen::Index b = 0; b < s; ++b)
          sub(a, b) = m.ky_(f->rows[static_cast<std::size_t>(a)], f->rows[static_cast<std::size_t>(b)]);
      }
      f->llt.compute(sub);
      if (f->llt.info() != Eigen::Success) throw FactorizationError("selected sub-Gram is not positive definite");
      f->alpha = f->llt.solve(ys);
    }
    m.per_leaf_[static_cast<std::size_t>(leaf)] = std::move(f);
  }
  return m;
}

SelectionView GpModel::selection(int leaf) const {
  const auto& f = per_leaf_.at(static_cast<std::size_t>(leaf));
  if (!f) return {leaf, full_.rows, true};
  return {leaf, f->rows, false};
}

double GpModel::clamp_variance(double v, double prior) const {
  if (v < 0.0) {
    clamp_count_->fetch_add(1, std::memory_order_relaxed);
    return 0.0;
  }
  return std::min(v, prior);
}

Posterior GpModel::predict(const Factor& f, const LinearizedPoint& x) const {
  const double prior = kernel_(x, x);
  if (f.rows.empty()) return {0.0, prior};
  Eigen::VectorXd c(static_cast<Eigen::Index>(f.rows.size()));
  for (std::size_t a = 0; a < f.rows.size(); ++a)
    c[static_cast<Eigen::Index>(a)] = kernel_(data_.points[static_cast<std::size_t>(f.rows[a])], x);
  const double mean = c.dot(f.alpha);
  const Eigen::VectorXd v = f.llt.matrixL().solve(c);
  return {mean, clamp_variance(prior - v.squaredNorm(), prior)};
}

Posterior GpModel::posterior(const LinearizedPoint& x) const {
  const auto& f = per_leaf_.at(static_cast<std::size_t>(x.leaf));
  return predict(f ? *f : full_, x);
}

Posterior GpModel::posterior_full(const LinearizedPoint& x) const { return predict(full_, x); }

ComponentPosterior GpModel::component_posterior(int vertex, const Eigen::Ref<const Eigen::VectorXd>& values,
                                                bool with_gradient) const {
  const auto& space = kernel_.space();
  if (vertex < 0 || vertex >= space.spec.size()) throw std::out_of_range("unknown vertex index " + std::to_string(vertex));
  const auto& vs = space.spec.vertex(vertex);
  if (values.size() != vs.dim)
    throw std::invalid_argument("vertex '" + vs.id + "' expects " + std::to_string(vs.dim) + " values, got " +
                                std::to_string(values.size()));

  ComponentPosterior out;
  if (with_gradient) {
    out.mean_gradient = Eigen::VectorXd::Zero(vs.dim);
    out.variance_gradient = Eigen::VectorXd::Zero(vs.dim);
  }
  if (!kernel_.contributes(vertex)) return out;

  const auto& p = kernel_.params(vertex);
  const double prior = base_kernel_eval(p, values, values);
  out.variance = prior;
  const auto n = static_cast<Eigen::Index>(data_.size());
  if (n == 0) return out;

  const auto& off = space.index.vertex_offsets[static_cast<std::size_t>(vertex)];
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd dc;
  if (with_gradient) dc = Eigen::MatrixXd::Zero(n, vs.dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& xi = data_.points[static_cast<std::size_t>(i)];
    if (!is_active(space.index, xi, vertex)) continue;
    const auto seg = xi.slots.segment(off.begin, vs.dim);
    c[i] = base_kernel_eval(p, values, seg);
    if (with_gradient && vs.dim > 0) dc.row(i) = base_kernel_input_gradient(p, values, seg).transpose();
  }
  out.mean = c.dot(full_.alpha);
  const Eigen::VectorXd kinv_c = full_.llt.solve(c);
  const double var = prior - c.dot(kinv_c);
  if (var < 0.0) clamp_count_->fetch_add(1, std::memory_order_relaxed);
  out.variance = std::clamp(var, 0.0, prior);
  if (with_gradient && vs.dim > 0) {
    // Stationary base kernels: k_v(x, x) does not depend on x.
    out.mean_gradient = dc.transpose() * full_.alpha;
    out.variance_gradient = -2.0 * dc.transpose() * kinv_c;
  }
  return out;
}

namespace {

struct EvidenceInputs {
  const std::vector<LinearizedPoint>& points;
  const Eigen::VectorXd& targets;
  const Eigen::VectorXd& noise;
};

Evidence evidence_for(const AddTreeKernel& kernel, const EvidenceInputs& in, const Eigen::MatrixXd* prebuilt_ky,
                      const Eigen::LLT<Eigen::MatrixXd>* prebuilt_llt) {
  const auto n = static_cast<Eigen::Index>(in.points.size());
  Evidence ev;
  ev.gradient = Eigen::VectorXd::Zero(kernel.layout().size() + 1);
  if (n == 0) return ev;

  Eigen::LLT<Eigen::MatrixXd> local;
  const Eigen::LLT<Eigen::MatrixXd>* llt = prebuilt_llt;
  if (!llt) {
    Eigen::MatrixXd ky = prebuilt_ky ? *prebuilt_ky : gram(kernel, in.points);
    if (!prebuilt_ky) ky.diagonal() += in.noise;
    factorize_with_jitter(ky, local, JitterPolicy{});
    llt = &local;
  }
  const Eigen::VectorXd alpha = llt->solve(in.targets);
  const double log_det = 2.0 * llt->matrixL().nestedExpression().diagonal().array().log().sum();
  ev.value = -0.5 * in.targets.dot(alpha) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  Eigen::MatrixXd W = llt->solve(Eigen::MatrixXd::Identity(n, n));
  W = alpha * alpha.transpose() - W;
  const auto p = kernel.layout().size();
  ev.gradient.head(p) = 0.5 * contract_gram_gradients(kernel, in.points, W);
  ev.gradient[p] = 0.5 * W.diagonal().dot(in.noise);
  return ev;
}

}  // namespace

Evidence log_marginal_likelihood(const GpModel& model) {
  const auto& d = model.data();
  return evidence_for(model.kernel(), {d.points, d.targets, d.noise}, &model.noisy_gram(), &model.factorization());
}

AddTreeKernel cap_lengthscales(AddTreeKernel kernel, double cap) {
  for (int v = 0; v < kernel.space().spec.size(); ++v) {
    auto p = kernel.params(v);
    p.lengthscales = p.lengthscales.cwiseMin(cap);
    kernel.set_params(v, std::move(p));
  }
  return kernel;
}

FitResult fit_hyperparameters(const AddTreeKernel& kernel_template, const Dataset& data, const FitOptions& opt) {
  data.validate();
  if (opt.restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (data.empty()) throw std::invalid_argument("cannot fit hyperparameters without observations");

  const auto& layout = kernel_template.layout();
  const int pk = layout.size();
  const int p = pk + (opt.fit_noise ? 1 : 0);
  Eigen::VectorXd lo(p), hi(p);
  for (std::size_t v = 0; v < layout.lengthscale_slots.size(); ++v) {
    for (int s : layout.lengthscale_slots[v]) {
      lo[s] = opt.log_lengthscale_min;
      hi[s] = opt.log_lengthscale_max;
    }
    if (layout.scale_slots[v] >= 0) {
      lo[layout.scale_slots[v]] = opt.log_scale_min;
      hi[layout.scale_slots[v]] = opt.log_scale_max;
    }
  }
  const double base_noise = data.noise.size() > 0 ? data.noise.mean() : 0.0;
  if (opt.fit_noise) {
    lo[pk] = opt.log_noise_min;
    hi[pk] = opt.log_noise_max;
  }

  Eigen::VectorXd x0(p);
  x0.head(pk) = kernel_template.log_params();
  if (opt.fit_noise) x0[pk] = std::log(std::max(base_noise, std::exp(opt.log_noise_min)));
  x0 = x0.cwiseMax(lo).cwiseMin(hi);

  std::vector<Eigen::VectorXd> starts{x0};
  Rng rng(opt.seed);
  for (int r = 1; r < opt.restarts; ++r) {
    Eigen::VectorXd s(p);
    for (int i = 0; i < p; ++i) {
      double a = lo[i], b = hi[i];
      if (opt.init_log_range && !(opt.fit_noise && i == pk)) {
        a = std::max(a, opt.init_log_range->first);
        b = std::min(b, opt.init_log_range->second);
      }
      s[i] = rng.uniform(a, b);
    }
    starts.push_back(std::move(s));
  }

  auto negative_evidence = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) -> double {
    AddTreeKernel k = kernel_template;
    k.set_log_params(theta.head(pk));
    Eigen::VectorXd noise = data.noise;
    if (opt.fit_noise) noise.setConstant(std::exp(theta[pk]));
    try {
      const Evidence ev = evidence_for(k, {data.points, data.targets, noise}, nullptr, nullptr);
      grad = -ev.gradient.head(p);
      if (!std::isfinite(ev.value) || !grad.allFinite()) return std::numeric_limits<double>::infinity();
      return -ev.value;
    } catch (const FactorizationError&) {
      grad = Eigen::VectorXd::Zero(p);
      return std::numeric_limits<double>::infinity();
    }
  };

  FitResult result;
  result.restart_values.assign(starts.size(), -std::numeric_limits<double>::infinity());
  std::vector<MinimizeResult> runs(starts.size());
  std::vector<std::exception_ptr> errors(starts.size());
  auto run_one = [&](std::size_t i) {
    try {
      runs[i] = minimize_bounded(negative_evidence, starts[i], lo, hi, opt.optimizer);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (opt.threads <= 1) {
    for (std::size_t i = 0; i < starts.size(); ++i) run_one(i);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t i = 0; i < starts.size(); ++i) jobs.push_back(std::async(std::launch::async, run_one, i));
    for (auto& j : jobs) j.get();
  }

  int best = -1;
  std::exception_ptr last_error;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (errors[i] || !std::isfinite(runs[i].value)) {
      ++result.failed_restarts;
      if (errors[i]) last_error = errors[i];
      continue;
    }
    result.restart_values[i] = -runs[i].value;
    if (best < 0 || runs[i].value < runs[static_cast<std::size_t>(best)].value) best = static_cast<int>(i);
  }
  if (best < 0) {
    if (last_error) std::rethrow_exception(last_error);
    throw FactorizationError("every hyperparameter restart failed");
  }

  const auto& theta = runs[static_cast<std::size_t>(best)].x;
  result.kernel = kernel_template;
  result.kernel.set_log_params(theta.head(pk));
  if (opt.lengthscale_cap) result.kernel = cap_lengthscales(std::move(result.kernel), *opt.lengthscale_cap);
  result.noise = opt.fit_noise ? std::exp(theta[pk]) : base_noise;
  result.log_likelihood = -runs[static_cast<std::size_t>(best)].value;
  return result;
}

}  // namespace addtree
