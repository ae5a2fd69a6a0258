#pragma once

#include "addtree/kernels.hpp"
#include "addtree/optimize.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace addtree {

class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::vector<LinearizedPoint> points;
  Eigen::VectorXd targets;
  Eigen::VectorXd noise;  // per-observation noise variance

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void add(LinearizedPoint x, double y, double noise_variance);
  void set_noise(double noise_variance) { noise.setConstant(static_cast<Eigen::Index>(size()), noise_variance); }
  void validate() const;
};

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

// Rows of the training set whose paths share a contributing vertex with the
// query leaf; every other row has zero cross-covariance with the query.
struct SelectionView {
  int leaf = 0;
  std::vector<Eigen::Index> rows;
  bool is_full = false;
};

struct ComponentPosterior {
  double mean = 0.0;
  double variance = 0.0;
  Eigen::VectorXd mean_gradient;
  Eigen::VectorXd variance_gradient;
};

// Jitter schedule: none, then 1e-10 * mean diagonal, x10 up to 1e-4.
struct JitterPolicy {
  double initial = 1e-10;
  double maximum = 1e-4;
  double factor = 10.0;
};

class GpModel {
 public:
  // An empty dataset yields the prior.
  static GpModel fit(AddTreeKernel kernel, Dataset data, const JitterPolicy& jitter = {});

  const AddTreeKernel& kernel() const { return kernel_; }
  const Dataset& data() const { return data_; }
  std::size_t size() const { return data_.size(); }

  // Cached factor of K_T + Sigma (+ jitter * I).
  const Eigen::LLT<Eigen::MatrixXd>& factorization() const { return full_.llt; }
  const Eigen::MatrixXd& noisy_gram() const { return ky_; }
  const Eigen::VectorXd& alpha() const { return full_.alpha; }
  double jitter() const { return jitter_; }

  SelectionView selection(int leaf) const;

  // Predictive distribution from the selected subset of observations.
  Posterior posterior(const LinearizedPoint& x) const;
  // Same quantity from the full factorization (no selection).
  Posterior posterior_full(const LinearizedPoint& x) const;

  // Posterior of a single vertex's additive component at `values`.
  ComponentPosterior component_posterior(int vertex, const Eigen::Ref<const Eigen::VectorXd>& values,
                                         bool with_gradient = false) const;

  // Number of predictive variances clamped at zero so far.
  std::size_t clamped_variances() const { return clamp_count_->load(); }

 private:
  struct Factor {
    std::vector<Eigen::Index> rows;
    bool is_full = false;
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd alpha;
  };

  Posterior predict(const Factor& f, const LinearizedPoint& x) const;
  double clamp_variance(double v, double prior) const;

  AddTreeKernel kernel_;
  Dataset data_;
  Eigen::MatrixXd ky_;
  double jitter_ = 0.0;
  Factor full_;
  // Per query leaf; null when the selection is the whole dataset.
  std::vector<std::shared_ptr<const Factor>> per_leaf_;
  std::shared_ptr<std::atomic<std::size_t>> clamp_count_ = std::make_shared<std::atomic<std::size_t>>(0);
};

// Cholesky with jitter escalation; returns the jitter used.
double factorize_with_jitter(const Eigen::MatrixXd& A, Eigen::LLT<Eigen::MatrixXd>& llt, const JitterPolicy& policy);

struct Evidence {
  double value = 0.0;
  // d/d theta over the kernel's log-parameter layout, followed by
  // d/d log(noise multiplier), the log-noise derivative for homoscedastic noise.
  Eigen::VectorXd gradient;
};

Evidence log_marginal_likelihood(const GpModel& model);

struct FitOptions {
  int restarts = 10;
  double log_lengthscale_min = std::log(1e-3);
  double log_lengthscale_max = std::log(1e3);
  double log_scale_min = std::log(1e-3);
  double log_scale_max = std::log(1e3);
  bool fit_noise = true;
  double log_noise_min = std::log(1e-6);
  double log_noise_max = std::log(10.0);
  // Range for the log-uniform restart draws; the bounds above when unset.
  std::optional<std::pair<double, double>> init_log_range;
  // theta = min(theta_MAP, cap) on every lengthscale after fitting.
  std::optional<double> lengthscale_cap;
  std::uint64_t seed = 0;
  int threads = 1;
  BoundedLbfgsOptions optimizer{.memory = 8, .max_iterations = 100, .max_evaluations = 200,
                                .projected_gradient_tol = 1e-5, .relative_function_tol = 1e-9};
};

struct FitResult {
  AddTreeKernel kernel;
  double noise = 0.0;  // fitted shared noise variance, or the input's mean noise when not fitted
  double log_likelihood = 0.0;
  std::vector<double> restart_values;  // -inf for failed restarts
  int failed_restarts = 0;
};

// Multi-start maximization of the evidence in log-parameter space. The first
// start is the template's own parameters.
FitResult fit_hyperparameters(const AddTreeKernel& kernel_template, const Dataset& data,
                              const FitOptions& options = {});

// Caps every lengthscale at `cap`.
AddTreeKernel cap_lengthscales(AddTreeKernel kernel, double cap);

}  // namespace addtree
