#pragma once

#include "addtree/tree_space.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace addtree {

enum class KernelKind { SquaredExponential, Matern32, Matern52 };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

struct BaseKernelParams {
  KernelKind kind = KernelKind::SquaredExponential;
  Eigen::VectorXd lengthscales;  // one per continuous dimension
  double output_scale = 1.0;

  static BaseKernelParams isotropic(KernelKind kind, int dim, double lengthscale, double scale = 1.0) {
    return {kind, Eigen::VectorXd::Constant(dim, lengthscale), scale};
  }
  void validate() const;
};

namespace detail {

// Correlation rho(r) and w(r) = -rho'(r) / r, both finite at r = 0.
template <typename Scalar>
inline void radial_profile(KernelKind kind, Scalar r2, Scalar& rho, Scalar& w) {
  using std::exp;
  using std::sqrt;
  switch (kind) {
    case KernelKind::SquaredExponential:
      rho = exp(Scalar(-0.5) * r2);
      w = rho;
      return;
    case KernelKind::Matern32: {
      const Scalar s = sqrt(Scalar(3) * r2);
      const Scalar e = exp(-s);
      rho = (Scalar(1) + s) * e;
      w = Scalar(3) * e;
      return;
    }
    case KernelKind::Matern52: {
      const Scalar s = sqrt(Scalar(5) * r2);
      const Scalar e = exp(-s);
      rho = (Scalar(1) + s + Scalar(5) / Scalar(3) * r2) * e;
      w = Scalar(5) / Scalar(3) * (Scalar(1) + s) * e;
      return;
    }
  }
  throw std::logic_error("unknown kernel kind");
}

template <typename DA, typename DB>
inline typename DA::Scalar scaled_sqdist(const Eigen::VectorXd& lengthscales, const Eigen::MatrixBase<DA>& a,
                                         const Eigen::MatrixBase<DB>& b) {
  return ((a - b).array() / lengthscales.array().template cast<typename DA::Scalar>()).square().sum();
}

}  // namespace detail

// output_scale * correlation(a, b). Empty inputs give the constant kernel.
template <typename DA, typename DB>
typename DA::Scalar base_kernel_eval(const BaseKernelParams& p, const Eigen::MatrixBase<DA>& a,
                                     const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  if (a.size() != b.size() || a.size() != p.lengthscales.size())
    throw std::invalid_argument("base kernel dimension mismatch: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + " with " + std::to_string(p.lengthscales.size()) +
                                " lengthscales");
  if (a.size() == 0) return Scalar(p.output_scale);
  Scalar rho, w;
  detail::radial_profile<Scalar>(p.kind, detail::scaled_sqdist(p.lengthscales, a, b), rho, w);
  return Scalar(p.output_scale) * rho;
}

// d k(a, b) / d a.
template <typename DA, typename DB>
Eigen::VectorXd base_kernel_input_gradient(const BaseKernelParams& p, const Eigen::MatrixBase<DA>& a,
                                           const Eigen::MatrixBase<DB>& b) {
  if (a.size() == 0) return {};
  double rho, w;
  detail::radial_profile<double>(p.kind, detail::scaled_sqdist(p.lengthscales, a, b), rho, w);
  return -p.output_scale * w * ((a - b).array() / p.lengthscales.array().square()).matrix();
}

// How dimension-0 vertices enter the Add-Tree sum.
enum class ZeroDimPolicy {
  // Constant kernel output_scale * delta: every pair of points sharing the
  // vertex gets the same covariance contribution.
  Constant,
  // The vertex contributes nothing; it only routes the categorical choice.
  Ignore,
};

// Maps kernel hyperparameters onto a flat log-space parameter vector.
struct ParameterLayout {
  // Per vertex: index of each log-lengthscale, and of the log-output-scale
  // (-1 when the vertex carries no parameters).
  std::vector<std::vector<int>> lengthscale_slots;
  std::vector<int> scale_slots;
  std::vector<std::string> names;
  int size() const { return static_cast<int>(names.size()); }
};

class AddTreeKernel {
 public:
  AddTreeKernel() = default;
  AddTreeKernel(SpacePtr space, std::vector<BaseKernelParams> params,
                ZeroDimPolicy zero_dim = ZeroDimPolicy::Constant, bool tie_output_scales = false);

  // Same kind, lengthscale and output scale at every vertex.
  static AddTreeKernel uniform(SpacePtr space, KernelKind kind, double lengthscale, double output_scale = 1.0,
                               ZeroDimPolicy zero_dim = ZeroDimPolicy::Constant);

  const TreeSpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  const BaseKernelParams& params(int vertex) const { return params_.at(static_cast<std::size_t>(vertex)); }
  const std::vector<BaseKernelParams>& all_params() const { return params_; }
  ZeroDimPolicy zero_dim_policy() const { return zero_dim_; }
  bool ties_output_scales() const { return tie_scales_; }

  // Whether the vertex can contribute a non-zero term.
  bool contributes(int vertex) const;
  // Whether two leaves share a contributing vertex (non-zero cross-covariance).
  bool leaves_interact(int leaf_i, int leaf_j) const {
    return interact_[static_cast<std::size_t>(leaf_i * space_->index.num_leaves() + leaf_j)];
  }

  // k_v(x|v, y|v) times the delta indicator.
  double vertex_term(int vertex, const LinearizedPoint& x, const LinearizedPoint& y) const;
  // Sum over the LCA path of the two points' leaves.
  double operator()(const LinearizedPoint& x, const LinearizedPoint& y) const;
  double prior_variance(const LinearizedPoint& x) const { return (*this)(x, x); }

  const ParameterLayout& layout() const { return layout_; }
  Eigen::VectorXd log_params() const;
  void set_log_params(const Eigen::Ref<const Eigen::VectorXd>& theta);
  void set_params(int vertex, BaseKernelParams p);

 private:
  void rebuild();

  SpacePtr space_;
  std::vector<BaseKernelParams> params_;
  ZeroDimPolicy zero_dim_ = ZeroDimPolicy::Constant;
  bool tie_scales_ = false;
  std::vector<bool> interact_;
  ParameterLayout layout_;
};

// 1 iff the vertex lies on both active paths; tag-slot equality, with
// negative sentinels never matching.
int delta_eval(const PathIndex& index, int vertex, const LinearizedPoint& x, const LinearizedPoint& y);

inline double add_tree_eval(const AddTreeKernel& k, const LinearizedPoint& x, const LinearizedPoint& y) {
  return k(x, y);
}

Eigen::MatrixXd gram(const AddTreeKernel& k, const std::vector<LinearizedPoint>& points);
Eigen::MatrixXd cross_gram(const AddTreeKernel& k, const std::vector<LinearizedPoint>& rows,
                           const std::vector<LinearizedPoint>& cols);
Eigen::VectorXd cross_covariance(const AddTreeKernel& k, const std::vector<LinearizedPoint>& points,
                                 const LinearizedPoint& x);

// dK / d theta_p for every entry of the kernel's log-parameter layout.
std::vector<Eigen::MatrixXd> gram_gradients(const AddTreeKernel& k, const std::vector<LinearizedPoint>& points);

// sum_ij W_ij dK_ij / d theta_p for every layout entry, without materializing
// the derivative matrices. W must be symmetric.
Eigen::VectorXd contract_gram_gradients(const AddTreeKernel& k, const std::vector<LinearizedPoint>& points,
                                        const Eigen::MatrixXd& W);

}  // namespace addtree
