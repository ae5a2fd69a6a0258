#include "addtree/kernels.hpp"

#include <cmath>

namespace addtree {

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::SquaredExponential: return "se";
    case KernelKind::Matern32: return "matern32";
    case KernelKind::Matern52: return "matern52";
  }
  return "?";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "se" || name == "squared_exponential") return KernelKind::SquaredExponential;
  if (name == "matern32") return KernelKind::Matern32;
  if (name == "matern52") return KernelKind::Matern52;
  throw std::invalid_argument("unknown kernel kind '" + name + "'");
}

void BaseKernelParams::validate() const {
  if (!(output_scale > 0.0) || !std::isfinite(output_scale))
    throw std::invalid_argument("output scale must be positive and finite");
  for (Eigen::Index i = 0; i < lengthscales.size(); ++i)
    if (!(lengthscales[i] > 0.0) || !std::isfinite(lengthscales[i]))
      throw std::invalid_argument("lengthscale " + std::to_string(i) + " must be positive and finite");
}

AddTreeKernel::AddTreeKernel(SpacePtr space, std::vector<BaseKernelParams> params, ZeroDimPolicy zero_dim,
                             bool tie_output_scales)
    : space_(std::move(space)), params_(std::move(params)), zero_dim_(zero_dim), tie_scales_(tie_output_scales) {
  if (!space_) throw std::invalid_argument("kernel needs a tree space");
  if (static_cast<int>(params_.size()) != space_->spec.size())
    throw std::invalid_argument("kernel needs one parameter set per vertex");
  for (int v = 0; v < space_->spec.size(); ++v) {
    const auto& p = params_[static_cast<std::size_t>(v)];
    if (p.lengthscales.size() != space_->spec.vertex(v).dim)
      throw std::invalid_argument("vertex '" + space_->spec.vertex(v).id + "' needs " +
                                  std::to_string(space_->spec.vertex(v).dim) + " lengthscales");
    p.validate();
  }
  rebuild();
}

AddTreeKernel AddTreeKernel::uniform(SpacePtr space, KernelKind kind, double lengthscale, double output_scale,
                                     ZeroDimPolicy zero_dim) {
  std::vector<BaseKernelParams> params;
  for (const auto& v : space->spec.vertices())
    params.push_back(BaseKernelParams::isotropic(kind, v.dim, lengthscale, output_scale));
  return AddTreeKernel(std::move(space), std::move(params), zero_dim);
}

bool AddTreeKernel::contributes(int vertex) const {
  return space_->spec.vertex(vertex).dim > 0 || zero_dim_ == ZeroDimPolicy::Constant;
}

void AddTreeKernel::rebuild() {
  const auto& index = space_->index;
  const int leaves = index.num_leaves();
  interact_.assign(static_cast<std::size_t>(leaves * leaves), false);
  for (int i = 0; i < leaves; ++i)
    for (int j = 0; j < leaves; ++j)
      for (int v : lca_path(index, i, j))
        if (contributes(v)) interact_[static_cast<std::size_t>(i * leaves + j)] = true;

  layout_ = {};
  const int n = space_->spec.size();
  layout_.lengthscale_slots.resize(static_cast<std::size_t>(n));
  layout_.scale_slots.assign(static_cast<std::size_t>(n), -1);
  int shared_scale = -1;
  for (int v = 0; v < n; ++v) {
    if (!contributes(v)) continue;
    const auto& vs = space_->spec.vertex(v);
    for (int d = 0; d < vs.dim; ++d) {
      layout_.lengthscale_slots[static_cast<std::size_t>(v)].push_back(layout_.size());
      layout_.names.push_back(vs.id + ".log_lengthscale[" + std::to_string(d) + "]");
    }
    if (tie_scales_) {
      if (shared_scale == -1) {
        shared_scale = layout_.size();
        layout_.names.push_back("shared.log_output_scale");
      }
      layout_.scale_slots[static_cast<std::size_t>(v)] = shared_scale;
    } else {
      layout_.scale_slots[static_cast<std::size_t>(v)] = layout_.size();
      layout_.names.push_back(vs.id + ".log_output_scale");
    }
  }
  // tied: the first contributing vertex's scale wins
  if (tie_scales_ && shared_scale >= 0) {
    double s = 0.0;
    for (int v = 0; v < n; ++v)
      if (contributes(v)) {
        s = params_[static_cast<std::size_t>(v)].output_scale;
        break;
      }
    for (auto& p : params_) p.output_scale = s;
  }
}

Eigen::VectorXd AddTreeKernel::log_params() const {
  Eigen::VectorXd theta(layout_.size());
  for (std::size_t v = 0; v < params_.size(); ++v) {
    const auto& slots = layout_.lengthscale_slots[v];
    for (std::size_t d = 0; d < slots.size(); ++d)
      theta[slots[d]] = std::log(params_[v].lengthscales[static_cast<Eigen::Index>(d)]);
    if (layout_.scale_slots[v] >= 0) theta[layout_.scale_slots[v]] = std::log(params_[v].output_scale);
  }
  return theta;
}

void AddTreeKernel::set_log_params(const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (theta.size() != layout_.size()) throw std::invalid_argument("parameter vector has the wrong length");
  for (std::size_t v = 0; v < params_.size(); ++v) {
    const auto& slots = layout_.lengthscale_slots[v];
    for (std::size_t d = 0; d < slots.size(); ++d)
      params_[v].lengthscales[static_cast<Eigen::Index>(d)] = std::exp(theta[slots[d]]);
    if (layout_.scale_slots[v] >= 0) params_[v].output_scale = std::exp(theta[layout_.scale_slots[v]]);
  }
}

void AddTreeKernel::set_params(int vertex, BaseKernelParams p) {
  if (p.lengthscales.size() != space_->spec.vertex(vertex).dim)
    throw std::invalid_argument("lengthscale count does not match vertex dimension");
  p.validate();
  if (tie_scales_ && contributes(vertex))
    for (auto& q : params_) q.output_scale = p.output_scale;
  params_.at(static_cast<std::size_t>(vertex)) = std::move(p);
}

int delta_eval(const PathIndex& index, int vertex, const LinearizedPoint& x, const LinearizedPoint& y) {
  const int slot = index.vertex_offsets[static_cast<std::size_t>(vertex)].tag;
  const double tx = x.slots[slot];
  return tx >= 0.0 && tx == y.slots[slot] ? 1 : 0;
}

double AddTreeKernel::vertex_term(int vertex, const LinearizedPoint& x, const LinearizedPoint& y) const {
  if (!contributes(vertex) || delta_eval(space_->index, vertex, x, y) == 0) return 0.0;
  const auto& off = space_->index.vertex_offsets[static_cast<std::size_t>(vertex)];
  const auto len = off.end - off.begin;
  return base_kernel_eval(params_[static_cast<std::size_t>(vertex)], x.slots.segment(off.begin, len),
                          y.slots.segment(off.begin, len));
}

double AddTreeKernel::operator()(const LinearizedPoint& x, const LinearizedPoint& y) const {
  const auto& index = space_->index;
  const int a = index.lca(x.leaf, y.leaf);
  double k = 0.0;
  for (int v : index.leaf_paths[static_cast<std::size_t>(x.leaf)]) {
    if (contributes(v)) {
      const auto& off = index.vertex_offsets[static_cast<std::size_t>(v)];
      const auto len = off.end - off.begin;
      k += base_kernel_eval(params_[static_cast<std::size_t>(v)], x.slots.segment(off.begin, len),
                            y.slots.segment(off.begin, len));
    }
    if (v == a) break;
  }
  return k;
}

Eigen::MatrixXd gram(const AddTreeKernel& k, const std::vector<LinearizedPoint>& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = k(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < i; ++j) {
      K(i, j) = k(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]);
      K(j, i) = K(i, j);
    }
  }
  return K;
}

Eigen::MatrixXd cross_gram(const AddTreeKernel& k, const std::vector<LinearizedPoint>& rows,
                           const std::vector<LinearizedPoint>& cols) {
  Eigen::MatrixXd K(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = k(rows[i], cols[j]);
  return K;
}

Eigen::VectorXd cross_covariance(const AddTreeKernel& k, const std::vector<LinearizedPoint>& points,
                                 const LinearizedPoint& x) {
  Eigen::VectorXd c(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) c[static_cast<Eigen::Index>(i)] = k(points[i], x);
  return c;
}

std::vector<Eigen::MatrixXd> gram_gradients(const AddTreeKernel& k, const std::vector<LinearizedPoint>& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  const auto& layout = k.layout();
  const auto& space = k.space();
  std::vector<Eigen::MatrixXd> grads(static_cast<std::size_t>(layout.size()), Eigen::MatrixXd::Zero(n, n));

  for (int v = 0; v < space.spec.size(); ++v) {
    if (!k.contributes(v)) continue;
    const auto& p = k.params(v);
    const auto& off = space.index.vertex_offsets[static_cast<std::size_t>(v)];
    const int dim = off.end - off.begin;
    const auto& ls_slots = layout.lengthscale_slots[static_cast<std::size_t>(v)];
    const int scale_slot = layout.scale_slots[static_cast<std::size_t>(v)];
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& xi = points[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j <= i; ++j) {
        const auto& xj = points[static_cast<std::size_t>(j)];
        if (delta_eval(space.index, v, xi, xj) == 0) continue;
        const auto a = xi.slots.segment(off.begin, dim);
        const auto b = xj.slots.segment(off.begin, dim);
        double rho = 1.0, w = 0.0;
        if (dim > 0) detail::radial_profile<double>(p.kind, detail::scaled_sqdist(p.lengthscales, a, b), rho, w);
        const double kv = p.output_scale * rho;
        grads[static_cast<std::size_t>(scale_slot)](i, j) += kv;
        for (int d = 0; d < dim; ++d) {
          const double u = (a[d] - b[d]) / p.lengthscales[d];
          grads[static_cast<std::size_t>(ls_slots[static_cast<std::size_t>(d)])](i, j) += p.output_scale * w * u * u;
        }
      }
    }
  }
  for (auto& G : grads) G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
  return grads;
}

}  // namespace addtree

namespace addtree {

Eigen::VectorXd contract_gram_gradients(const AddTreeKernel& k, const std::vector<LinearizedPoint>& points,
                                        const Eigen::MatrixXd& W) {
  const auto n = static_cast<Eigen::Index>(points.size());
  const auto& layout = k.layout();
  const auto& space = k.space();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(layout.size());
  for (int v = 0; v < space.spec.size(); ++v) {
    if (!k.contributes(v)) continue;
    const auto& p = k.params(v);
    const auto& off = space.index.vertex_offsets[static_cast<std::size_t>(v)];
    const int dim = off.end - off.begin;
    const auto& ls_slots = layout.lengthscale_slots[static_cast<std::size_t>(v)];
    const int scale_slot = layout.scale_slots[static_cast<std::size_t>(v)];
    const Eigen::ArrayXd inv_ls = p.lengthscales.array().inverse();
    double scale_acc = 0.0;
    Eigen::ArrayXd ls_acc = Eigen::ArrayXd::Zero(dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& xi = points[static_cast<std::size_t>(i)];
      if (delta_eval(space.index, v, xi, xi) == 0) continue;
      const auto a = xi.slots.segment(off.begin, dim).array();
      for (Eigen::Index j = 0; j <= i; ++j) {
        const auto& xj = points[static_cast<std::size_t>(j)];
        if (delta_eval(space.index, v, xi, xj) == 0) continue;
        const double wij = (i == j ? 1.0 : 2.0) * W(i, j);
        if (dim == 0) {
          scale_acc += wij * p.output_scale;
          continue;
        }
        const Eigen::ArrayXd u = (a - xj.slots.segment(off.begin, dim).array()) * inv_ls;
        const Eigen::ArrayXd u2 = u.square();
        double rho, w;
        detail::radial_profile<double>(p.kind, u2.sum(), rho, w);
        scale_acc += wij * p.output_scale * rho;
        ls_acc += (wij * p.output_scale * w) * u2;
      }
    }
    out[scale_slot] += scale_acc;
    for (int d = 0; d < dim; ++d) out[ls_slots[static_cast<std::size_t>(d)]] += ls_acc[d];
  }
  return out;
}

}  // namespace addtree
