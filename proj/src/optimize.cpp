#include "addtree/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <future>
#include <limits>
#include <stdexcept>

namespace addtree {

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

// Components that may move: not pinned at a bound by an outward gradient.
Eigen::ArrayXd free_mask(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi) {
  Eigen::ArrayXd mask = Eigen::ArrayXd::Ones(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if ((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)) mask[i] = 0.0;
  return mask;
}

}  // namespace

MinimizeResult minimize_bounded(const DifferentiableFn& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                                const Eigen::VectorXd& upper, const BoundedLbfgsOptions& opt) {
  const auto n = x0.size();
  if (lower.size() != n || upper.size() != n) throw std::invalid_argument("bounds do not match x0");
  if ((lower.array() > upper.array()).any()) throw std::invalid_argument("lower bound above upper bound");

  MinimizeResult res;
  res.x = project(x0, lower, upper);
  if (n == 0) {
    Eigen::VectorXd g;
    res.value = f(res.x, g);
    res.evaluations = 1;
    res.converged = true;
    return res;
  }

  Eigen::VectorXd g(n);
  double fx = f(res.x, g);
  res.evaluations = 1;
  if (!std::isfinite(fx)) throw std::runtime_error("objective is not finite at the starting point");

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    const Eigen::VectorXd pg = project(res.x - g, lower, upper) - res.x;
    if (pg.lpNorm<Eigen::Infinity>() < opt.projected_gradient_tol) {
      res.converged = true;
      break;
    }
    const Eigen::ArrayXd mask = free_mask(res.x, g, lower, upper);

    // Two-loop recursion on the free subspace.
    Eigen::VectorXd q = (g.array() * mask).matrix();
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(q);
      q -= alpha[k] * (y_hist[k].array() * mask).matrix();
    }
    if (!s_hist.empty()) {
      const auto& yl = y_hist.back();
      q *= s_hist.back().dot(yl) / yl.squaredNorm();
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * (y_hist[k].array() * mask).matrix().dot(q);
      q += (alpha[k] - beta) * (s_hist[k].array() * mask).matrix();
    }
    Eigen::VectorXd d = -(q.array() * mask).matrix();
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -(g.array() * mask).matrix();
      slope = g.dot(d);
      if (!(slope < 0.0)) {
        res.converged = true;
        break;
      }
    }

    double step = 1.0;
    if (s_hist.empty()) step = std::min(1.0, 1.0 / std::max(d.lpNorm<Eigen::Infinity>(), 1e-12));

    Eigen::VectorXd x_new, g_new(n);
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 40 && res.evaluations < opt.max_evaluations; ++ls) {
      x_new = project(res.x + step * d, lower, upper);
      f_new = f(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * g.dot(x_new - res.x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const double f_old = fx;
    res.x = x_new;
    fx = f_new;
    g = g_new;
    if (sy > 1e-12 * y.squaredNorm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (std::abs(f_old - fx) <= opt.relative_function_tol * std::max({std::abs(f_old), std::abs(fx), 1.0})) {
      res.converged = true;
      ++res.iterations;
      break;
    }
    if (res.evaluations >= opt.max_evaluations) break;
  }
  res.value = fx;
  return res;
}

MinimizeResult multistart_minimize(const DifferentiableFn& f, const std::vector<Eigen::VectorXd>& starts,
                                   const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                   const BoundedLbfgsOptions& options, int threads) {
  if (starts.empty()) throw std::invalid_argument("multistart needs at least one start");

  std::vector<MinimizeResult> results(starts.size());
  std::vector<std::exception_ptr> errors(starts.size());
  auto run_one = [&](std::size_t i) {
    try {
      results[i] = minimize_bounded(f, starts[i], lower, upper, options);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (threads <= 1) {
    for (std::size_t i = 0; i < starts.size(); ++i) run_one(i);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t i = 0; i < starts.size(); ++i) jobs.push_back(std::async(std::launch::async, run_one, i));
    for (auto& j : jobs) j.get();
  }

  int best = -1;
  std::exception_ptr last_error;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (errors[i]) {
      last_error = errors[i];
      continue;
    }
    if (!std::isfinite(results[i].value)) continue;
    if (best < 0 || results[i].value < results[static_cast<std::size_t>(best)].value) best = static_cast<int>(i);
  }
  if (best < 0) {
    if (last_error) std::rethrow_exception(last_error);
    throw std::runtime_error("no start produced a finite objective value");
  }
  return results[static_cast<std::size_t>(best)];
}

std::vector<Eigen::VectorXd> halton_points(int count, int dim, const Eigen::VectorXd& rotation) {
  static constexpr int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                   59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113};
  if (dim > static_cast<int>(std::size(primes))) throw std::invalid_argument("Halton sequence limited to 30 dims");
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int i = 1; i <= count; ++i) {
    Eigen::VectorXd p(dim);
    for (int d = 0; d < dim; ++d) {
      double frac = 1.0, value = 0.0;
      for (int k = i; k > 0; k /= primes[d]) {
        frac /= primes[d];
        value += frac * (k % primes[d]);
      }
      value += rotation.size() > d ? rotation[d] : 0.0;
      p[d] = value - std::floor(value);
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

}  // namespace addtree
