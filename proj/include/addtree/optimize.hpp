#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace addtree {

// f(x, grad) -> value; grad is resized and filled by the callee.
using DifferentiableFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct BoundedLbfgsOptions {
  int memory = 8;
  int max_iterations = 200;
  int max_evaluations = 500;
  double projected_gradient_tol = 1e-6;
  double relative_function_tol = 1e-10;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

// Projected limited-memory BFGS on the box [lower, upper] with a backtracking
// Armijo search along the projected path. Variables sitting on a bound with
// the gradient pointing outward are frozen for the step.
MinimizeResult minimize_bounded(const DifferentiableFn& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                                const Eigen::VectorXd& upper, const BoundedLbfgsOptions& options = {});

// Runs minimize_bounded from every start and returns the best result (lowest
// value, earliest start on ties). Starts whose evaluation throws are skipped;
// if all of them throw, the last exception propagates.
MinimizeResult multistart_minimize(const DifferentiableFn& f, const std::vector<Eigen::VectorXd>& starts,
                                   const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                   const BoundedLbfgsOptions& options = {}, int threads = 1);

// Halton points in [0,1)^dim, shifted by `rotation` modulo 1.
std::vector<Eigen::VectorXd> halton_points(int count, int dim, const Eigen::VectorXd& rotation);

}  // namespace addtree
