#pragma once

#include "addtree/gp.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

namespace addtree {

// Adaptive GP-UCB schedule. B_t = b(t) g(t)^d B0 inflates the norm bound and
// theta_t = theta0 / g(t) shrinks the lengthscales; g(0) = b(0) = 1 and both
// are non-decreasing.
struct UcbSchedule {
  double theta0 = 1.0;
  double B0 = 1.0;
  double delta = 0.1;
  int d = 1;  // total continuous dimension of the space
  std::function<double(double)> g = [](double) { return 1.0; };
  std::function<double(double)> b = [](double) { return 1.0; };

  // g(t) = 1 + gamma_g log(1 + t), b(t) = 1 + gamma_b log(1 + t).
  static UcbSchedule logarithmic(double theta0, double B0, double delta, double gamma_g, double gamma_b, int d);

  double norm_bound(double t) const;
  double lengthscale_cap(double t) const { return theta0 / g(t); }
};

// beta_t, the square of B_t + 4 sigma sqrt(I + 1 + ln(1/delta)).
double beta(const UcbSchedule& schedule, double t, double info_gain, double noise_std);

// 1/2 log det(I + K / sigma^2) over the model's observations. Requires
// homoscedastic noise; variances below `noise_floor` are raised to it, and a
// zero floor with zero noise is an error.
double mutual_information(const GpModel& model, double noise_floor = 0.0);

// Homoscedastic noise standard deviation of a model, floored.
double noise_std(const GpModel& model, double noise_floor = 0.0);

double ucb(const GpModel& model, const LinearizedPoint& point, double beta);

struct ProposeOptions {
  int starts = 5;                  // local searches per vertex
  int candidates = 64;             // low-discrepancy screening points per vertex
  int max_evaluations = 400;       // per-vertex evaluation budget
  bool parallel = false;           // run the per-vertex searches concurrently
  std::uint64_t seed = 0;
  double noise_floor = 1e-6;
};

struct VertexProposal {
  Eigen::VectorXd x;
  double value = 0.0;  // mu^v + sqrt(beta) sigma^v at x
  int evaluations = 0;
};

struct Proposal {
  std::vector<VertexProposal> vertices;  // indexed by vertex
  std::vector<double> path_values;       // U per leaf
  int leaf = 0;
  Eigen::VectorXd values;                // path-ordered continuous values
  LinearizedPoint point;
  double beta = 0.0;
  double info_gain = 0.0;
};

// Per-vertex maximization of the component UCB, then the path with the largest
// summed UCB (lowest leaf index on ties).
Proposal propose(const GpModel& model, const UcbSchedule& schedule, double t, const ProposeOptions& options = {});
Proposal propose_with_beta(const GpModel& model, double beta, const ProposeOptions& options = {});

// Maximizes one vertex's component UCB over its box.
VertexProposal maximize_component_ucb(const GpModel& model, int vertex, double beta, const ProposeOptions& options);

// Splits a regret ratio rho = reference / estimate between b and g:
// b = rho^share, g = rho^((1 - share) / d). No adaptation when rho <= 1.
std::pair<double, double> split_slack(double ratio, double b_share, int d);

struct ScheduleRealization {
  std::vector<double> t;
  std::vector<double> estimate;   // unadapted regret estimate sqrt(C1 t beta_t I_t)
  std::vector<double> reference;
  std::vector<double> g;
  std::vector<double> b;
};

// Unadapted regret estimate at t = 1..n from prefixes of the model's data.
std::vector<double> regret_estimate(const GpModel& model, const UcbSchedule& base, double noise_floor = 1e-6);

// Matches b(t) g(t)^d * estimate(t) to reference(t), keeping g and b
// non-decreasing in t.
ScheduleRealization select_schedule(const std::function<double(double)>& reference,
                                    const std::vector<double>& estimate, int d, double b_share = 0.5);
ScheduleRealization select_schedule(const std::function<double(double)>& reference, const GpModel& model,
                                    const UcbSchedule& base, double b_share = 0.5, double noise_floor = 1e-6);

// Least-squares gamma for v(t) ~ 1 + gamma log(1 + t), clamped at zero.
double fit_log_growth(const std::vector<double>& t, const std::vector<double>& values);

}  // namespace addtree
