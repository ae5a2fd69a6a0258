#pragma once

#include <stdexcept>
#include <vector>

namespace addtree::bench {

// Raised when a test statistic is undefined, e.g. all paired differences zero.
class UndefinedTestError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct WilcoxonResult {
  double p = 1.0;
  double statistic = 0.0;  // W+, sum of ranks of positive differences
  int n = 0;               // pairs left after dropping zero differences
  bool exact = false;
};

// One-sided signed-rank test of H1: a - b is shifted above zero. Zero
// differences are dropped and tied magnitudes get average ranks. For
// n <= 25 the p-value comes from the exact permutation distribution of the
// (possibly tied) ranks; above that from the normal approximation with tie
// correction.
WilcoxonResult wilcoxon_one_sided(const std::vector<double>& a, const std::vector<double>& b);

inline constexpr int kWilcoxonExactMax = 25;

// Kolmogorov-Smirnov distance between the empirical distribution of
// `samples` and U(0, 1).
double ks_uniform_statistic(std::vector<double> samples);

double median(std::vector<double> v);
double mean(const std::vector<double>& v);

}  // namespace addtree::bench
