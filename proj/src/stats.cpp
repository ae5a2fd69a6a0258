#include "addtree/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace addtree::bench {

WilcoxonResult wilcoxon_one_sided(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired samples differ in length");
  if (a.size() < 5) throw std::invalid_argument("signed-rank test needs at least 5 pairs");

  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) d.push_back(a[i] - b[i]);
  if (d.empty()) throw UndefinedTestError("all paired differences are zero; the signed-rank test is undefined");

  const int n = static_cast<int>(d.size());
  std::vector<int> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return std::abs(d[i]) < std::abs(d[j]); });

  // doubled average ranks stay integral
  std::vector<int> rank2(d.size());
  double tie_term = 0.0;
  for (int i = 0; i < n;) {
    int j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    for (int k = i; k <= j; ++k) rank2[order[k]] = i + j + 2;
    const double t = j - i + 1;
    tie_term += t * t * t - t;
    i = j + 1;
  }

  int w2 = 0;
  for (int i = 0; i < n; ++i)
    if (d[i] > 0) w2 += rank2[i];

  WilcoxonResult r;
  r.n = n;
  r.statistic = w2 / 2.0;
  if (n <= kWilcoxonExactMax) {
    const int total = n * (n + 1);
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    for (int i = 0; i < n; ++i)
      for (int s = total; s >= rank2[i]; --s) count[s] += count[s - rank2[i]];
    double tail = 0.0;
    for (int s = w2; s <= total; ++s) tail += count[s];
    r.p = std::min(1.0, tail / std::ldexp(1.0, n));
    r.exact = true;
  } else {
    const double nn = n;
    const double mu = nn * (nn + 1) / 4.0;
    const double var = nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term / 48.0;
    const double z = (r.statistic - mu) / std::sqrt(var);
    r.p = 0.5 * std::erfc(z / std::sqrt(2.0));
  }
  return r;
}

double ks_uniform_statistic(std::vector<double> s) {
  if (s.empty()) throw std::invalid_argument("KS statistic of an empty sample");
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double D = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double u = std::clamp(s[i], 0.0, 1.0);
    D = std::max({D, (static_cast<double>(i) + 1) / n - u, u - static_cast<double>(i) / n});
  }
  return D;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace addtree::bench
