#pragma once

#include <algorithm>
#include <cmath>

namespace cgff {

template <class Cdf>
KsResult ks_one_sample(std::vector<double> a, Cdf cdf) {
  KsResult r;
  if (a.empty()) return r;
  std::sort(a.begin(), a.end());
  const double n = double(a.size());
  double dmax = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    dmax = std::max({dmax, double(i + 1) / n - f, f - double(i) / n});
  }
  const double sn = std::sqrt(n);
  r.statistic = dmax;
  r.p_value = kolmogorov_q((sn + 0.12 + 0.11 / sn) * dmax);
  return r;
}

}  // namespace cgff
