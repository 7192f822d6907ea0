#include "cgff/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace cgff {

void RunningStats::add(double x) {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / double(n_);
  m2_ += delta * (x - mean_);
}

void RunningStats::merge(const RunningStats& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const int64_t n = n_ + o.n_;
  const double delta = o.mean_ - mean_;
  mean_ += delta * double(o.n_) / double(n);
  m2_ += o.m2_ + delta * delta * double(n_) * double(o.n_) / double(n);
  n_ = n;
}

double RunningStats::std_error() const { return n_ > 1 ? std::sqrt(variance() / double(n_)) : 0.0; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (p <= 0.0 || p >= 1.0) throw std::domain_error("normal_quantile needs p in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

Interval wilson_interval(int64_t k, int64_t n, double conf) {
  if (n <= 0) return {0.0, 1.0};
  const double z = normal_quantile(0.5 + conf / 2.0);
  const double p = double(k) / double(n);
  const double nn = double(n);
  const double denom = 1.0 + z * z / nn;
  const double center = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  if (lambda < 1.18) {
    // small-lambda form converges faster there
    const double y = std::exp(-M_PI * M_PI / (8.0 * lambda * lambda));
    double s = 0.0;
    for (int k = 1; k < 40; k += 2) s += std::pow(y, double(k * k));
    return std::clamp(1.0 - std::sqrt(2.0 * M_PI) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * double(k * k) * lambda * lambda);
    s += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  KsResult r;
  if (a.empty() || b.empty()) return r;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = double(a.size()), nb = double(b.size());
  size_t i = 0, j = 0;
  double dmax = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    dmax = std::max(dmax, std::abs(double(i) / na - double(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  r.statistic = dmax;
  r.p_value = kolmogorov_q((ne + 0.12 + 0.11 / ne) * dmax);
  return r;
}

CovarianceEstimate sample_covariance(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("covariance needs >= 2 paired samples");
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double c = 0.0;
  for (size_t i = 0; i < n; ++i) c += (x[i] - mx) * (y[i] - my);
  c /= double(n - 1);
  double v = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = (x[i] - mx) * (y[i] - my) - c;
    v += t * t;
  }
  v /= double(n - 1);
  return {c, std::sqrt(v / double(n))};
}

double two_mean_z(const RunningStats& a, const RunningStats& b) {
  const double se = std::hypot(a.std_error(), b.std_error());
  if (se == 0.0) return a.mean() == b.mean() ? 0.0 : INFINITY;
  return (a.mean() - b.mean()) / se;
}

double variance_std_error(const std::vector<double>& x) {
  const double n = double(x.size());
  if (x.size() < 4) return INFINITY;
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double t = (v - m) * (v - m);
    m2 += t;
    m4 += t * t;
  }
  m2 /= n;
  m4 /= n;
  return std::sqrt(std::max(0.0, (m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n));
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  const size_t k = std::min(v.size() - 1, size_t(q * double(v.size() - 1) + 0.5));
  std::nth_element(v.begin(), v.begin() + long(k), v.end());
  return v[k];
}

}  // namespace cgff
