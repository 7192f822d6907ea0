#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace cgff {

// Welford running mean/variance.
class RunningStats {
 public:
  void add(double x);
  void merge(const RunningStats& o);
  int64_t count() const { return n_; }
  double mean() const { return mean_; }
  // Unbiased sample variance.
  double variance() const { return n_ > 1 ? m2_ / double(n_ - 1) : 0.0; }
  double std_error() const;

 private:
  int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

double normal_cdf(double x);
double normal_upper_tail(double x);
double normal_quantile(double p);

// Wilson score interval for k successes in n trials at two-sided level conf.
Interval wilson_interval(int64_t k, int64_t n, double conf = 0.95);

// Kolmogorov limiting distribution: P(sqrt(n) D_n > lambda).
double kolmogorov_q(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
// One-sample test against a continuous CDF.
template <class Cdf>
KsResult ks_one_sample(std::vector<double> a, Cdf cdf);

// Unbiased sample covariance and its standard error from paired draws.
struct CovarianceEstimate {
  double value = 0.0;
  double std_error = 0.0;
};
CovarianceEstimate sample_covariance(const std::vector<double>& x, const std::vector<double>& y);

// z-score of the difference of two independent mean estimates.
double two_mean_z(const RunningStats& a, const RunningStats& b);
// Variance standard error from the fourth central moment.
double variance_std_error(const std::vector<double>& x);

double quantile(std::vector<double> v, double q);

}  // namespace cgff

#include "cgff/stats_impl.hpp"
