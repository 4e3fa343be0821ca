#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace homest::stats {

double mean(std::span<const double> x);

/// Unbiased sample variance (n - 1 denominator); 0 for fewer than two values.
double variance(std::span<const double> x);

/// Standard error of the mean.
double standard_error(std::span<const double> x);

/// Sample skewness g1 (biased moment estimator).
double skewness(std::span<const double> x);

/// Sample excess kurtosis g2 (biased moment estimator, normal -> 0).
double excess_kurtosis(std::span<const double> x);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double stderr_mean = 0.0;
};

Moments moments(std::span<const double> x);

/// Runs body(i) for i in [0, count) on up to `threads` workers.  Each index
/// runs exactly once; results must be written to index-addressed storage so
/// the outcome does not depend on scheduling.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

/// Worker cap used when a caller passes threads == 0.
unsigned default_threads();
void set_default_threads(unsigned n);

}  // namespace homest::stats
