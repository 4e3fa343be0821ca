#include "homest/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "homest/errors.hpp"

namespace homest::stats {

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double standard_error(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

namespace {

double central_moment(std::span<const double> x, double m, int order) {
  double s = 0.0;
  for (double v : x) s += std::pow(v - m, order);
  return s / static_cast<double>(x.size());
}

}  // namespace

double skewness(std::span<const double> x) {
  if (x.size() < 3) return 0.0;
  const double m = mean(x);
  const double m2 = central_moment(x, m, 2);
  if (m2 <= 0.0) return 0.0;
  return central_moment(x, m, 3) / std::pow(m2, 1.5);
}

double excess_kurtosis(std::span<const double> x) {
  if (x.size() < 4) return 0.0;
  const double m = mean(x);
  const double m2 = central_moment(x, m, 2);
  if (m2 <= 0.0) return 0.0;
  return central_moment(x, m, 4) / (m2 * m2) - 3.0;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw PreconditionError("loglog_slope: need at least two aligned points");
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0 || y[i] <= 0.0)
      throw PreconditionError("loglog_slope: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = mean(lx), my = mean(ly);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

Moments moments(std::span<const double> x) {
  return {mean(x), variance(x), standard_error(x)};
}

namespace {
std::atomic<unsigned> g_default_threads{0};
}

unsigned default_threads() {
  const unsigned n = g_default_threads.load();
  if (n > 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

void set_default_threads(unsigned n) { g_default_threads.store(n); }

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = default_threads();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace homest::stats
