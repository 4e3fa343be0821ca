#include "homest/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "homest/errors.hpp"

namespace homest {

namespace {

double finite_or_inf(double v) {
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

OptimizeResult nelder_mead(const Objective& f, std::span<const double> x0,
                           const NelderMeadOptions& opts) {
  const std::size_t n = x0.size();
  if (n == 0) throw PreconditionError("nelder_mead: empty start vector");
  using Point = std::vector<double>;
  std::vector<Point> simplex(n + 1, Point(x0.begin(), x0.end()));
  std::vector<double> values(n + 1);
  std::size_t evals = 0;
  auto eval = [&](const Point& p) {
    ++evals;
    return finite_or_inf(f(p));
  };
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += opts.initial_step;
  for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  Point centroid(n), xr(n), xe(n), xc(n);
  bool converged = false;
  const double sqrt_tol = std::sqrt(opts.tolerance);

  while (evals < opts.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

    double diameter = 0.0, xnorm = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t d = 0; d < n; ++d)
        diameter = std::max(diameter, std::abs(simplex[i][d] - simplex[best][d]));
    for (double v : simplex[best]) xnorm = std::max(xnorm, std::abs(v));
    const double spread = values[worst] - values[best];
    if (std::isfinite(spread) &&
        spread <= opts.tolerance * std::max(1.0, std::abs(values[best])) &&
        diameter <= sqrt_tol * std::max(1.0, xnorm)) {
      converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d] / static_cast<double>(n);
    }
    for (std::size_t d = 0; d < n; ++d) xr[d] = centroid[d] + (centroid[d] - simplex[worst][d]);
    const double fr = eval(xr);

    if (fr < values[best]) {
      for (std::size_t d = 0; d < n; ++d) xe[d] = centroid[d] + 2.0 * (centroid[d] - simplex[worst][d]);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        values[worst] = fe;
      } else {
        simplex[worst] = xr;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = xr;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    for (std::size_t d = 0; d < n; ++d) {
      const double target = outside ? xr[d] : simplex[worst][d];
      xc[d] = centroid[d] + 0.5 * (target - centroid[d]);
    }
    const double fc = eval(xc);
    if (fc < (outside ? fr : values[worst])) {
      simplex[worst] = xc;
      values[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t d = 0; d < n; ++d)
        simplex[i][d] = simplex[best][d] + 0.5 * (simplex[i][d] - simplex[best][d]);
      values[i] = eval(simplex[i]);
    }
  }

  const auto it = std::min_element(values.begin(), values.end());
  OptimizeResult res;
  res.x = simplex[static_cast<std::size_t>(it - values.begin())];
  res.value = *it;
  res.evaluations = evals;
  res.converged = converged && std::isfinite(res.value);
  return res;
}

OptimizeResult nelder_mead_restarts(const Objective& f,
                                    const std::vector<std::vector<double>>& starts,
                                    const NelderMeadOptions& opts) {
  if (starts.empty()) throw PreconditionError("nelder_mead_restarts: no starts");
  OptimizeResult best;
  best.value = std::numeric_limits<double>::infinity();
  std::size_t total = 0;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    auto r = nelder_mead(f, starts[s], opts);
    total += r.evaluations;
    if (s == 0 || r.value < best.value) {
      best = std::move(r);
      best.best_start = s;
    }
  }
  best.evaluations = total;
  return best;
}

double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                               std::size_t coarse, double width) {
  if (!(hi > lo)) throw PreconditionError("golden_section_minimize: need lo < hi");
  if (coarse < 3) coarse = 3;
  std::vector<double> xs(coarse), fs(coarse);
  for (std::size_t i = 0; i < coarse; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(coarse - 1);
    fs[i] = finite_or_inf(f(xs[i]));
  }
  if (std::all_of(fs.begin(), fs.end(), [&](double v) { return v == fs.front(); }))
    return 0.5 * (lo + hi);
  const auto j = static_cast<std::size_t>(std::min_element(fs.begin(), fs.end()) - fs.begin());
  double a = xs[j == 0 ? 0 : j - 1];
  double b = xs[j + 1 == coarse ? j : j + 1];

  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = finite_or_inf(f(c)), fd = finite_or_inf(f(d));
  while (b - a > width) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = finite_or_inf(f(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = finite_or_inf(f(d));
    }
  }
  double x = 0.5 * (a + b);
  double fx = finite_or_inf(f(x));
  // The bracket can collapse onto an interval end; keep the exact bound then.
  for (double e : {lo, hi}) {
    if (std::abs(x - e) <= width) {
      const double fe = finite_or_inf(f(e));
      if (fe <= fx) {
        x = e;
        fx = fe;
      }
    }
  }
  return x;
}

}  // namespace homest
