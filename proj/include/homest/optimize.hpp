#pragma once

// Derivative-free minimization: Nelder-Mead simplex with restarts, and a
// bracketed golden-section search for scalar problems.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace homest {

using Objective = std::function<double(std::span<const double>)>;

struct NelderMeadOptions {
  std::size_t max_evaluations = 2000;
  /// Converged when the spread of simplex values is below
  /// tolerance * max(1, |f_best|) and the simplex diameter below
  /// sqrt(tolerance) * max(1, |x_best|).
  double tolerance = 1e-9;
  /// Initial simplex edge along each coordinate.
  double initial_step = 0.5;
};

struct OptimizeResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
  /// Index of the start that produced x.
  std::size_t best_start = 0;
};

OptimizeResult nelder_mead(const Objective& f, std::span<const double> x0,
                           const NelderMeadOptions& opts = {});

/// Runs nelder_mead from every start and keeps the lowest value; evaluations
/// are summed over starts and `converged` reports the winning run.
OptimizeResult nelder_mead_restarts(const Objective& f,
                                    const std::vector<std::vector<double>>& starts,
                                    const NelderMeadOptions& opts = {});

/// Global minimizer of f on [lo, hi]: coarse scan on `coarse` points, then
/// golden-section refinement of the best bracket until its width is below
/// `width`.  A constant f returns the midpoint.
double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                               std::size_t coarse = 64, double width = 1e-10);

}  // namespace homest
