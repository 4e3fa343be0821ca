#pragma once

// Two-point boundary value problem -(k p')' = f on [a, b], p(a) = p(b) = 0.
//
// The exact solver integrates the explicit solution
//   k p' = -F + c,   c = int(F / k) / int(1 / k),   p(x) = int_a^x (-F + c) / k
// by composite trapezoid on the solver grid.  The finite-difference solver is
// an independent conservative scheme used as its oracle.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "homest/fields.hpp"
#include "homest/grid.hpp"

namespace homest {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Source f and its antiderivative F with F(a) = 0.
struct SourceTerm {
  ScalarFunction f;
  /// Closed-form antiderivative; empty means cumulative quadrature of f.
  ScalarFunction F;

  /// f == value, F(x) = value * (x - a).
  static SourceTerm constant(double value, double a);

  /// F at the grid nodes: closed form when present, otherwise cell-wise
  /// Simpson quadrature of f (fourth order).
  std::vector<double> antiderivative_on(const Grid1D& grid) const;
};

/// Nodal pressure, flux v = k p' (so v = -F + c_eps), and pressure gradient.
struct PressureSolution {
  Grid1D grid;
  std::vector<double> p;
  std::vector<double> v;
  std::vector<double> dpdx;
  double c_eps = 0.0;

  double pressure_at(double x) const { return grid.interpolate(p, x); }
};

struct SolveOptions {
  /// Lower admissibility bound for k; nodes below it raise CoefficientError.
  double alpha = 0.0;
  /// Fast length scale the grid has to resolve (0 disables the check).
  double resolved_scale = 0.0;
  /// Minimum nodes per resolved_scale.
  double nodes_per_scale = 16.0;
};

/// Explicit-formula solve from nodal 1/k and F values.
PressureSolution solve_exact_nodal(const Grid1D& grid, std::span<const double> inv_k,
                                   std::span<const double> F);

PressureSolution solve_exact(const ScalarFunction& k_eval, const SourceTerm& source,
                             const Grid1D& grid, const SolveOptions& opts = {});

/// Conservative three-point scheme with harmonic-mean face coefficients.
PressureSolution solve_fd(const ScalarFunction& k_eval, const SourceTerm& source,
                          const Grid1D& grid, const SolveOptions& opts = {});

/// Linear observation functional on H^1 pressures.
struct Functional {
  enum class Kind { point_eval, local_average, scaled_difference_quotient };
  Kind kind = Kind::point_eval;
  double location = 0.0;
  /// Window width for local_average.
  double width = 0.0;
  /// Step h for scaled_difference_quotient.
  double scale = 0.0;

  static Functional point(double x) { return {Kind::point_eval, x, 0.0, 0.0}; }
  static Functional average(double x, double w) { return {Kind::local_average, x, w, 0.0}; }
  static Functional difference_quotient(double x, double h) {
    return {Kind::scaled_difference_quotient, x, 0.0, h};
  }
};

std::string to_string(Functional::Kind kind);
Functional::Kind functional_kind_from_string(const std::string& name);

/// Applies the functional to piecewise-linear nodal values.  Throws
/// DomainError if the location or window leaves (a, b).
double apply_functional(const Functional& fn, const Grid1D& grid,
                        std::span<const double> values);

inline double apply_functional(const Functional& fn, const PressureSolution& sol) {
  return apply_functional(fn, sol.grid, sol.p);
}

std::vector<double> apply_functionals(std::span<const Functional> fns,
                                      const PressureSolution& sol);

/// Data y_j = l_j(p) + noise with diagonal covariance.
struct ObservationSet {
  std::vector<Functional> functionals;
  std::vector<double> y;
  double gamma = 0.0;
  /// Diagonal of Gamma; empty means gamma^2 I.
  std::vector<double> gamma_diag;

  std::size_t size() const { return y.size(); }
  double variance(std::size_t j) const {
    return gamma_diag.empty() ? gamma * gamma : gamma_diag[j];
  }
  /// len(y) == len(functionals), gamma >= 0.  Throws PreconditionError.
  void validate() const;
};

/// CSV columns (functional_kind, location, width, y); `width` holds h for
/// difference quotients.
ObservationSet read_observations_csv(const std::filesystem::path& path, double gamma);
void write_observations_csv(const ObservationSet& obs, const std::filesystem::path& path);

/// CSV columns (x, p, v).
void write_solution_csv(const PressureSolution& sol, const std::filesystem::path& path);

/// h(x) = int_a^x 1/k0 by cumulative trapezoid.
std::vector<double> reciprocal_primitive(const Grid1D& grid, std::span<const double> inv_k0);

/// Q(x, y) = 1{y < x} - h(x) / h(b): first-order response of p at x to a
/// perturbation of 1/k0 at y, per unit v0(y).  Rows are evaluation points,
/// columns the grid nodes; the indicator takes 1/2 on the diagonal y == x.
RowMatrix greens_kernel(const ScalarFunction& k0_eval, const Grid1D& grid);

/// Same kernel for arbitrary evaluation points against the quadrature grid.
RowMatrix greens_kernel_at(std::span<const double> points, const Grid1D& grid,
                           std::span<const double> inv_k0);

struct LipschitzSample {
  double solution_distance;  // |p1 - p2| in the H^1 seminorm
  double input_distance;     // |u1 - u2|
};

/// Solves with k = exp(u1) and k = exp(u2) (scalar log-coefficients).
LipschitzSample lipschitz_probe(double u1, double u2, const SourceTerm& source,
                                const Grid1D& grid);

}  // namespace homest
