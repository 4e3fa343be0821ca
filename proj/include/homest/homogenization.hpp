#pragma once

// Cell problem, harmonic-mean effective coefficient, first-order corrector
// and convergence diagnostics for the 1D two-scale Dirichlet problem.

#include <cstddef>
#include <span>
#include <vector>

#include "homest/csv.hpp"
#include "homest/elliptic1d.hpp"
#include "homest/fields.hpp"
#include "homest/grid.hpp"

namespace homest {

/// k0(x) = 1 / <1/k(x, .)> by periodic trapezoid on `points` cell nodes.
double harmonic_homogenize(const CoefficientField& field, double x, std::size_t points = 4096);

/// <k(x, .)> on the same cell nodes.
double arithmetic_mean(const CoefficientField& field, double x, std::size_t points = 4096);

/// chi(y) = -y + c1 * int_0^y 1/k(x, s) ds + c2 on the unit cell, with
/// c1 = k0(x) and c2 fixing the cell mean to zero.
struct CellSolution {
  double x = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  /// Values at y_i = i / n for i = 0..n, so chi.back() closes the period.
  std::vector<double> chi;

  std::size_t cells() const { return chi.size() - 1; }
  /// Periodic piecewise-linear evaluation.
  double operator()(double y) const;
  /// Periodic trapezoid mean.
  double mean() const;
};

CellSolution solve_cell(const CoefficientField& field, double x, std::size_t points = 4096);

/// Delegates to solve_exact with the y-independent coefficient k0.
PressureSolution homogenized_solve(const ScalarFunction& k0, const SourceTerm& source,
                                   const Grid1D& grid);

struct HomogenizeOptions {
  std::size_t cell_points = 4096;
  /// Macro positions carrying cell solutions when u depends on x; chi and
  /// d chi / dx are interpolated between them.
  std::size_t macro_points = 129;
};

/// Effective coefficient, homogenized pressure and cell solutions on one grid.
class HomogenizedModel {
 public:
  HomogenizedModel(CoefficientField field, const SourceTerm& source, const Grid1D& grid,
                   const HomogenizeOptions& opts = {});

  const CoefficientField& field() const { return field_; }
  const Grid1D& grid() const { return p0_.grid; }
  std::span<const double> k0() const { return k0_; }
  const PressureSolution& p0() const { return p0_; }
  /// p0' and p0'' by central differences (one-sided second order at ends).
  std::span<const double> dp0() const { return dp0_; }
  std::span<const double> d2p0() const { return d2p0_; }

  double k0_at(double x) const { return grid().interpolate(k0_, x); }
  double u0_at(double x) const;
  double chi(double x, double y) const;
  double chi_x(double x, double y) const;
  /// d chi / dy = -1 + k0(x) / k(x, y), from the closed form.
  double chi_y(double x, double y) const;
  /// Corrector eps * chi(x, x/eps) * p0'(x) at node i.
  double corrector(std::size_t i, double eps) const;

 private:
  CoefficientField field_;
  std::vector<double> k0_;
  PressureSolution p0_;
  std::vector<double> dp0_, d2p0_;
  std::vector<double> macro_x_;
  std::vector<CellSolution> cells_;
};

/// Nodal values and derivative of p0 + eps chi(x, x/eps) p0'(x).  The
/// derivative is assembled analytically:
///   (1 + chi_y) p0' + eps (chi_x p0' + chi p0'').
struct FirstOrderApprox {
  double eps = 0.0;
  std::vector<double> p;
  std::vector<double> dpdx;
};

FirstOrderApprox first_order_approx(const HomogenizedModel& model, double eps);

struct ConvergenceRow {
  double eps;
  double err_L2;      // |p_eps - p0| in L2
  double err_sup;     // |p_eps - p0| in L-infinity
  double err_H1;      // |p_eps - p_eps_a| in H1 (L2 plus gradient seminorm)
  double err_W1inf;   // max of sup |p_eps - p_eps_a| and sup |p_eps' - p_eps_a'|
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  double rate_L2 = 0.0;
  double rate_sup = 0.0;
  double rate_H1 = 0.0;
  double rate_W1inf = 0.0;
  std::size_t grid_nodes = 0;

  /// eps, err_L2, err_sup, err_H1, err_W1inf, plus a "rate" footer row.
  CsvTable table() const;
};

struct ConvergenceOptions {
  /// Fine grid nodes per period of the smallest eps; the grid is shared by
  /// every eps in the study.
  double nodes_per_period = 16.0;
  HomogenizeOptions homogenize;
  unsigned threads = 0;
};

/// eps_list must be strictly decreasing.
ConvergenceReport convergence_study(const CoefficientField& field, const SourceTerm& source,
                                    std::span<const double> eps_list,
                                    const ConvergenceOptions& opts = {});

struct FluxDiscrepancy {
  /// sup over nodes of |v_eps - k0 p0'|.
  double sup_norm;
  /// |c - c_eps|.
  double c_gap;
};

FluxDiscrepancy flux_discrepancy(const CoefficientField& field, const SourceTerm& source,
                                 double eps, const Grid1D& grid);

}  // namespace homest
