#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace homest {

/// Uniform grid of n >= 3 nodes on [a, b], endpoints included.
class Grid1D {
 public:
  Grid1D(double a, double b, std::size_t n);

  /// Smallest grid on [a, b] whose spacing does not exceed max_spacing.
  static Grid1D with_max_spacing(double a, double b, double max_spacing);

  double a() const { return a_; }
  double b() const { return b_; }
  double length() const { return b_ - a_; }
  std::size_t size() const { return nodes_.size(); }
  double spacing() const { return h_; }
  double node(std::size_t i) const { return nodes_[i]; }
  std::span<const double> nodes() const { return nodes_; }

  /// Composite trapezoid weights.
  std::vector<double> trapezoid_weights() const;

  /// Cell index i and fraction t in [0, 1] with x = node(i) + t * spacing.
  /// Positions within 1e-9 cells of a node snap to it.  Caller guarantees
  /// x in [a, b].
  std::pair<std::size_t, double> locate(double x) const;

  /// Piecewise-linear interpolation of nodal values.
  double interpolate(std::span<const double> values, double x) const;

  bool contains(double x) const { return x >= a_ && x <= b_; }

 private:
  double a_, b_, h_;
  std::vector<double> nodes_;
};

/// Composite trapezoid integral of nodal values.
double trapezoid(const Grid1D& grid, std::span<const double> values);

/// Running trapezoid integral from a; out[0] = 0.
std::vector<double> cumulative_trapezoid(const Grid1D& grid,
                                         std::span<const double> values);

}  // namespace homest
