#include "homest/grid.hpp"

#include <algorithm>
#include <cmath>

#include "homest/errors.hpp"
#include "homest/kernels.hpp"

namespace homest {

Grid1D::Grid1D(double a, double b, std::size_t n) : a_(a), b_(b) {
  if (n < 3) throw PreconditionError("Grid1D: need at least 3 nodes");
  if (!(b > a)) throw PreconditionError("Grid1D: need a < b");
  h_ = (b - a) / static_cast<double>(n - 1);
  nodes_.resize(n);
  for (std::size_t i = 0; i < n; ++i) nodes_[i] = a + h_ * static_cast<double>(i);
  nodes_.back() = b;
}

Grid1D Grid1D::with_max_spacing(double a, double b, double max_spacing) {
  const double cells = std::ceil((b - a) / max_spacing - 1e-9);
  return Grid1D(a, b, static_cast<std::size_t>(std::max(2.0, cells)) + 1);
}

std::vector<double> Grid1D::trapezoid_weights() const {
  std::vector<double> w(size(), h_);
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

std::pair<std::size_t, double> Grid1D::locate(double x) const {
  const double s = (x - a_) / h_;
  const double cells = static_cast<double>(size() - 1);
  if (s <= 0.0) return {0, 0.0};
  if (s >= cells) return {size() - 2, 1.0};
  const double r = std::round(s);
  if (std::abs(s - r) < 1e-9) {
    const auto i = static_cast<std::size_t>(r);
    if (i == size() - 1) return {i - 1, 1.0};
    return {i, 0.0};
  }
  const auto i = static_cast<std::size_t>(std::floor(s));
  return {i, s - static_cast<double>(i)};
}

double Grid1D::interpolate(std::span<const double> values, double x) const {
  const auto [i, t] = locate(x);
  if (t == 0.0) return values[i];
  if (t == 1.0) return values[i + 1];
  return (1.0 - t) * values[i] + t * values[i + 1];
}

double trapezoid(const Grid1D& grid, std::span<const double> values) {
  const auto w = grid.trapezoid_weights();
  return kernels::dot(w, values);
}

std::vector<double> cumulative_trapezoid(const Grid1D& grid,
                                         std::span<const double> values) {
  std::vector<double> out(values.size(), 0.0);
  const double half = 0.5 * grid.spacing();
  for (std::size_t i = 1; i < values.size(); ++i)
    out[i] = out[i - 1] + half * (values[i - 1] + values[i]);
  return out;
}

}  // namespace homest
