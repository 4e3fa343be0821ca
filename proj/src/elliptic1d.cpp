#include "homest/elliptic1d.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "homest/csv.hpp"
#include "homest/errors.hpp"
#include "homest/kernels.hpp"

namespace homest {

SourceTerm SourceTerm::constant(double value, double a) {
  return {[value](double) { return value; },
          [value, a](double x) { return value * (x - a); }};
}

std::vector<double> SourceTerm::antiderivative_on(const Grid1D& grid) const {
  std::vector<double> F(grid.size());
  if (this->F) {
    for (std::size_t i = 0; i < grid.size(); ++i) F[i] = this->F(grid.node(i));
    return F;
  }
  if (!f) throw PreconditionError("SourceTerm: neither f nor F given");
  const double h = grid.spacing();
  F[0] = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double x0 = grid.node(i - 1), x1 = grid.node(i);
    F[i] = F[i - 1] + h / 6.0 * (f(x0) + 4.0 * f(0.5 * (x0 + x1)) + f(x1));
  }
  return F;
}

namespace {

std::vector<double> nodal_reciprocal(const ScalarFunction& k_eval, const Grid1D& grid,
                                     const SolveOptions& opts) {
  if (opts.resolved_scale > 0.0 &&
      grid.spacing() > opts.resolved_scale / opts.nodes_per_scale * (1.0 + 1e-12))
    throw ResolutionError("grid spacing " + std::to_string(grid.spacing()) +
                          " does not resolve scale " + std::to_string(opts.resolved_scale) +
                          " with " + std::to_string(opts.nodes_per_scale) + " nodes");
  std::vector<double> inv_k(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double kv = k_eval(grid.node(i));
    if (!(kv > 0.0) || kv < opts.alpha || !std::isfinite(kv))
      throw CoefficientError("coefficient " + std::to_string(kv) + " at x = " +
                             std::to_string(grid.node(i)) + " is not admissible");
    inv_k[i] = 1.0 / kv;
  }
  return inv_k;
}

}  // namespace

PressureSolution solve_exact_nodal(const Grid1D& grid, std::span<const double> inv_k,
                                   std::span<const double> F) {
  const std::size_t n = grid.size();
  if (inv_k.size() != n || F.size() != n)
    throw PreconditionError("solve_exact_nodal: array sizes must match the grid");
  const auto w = grid.trapezoid_weights();
  std::vector<double> ones(n, 1.0);
  const double int_r = kernels::weighted_dot(w, inv_k, ones);
  const double int_rF = kernels::weighted_dot(w, inv_k, F);
  const double c = int_rF / int_r;

  PressureSolution sol{grid, {}, {}, {}, c};
  sol.v.resize(n);
  sol.dpdx.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    sol.v[i] = -F[i] + c;
    sol.dpdx[i] = inv_k[i] * sol.v[i];
  }
  sol.p = cumulative_trapezoid(grid, sol.dpdx);

  double scale = 0.0;
  for (double pv : sol.p) scale = std::max(scale, std::abs(pv));
  const double residual = sol.p.back();
  if (std::abs(residual) > 1e-10 * std::max(scale, 1e-300) && scale > 0.0)
    throw Error("solve_exact: boundary residual " + std::to_string(residual) +
                " exceeds quadrature tolerance");
  sol.p.front() = 0.0;
  sol.p.back() = 0.0;
  return sol;
}

PressureSolution solve_exact(const ScalarFunction& k_eval, const SourceTerm& source,
                             const Grid1D& grid, const SolveOptions& opts) {
  const auto inv_k = nodal_reciprocal(k_eval, grid, opts);
  const auto F = source.antiderivative_on(grid);
  return solve_exact_nodal(grid, inv_k, F);
}

PressureSolution solve_fd(const ScalarFunction& k_eval, const SourceTerm& source,
                          const Grid1D& grid, const SolveOptions& opts) {
  const auto inv_k = nodal_reciprocal(k_eval, grid, opts);
  const std::size_t n = grid.size();
  const double h = grid.spacing();
  if (!source.f) throw PreconditionError("solve_fd: needs the source density f");

  // Face coefficients: harmonic mean of the two nodal values.
  std::vector<double> kf(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) kf[i] = 2.0 / (inv_k[i] + inv_k[i + 1]);

  // Interior unknowns 1..n-2, Thomas algorithm.
  const std::size_t m = n - 2;
  std::vector<double> lower(m), diag(m), upper(m), rhs(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t i = j + 1;
    lower[j] = -kf[i - 1];
    upper[j] = -kf[i];
    diag[j] = kf[i - 1] + kf[i];
    rhs[j] = h * h * source.f(grid.node(i));
  }
  for (std::size_t j = 1; j < m; ++j) {
    const double w = lower[j] / diag[j - 1];
    diag[j] -= w * upper[j - 1];
    rhs[j] -= w * rhs[j - 1];
  }
  PressureSolution sol{grid, std::vector<double>(n, 0.0), {}, {}, 0.0};
  for (std::size_t j = m; j-- > 0;) {
    const double next = (j + 1 < m) ? sol.p[j + 2] : 0.0;
    if (diag[j] == 0.0) throw Error("solve_fd: singular tridiagonal system");
    sol.p[j + 1] = (rhs[j] - upper[j] * next) / diag[j];
  }

  // Face fluxes k p', averaged to nodes; end nodes use the discrete balance
  // v' = -f over the half cell.
  std::vector<double> q(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) q[i] = kf[i] * (sol.p[i + 1] - sol.p[i]) / h;
  sol.v.resize(n);
  sol.v[0] = q[0] + 0.5 * h * source.f(grid.node(0));
  sol.v[n - 1] = q[n - 2] - 0.5 * h * source.f(grid.node(n - 1));
  for (std::size_t i = 1; i + 1 < n; ++i) sol.v[i] = 0.5 * (q[i - 1] + q[i]);
  sol.dpdx.resize(n);
  for (std::size_t i = 0; i < n; ++i) sol.dpdx[i] = inv_k[i] * sol.v[i];
  sol.c_eps = sol.v[0];
  return sol;
}

std::string to_string(Functional::Kind kind) {
  switch (kind) {
    case Functional::Kind::point_eval: return "point_eval";
    case Functional::Kind::local_average: return "local_average";
    case Functional::Kind::scaled_difference_quotient: return "scaled_difference_quotient";
  }
  return "unknown";
}

Functional::Kind functional_kind_from_string(const std::string& name) {
  if (name == "point_eval") return Functional::Kind::point_eval;
  if (name == "local_average") return Functional::Kind::local_average;
  if (name == "scaled_difference_quotient") return Functional::Kind::scaled_difference_quotient;
  throw PreconditionError("unknown functional kind '" + name + "'");
}

namespace {

// Integral of the piecewise-linear interpolant from a to x.
double linear_primitive(const Grid1D& grid, std::span<const double> values,
                        std::span<const double> cumulative, double x) {
  const auto [i, t] = grid.locate(x);
  if (t == 0.0) return cumulative[i];
  const double h = grid.spacing();
  const double vx = (1.0 - t) * values[i] + t * values[i + 1];
  return cumulative[i] + 0.5 * t * h * (values[i] + vx);
}

}  // namespace

double apply_functional(const Functional& fn, const Grid1D& grid,
                        std::span<const double> values) {
  const double x = fn.location;
  if (!(x > grid.a() && x < grid.b()))
    throw DomainError("functional location " + std::to_string(x) + " outside (a, b)");
  switch (fn.kind) {
    case Functional::Kind::point_eval:
      return grid.interpolate(values, x);
    case Functional::Kind::local_average: {
      const double lo = x - 0.5 * fn.width, hi = x + 0.5 * fn.width;
      if (!(fn.width > 0.0)) throw DomainError("local_average: width must be > 0");
      if (lo < grid.a() || hi > grid.b())
        throw DomainError("local_average window exits the domain");
      const auto cum = cumulative_trapezoid(grid, values);
      return (linear_primitive(grid, values, cum, hi) -
              linear_primitive(grid, values, cum, lo)) /
             fn.width;
    }
    case Functional::Kind::scaled_difference_quotient: {
      if (!(fn.scale > 0.0)) throw DomainError("difference quotient: h must be > 0");
      if (x + fn.scale > grid.b())
        throw DomainError("difference quotient window exits the domain");
      return (grid.interpolate(values, x + fn.scale) - grid.interpolate(values, x)) /
             fn.scale;
    }
  }
  throw PreconditionError("apply_functional: unknown kind");
}

std::vector<double> apply_functionals(std::span<const Functional> fns,
                                      const PressureSolution& sol) {
  std::vector<double> out(fns.size());
  for (std::size_t j = 0; j < fns.size(); ++j) out[j] = apply_functional(fns[j], sol);
  return out;
}

void ObservationSet::validate() const {
  if (y.size() != functionals.size())
    throw PreconditionError("observation set: len(y) != len(functionals)");
  if (!(gamma >= 0.0)) throw PreconditionError("observation set: gamma must be >= 0");
  if (!gamma_diag.empty() && gamma_diag.size() != y.size())
    throw PreconditionError("observation set: Gamma diagonal has wrong length");
}

ObservationSet read_observations_csv(const std::filesystem::path& path, double gamma) {
  const auto data = read_csv(path);
  const auto ck = data.column("functional_kind");
  const auto cl = data.column("location");
  const auto cw = data.column("width");
  const auto cy = data.column("y");
  ObservationSet obs;
  obs.gamma = gamma;
  for (const auto& row : data.rows) {
    Functional fn;
    fn.kind = functional_kind_from_string(row.at(ck));
    fn.location = std::stod(row.at(cl));
    const double w = std::stod(row.at(cw));
    if (fn.kind == Functional::Kind::local_average) fn.width = w;
    if (fn.kind == Functional::Kind::scaled_difference_quotient) fn.scale = w;
    obs.functionals.push_back(fn);
    obs.y.push_back(std::stod(row.at(cy)));
  }
  obs.validate();
  return obs;
}

void write_observations_csv(const ObservationSet& obs, const std::filesystem::path& path) {
  CsvTable t({"functional_kind", "location", "width", "y"});
  for (std::size_t j = 0; j < obs.size(); ++j) {
    const auto& fn = obs.functionals[j];
    const double w = fn.kind == Functional::Kind::local_average ? fn.width : fn.scale;
    t.add_row({to_string(fn.kind), format_double(fn.location), format_double(w),
               format_double(obs.y[j])});
  }
  t.write(path);
}

void write_solution_csv(const PressureSolution& sol, const std::filesystem::path& path) {
  CsvTable t({"x", "p", "v"});
  for (std::size_t i = 0; i < sol.grid.size(); ++i)
    t.add_row({sol.grid.node(i), sol.p[i], sol.v[i]});
  t.write(path);
}

std::vector<double> reciprocal_primitive(const Grid1D& grid, std::span<const double> inv_k0) {
  return cumulative_trapezoid(grid, inv_k0);
}

RowMatrix greens_kernel_at(std::span<const double> points, const Grid1D& grid,
                           std::span<const double> inv_k0) {
  const auto h = reciprocal_primitive(grid, inv_k0);
  const double hb = h.back();
  RowMatrix Q(points.size(), grid.size());
  for (std::size_t r = 0; r < points.size(); ++r) {
    const double x = points[r];
    // h(x) by exact integration of the linear interpolant of 1/k0.
    const double hx = linear_primitive(grid, inv_k0, h, x);
    const double ratio = hx / hb;
    const auto [i, t] = grid.locate(x);
    const std::size_t node_hit = (t == 0.0) ? i : (t == 1.0 ? i + 1 : grid.size());
    for (std::size_t c = 0; c < grid.size(); ++c) {
      double ind;
      if (c == node_hit)
        ind = 0.5;
      else
        ind = grid.node(c) < x ? 1.0 : 0.0;
      Q(r, c) = ind - ratio;
    }
  }
  return Q;
}

RowMatrix greens_kernel(const ScalarFunction& k0_eval, const Grid1D& grid) {
  std::vector<double> inv_k0(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double kv = k0_eval(grid.node(i));
    if (!(kv > 0.0)) throw CoefficientError("greens_kernel: k0 must be positive");
    inv_k0[i] = 1.0 / kv;
  }
  return greens_kernel_at(grid.nodes(), grid, inv_k0);
}

LipschitzSample lipschitz_probe(double u1, double u2, const SourceTerm& source,
                                const Grid1D& grid) {
  const double k1 = std::exp(u1), k2 = std::exp(u2);
  const auto s1 = solve_exact([k1](double) { return k1; }, source, grid);
  const auto s2 = solve_exact([k2](double) { return k2; }, source, grid);
  std::vector<double> d2(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = s1.dpdx[i] - s2.dpdx[i];
    d2[i] = d * d;
  }
  return {std::sqrt(trapezoid(grid, d2)), std::abs(u1 - u2)};
}

}  // namespace homest
