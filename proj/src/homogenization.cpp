#include "homest/homogenization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "homest/errors.hpp"
#include "homest/stats.hpp"

namespace homest {

double harmonic_homogenize(const CoefficientField& field, double x, std::size_t points) {
  if (points < 16) throw PreconditionError("harmonic_homogenize: too few cell points");
  double sum = 0.0;
  const double n = static_cast<double>(points);
  for (std::size_t i = 0; i < points; ++i) sum += 1.0 / field.k(x, static_cast<double>(i) / n);
  return n / sum;
}

double arithmetic_mean(const CoefficientField& field, double x, std::size_t points) {
  double sum = 0.0;
  const double n = static_cast<double>(points);
  for (std::size_t i = 0; i < points; ++i) sum += field.k(x, static_cast<double>(i) / n);
  return sum / n;
}

double CellSolution::operator()(double y) const {
  const double t = y - std::floor(y);
  const double s = t * static_cast<double>(cells());
  const auto i = std::min(static_cast<std::size_t>(s), cells() - 1);
  const double w = s - static_cast<double>(i);
  return (1.0 - w) * chi[i] + w * chi[i + 1];
}

double CellSolution::mean() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < cells(); ++i) sum += chi[i];
  return sum / static_cast<double>(cells());
}

CellSolution solve_cell(const CoefficientField& field, double x, std::size_t points) {
  if (points < 16) throw PreconditionError("solve_cell: too few cell points");
  const double n = static_cast<double>(points);
  std::vector<double> r(points + 1);
  for (std::size_t i = 0; i <= points; ++i) r[i] = 1.0 / field.k(x, static_cast<double>(i) / n);

  std::vector<double> R(points + 1, 0.0);
  for (std::size_t i = 1; i <= points; ++i) R[i] = R[i - 1] + 0.5 * (r[i - 1] + r[i]) / n;

  CellSolution cell;
  cell.x = x;
  cell.c1 = 1.0 / R.back();
  cell.chi.resize(points + 1);
  double sum = 0.0;
  for (std::size_t i = 0; i <= points; ++i) {
    cell.chi[i] = -static_cast<double>(i) / n + cell.c1 * R[i];
    if (i < points) sum += cell.chi[i];
  }
  cell.c2 = -sum / n;
  for (double& c : cell.chi) c += cell.c2;
  return cell;
}

PressureSolution homogenized_solve(const ScalarFunction& k0, const SourceTerm& source,
                                   const Grid1D& grid) {
  return solve_exact(k0, source, grid);
}

namespace {

std::vector<double> nodal_k0(const CoefficientField& field, const Grid1D& grid,
                             std::size_t points) {
  std::vector<double> k0(grid.size());
  if (!field.depends_on_x) {
    std::fill(k0.begin(), k0.end(), harmonic_homogenize(field, grid.a(), points));
  } else {
    for (std::size_t i = 0; i < grid.size(); ++i)
      k0[i] = harmonic_homogenize(field, grid.node(i), points);
  }
  return k0;
}

std::vector<double> first_derivative(const Grid1D& grid, std::span<const double> p) {
  const std::size_t n = p.size();
  const double h = grid.spacing();
  std::vector<double> d(n);
  d[0] = (-3.0 * p[0] + 4.0 * p[1] - p[2]) / (2.0 * h);
  d[n - 1] = (3.0 * p[n - 1] - 4.0 * p[n - 2] + p[n - 3]) / (2.0 * h);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (p[i + 1] - p[i - 1]) / (2.0 * h);
  return d;
}

std::vector<double> second_derivative(const Grid1D& grid, std::span<const double> p) {
  const std::size_t n = p.size();
  const double h2 = grid.spacing() * grid.spacing();
  std::vector<double> d(n);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (p[i + 1] - 2.0 * p[i] + p[i - 1]) / h2;
  if (n >= 4) {
    d[0] = (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) / h2;
    d[n - 1] = (2.0 * p[n - 1] - 5.0 * p[n - 2] + 4.0 * p[n - 3] - p[n - 4]) / h2;
  } else {
    d[0] = d[1];
    d[n - 1] = d[n - 2];
  }
  return d;
}

PressureSolution solve_with_k0(const Grid1D& grid, std::span<const double> k0,
                               const SourceTerm& source) {
  std::vector<double> inv_k0(k0.size());
  for (std::size_t i = 0; i < k0.size(); ++i) inv_k0[i] = 1.0 / k0[i];
  return solve_exact_nodal(grid, inv_k0, source.antiderivative_on(grid));
}

}  // namespace

HomogenizedModel::HomogenizedModel(CoefficientField field, const SourceTerm& source,
                                   const Grid1D& grid, const HomogenizeOptions& opts)
    : field_(std::move(field)),
      k0_(nodal_k0(field_, grid, opts.cell_points)),
      p0_(solve_with_k0(grid, k0_, source)) {
  dp0_ = first_derivative(grid, p0_.p);
  d2p0_ = second_derivative(grid, p0_.p);

  if (!field_.depends_on_x) {
    macro_x_ = {grid.a()};
    cells_.push_back(solve_cell(field_, grid.a(), opts.cell_points));
  } else {
    const std::size_t m = std::max<std::size_t>(opts.macro_points, 2);
    for (std::size_t j = 0; j < m; ++j) {
      const double x = grid.a() + grid.length() * static_cast<double>(j) / static_cast<double>(m - 1);
      macro_x_.push_back(x);
      cells_.push_back(solve_cell(field_, x, opts.cell_points));
    }
  }
}

double HomogenizedModel::u0_at(double x) const { return std::log(k0_at(x)); }

double HomogenizedModel::chi(double x, double y) const {
  if (cells_.size() == 1) return cells_[0](y);
  const double s = (x - macro_x_.front()) / (macro_x_[1] - macro_x_[0]);
  const auto j = std::min(static_cast<std::size_t>(std::max(s, 0.0)), cells_.size() - 2);
  const double w = std::clamp(s - static_cast<double>(j), 0.0, 1.0);
  return (1.0 - w) * cells_[j](y) + w * cells_[j + 1](y);
}

double HomogenizedModel::chi_x(double x, double y) const {
  if (cells_.size() == 1) return 0.0;
  const double dx = macro_x_[1] - macro_x_[0];
  const double s = (x - macro_x_.front()) / dx;
  const auto j = std::min(static_cast<std::size_t>(std::max(s, 0.0)), cells_.size() - 2);
  return (cells_[j + 1](y) - cells_[j](y)) / dx;
}

double HomogenizedModel::chi_y(double x, double y) const {
  return -1.0 + k0_at(x) / field_.k(x, y - std::floor(y));
}

double HomogenizedModel::corrector(std::size_t i, double eps) const {
  const double x = grid().node(i);
  return eps * chi(x, x / eps) * dp0_[i];
}

FirstOrderApprox first_order_approx(const HomogenizedModel& model, double eps) {
  if (!(eps > 0.0)) throw DomainError("first_order_approx: eps must be positive");
  const auto& grid = model.grid();
  const auto& p0 = model.p0().p;
  const auto dp0 = model.dp0();
  const auto d2p0 = model.d2p0();
  FirstOrderApprox out{eps, std::vector<double>(grid.size()), std::vector<double>(grid.size())};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.node(i);
    const double y = x / eps;
    const double c = model.chi(x, y);
    out.p[i] = p0[i] + eps * c * dp0[i];
    out.dpdx[i] = (1.0 + model.chi_y(x, y)) * dp0[i] +
                  eps * (model.chi_x(x, y) * dp0[i] + c * d2p0[i]);
  }
  return out;
}

namespace {

ScalarFunction two_scale_evaluator(const CoefficientField& field, double eps) {
  return [&field, eps](double x) { return eval_two_scale(field, x, eps); };
}

double safe_slope(std::span<const double> x, std::span<const double> y) {
  for (double v : y)
    if (!(v > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return stats::loglog_slope(x, y);
}

}  // namespace

CsvTable ConvergenceReport::table() const {
  CsvTable t({"eps", "err_L2", "err_sup", "err_H1", "err_W1inf"});
  for (const auto& r : rows) t.add_row({r.eps, r.err_L2, r.err_sup, r.err_H1, r.err_W1inf});
  t.add_row({"rate", format_double(rate_L2), format_double(rate_sup), format_double(rate_H1),
             format_double(rate_W1inf)});
  return t;
}

ConvergenceReport convergence_study(const CoefficientField& field, const SourceTerm& source,
                                    std::span<const double> eps_list,
                                    const ConvergenceOptions& opts) {
  if (eps_list.empty()) throw PreconditionError("convergence_study: empty eps list");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0)) throw PreconditionError("convergence_study: eps must be > 0");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1]))
      throw PreconditionError("convergence_study: eps list must be strictly decreasing");
  }
  const double eps_min = eps_list.back();
  const auto grid = Grid1D::with_max_spacing(field.a, field.b, eps_min / opts.nodes_per_period);
  const HomogenizedModel model(field, source, grid, opts.homogenize);
  const auto w = grid.trapezoid_weights();

  ConvergenceReport report;
  report.grid_nodes = grid.size();
  report.rows.resize(eps_list.size());
  stats::parallel_for(eps_list.size(), opts.threads, [&](std::size_t e) {
    const double eps = eps_list[e];
    SolveOptions so;
    so.alpha = field.alpha;
    so.resolved_scale = eps;
    so.nodes_per_scale = opts.nodes_per_period;
    const auto pe = solve_exact(two_scale_evaluator(field, eps), source, grid, so);
    const auto pa = first_order_approx(model, eps);
    const auto& p0 = model.p0().p;
    double l2 = 0.0, sup = 0.0, h1 = 0.0, sup_a = 0.0, sup_da = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double d0 = pe.p[i] - p0[i];
      const double da = pe.p[i] - pa.p[i];
      const double dd = pe.dpdx[i] - pa.dpdx[i];
      l2 += w[i] * d0 * d0;
      sup = std::max(sup, std::abs(d0));
      h1 += w[i] * (da * da + dd * dd);
      sup_a = std::max(sup_a, std::abs(da));
      sup_da = std::max(sup_da, std::abs(dd));
    }
    report.rows[e] = {eps, std::sqrt(l2), sup, std::sqrt(h1), std::max(sup_a, sup_da)};
  });

  std::vector<double> eps(eps_list.begin(), eps_list.end()), l2, sup, h1, w1;
  for (const auto& r : report.rows) {
    l2.push_back(r.err_L2);
    sup.push_back(r.err_sup);
    h1.push_back(r.err_H1);
    w1.push_back(r.err_W1inf);
  }
  if (eps.size() >= 2) {
    report.rate_L2 = safe_slope(eps, l2);
    report.rate_sup = safe_slope(eps, sup);
    report.rate_H1 = safe_slope(eps, h1);
    report.rate_W1inf = safe_slope(eps, w1);
  }
  return report;
}

FluxDiscrepancy flux_discrepancy(const CoefficientField& field, const SourceTerm& source,
                                 double eps, const Grid1D& grid) {
  SolveOptions so;
  so.alpha = field.alpha;
  so.resolved_scale = eps;
  const auto pe = solve_exact(two_scale_evaluator(field, eps), source, grid, so);
  const auto p0 = solve_with_k0(grid, nodal_k0(field, grid, 4096), source);
  double sup = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) sup = std::max(sup, std::abs(pe.v[i] - p0.v[i]));
  return {sup, std::abs(p0.c_eps - pe.c_eps)};
}

}  // namespace homest
