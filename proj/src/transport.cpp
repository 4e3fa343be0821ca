#include "homest/transport.hpp"

#include <algorithm>
#include <cmath>

#include "homest/errors.hpp"
#include "homest/homogenization.hpp"
#include "homest/rng.hpp"
#include "homest/stats.hpp"

namespace homest {

double TransportConfig::step() const { return dt > 0.0 ? dt : dt_safety * eps * eps; }

std::size_t TransportConfig::steps() const {
  return static_cast<std::size_t>(std::ceil(T / step() - 1e-9));
}

void TransportConfig::validate() const {
  if (!(phi > 0.0)) throw PreconditionError("transport: phi must be positive");
  if (!(T > 0.0)) throw PreconditionError("transport: T must be positive");
  if (!(L > 0.0)) throw PreconditionError("transport: L must be positive");
  if (eta0 < 0.0) throw PreconditionError("transport: eta0 must be nonnegative");
  if (replicates < 1) throw PreconditionError("transport: need at least one replicate");
  if (!(step() > 0.0)) throw PreconditionError("transport: time step must be positive");
  if (eps > 0.0 && step() > dt_safety * eps * eps * (1.0 + 1e-12))
    throw PreconditionError("transport: dt exceeds dt_safety * eps^2");
}

PeriodicVelocity::PeriodicVelocity(double L, std::vector<double> values, double origin)
    : L_(L), values_(std::move(values)), origin_(origin) {
  if (values_.size() < 2) throw PreconditionError("PeriodicVelocity: need two or more nodes");
  n_ = static_cast<double>(values_.size());
  inv_h_ = n_ / L_;
}

PeriodicVelocity periodic_velocity(const ScalarFunction& k_eval, const SourceTerm& source,
                                   const Grid1D& grid) {
  const auto F = source.antiderivative_on(grid);
  double scale = 0.0;
  for (double v : F) scale = std::max(scale, std::abs(v));
  if (std::abs(F.back()) > 1e-9 * std::max(scale, 1.0))
    throw SolvabilityError("periodic problem: forcing integrates to " +
                           std::to_string(F.back()) + " over one period");
  std::vector<double> r(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double kv = k_eval(grid.node(i));
    if (!(kv > 0.0)) throw CoefficientError("periodic_velocity: coefficient must be positive");
    r[i] = 1.0 / kv;
  }
  const auto w = grid.trapezoid_weights();
  double int_r = 0.0, int_rF = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    int_r += w[i] * r[i];
    int_rF += w[i] * r[i] * F[i];
  }
  const double c = int_rF / int_r;
  std::vector<double> v(grid.size() - 1);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) v[i] = F[i] - c;
  return {grid.length(), std::move(v), grid.a()};
}

PeriodicVelocity periodic_velocity(const CoefficientField& field, const SourceTerm& source,
                                   double eps, const Grid1D& grid) {
  if (!(eps > 0.0)) throw DomainError("periodic_velocity: eps must be positive");
  if (grid.spacing() > eps / 8.0 * (1.0 + 1e-12))
    throw ResolutionError("periodic_velocity: grid does not resolve eps");
  return periodic_velocity(
      [&](double x) { return field.k(x, x / eps - std::floor(x / eps)); }, source, grid);
}

double torus_distance(double x, double y, double L) {
  const double d = std::fmod(std::abs(x - y), L);
  return std::min(d, L - d);
}

std::vector<double> integrate_sde(const ScalarFunction& v, const TransportConfig& cfg,
                                  std::uint64_t replicate) {
  cfg.validate();
  const double dt = cfg.step();
  const std::size_t n = cfg.steps();
  const double noise = std::sqrt(2.0 * cfg.eta0 * cfg.eps * dt);
  Stream rng(cfg.seed, StreamTag::brownian, replicate);
  std::vector<double> path(n + 1);
  path[0] = cfg.x_init;
  double x = cfg.x_init;
  for (std::size_t k = 0; k < n; ++k) {
    x += v(x) / cfg.phi * dt;
    if (noise > 0.0) x += noise * rng.normal();
    path[k + 1] = x;
  }
  return path;
}

std::vector<double> sde_endpoints(const ScalarFunction& v, const TransportConfig& cfg) {
  cfg.validate();
  std::vector<double> out(cfg.replicates);
  stats::parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    out[r] = integrate_sde(v, cfg, r).back();
  });
  return out;
}

std::vector<double> integrate_ode(const ScalarFunction& v0, const TransportConfig& cfg) {
  cfg.validate();
  const double dt = cfg.step();
  const std::size_t n = cfg.steps();
  const double s = 1.0 / cfg.phi;
  std::vector<double> path(n + 1);
  double x = cfg.x_init;
  path[0] = x;
  for (std::size_t k = 0; k < n; ++k) {
    const double k1 = s * v0(x);
    const double k2 = s * v0(x + 0.5 * dt * k1);
    const double k3 = s * v0(x + 0.5 * dt * k2);
    const double k4 = s * v0(x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    path[k + 1] = x;
  }
  return path;
}

PathEnsemble path_ensemble(const ScalarFunction& v_eps, const ScalarFunction& v0,
                           const TransportConfig& cfg) {
  cfg.validate();
  const auto ode = integrate_ode(v0, cfg);
  const double dt = cfg.step();
  const std::size_t n = cfg.steps();
  const double noise = std::sqrt(2.0 * cfg.eta0 * cfg.eps * dt);

  PathEnsemble ens;
  ens.eps = cfg.eps;
  ens.dt = dt;
  ens.sup_errors.resize(cfg.replicates);
  stats::parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    Stream rng(cfg.seed, StreamTag::brownian, r);
    double x = cfg.x_init, sup = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      x += v_eps(x) / cfg.phi * dt;
      if (noise > 0.0) x += noise * rng.normal();
      sup = std::max(sup, torus_distance(x, ode[k + 1], cfg.L));
    }
    ens.sup_errors[r] = sup;
  });
  const auto m = stats::moments(ens.sup_errors);
  ens.mean = m.mean;
  ens.stderr_mean = m.stderr_mean;
  return ens;
}

std::vector<PathEnsemble> path_error_study(const CoefficientField& field,
                                           const SourceTerm& source,
                                           const TransportConfig& cfg,
                                           std::span<const double> eps_list) {
  std::vector<PathEnsemble> out;
  for (double eps : eps_list) {
    TransportConfig c = cfg;
    c.eps = eps;
    c.validate();
    const auto cells = static_cast<std::size_t>(std::ceil(c.L * c.nodes_per_period / eps - 1e-9));
    const Grid1D grid(field.a, field.a + c.L, cells + 1);
    const auto v_eps = periodic_velocity(field, source, eps, grid);
    std::vector<double> k0(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
      k0[i] = harmonic_homogenize(field, grid.node(i));
    const auto v0 = periodic_velocity([&](double x) { return grid.interpolate(k0, x); },
                                      source, grid);
    auto ens = path_ensemble(std::cref(v_eps), std::cref(v0), c);
    ens.velocity_nodes = grid.size();
    out.push_back(std::move(ens));
  }
  return out;
}

CsvTable path_error_table(std::span<const PathEnsemble> rows) {
  CsvTable t({"eps", "mean_sup_error", "mc_stderr", "replicates"});
  for (const auto& r : rows)
    t.add_row({r.eps, r.mean, r.stderr_mean, static_cast<double>(r.sup_errors.size())});
  return t;
}

}  // namespace homest
