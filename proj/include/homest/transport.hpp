#pragma once

// Particle transport on the L-torus: Euler-Maruyama for the multiscale
// velocity against RK4 for the homogenized drift.
//
// Only the one-dimensional instance is implemented; all distances are taken
// on the torus.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "homest/csv.hpp"
#include "homest/elliptic1d.hpp"
#include "homest/fields.hpp"
#include "homest/grid.hpp"

namespace homest {

struct TransportConfig {
  double phi = 1.0;       // porosity
  double eta0 = 0.0;      // molecular diffusivity scale
  double T = 1.0;         // horizon
  double dt = 0.0;        // 0 selects dt_safety * eps^2
  double dt_safety = 0.1;
  double x_init = 0.0;
  double eps = 0.0;
  double L = 1.0;
  std::size_t replicates = 1;
  std::uint64_t seed = 0;
  /// Velocity grid nodes per period of eps.
  double nodes_per_period = 16.0;
  unsigned threads = 0;

  /// Effective step: dt if set, otherwise dt_safety * eps^2.
  double step() const;
  std::size_t steps() const;
  /// phi > 0, T > 0, replicates >= 1, dt <= dt_safety * eps^2 when eps > 0.
  void validate() const;
};

/// Piecewise-linear L-periodic velocity from values at x_i = origin + i L / n.
class PeriodicVelocity {
 public:
  PeriodicVelocity(double L, std::vector<double> values, double origin = 0.0);
  static PeriodicVelocity constant(double L, double v) { return {L, {v, v}}; }

  double operator()(double x) const {
    double s = (x - origin_) * inv_h_;
    s -= n_ * std::floor(s / n_);
    auto i = static_cast<std::size_t>(s);
    if (i >= values_.size()) {
      i = 0;
      s = 0.0;
    }
    const double t = s - static_cast<double>(i);
    const std::size_t j = (i + 1 == values_.size()) ? 0 : i + 1;
    return values_[i] + t * (values_[j] - values_[i]);
  }

  double period() const { return L_; }
  std::span<const double> values() const { return values_; }

 private:
  double L_;
  std::vector<double> values_;
  double origin_;
  double n_;
  double inv_h_;
};

/// Periodic analogue of the Dirichlet solve: k p' = -F + c with
/// c = int(F / k) / int(1 / k) over one period, returned as the Darcy velocity
/// v = -k p' = F - c.  The grid spans one period [a, a + L].  Throws
/// SolvabilityError when the forcing has nonzero mean.
PeriodicVelocity periodic_velocity(const ScalarFunction& k_eval, const SourceTerm& source,
                                   const Grid1D& grid);

PeriodicVelocity periodic_velocity(const CoefficientField& field, const SourceTerm& source,
                                   double eps, const Grid1D& grid);

/// min(|x - y| mod L, L - |x - y| mod L).
double torus_distance(double x, double y, double L);

/// Euler-Maruyama path x_0 .. x_n for one replicate (unwrapped coordinates);
/// the Brownian stream is keyed by (seed, replicate).
std::vector<double> integrate_sde(const ScalarFunction& v, const TransportConfig& cfg,
                                  std::uint64_t replicate);

/// x(T) for every replicate.
std::vector<double> sde_endpoints(const ScalarFunction& v, const TransportConfig& cfg);

/// Classical RK4 path of dx/dt = v0(x) / phi on the same time grid.
std::vector<double> integrate_ode(const ScalarFunction& v0, const TransportConfig& cfg);

struct PathEnsemble {
  double eps = 0.0;
  std::vector<double> sup_errors;
  double mean = 0.0;
  double stderr_mean = 0.0;
  double dt = 0.0;
  std::size_t velocity_nodes = 0;
};

/// sup over time steps of the torus distance between each SDE replicate and
/// the ODE path.
PathEnsemble path_ensemble(const ScalarFunction& v_eps, const ScalarFunction& v0,
                           const TransportConfig& cfg);

/// One ensemble per eps; cfg.eps is overridden for each entry.
std::vector<PathEnsemble> path_error_study(const CoefficientField& field,
                                           const SourceTerm& source,
                                           const TransportConfig& cfg,
                                           std::span<const double> eps_list);

/// eps, mean_sup_error, mc_stderr, replicates.
CsvTable path_error_table(std::span<const PathEnsemble> rows);

}  // namespace homest
