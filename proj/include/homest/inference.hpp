#pragma once

// Least-squares misfit, scalar large-data estimator and its consistency
// experiments, bounded-set and Tikhonov minimization, and finite-dimensional
// posterior tools (density, Hellinger distance, small-ball ratios).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "homest/csv.hpp"
#include "homest/elliptic1d.hpp"
#include "homest/fields.hpp"
#include "homest/grid.hpp"
#include "homest/optimize.hpp"

namespace homest {

using ForwardMap = std::function<std::vector<double>(std::span<const double>)>;

struct MisfitSpec {
  ForwardMap forward;
  /// Diagonal of Gamma.
  std::vector<double> gamma_diag;
};

/// 1/2 sum (y_j - g_j)^2 / Gamma_jj.  Throws CovarianceError for Gamma_jj <= 0.
double weighted_misfit(std::span<const double> y, std::span<const double> predicted,
                       std::span<const double> gamma_diag);

double misfit(const MisfitSpec& spec, std::span<const double> y, std::span<const double> theta);

struct ScalarEstimate {
  /// Estimate of exp(-u): sum y l* / sum l*^2.
  double ratio = 0.0;
  /// -log(ratio); NaN when sign_failure is set.
  double u_bar = 0.0;
  bool sign_failure = false;
};

/// Throws PreconditionError when sum l*^2 == 0.
ScalarEstimate scalar_estimate(std::span<const double> y, std::span<const double> lstar);

struct ConsistencyRow {
  std::size_t N = 0;
  double eps = 0.0;           // 0 for the single-scale experiment
  std::string functional;     // "point_eval" or "scaled_difference_quotient"
  double mean_err = 0.0;      // mean |ratio - exp(-u0)|
  double stderr_mean = 0.0;
  double flag_rate = 0.0;     // fraction of sign failures
  double bound = 0.0;         // multiscale only: |p_eps - p0|_inf / rms(l*)
  std::size_t replicates = 0;
};

struct ConsistencyTable {
  std::vector<ConsistencyRow> rows;
  /// Log-log slope of mean_err against N (single-scale experiment).
  double slope = 0.0;
  /// N, eps, functional, mean_err, stderr, flag_rate, bound.
  CsvTable table() const;
};

struct ConsistencyConfig {
  double u0 = 0.0;
  std::vector<std::size_t> N_list;
  double gamma = 0.0;
  std::size_t replicates = 1;
  std::uint64_t seed = 0;
  double a = 0.0;
  double b = 1.0;
  std::size_t grid_nodes = 2049;
  unsigned threads = 0;
};

/// k = exp(u0), f = 1 on [a, b]; point evaluations at x_j = a + j (b-a)/(N+1).
ConsistencyTable consistency_experiment(const ConsistencyConfig& cfg);

struct MultiscaleConfig {
  double u0 = 0.0;
  std::vector<std::size_t> N_list;
  std::vector<double> eps_list;
  double gamma = 0.0;
  std::size_t replicates = 1;
  std::uint64_t seed = 0;
  double nodes_per_period = 64.0;
  /// Difference-quotient step as a fraction of eps.
  double dq_window_ratio = 0.5;
  unsigned threads = 0;
};

/// u(x, y) = u0 + A sin(2 pi y) + log I0(A) with A = 0.8: harmonic mean
/// exactly exp(u0).
CoefficientField calibrated_two_scale_field(double u0, double a, double b);

/// Observations of the exact multiscale pressure for a field whose harmonic
/// mean is exp(u0) (reference coefficient 1).  Points sit half a period
/// after the cell centres, x_j = a + (j - 1/2)(b - a)/N + eps/2; only pairs
/// with 2 N eps <= b - a are run, so every x_j has lattice phase 1/2.
/// Each (eps, N) pair yields one bounded row and one difference-quotient row.
ConsistencyTable multiscale_consistency_experiment(const CoefficientField& field,
                                                   const SourceTerm& source,
                                                   const MultiscaleConfig& cfg);

struct BoundedSpec {
  double alpha_bound = 1.0;
};

/// Minimizer of phi over [-alpha, alpha] (coarse scan plus golden section).
double bounded_solve(const std::function<double(double)>& phi, const BoundedSpec& spec);

struct TikhonovSpec {
  double lambda = 1.0;
  std::vector<double> weights;
};

struct RegularizedResult {
  OptimizeResult opt;
  bool flagged = false;  // optimizer did not converge
};

/// Minimizes (lambda/2) sum w_m theta_m^2 + phi(theta) from theta0 and
/// theta0 +- 1/sqrt(lambda w) (+-1 when lambda = 0).
RegularizedResult tikhonov_solve(const Objective& phi, const TikhonovSpec& spec,
                                 std::span<const double> theta0,
                                 const NelderMeadOptions& opts = {});

/// -phi(theta) + prior_log_density(prior, theta).
double posterior_log_density(const GaussianPrior& prior, const Objective& phi,
                             std::span<const double> theta);

/// Hellinger distance between two unnormalized log densities on a 1D
/// quadrature grid.  Throws CoverageError when more than 1e-8 of either mass
/// sits in the outer 1% strips of the grid.
double hellinger_distance(const std::function<double(double)>& logdens1,
                          const std::function<double(double)>& logdens2, const Grid1D& grid);

double hellinger_distance_2d(const std::function<double(double, double)>& logdens1,
                             const std::function<double(double, double)>& logdens2,
                             const Grid1D& gx, const Grid1D& gy);

/// Least-squares slope through the origin of distances against deltas.
double lipschitz_constant(std::span<const double> deltas, std::span<const double> distances);

struct SmallBallRow {
  double delta = 0.0;
  double ratio = 0.0;
  double stderr_ratio = 0.0;
  std::size_t hits1 = 0;
  std::size_t hits2 = 0;
  bool inconclusive = false;
};

struct SmallBallResult {
  std::vector<SmallBallRow> rows;
  /// exp(I(z2) - I(z1)) with I = phi - prior_log_density.
  double limit = 0.0;
  /// delta, ratio, stderr, hits1, hits2, inconclusive, limit.
  CsvTable table() const;
};

/// Posterior probabilities of sup-norm balls around z1 and z2 estimated by
/// importance sampling from the prior with weights exp(-phi).
SmallBallResult small_ball_ratio(const GaussianPrior& prior, const Objective& phi,
                                 std::span<const double> z1, std::span<const double> z2,
                                 std::span<const double> deltas, std::size_t samples,
                                 std::uint64_t seed, unsigned threads = 0);

}  // namespace homest
