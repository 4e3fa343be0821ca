#pragma once

// Fluctuation covariance of the homogenized model, the central-limit
// diagnostic, and MAP estimation of k0 with (k1) and without (k2) the
// microstructure term in the data covariance.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "homest/csv.hpp"
#include "homest/elliptic1d.hpp"
#include "homest/fields.hpp"
#include "homest/grid.hpp"
#include "homest/optimize.hpp"

namespace homest {

/// u0(x) = theta_0 + sum_j theta_{2j-1} cos(j pi x) + theta_{2j} sin(j pi x),
/// k0 = exp(u0).  Three coefficients give the basis on [-1, 1].
struct FourierLogCoefficient {
  std::vector<double> theta;

  double u0(double x) const;
  double k0(double x) const { return std::exp(u0(x)); }
};

/// C = gamma^2 I + eps sigma^2 int Q(x_j, y) v0(y)^2 Q(x_l, y) dy.
struct FluctuationCovariance {
  std::vector<double> points;
  Eigen::MatrixXd C;
  double gamma = 0.0;
  double sigma = 0.0;
  double eps = 0.0;
  /// 0: factored as is; 1..3: jitter 1e-12, 1e-10, 1e-8 of the trace added.
  int jitter_level = 0;
  double jitter = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt;

  double log_det() const;
  /// r^T C^-1 r.
  double quad_form(std::span<const double> r) const;
  /// Smallest eigenvalue of the unjittered matrix.
  double min_eigenvalue() const;
};

/// Assembly from nodal 1/k0 and F on the quadrature grid.  v0 = -F + c0 is
/// the flux of the homogenized solution.  When `factor` is set the matrix is
/// Cholesky-factored with jitter escalation; failure at the last level throws
/// CovarianceError.
FluctuationCovariance fluctuation_covariance_nodal(const Grid1D& quad,
                                                   std::span<const double> inv_k0,
                                                   std::span<const double> F, double eps,
                                                   double sigma, double gamma,
                                                   std::span<const double> points,
                                                   bool factor = true);

/// Requires points in (a, b) and a quadrature grid of at least 512 nodes.
FluctuationCovariance fluctuation_covariance(const ScalarFunction& k0, const SourceTerm& source,
                                             double eps, double sigma, double gamma,
                                             std::span<const double> points, const Grid1D& quad);

struct CltConfig {
  double a = -1.0;
  double b = 1.0;
  ScalarFunction k0 = [](double) { return 1.0; };
  SourceTerm source = SourceTerm::constant(1.0, -1.0);
  std::vector<double> points{0.0};
  double eps = 0.0;
  double sigma = 0.0;
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  double nodes_per_period = 16.0;
  std::optional<double> clamp_ceiling;
  unsigned threads = 0;
};

struct CltPoint {
  double x = 0.0;
  double mean = 0.0;
  double empirical_var = 0.0;
  /// sigma^2 int Q^2 v0^2 with the flux v0 = k0 p0'.
  double predicted_var = 0.0;
  /// Same integral with v0 replaced by k0 p0.
  double literal_var = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

struct CltReport {
  std::vector<CltPoint> points;
  std::size_t replicates = 0;
  std::size_t grid_nodes = 0;
  double max_clamp_fraction = 0.0;
  /// x, mean, empirical_var, predicted_var, literal_var, skewness, excess_kurtosis.
  CsvTable table() const;
};

/// Monte Carlo of (p_eps(x) - p0(x)) / sqrt(eps) over independent
/// microstructure draws.
CltReport clt_diagnostic(const CltConfig& cfg);

struct MapProblem {
  ObservationSet observations;  // point evaluations only
  std::vector<double> prior_mean;
  std::vector<double> prior_sd;
  bool use_model_error = false;
  double sigma = 0.0;
  double eps = 0.0;
  Grid1D quad{-1.0, 1.0, 1025};
  SourceTerm source = SourceTerm::constant(1.0, -1.0);
};

/// Precomputes F and the observation points for repeated evaluation.
class MapObjective {
 public:
  explicit MapObjective(MapProblem problem);

  /// 1/2 log det C + 1/2 r^T C^-1 r + 1/2 sum ((theta - m) / sd)^2 with
  /// r = y - G(theta).  The 2 pi constant is dropped.
  double operator()(std::span<const double> theta) const;

  /// Predicted observations for k0(theta).
  std::vector<double> predict(std::span<const double> theta) const;

  const MapProblem& problem() const { return problem_; }

 private:
  MapProblem problem_;
  std::vector<double> F_;
  std::vector<double> points_;
};

double neg_log_posterior(const MapProblem& problem, std::span<const double> theta);

struct MapEstimate {
  std::vector<double> theta;
  std::vector<double> x;
  std::vector<double> k_hat;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Nelder-Mead from the prior mean and mean +- one prior sd.
MapEstimate map_estimate(const MapProblem& problem, std::span<const double> output_x,
                         const NelderMeadOptions& opts = {});

struct VarianceStudyConfig {
  std::vector<double> theta_true{0.3, 0.4, -0.2};
  double a = -1.0;
  double b = 1.0;
  std::size_t N = 64;
  double eps = 1.0 / 64.0;
  double sigma = 0.1;
  double gamma = 1e-3;
  std::size_t replicates = 300;
  std::uint64_t seed = 0;
  std::size_t quad_nodes = 1025;
  std::size_t output_points = 41;
  double nodes_per_period = 16.0;
  double prior_sd = 1.0;
  double max_failure_rate = 0.05;
  std::optional<double> clamp_ceiling;
  NelderMeadOptions optimizer;
  unsigned threads = 0;
};

struct VarianceStudy {
  std::vector<double> x;
  std::vector<double> k0_true;
  std::vector<double> mean_k1, var_k1, mean_k2, var_k2, ratio;
  /// Replicate-level k_hat curves; empty rows for failed fits.
  std::vector<std::vector<double>> k1, k2;
  std::vector<char> ok1, ok2;
  std::size_t replicates = 0;
  std::size_t failures_k1 = 0;
  std::size_t failures_k2 = 0;
  double failure_rate = 0.0;
  bool flagged = false;
  double mean_ratio = 0.0;
  double fraction_ratio_below_one = 0.0;
  double max_clamp_fraction = 0.0;
  std::size_t clamp_warnings = 0;

  /// x, k0_true, mean_k1, var_k1, mean_k2, var_k2, ratio.
  CsvTable summary_table() const;
  /// replicate, estimator, then one column per output point.
  CsvTable replicate_table() const;
};

VarianceStudy variance_study(const VarianceStudyConfig& cfg);

}  // namespace homest
