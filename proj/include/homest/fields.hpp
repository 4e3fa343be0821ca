#pragma once

// Two-scale coefficients, stationary Gaussian microstructure, and
// Karhunen-Loeve Gaussian priors.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "homest/grid.hpp"

namespace homest {

using ScalarFunction = std::function<double(double)>;

/// Two-scale coefficient k(x, y) = exp(u(x, y)), 1-periodic in the fast
/// variable y, with admissibility bounds alpha <= k <= beta.
struct CoefficientField {
  std::function<double(double x, double y)> log_permeability;
  double alpha = 0.0;
  double beta = 0.0;
  double a = 0.0;
  double b = 1.0;
  /// False when u does not depend on the macro variable; lets cell solutions
  /// be shared across x.
  bool depends_on_x = true;

  double k(double x, double y) const;

  /// k == value everywhere.
  static CoefficientField constant(double value, double a, double b);

  /// u(x, y) = profile(y); bounds computed from a 4096-point scan.
  static CoefficientField periodic(std::function<double(double)> profile, double a,
                                   double b);

  /// u(x, y) supplied directly; bounds from a scan over x nodes and y.
  static CoefficientField two_scale(std::function<double(double, double)> u,
                                    double a, double b);

  /// Checks alpha <= k <= beta and unit periodicity at the given samples.
  /// Throws CoefficientError.
  void validate(std::span<const double> xs, std::size_t y_samples = 64) const;
};

/// exp(u(x, x / eps)).  Throws DomainError outside [a, b] or for eps <= 0.
double eval_two_scale(const CoefficientField& field, double x, double eps);

/// R(s) = exp(-pi s^2): R(0) = 1 and unit integral.
double gaussian_covariance(double s);

/// Stationary mean-zero fluctuation model 1/k = 1/k0 + sigma * mu(x / eps).
struct MicrostructureModel {
  double sigma = 0.0;
  double epsilon = 0.0;
  std::function<double(double)> covariance = gaussian_covariance;
  /// Largest admissible k; the reciprocal is floored at 1 / clamp_ceiling.
  /// Unset means 20 * sup k0 on the composition grid.
  std::optional<double> clamp_ceiling;

  /// R(0) = 1 and integral of R = 1 (to 1e-6) and evenness.  Throws
  /// PreconditionError.
  void validate() const;
};

struct MicrostructureSample {
  std::vector<double> grid;
  std::vector<double> mu;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
  double epsilon = 0.0;
};

/// Circulant-embedding sampler for one (model, grid) pair.  The spectrum is
/// computed once; draws are independent per (seed, replicate).
class MicrostructureSampler {
 public:
  /// Requires spacing <= epsilon / 8 (ResolutionError otherwise).
  MicrostructureSampler(const MicrostructureModel& model, const Grid1D& grid);

  MicrostructureSample draw(std::uint64_t seed, std::uint64_t replicate = 0) const;

  std::size_t embedding_size() const { return eigenvalues_.size(); }
  /// Most negative eigenvalue of the embedding (before clipping) relative to
  /// the largest one.
  double negative_mass() const { return negative_mass_; }

 private:
  Grid1D grid_;
  double epsilon_;
  std::vector<double> eigenvalues_;
  double negative_mass_ = 0.0;
};

MicrostructureSample sample_microstructure(const MicrostructureModel& model,
                                           const Grid1D& grid, std::uint64_t seed,
                                           std::uint64_t replicate = 0);

/// Nodal coefficient k = 1 / max(1/k0 + sigma mu, 1/ceiling).
struct RandomCoefficient {
  std::vector<double> grid;
  std::vector<double> inv_k;
  std::vector<double> k;
  double clamp_ceiling = 0.0;
  std::size_t clamped_nodes = 0;
  double clamp_fraction = 0.0;
  /// Set when clamp_fraction exceeds 0.1%.
  bool clamp_warning = false;

  /// Value at a node position (linear interpolation of 1/k in between).
  double operator()(double x) const;
};

RandomCoefficient compose_random_coefficient(const ScalarFunction& k0,
                                             const MicrostructureSample& sample,
                                             double sigma,
                                             std::optional<double> clamp_ceiling = {});

/// Gaussian prior N(mean, C) written through its Karhunen-Loeve expansion
/// u = mean + sum_m sigma_m eta_m phi_m.  `weights` are the sigma_m of the
/// already-scaled covariance C / lambda; `scale` records lambda.
struct GaussianPrior {
  std::vector<ScalarFunction> basis;
  std::vector<double> weights;
  double scale = 1.0;
  /// Empty means zero mean.
  std::vector<double> mean;

  std::size_t truncation() const { return weights.size(); }
  double mean_at(std::size_t m) const { return mean.empty() ? 0.0 : mean[m]; }

  /// Orthonormal Fourier basis on [a, b]: constant, then cos/sin pairs;
  /// sigma_m = sigma0 * m^-decay for m = 1..M.
  static GaussianPrior fourier(double a, double b, std::size_t modes, double sigma0,
                               double decay = 2.0);
};

/// Coefficient vector theta_m = mean_m + sigma_m eta_m.
std::vector<double> sample_prior_coefficients(const GaussianPrior& prior,
                                              std::uint64_t seed,
                                              std::uint64_t replicate = 0);

/// u(x) = sum_m theta_m phi_m(x) evaluated on the grid.
std::vector<double> expand(const GaussianPrior& prior, std::span<const double> theta,
                           std::span<const double> xs);

std::vector<double> sample_prior_draw(const GaussianPrior& prior, const Grid1D& grid,
                                      std::uint64_t seed, std::uint64_t replicate = 0);

/// -1/2 sum (theta_m - mean_m)^2 / sigma_m^2, normalizing constant dropped.
/// sigma_m = 0 with theta_m != mean_m gives -infinity.
double prior_log_density(const GaussianPrior& prior, std::span<const double> theta);

}  // namespace homest
