#include "homest/fields.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>

#include "homest/errors.hpp"
#include "homest/kernels.hpp"
#include "homest/rng.hpp"

namespace homest {

double CoefficientField::k(double x, double y) const {
  return std::exp(log_permeability(x, y));
}

CoefficientField CoefficientField::constant(double value, double a, double b) {
  if (!(value > 0.0)) throw CoefficientError("constant coefficient must be positive");
  const double u = std::log(value);
  CoefficientField f;
  f.log_permeability = [u](double, double) { return u; };
  f.alpha = value;
  f.beta = value;
  f.a = a;
  f.b = b;
  f.depends_on_x = false;
  return f;
}

CoefficientField CoefficientField::periodic(std::function<double(double)> profile,
                                            double a, double b) {
  CoefficientField f;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  constexpr int kScan = 4096;
  for (int i = 0; i < kScan; ++i) {
    const double u = profile(static_cast<double>(i) / kScan);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  f.log_permeability = [p = std::move(profile)](double, double y) { return p(y); };
  // Scan bounds widened slightly so values between scan points stay inside.
  f.alpha = std::exp(lo) * (1.0 - 1e-6);
  f.beta = std::exp(hi) * (1.0 + 1e-6);
  f.a = a;
  f.b = b;
  f.depends_on_x = false;
  return f;
}

CoefficientField CoefficientField::two_scale(std::function<double(double, double)> u,
                                             double a, double b) {
  CoefficientField f;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  constexpr int kX = 257, kY = 512;
  for (int i = 0; i < kX; ++i) {
    const double x = a + (b - a) * i / (kX - 1);
    for (int j = 0; j < kY; ++j) {
      const double v = u(x, static_cast<double>(j) / kY);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  f.log_permeability = std::move(u);
  f.alpha = std::exp(lo) * (1.0 - 1e-3);
  f.beta = std::exp(hi) * (1.0 + 1e-3);
  f.a = a;
  f.b = b;
  return f;
}

void CoefficientField::validate(std::span<const double> xs, std::size_t y_samples) const {
  if (!(alpha > 0.0) || !(beta >= alpha) || !std::isfinite(beta))
    throw CoefficientError("coefficient bounds must satisfy 0 < alpha <= beta < inf");
  for (double x : xs) {
    for (std::size_t j = 0; j <= y_samples; ++j) {
      const double y = static_cast<double>(j) / static_cast<double>(y_samples);
      const double kv = k(x, y);
      if (!(kv >= alpha && kv <= beta))
        throw CoefficientError("k(" + std::to_string(x) + ", " + std::to_string(y) +
                               ") = " + std::to_string(kv) + " outside [alpha, beta]");
    }
    const double u0 = log_permeability(x, 0.25);
    const double u1 = log_permeability(x, 1.25);
    if (std::abs(u0 - u1) > 1e-10 * (1.0 + std::abs(u0)))
      throw CoefficientError("log-permeability is not 1-periodic in y");
  }
}

double eval_two_scale(const CoefficientField& field, double x, double eps) {
  if (!(eps > 0.0)) throw DomainError("eval_two_scale: eps must be positive");
  if (x < field.a || x > field.b)
    throw DomainError("eval_two_scale: x = " + std::to_string(x) + " outside domain");
  return field.k(x, x / eps);
}

double gaussian_covariance(double s) { return std::exp(-std::numbers::pi * s * s); }

void MicrostructureModel::validate() const {
  if (!(sigma >= 0.0)) throw PreconditionError("microstructure: sigma must be >= 0");
  if (!(epsilon > 0.0)) throw PreconditionError("microstructure: epsilon must be > 0");
  if (!covariance) throw PreconditionError("microstructure: covariance missing");
  if (std::abs(covariance(0.0) - 1.0) > 1e-12)
    throw PreconditionError("microstructure: R(0) must equal 1");
  // Composite Simpson on [-L, L], L large enough for integrable tails.
  constexpr double L = 40.0;
  constexpr int n = 80000;
  const double h = 2.0 * L / n;
  double s = covariance(-L) + covariance(L);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * covariance(-L + i * h);
  const double integral = s * h / 3.0;
  if (std::abs(integral - 1.0) > 1e-6)
    throw PreconditionError("microstructure: integral of R must equal 1, got " +
                            std::to_string(integral));
  for (double t : {0.1, 0.5, 1.0, 2.5}) {
    if (std::abs(covariance(t) - covariance(-t)) > 1e-12)
      throw PreconditionError("microstructure: R must be even");
  }
}

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Forward DFT in place: x_j <- sum_k x_k exp(-2 pi i j k / m).
void forward_dft(std::vector<std::complex<double>>& data) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(data.size()), ptr, ptr, FFTW_FORWARD,
                            FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  fftw_execute(plan);
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

std::size_t next_pow2(std::size_t v) {
  std::size_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

}  // namespace

MicrostructureSampler::MicrostructureSampler(const MicrostructureModel& model,
                                             const Grid1D& grid)
    : grid_(grid), epsilon_(model.epsilon) {
  model.validate();
  if (grid.spacing() > model.epsilon / 8.0 * (1.0 + 1e-12))
    throw ResolutionError("microstructure grid spacing " + std::to_string(grid.spacing()) +
                          " exceeds epsilon/8 = " + std::to_string(model.epsilon / 8.0));
  const double ds = grid.spacing() / model.epsilon;
  const auto n = grid.size();
  // Pad so the embedded covariance has decayed (8 correlation lengths).
  std::size_t m = next_pow2(std::max(2 * (n - 1),
                                     2 * static_cast<std::size_t>(std::ceil(8.0 / ds))));
  for (int attempt = 0; attempt < 4; ++attempt, m *= 2) {
    std::vector<std::complex<double>> c(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double lag = static_cast<double>(std::min(k, m - k)) * ds;
      c[k] = model.covariance(lag);
    }
    forward_dft(c);
    double top = 0.0, worst = 0.0;
    for (const auto& z : c) {
      top = std::max(top, z.real());
      worst = std::min(worst, z.real());
    }
    negative_mass_ = -worst / top;
    if (negative_mass_ <= 1e-10 || attempt == 3) {
      eigenvalues_.resize(m);
      for (std::size_t k = 0; k < m; ++k) eigenvalues_[k] = std::max(0.0, c[k].real());
      return;
    }
  }
}

MicrostructureSample MicrostructureSampler::draw(std::uint64_t seed,
                                                 std::uint64_t replicate) const {
  const std::size_t m = eigenvalues_.size();
  Stream rng(seed, StreamTag::microstructure, replicate);
  std::vector<std::complex<double>> z(m);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double re = rng.normal();
    const double im = rng.normal();
    z[k] = std::sqrt(eigenvalues_[k] * inv_m) * std::complex<double>(re, im);
  }
  forward_dft(z);
  MicrostructureSample s;
  s.grid.assign(grid_.nodes().begin(), grid_.nodes().end());
  s.mu.resize(grid_.size());
  for (std::size_t j = 0; j < grid_.size(); ++j) s.mu[j] = z[j].real();
  s.seed = seed;
  s.replicate = replicate;
  s.epsilon = epsilon_;
  return s;
}

MicrostructureSample sample_microstructure(const MicrostructureModel& model,
                                           const Grid1D& grid, std::uint64_t seed,
                                           std::uint64_t replicate) {
  return MicrostructureSampler(model, grid).draw(seed, replicate);
}

double RandomCoefficient::operator()(double x) const {
  const double a = grid.front(), b = grid.back();
  if (x < a || x > b) throw DomainError("random coefficient evaluated outside its grid");
  const double h = (b - a) / static_cast<double>(grid.size() - 1);
  const double s = (x - a) / h;
  const double r = std::round(s);
  if (std::abs(s - r) < 1e-9) return k[static_cast<std::size_t>(r)];
  const auto i = std::min(static_cast<std::size_t>(s), grid.size() - 2);
  const double t = s - static_cast<double>(i);
  return 1.0 / ((1.0 - t) * inv_k[i] + t * inv_k[i + 1]);
}

RandomCoefficient compose_random_coefficient(const ScalarFunction& k0,
                                             const MicrostructureSample& sample,
                                             double sigma,
                                             std::optional<double> clamp_ceiling) {
  const std::size_t n = sample.grid.size();
  RandomCoefficient out;
  out.grid = sample.grid;
  std::vector<double> inv_base(n);
  double sup_k0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double kv = k0(sample.grid[i]);
    if (!(kv > 0.0)) throw CoefficientError("compose_random_coefficient: k0 must be > 0");
    sup_k0 = std::max(sup_k0, kv);
    inv_base[i] = 1.0 / kv;
  }
  out.clamp_ceiling = clamp_ceiling.value_or(20.0 * sup_k0);
  out.inv_k.resize(n);
  if (sigma == 0.0) {
    // Exact pass-through: k == k0 bit for bit.
    out.inv_k = inv_base;
    out.k.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.k[i] = k0(sample.grid[i]);
    return out;
  }
  out.clamped_nodes = kernels::active().clamped_reciprocal(
      inv_base.data(), sample.mu.data(), sigma, 1.0 / out.clamp_ceiling, out.inv_k.data(), n);
  out.k.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.k[i] = 1.0 / out.inv_k[i];
  out.clamp_fraction = static_cast<double>(out.clamped_nodes) / static_cast<double>(n);
  out.clamp_warning = out.clamp_fraction > 1e-3;
  return out;
}

GaussianPrior GaussianPrior::fourier(double a, double b, std::size_t modes, double sigma0,
                                     double decay) {
  if (modes < 1) throw PreconditionError("GaussianPrior: need at least one mode");
  GaussianPrior p;
  const double L = b - a;
  const double c0 = 1.0 / std::sqrt(L);
  const double c1 = std::sqrt(2.0 / L);
  for (std::size_t m = 1; m <= modes; ++m) {
    if (m == 1) {
      p.basis.emplace_back([c0](double) { return c0; });
    } else {
      const double freq = 2.0 * std::numbers::pi * static_cast<double>(m / 2) / L;
      if (m % 2 == 0)
        p.basis.emplace_back([=](double x) { return c1 * std::cos(freq * (x - a)); });
      else
        p.basis.emplace_back([=](double x) { return c1 * std::sin(freq * (x - a)); });
    }
    p.weights.push_back(sigma0 * std::pow(static_cast<double>(m), -decay));
  }
  return p;
}

std::vector<double> sample_prior_coefficients(const GaussianPrior& prior,
                                              std::uint64_t seed,
                                              std::uint64_t replicate) {
  if (prior.truncation() < 1) throw PreconditionError("prior: truncation must be >= 1");
  Stream rng(seed, StreamTag::prior, replicate);
  std::vector<double> theta(prior.truncation());
  for (std::size_t m = 0; m < theta.size(); ++m)
    theta[m] = prior.mean_at(m) + prior.weights[m] * rng.normal();
  return theta;
}

std::vector<double> expand(const GaussianPrior& prior, std::span<const double> theta,
                           std::span<const double> xs) {
  if (theta.size() != prior.truncation())
    throw PreconditionError("expand: theta dimension does not match prior truncation");
  std::vector<double> u(xs.size(), 0.0);
  for (std::size_t m = 0; m < theta.size(); ++m) {
    if (theta[m] == 0.0) continue;
    for (std::size_t i = 0; i < xs.size(); ++i) u[i] += theta[m] * prior.basis[m](xs[i]);
  }
  return u;
}

std::vector<double> sample_prior_draw(const GaussianPrior& prior, const Grid1D& grid,
                                      std::uint64_t seed, std::uint64_t replicate) {
  const auto theta = sample_prior_coefficients(prior, seed, replicate);
  return expand(prior, theta, grid.nodes());
}

double prior_log_density(const GaussianPrior& prior, std::span<const double> theta) {
  if (theta.size() != prior.truncation())
    throw PreconditionError("prior_log_density: dim(theta) != M");
  double s = 0.0;
  for (std::size_t m = 0; m < theta.size(); ++m) {
    const double d = theta[m] - prior.mean_at(m);
    const double sd = prior.weights[m];
    if (sd == 0.0) {
      if (d != 0.0) return -std::numeric_limits<double>::infinity();
      continue;
    }
    s += (d / sd) * (d / sd);
  }
  return -0.5 * s;
}

}  // namespace homest
