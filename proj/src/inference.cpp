#include "homest/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "homest/errors.hpp"
#include "homest/kernels.hpp"
#include "homest/rng.hpp"
#include "homest/stats.hpp"

namespace homest {

double weighted_misfit(std::span<const double> y, std::span<const double> predicted,
                       std::span<const double> gamma_diag) {
  if (y.size() != predicted.size() || y.size() != gamma_diag.size())
    throw PreconditionError("misfit: dimension mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (!(gamma_diag[j] > 0.0)) throw CovarianceError("misfit: Gamma entries must be positive");
    const double r = y[j] - predicted[j];
    s += r * r / gamma_diag[j];
  }
  return 0.5 * s;
}

double misfit(const MisfitSpec& spec, std::span<const double> y, std::span<const double> theta) {
  const auto g = spec.forward(theta);
  return weighted_misfit(y, g, spec.gamma_diag);
}

ScalarEstimate scalar_estimate(std::span<const double> y, std::span<const double> lstar) {
  if (y.size() != lstar.size()) throw PreconditionError("scalar_estimate: dimension mismatch");
  const double den = kernels::dot(lstar, lstar);
  if (!(den > 0.0)) throw PreconditionError("scalar_estimate: sum of l*^2 is zero");
  ScalarEstimate e;
  e.ratio = kernels::dot(y, lstar) / den;
  if (e.ratio > 0.0) {
    e.u_bar = -std::log(e.ratio);
  } else {
    e.sign_failure = true;
    e.u_bar = std::numeric_limits<double>::quiet_NaN();
  }
  return e;
}

CsvTable ConsistencyTable::table() const {
  CsvTable t({"N", "eps", "functional", "mean_err", "stderr", "flag_rate", "bound"});
  for (const auto& r : rows)
    t.add_row({std::to_string(r.N), format_double(r.eps), r.functional, format_double(r.mean_err),
               format_double(r.stderr_mean), format_double(r.flag_rate), format_double(r.bound)});
  return t;
}

namespace {

std::uint64_t replicate_key(std::size_t N, std::size_t e, std::size_t r) {
  return (static_cast<std::uint64_t>(e) << 48) ^ (static_cast<std::uint64_t>(N) << 24) ^
         static_cast<std::uint64_t>(r);
}

ConsistencyRow noisy_row(std::span<const double> clean, std::span<const double> lstar,
                         double target, double gamma, std::size_t replicates,
                         std::uint64_t seed, std::size_t N, std::size_t e, unsigned threads) {
  std::vector<double> err(replicates);
  std::vector<char> flag(replicates, 0);
  stats::parallel_for(replicates, threads, [&](std::size_t r) {
    Stream rng(seed, StreamTag::observation_noise, replicate_key(N, e, r));
    std::vector<double> y(clean.begin(), clean.end());
    if (gamma > 0.0)
      for (double& v : y) v += gamma * rng.normal();
    const auto est = scalar_estimate(y, lstar);
    err[r] = std::abs(est.ratio - target);
    flag[r] = est.sign_failure ? 1 : 0;
  });
  ConsistencyRow row;
  row.N = N;
  const auto m = stats::moments(err);
  row.mean_err = m.mean;
  row.stderr_mean = m.stderr_mean;
  row.flag_rate = static_cast<double>(std::count(flag.begin(), flag.end(), 1)) /
                  static_cast<double>(replicates);
  row.replicates = replicates;
  return row;
}

void check_family(std::span<const double> lstar) {
  double s = 0.0;
  for (double v : lstar) s += v * v;
  if (!(s / static_cast<double>(lstar.size()) > 1e-12))
    throw PreconditionError("functional family is degenerate: (1/N) sum l*^2 vanishes");
}

}  // namespace

ConsistencyTable consistency_experiment(const ConsistencyConfig& cfg) {
  if (cfg.N_list.empty()) throw PreconditionError("consistency: empty N list");
  if (cfg.replicates < 1) throw PreconditionError("consistency: need replicates >= 1");
  const Grid1D grid(cfg.a, cfg.b, cfg.grid_nodes);
  const auto source = SourceTerm::constant(1.0, cfg.a);
  const auto pstar = solve_exact([](double) { return 1.0; }, source, grid);
  const double k = std::exp(cfg.u0);
  const auto p = solve_exact([k](double) { return k; }, source, grid);
  const double target = std::exp(-cfg.u0);

  ConsistencyTable out;
  for (std::size_t N : cfg.N_list) {
    std::vector<double> lstar(N), clean(N);
    for (std::size_t j = 0; j < N; ++j) {
      const auto fn = Functional::point(cfg.a + (cfg.b - cfg.a) * static_cast<double>(j + 1) /
                                                    static_cast<double>(N + 1));
      lstar[j] = apply_functional(fn, pstar);
      clean[j] = apply_functional(fn, p);
    }
    check_family(lstar);
    auto row = noisy_row(clean, lstar, target, cfg.gamma, cfg.replicates, cfg.seed, N, 0,
                         cfg.threads);
    row.functional = "point_eval";
    out.rows.push_back(std::move(row));
  }
  std::vector<double> ns, errs;
  bool positive = true;
  for (const auto& r : out.rows) {
    ns.push_back(static_cast<double>(r.N));
    errs.push_back(r.mean_err);
    positive = positive && r.mean_err > 0.0;
  }
  out.slope = (positive && ns.size() >= 2) ? stats::loglog_slope(ns, errs)
                                           : std::numeric_limits<double>::quiet_NaN();
  return out;
}

CoefficientField calibrated_two_scale_field(double u0, double a, double b) {
  constexpr double A = 0.8;
  const double shift = u0 + std::log(std::cyl_bessel_i(0.0, A));
  auto u = [shift](double, double y) { return shift + A * std::sin(2.0 * std::numbers::pi * y); };
  return CoefficientField::two_scale(u, a, b);
}

ConsistencyTable multiscale_consistency_experiment(const CoefficientField& field,
                                                   const SourceTerm& source,
                                                   const MultiscaleConfig& cfg) {
  if (cfg.N_list.empty() || cfg.eps_list.empty())
    throw PreconditionError("multiscale consistency: empty N or eps list");
  if (!(cfg.dq_window_ratio > 0.0))
    throw PreconditionError("multiscale consistency: dq_window_ratio must be positive");
  const double a = field.a, b = field.b;
  const double target = std::exp(-cfg.u0);

  ConsistencyTable out;
  for (std::size_t e = 0; e < cfg.eps_list.size(); ++e) {
    const double eps = cfg.eps_list[e];
    const auto cells = static_cast<std::size_t>(std::ceil((b - a) * cfg.nodes_per_period / eps - 1e-9));
    const Grid1D grid(a, b, cells + 1);
    SolveOptions so;
    so.alpha = field.alpha;
    so.resolved_scale = eps;
    const auto pe = solve_exact([&](double x) { return eval_two_scale(field, x, eps); }, source,
                                grid, so);
    const auto pstar = solve_exact([](double) { return 1.0; }, source, grid);
    double sup = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      sup = std::max(sup, std::abs(pe.p[i] - target * pstar.p[i]));

    for (std::size_t N : cfg.N_list) {
      if (2.0 * static_cast<double>(N) * eps > (b - a) * (1.0 + 1e-9)) continue;
      std::vector<Functional> pts(N), dqs(N);
      for (std::size_t j = 0; j < N; ++j) {
        const double x =
            a + (b - a) * (static_cast<double>(j) + 0.5) / static_cast<double>(N) + 0.5 * eps;
        pts[j] = Functional::point(x);
        dqs[j] = Functional::difference_quotient(x, cfg.dq_window_ratio * eps);
      }
      for (int kind = 0; kind < 2; ++kind) {
        const auto& fns = kind == 0 ? pts : dqs;
        const auto lstar = apply_functionals(fns, pstar);
        const auto clean = apply_functionals(fns, pe);
        check_family(lstar);
        auto row = noisy_row(clean, lstar, target, cfg.gamma, cfg.replicates, cfg.seed, N,
                             2 * e + static_cast<std::size_t>(kind), cfg.threads);
        row.eps = eps;
        row.functional = to_string(fns.front().kind);
        if (kind == 0) {
          double s2 = 0.0;
          for (double v : lstar) s2 += v * v;
          row.bound = sup / std::sqrt(s2 / static_cast<double>(N));
        } else {
          row.bound = std::numeric_limits<double>::quiet_NaN();
        }
        out.rows.push_back(std::move(row));
      }
    }
  }
  out.slope = std::numeric_limits<double>::quiet_NaN();
  return out;
}

double bounded_solve(const std::function<double(double)>& phi, const BoundedSpec& spec) {
  if (!(spec.alpha_bound > 0.0)) throw PreconditionError("bounded_solve: alpha must be positive");
  const double x = golden_section_minimize(phi, -spec.alpha_bound, spec.alpha_bound);
  return std::clamp(x, -spec.alpha_bound, spec.alpha_bound);
}

RegularizedResult tikhonov_solve(const Objective& phi, const TikhonovSpec& spec,
                                 std::span<const double> theta0,
                                 const NelderMeadOptions& opts) {
  const std::size_t m = theta0.size();
  if (m == 0 || m > 8) throw PreconditionError("tikhonov_solve: dimension must be 1..8");
  if (spec.lambda < 0.0) throw PreconditionError("tikhonov_solve: lambda must be >= 0");
  std::vector<double> w = spec.weights.empty() ? std::vector<double>(m, 1.0) : spec.weights;
  if (w.size() != m) throw PreconditionError("tikhonov_solve: weight dimension mismatch");
  for (double v : w)
    if (!(v > 0.0)) throw PreconditionError("tikhonov_solve: weights must be positive");

  auto objective = [&](std::span<const double> th) {
    double pen = 0.0;
    for (std::size_t i = 0; i < m; ++i) pen += w[i] * th[i] * th[i];
    return 0.5 * spec.lambda * pen + phi(th);
  };
  std::vector<std::vector<double>> starts(3, std::vector<double>(theta0.begin(), theta0.end()));
  for (std::size_t i = 0; i < m; ++i) {
    const double sd = spec.lambda > 0.0 ? 1.0 / std::sqrt(spec.lambda * w[i]) : 1.0;
    starts[1][i] += sd;
    starts[2][i] -= sd;
  }
  RegularizedResult res;
  res.opt = nelder_mead_restarts(objective, starts, opts);
  res.flagged = !res.opt.converged;
  return res;
}

double posterior_log_density(const GaussianPrior& prior, const Objective& phi,
                             std::span<const double> theta) {
  if (theta.size() != prior.truncation())
    throw PreconditionError("posterior_log_density: dimension mismatch");
  return -phi(theta) + prior_log_density(prior, theta);
}

namespace {

// Normalized density values (trapezoid) from log-density samples.
std::vector<double> normalize(std::vector<double> logd, std::span<const double> weights) {
  const double mx = *std::max_element(logd.begin(), logd.end());
  if (!std::isfinite(mx)) throw CoverageError("hellinger: density vanishes on the grid");
  double z = 0.0;
  for (std::size_t i = 0; i < logd.size(); ++i) {
    logd[i] = std::exp(logd[i] - mx);
    z += weights[i] * logd[i];
  }
  for (double& v : logd) v /= z;
  return logd;
}

double strip_mass(std::span<const double> rho, std::span<const double> w, std::size_t strip) {
  double m = 0.0;
  for (std::size_t i = 0; i < strip; ++i) {
    m += w[i] * rho[i];
    m += w[rho.size() - 1 - i] * rho[rho.size() - 1 - i];
  }
  return m;
}

}  // namespace

double hellinger_distance(const std::function<double(double)>& logdens1,
                          const std::function<double(double)>& logdens2, const Grid1D& grid) {
  const auto w = grid.trapezoid_weights();
  std::vector<double> l1(grid.size()), l2(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    l1[i] = logdens1(grid.node(i));
    l2[i] = logdens2(grid.node(i));
  }
  const auto r1 = normalize(std::move(l1), w);
  const auto r2 = normalize(std::move(l2), w);
  const std::size_t strip = std::max<std::size_t>(1, grid.size() / 100);
  if (strip_mass(r1, w, strip) > 1e-8 || strip_mass(r2, w, strip) > 1e-8)
    throw CoverageError("hellinger: quadrature domain misses more than 1e-8 of the mass");
  double s = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = std::sqrt(r1[i]) - std::sqrt(r2[i]);
    s += w[i] * d * d;
  }
  return std::sqrt(std::clamp(0.5 * s, 0.0, 1.0));
}

double hellinger_distance_2d(const std::function<double(double, double)>& logdens1,
                             const std::function<double(double, double)>& logdens2,
                             const Grid1D& gx, const Grid1D& gy) {
  const auto wx = gx.trapezoid_weights();
  const auto wy = gy.trapezoid_weights();
  const std::size_t nx = gx.size(), ny = gy.size();
  std::vector<double> w(nx * ny), l1(nx * ny), l2(nx * ny);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t k = i * ny + j;
      w[k] = wx[i] * wy[j];
      l1[k] = logdens1(gx.node(i), gy.node(j));
      l2[k] = logdens2(gx.node(i), gy.node(j));
    }
  const auto r1 = normalize(std::move(l1), w);
  const auto r2 = normalize(std::move(l2), w);
  const std::size_t sx = std::max<std::size_t>(1, nx / 100), sy = std::max<std::size_t>(1, ny / 100);
  double edge1 = 0.0, edge2 = 0.0, s = 0.0;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t k = i * ny + j;
      const bool edge = i < sx || i >= nx - sx || j < sy || j >= ny - sy;
      if (edge) {
        edge1 += w[k] * r1[k];
        edge2 += w[k] * r2[k];
      }
      const double d = std::sqrt(r1[k]) - std::sqrt(r2[k]);
      s += w[k] * d * d;
    }
  if (edge1 > 1e-8 || edge2 > 1e-8)
    throw CoverageError("hellinger: quadrature domain misses more than 1e-8 of the mass");
  return std::sqrt(std::clamp(0.5 * s, 0.0, 1.0));
}

double lipschitz_constant(std::span<const double> deltas, std::span<const double> distances) {
  if (deltas.size() != distances.size() || deltas.empty())
    throw PreconditionError("lipschitz_constant: dimension mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    num += deltas[i] * distances[i];
    den += deltas[i] * deltas[i];
  }
  return num / den;
}

CsvTable SmallBallResult::table() const {
  CsvTable t({"delta", "ratio", "stderr", "hits1", "hits2", "inconclusive", "limit"});
  for (const auto& r : rows)
    t.add_row({format_double(r.delta), format_double(r.ratio), format_double(r.stderr_ratio),
               std::to_string(r.hits1), std::to_string(r.hits2), r.inconclusive ? "1" : "0",
               format_double(limit)});
  return t;
}

SmallBallResult small_ball_ratio(const GaussianPrior& prior, const Objective& phi,
                                 std::span<const double> z1, std::span<const double> z2,
                                 std::span<const double> deltas, std::size_t samples,
                                 std::uint64_t seed, unsigned threads) {
  const std::size_t m = prior.truncation();
  if (z1.size() != m || z2.size() != m)
    throw PreconditionError("small_ball_ratio: dimension mismatch");
  if (samples < 1) throw PreconditionError("small_ball_ratio: need samples");

  // Per-sample log weight and sup-norm distances to z1 and z2.
  std::vector<double> logw(samples), d1(samples), d2(samples);
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (samples + kChunk - 1) / kChunk;
  stats::parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t end = std::min(samples, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const auto th = sample_prior_coefficients(prior, seed, i);
      logw[i] = -phi(th);
      double a = 0.0, b = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        a = std::max(a, std::abs(th[k] - z1[k]));
        b = std::max(b, std::abs(th[k] - z2[k]));
      }
      d1[i] = a;
      d2[i] = b;
    }
  });
  const double mx = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(samples);
  for (std::size_t i = 0; i < samples; ++i) w[i] = std::exp(logw[i] - mx);

  SmallBallResult res;
  const double I1 = phi(z1) - prior_log_density(prior, z1);
  const double I2 = phi(z2) - prior_log_density(prior, z2);
  res.limit = std::exp(I2 - I1);
  const double n = static_cast<double>(samples);
  for (double delta : deltas) {
    SmallBallRow row;
    row.delta = delta;
    double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
      const double a = d1[i] < delta ? w[i] : 0.0;
      const double b = d2[i] < delta ? w[i] : 0.0;
      row.hits1 += d1[i] < delta;
      row.hits2 += d2[i] < delta;
      sa += a;
      sb += b;
      saa += a * a;
      sbb += b * b;
      sab += a * b;
    }
    if (row.hits1 == 0 || row.hits2 == 0) {
      row.inconclusive = true;
      row.ratio = std::numeric_limits<double>::quiet_NaN();
      row.stderr_ratio = std::numeric_limits<double>::quiet_NaN();
    } else {
      const double ma = sa / n, mb = sb / n;
      const double va = saa / n - ma * ma, vb = sbb / n - mb * mb, cab = sab / n - ma * mb;
      row.ratio = sa / sb;
      const double var = (va - 2.0 * row.ratio * cab + row.ratio * row.ratio * vb) / (mb * mb * n);
      row.stderr_ratio = std::sqrt(std::max(var, 0.0));
    }
    res.rows.push_back(row);
  }
  return res;
}

}  // namespace homest
