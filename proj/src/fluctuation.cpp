#include "homest/fluctuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "homest/errors.hpp"
#include "homest/inference.hpp"
#include "homest/kernels.hpp"
#include "homest/rng.hpp"
#include "homest/stats.hpp"

namespace homest {

double FourierLogCoefficient::u0(double x) const {
  if (theta.empty()) return 0.0;
  double u = theta[0];
  for (std::size_t m = 1; m < theta.size(); ++m) {
    const double freq = std::numbers::pi * static_cast<double>((m + 1) / 2);
    u += theta[m] * (m % 2 == 1 ? std::cos(freq * x) : std::sin(freq * x));
  }
  return u;
}

double FluctuationCovariance::log_det() const {
  const auto& L = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) s += std::log(L(i, i));
  return 2.0 * s;
}

double FluctuationCovariance::quad_form(std::span<const double> r) const {
  Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(r.size()));
  const Eigen::VectorXd z = llt.matrixL().solve(rv);
  return z.squaredNorm();
}

double FluctuationCovariance::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

namespace {

void factor_with_jitter(FluctuationCovariance& fc) {
  const double trace = fc.C.trace();
  static constexpr double kLevels[] = {0.0, 1e-12, 1e-10, 1e-8};
  const auto n = fc.C.rows();
  for (int level = 0; level < 4; ++level) {
    const double jitter = kLevels[level] * trace;
    if (level > 0 && !(jitter > 0.0)) break;
    Eigen::MatrixXd M = fc.C;
    if (jitter > 0.0) M.diagonal().array() += jitter;
    fc.llt.compute(M);
    if (fc.llt.info() == Eigen::Success) {
      bool positive = true;
      for (Eigen::Index i = 0; i < n; ++i)
        positive = positive && fc.llt.matrixLLT()(i, i) > 0.0;
      if (positive) {
        fc.jitter_level = level;
        fc.jitter = jitter;
        return;
      }
    }
  }
  throw CovarianceError("fluctuation covariance is not positive definite after jitter");
}

}  // namespace

FluctuationCovariance fluctuation_covariance_nodal(const Grid1D& quad,
                                                   std::span<const double> inv_k0,
                                                   std::span<const double> F, double eps,
                                                   double sigma, double gamma,
                                                   std::span<const double> points,
                                                   bool factor) {
  if (eps < 0.0 || sigma < 0.0 || gamma < 0.0)
    throw PreconditionError("fluctuation covariance: eps, sigma, gamma must be >= 0");
  const auto n = static_cast<Eigen::Index>(points.size());
  FluctuationCovariance fc;
  fc.points.assign(points.begin(), points.end());
  fc.gamma = gamma;
  fc.sigma = sigma;
  fc.eps = eps;
  fc.C = Eigen::MatrixXd::Zero(n, n);

  const double scale = eps * sigma * sigma;
  if (scale > 0.0) {
    const auto sol = solve_exact_nodal(quad, inv_k0, F);
    const auto Q = greens_kernel_at(points, quad, inv_k0);
    const auto w = quad.trapezoid_weights();
    std::vector<double> wv(quad.size());
    for (std::size_t i = 0; i < quad.size(); ++i) wv[i] = w[i] * sol.v[i] * sol.v[i];
    kernels::active().weighted_gram(Q.data(), points.size(), quad.size(), wv.data(), fc.C.data());
    fc.C *= scale;
    fc.C = 0.5 * (fc.C + fc.C.transpose()).eval();
  }
  fc.C.diagonal().array() += gamma * gamma;
  if (factor) factor_with_jitter(fc);
  return fc;
}

FluctuationCovariance fluctuation_covariance(const ScalarFunction& k0, const SourceTerm& source,
                                             double eps, double sigma, double gamma,
                                             std::span<const double> points, const Grid1D& quad) {
  if (quad.size() < 512) throw PreconditionError("fluctuation covariance: need >= 512 nodes");
  for (double x : points)
    if (!(x > quad.a() && x < quad.b()))
      throw DomainError("fluctuation covariance: point outside (a, b)");
  std::vector<double> inv_k0(quad.size());
  for (std::size_t i = 0; i < quad.size(); ++i) {
    const double kv = k0(quad.node(i));
    if (!(kv > 0.0)) throw CoefficientError("fluctuation covariance: k0 must be positive");
    inv_k0[i] = 1.0 / kv;
  }
  return fluctuation_covariance_nodal(quad, inv_k0, source.antiderivative_on(quad), eps, sigma,
                                      gamma, points);
}

CsvTable CltReport::table() const {
  CsvTable t({"x", "mean", "empirical_var", "predicted_var", "literal_var", "skewness",
              "excess_kurtosis"});
  for (const auto& p : points)
    t.add_row({p.x, p.mean, p.empirical_var, p.predicted_var, p.literal_var, p.skewness,
               p.excess_kurtosis});
  return t;
}

CltReport clt_diagnostic(const CltConfig& cfg) {
  if (!(cfg.eps > 0.0)) throw PreconditionError("clt: eps must be positive");
  if (cfg.replicates < 2) throw PreconditionError("clt: need at least two replicates");
  const auto cells =
      static_cast<std::size_t>(std::ceil((cfg.b - cfg.a) * cfg.nodes_per_period / cfg.eps - 1e-9));
  const Grid1D grid(cfg.a, cfg.b, cells + 1);
  const auto F = cfg.source.antiderivative_on(grid);
  std::vector<double> inv_k0(grid.size()), k0(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    k0[i] = cfg.k0(grid.node(i));
    inv_k0[i] = 1.0 / k0[i];
  }
  const auto p0 = solve_exact_nodal(grid, inv_k0, F);
  const auto Q = greens_kernel_at(cfg.points, grid, inv_k0);
  const auto w = grid.trapezoid_weights();

  CltReport rep;
  rep.replicates = cfg.replicates;
  rep.grid_nodes = grid.size();
  const std::size_t np = cfg.points.size();
  for (std::size_t j = 0; j < np; ++j) {
    CltPoint pt;
    pt.x = cfg.points[j];
    double flux = 0.0, literal = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double q2 = Q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) *
                        Q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      const double vl = k0[i] * p0.p[i];
      flux += w[i] * q2 * p0.v[i] * p0.v[i];
      literal += w[i] * q2 * vl * vl;
    }
    pt.predicted_var = cfg.sigma * cfg.sigma * flux;
    pt.literal_var = cfg.sigma * cfg.sigma * literal;
    rep.points.push_back(pt);
  }

  MicrostructureModel model;
  model.sigma = cfg.sigma;
  model.epsilon = cfg.eps;
  model.clamp_ceiling = cfg.clamp_ceiling;
  const MicrostructureSampler sampler(model, grid);
  auto k0_eval = [&](double x) { return grid.interpolate(k0, x); };
  const double inv_sqrt_eps = 1.0 / std::sqrt(cfg.eps);

  std::vector<std::vector<double>> samples(np, std::vector<double>(cfg.replicates));
  std::vector<double> clamp(cfg.replicates);
  stats::parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    const auto mu = sampler.draw(cfg.seed, r);
    const auto rc = compose_random_coefficient(k0_eval, mu, cfg.sigma, cfg.clamp_ceiling);
    clamp[r] = rc.clamp_fraction;
    const auto pe = solve_exact_nodal(grid, rc.inv_k, F);
    for (std::size_t j = 0; j < np; ++j) {
      const double x = cfg.points[j];
      samples[j][r] = (grid.interpolate(pe.p, x) - grid.interpolate(p0.p, x)) * inv_sqrt_eps;
    }
  });
  rep.max_clamp_fraction = *std::max_element(clamp.begin(), clamp.end());
  for (std::size_t j = 0; j < np; ++j) {
    rep.points[j].mean = stats::mean(samples[j]);
    rep.points[j].empirical_var = stats::variance(samples[j]);
    rep.points[j].skewness = stats::skewness(samples[j]);
    rep.points[j].excess_kurtosis = stats::excess_kurtosis(samples[j]);
  }
  return rep;
}

MapObjective::MapObjective(MapProblem problem) : problem_(std::move(problem)) {
  problem_.observations.validate();
  for (const auto& fn : problem_.observations.functionals) {
    if (fn.kind != Functional::Kind::point_eval)
      throw PreconditionError("MAP problem: only point evaluations are supported");
    if (!(fn.location > problem_.quad.a() && fn.location < problem_.quad.b()))
      throw DomainError("MAP problem: observation point outside (a, b)");
    points_.push_back(fn.location);
  }
  if (problem_.prior_mean.size() != problem_.prior_sd.size() || problem_.prior_mean.empty())
    throw PreconditionError("MAP problem: prior mean and sd must have equal, nonzero length");
  for (double s : problem_.prior_sd)
    if (!(s > 0.0)) throw PreconditionError("MAP problem: prior variances must be positive");
  if (!(problem_.observations.gamma > 0.0) && problem_.observations.gamma_diag.empty())
    throw PreconditionError("MAP problem: gamma must be positive");
  F_ = problem_.source.antiderivative_on(problem_.quad);
}

std::vector<double> MapObjective::predict(std::span<const double> theta) const {
  const auto& quad = problem_.quad;
  const FourierLogCoefficient coef{std::vector<double>(theta.begin(), theta.end())};
  std::vector<double> inv_k0(quad.size());
  for (std::size_t i = 0; i < quad.size(); ++i) inv_k0[i] = std::exp(-coef.u0(quad.node(i)));
  const auto sol = solve_exact_nodal(quad, inv_k0, F_);
  std::vector<double> out(points_.size());
  for (std::size_t j = 0; j < points_.size(); ++j) out[j] = quad.interpolate(sol.p, points_[j]);
  return out;
}

double MapObjective::operator()(std::span<const double> theta) const {
  if (theta.size() != problem_.prior_mean.size())
    throw PreconditionError("MAP objective: theta dimension mismatch");
  double prior = 0.0;
  for (std::size_t m = 0; m < theta.size(); ++m) {
    const double d = (theta[m] - problem_.prior_mean[m]) / problem_.prior_sd[m];
    prior += d * d;
  }
  const auto& obs = problem_.observations;
  const auto& quad = problem_.quad;
  const FourierLogCoefficient coef{std::vector<double>(theta.begin(), theta.end())};
  std::vector<double> inv_k0(quad.size());
  for (std::size_t i = 0; i < quad.size(); ++i) inv_k0[i] = std::exp(-coef.u0(quad.node(i)));
  for (double v : inv_k0)
    if (!std::isfinite(v) || !(v > 0.0)) return std::numeric_limits<double>::infinity();
  const auto sol = solve_exact_nodal(quad, inv_k0, F_);
  std::vector<double> r(points_.size());
  for (std::size_t j = 0; j < points_.size(); ++j)
    r[j] = obs.y[j] - quad.interpolate(sol.p, points_[j]);

  const double scale = problem_.eps * problem_.sigma * problem_.sigma;
  double data = 0.0;
  if (problem_.use_model_error && scale > 0.0) {
    auto fc = fluctuation_covariance_nodal(quad, inv_k0, F_, problem_.eps, problem_.sigma,
                                           obs.gamma, points_, false);
    if (!obs.gamma_diag.empty())
      for (std::size_t j = 0; j < points_.size(); ++j)
        fc.C(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) +=
            obs.gamma_diag[j] - obs.gamma * obs.gamma;
    factor_with_jitter(fc);
    data = 0.5 * fc.log_det() + 0.5 * fc.quad_form(r);
  } else {
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double var = obs.variance(j);
      data += 0.5 * std::log(var) + 0.5 * r[j] * r[j] / var;
    }
  }
  return data + 0.5 * prior;
}

double neg_log_posterior(const MapProblem& problem, std::span<const double> theta) {
  return MapObjective(problem)(theta);
}

MapEstimate map_estimate(const MapProblem& problem, std::span<const double> output_x,
                         const NelderMeadOptions& opts) {
  const MapObjective objective(problem);
  auto safe = [&](std::span<const double> th) {
    try {
      return objective(th);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const auto& m = problem.prior_mean;
  std::vector<std::vector<double>> starts{m, m, m};
  for (std::size_t i = 0; i < m.size(); ++i) {
    starts[1][i] += problem.prior_sd[i];
    starts[2][i] -= problem.prior_sd[i];
  }
  const auto res = nelder_mead_restarts(safe, starts, opts);
  MapEstimate est;
  est.theta = res.x;
  est.value = res.value;
  est.evaluations = res.evaluations;
  est.converged = res.converged;
  const FourierLogCoefficient coef{est.theta};
  est.x.assign(output_x.begin(), output_x.end());
  for (double x : output_x) est.k_hat.push_back(coef.k0(x));
  return est;
}

CsvTable VarianceStudy::summary_table() const {
  CsvTable t({"x", "k0_true", "mean_k1", "var_k1", "mean_k2", "var_k2", "ratio"});
  for (std::size_t i = 0; i < x.size(); ++i)
    t.add_row({x[i], k0_true[i], mean_k1[i], var_k1[i], mean_k2[i], var_k2[i], ratio[i]});
  return t;
}

CsvTable VarianceStudy::replicate_table() const {
  std::vector<std::string> header{"replicate", "estimator"};
  for (double v : x) header.push_back("k_" + format_double(v));
  CsvTable t(header);
  for (std::size_t r = 0; r < k1.size(); ++r) {
    for (int e = 0; e < 2; ++e) {
      const auto& curve = e == 0 ? k1[r] : k2[r];
      if (curve.empty()) continue;
      std::vector<std::string> row{std::to_string(r), e == 0 ? "k1" : "k2"};
      for (double v : curve) row.push_back(format_double(v));
      t.add_row(std::move(row));
    }
  }
  return t;
}

VarianceStudy variance_study(const VarianceStudyConfig& cfg) {
  if (cfg.replicates < 2) throw PreconditionError("variance study: need at least two replicates");
  if (cfg.N < 1) throw PreconditionError("variance study: need observations");
  const double a = cfg.a, b = cfg.b;
  const FourierLogCoefficient truth{cfg.theta_true};
  const auto source = SourceTerm::constant(1.0, a);

  const auto cells =
      static_cast<std::size_t>(std::ceil((b - a) * cfg.nodes_per_period / cfg.eps - 1e-9));
  const Grid1D fine(a, b, cells + 1);
  const auto F_fine = source.antiderivative_on(fine);
  const Grid1D quad(a, b, cfg.quad_nodes);

  std::vector<double> xs(cfg.N);
  std::vector<Functional> fns(cfg.N);
  for (std::size_t j = 0; j < cfg.N; ++j) {
    xs[j] = a + (b - a) * static_cast<double>(j + 1) / static_cast<double>(cfg.N + 1);
    fns[j] = Functional::point(xs[j]);
  }
  const auto pstar = solve_exact([](double) { return 1.0; }, source, quad);
  const auto lstar = apply_functionals(fns, pstar);

  VarianceStudy st;
  st.replicates = cfg.replicates;
  for (std::size_t i = 0; i < cfg.output_points; ++i) {
    const double x = a + (b - a) * static_cast<double>(i) / static_cast<double>(cfg.output_points - 1);
    st.x.push_back(x);
    st.k0_true.push_back(truth.k0(x));
  }

  MicrostructureModel model;
  model.sigma = cfg.sigma;
  model.epsilon = cfg.eps;
  model.clamp_ceiling = cfg.clamp_ceiling;
  const MicrostructureSampler sampler(model, fine);
  auto k0_eval = [&](double x) { return truth.k0(x); };

  st.k1.assign(cfg.replicates, {});
  st.k2.assign(cfg.replicates, {});
  st.ok1.assign(cfg.replicates, 0);
  st.ok2.assign(cfg.replicates, 0);
  std::vector<double> clamp(cfg.replicates, 0.0);
  std::vector<char> warn(cfg.replicates, 0);

  stats::parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    const auto mu = sampler.draw(cfg.seed, r);
    const auto rc = compose_random_coefficient(k0_eval, mu, cfg.sigma, cfg.clamp_ceiling);
    clamp[r] = rc.clamp_fraction;
    warn[r] = rc.clamp_warning ? 1 : 0;
    const auto pe = solve_exact_nodal(fine, rc.inv_k, F_fine);
    Stream rng(cfg.seed, StreamTag::observation_noise, r);
    ObservationSet obs;
    obs.functionals = fns;
    obs.gamma = cfg.gamma;
    obs.y.resize(cfg.N);
    for (std::size_t j = 0; j < cfg.N; ++j)
      obs.y[j] = fine.interpolate(pe.p, xs[j]) + cfg.gamma * rng.normal();

    const auto crude = scalar_estimate(obs.y, lstar);
    MapProblem prob;
    prob.observations = obs;
    prob.prior_mean = std::vector<double>(cfg.theta_true.size(), 0.0);
    prob.prior_mean[0] = crude.sign_failure ? 0.0 : crude.u_bar;
    prob.prior_sd = std::vector<double>(cfg.theta_true.size(), cfg.prior_sd);
    prob.sigma = cfg.sigma;
    prob.eps = cfg.eps;
    prob.quad = quad;
    prob.source = source;

    for (int e = 0; e < 2; ++e) {
      prob.use_model_error = (e == 0);
      MapEstimate est;
      bool ok = false;
      try {
        est = map_estimate(prob, st.x, cfg.optimizer);
        ok = est.converged;
      } catch (const Error&) {
        ok = false;
      }
      if (e == 0) {
        st.ok1[r] = ok;
        if (ok) st.k1[r] = est.k_hat;
      } else {
        st.ok2[r] = ok;
        if (ok) st.k2[r] = est.k_hat;
      }
    }
  });

  st.failures_k1 = static_cast<std::size_t>(std::count(st.ok1.begin(), st.ok1.end(), 0));
  st.failures_k2 = static_cast<std::size_t>(std::count(st.ok2.begin(), st.ok2.end(), 0));
  st.failure_rate = static_cast<double>(std::max(st.failures_k1, st.failures_k2)) /
                    static_cast<double>(cfg.replicates);
  st.flagged = st.failure_rate > cfg.max_failure_rate;
  st.max_clamp_fraction = *std::max_element(clamp.begin(), clamp.end());
  st.clamp_warnings = static_cast<std::size_t>(std::count(warn.begin(), warn.end(), 1));

  const std::size_t P = st.x.size();
  st.mean_k1.assign(P, 0.0);
  st.var_k1.assign(P, 0.0);
  st.mean_k2.assign(P, 0.0);
  st.var_k2.assign(P, 0.0);
  st.ratio.assign(P, 0.0);
  std::size_t below = 0;
  double ratio_sum = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    std::vector<double> v1, v2;
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
      if (st.ok1[r]) v1.push_back(st.k1[r][i]);
      if (st.ok2[r]) v2.push_back(st.k2[r][i]);
    }
    st.mean_k1[i] = stats::mean(v1);
    st.var_k1[i] = stats::variance(v1);
    st.mean_k2[i] = stats::mean(v2);
    st.var_k2[i] = stats::variance(v2);
    st.ratio[i] = st.var_k2[i] > 0.0 ? st.var_k1[i] / st.var_k2[i]
                                     : std::numeric_limits<double>::quiet_NaN();
    ratio_sum += st.ratio[i];
    if (st.ratio[i] < 1.0) ++below;
  }
  st.mean_ratio = ratio_sum / static_cast<double>(P);
  st.fraction_ratio_below_one = static_cast<double>(below) / static_cast<double>(P);
  return st;
}

}  // namespace homest
