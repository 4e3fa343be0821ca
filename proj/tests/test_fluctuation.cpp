#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "homest/errors.hpp"
#include "homest/fluctuation.hpp"
#include "homest/stats.hpp"

using namespace homest;

namespace {

// Closed-form covariance kernel for k0 = 1, f = 1 on [-1, 1]:
// v0(y) = -y and Q(x, y) = 1{y < x} - (x + 1)/2, so
// K(x, z) = int Q(x, y) Q(z, y) y^2 dy piecewise in the cut points.
double unit_kernel(double x, double z) {
  if (x > z) std::swap(x, z);
  const double qx = 0.5 * (x + 1.0), qz = 0.5 * (z + 1.0);
  const double left = (x * x * x + 1.0) / 3.0;
  const double mid = (z * z * z - x * x * x) / 3.0;
  const double right = (1.0 - z * z * z) / 3.0;
  return (1.0 - qx) * (1.0 - qz) * left - qx * (1.0 - qz) * mid + qx * qz * right;
}

// Same kernel by an independent trapezoid rule that takes half of the
// indicator at a node hit, as the library convention does.
double unit_kernel_trapezoid(double x, double z, const Grid1D& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double y = g.node(i);
    auto ind = [y](double p) {
      if (std::abs(y - p) <= 1e-12) return 0.5;
      return y < p ? 1.0 : 0.0;
    };
    const double q1 = ind(x) - 0.5 * (x + 1.0);
    const double q2 = ind(z) - 0.5 * (z + 1.0);
    const double w = (i == 0 || i + 1 == g.size()) ? 0.5 : 1.0;
    s += w * q1 * q2 * y * y;
  }
  return s * g.spacing();
}

const auto kOne = [](double) { return 1.0; };

MapProblem unit_problem(std::vector<double> pts, std::vector<double> y, double gamma) {
  MapProblem p;
  for (double x : pts) p.observations.functionals.push_back(Functional::point(x));
  p.observations.y = std::move(y);
  p.observations.gamma = gamma;
  p.quad = Grid1D(-1.0, 1.0, 1025);
  p.source = SourceTerm::constant(1.0, -1.0);
  return p;
}

}  // namespace

TEST_CASE("Fourier log coefficient") {
  FourierLogCoefficient c{{0.3, 0.4, -0.2}};
  CHECK(c.u0(0.0) == doctest::Approx(0.7));
  CHECK(c.u0(0.5) == doctest::Approx(0.3 - 0.2));
  CHECK(c.k0(1.0) == doctest::Approx(std::exp(-0.1)));
}

TEST_CASE("covariance without microstructure is gamma^2 I") {
  const Grid1D quad(-1.0, 1.0, 1025);
  std::vector<double> pts{-0.5, 0.0, 0.3};
  const auto src = SourceTerm::constant(1.0, -1.0);
  const auto fc = fluctuation_covariance(kOne, src, 0.0, 0.5, 0.1, pts, quad);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(fc.C(i, j) == (i == j ? 0.1 * 0.1 : 0.0));
  CHECK(fc.jitter_level == 0);
  CHECK_THROWS_AS(fluctuation_covariance(kOne, src, 0.1, 0.5, 0.1, pts, Grid1D(-1.0, 1.0, 257)),
                  PreconditionError);
  std::vector<double> outside{1.0};
  CHECK_THROWS_AS(fluctuation_covariance(kOne, src, 0.1, 0.5, 0.1, outside, quad), DomainError);
}

TEST_CASE("single-point variance eps sigma^2 / 6") {
  const Grid1D quad(-1.0, 1.0, 2049);
  std::vector<double> pts{0.0};
  const double eps = 1.0 / 128.0, sigma = 0.5;
  const auto fc =
      fluctuation_covariance(kOne, SourceTerm::constant(1.0, -1.0), eps, sigma, 0.0, pts, quad);
  CHECK(fc.C(0, 0) == doctest::Approx(eps * sigma * sigma / 6.0).epsilon(1e-5));
  CHECK(unit_kernel(0.0, 0.0) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("covariance matches the closed-form kernel") {
  const Grid1D quad(-1.0, 1.0, 4097);
  std::vector<double> pts{-0.7, -0.2, 0.1, 0.55, 0.9};
  const double eps = 0.01, sigma = 0.3, gamma = 1e-3;
  const auto fc =
      fluctuation_covariance(kOne, SourceTerm::constant(1.0, -1.0), eps, sigma, gamma, pts, quad);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const double expected = eps * sigma * sigma * unit_kernel(pts[i], pts[j]) +
                              (i == j ? gamma * gamma : 0.0);
      CHECK(fc.C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
            doctest::Approx(expected).epsilon(1e-5));
    }
  CHECK((fc.C - fc.C.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * fc.C.cwiseAbs().maxCoeff());
  CHECK(fc.min_eigenvalue() >= -1e-10 * fc.C.trace());
}

TEST_CASE("covariance symmetry, permutation invariance and linear scaling in eps") {
  const Grid1D quad(-1.0, 1.0, 1025);
  auto k0 = [](double x) { return std::exp(0.3 + 0.4 * std::cos(3.14159265358979 * x)); };
  const auto src = SourceTerm::constant(1.0, -1.0);
  std::vector<double> sym{-0.4, 0.4};
  const auto fs = fluctuation_covariance(k0, src, 0.02, 0.5, 0.0, sym, quad);
  CHECK(fs.C(0, 0) == doctest::Approx(fs.C(1, 1)).epsilon(1e-10));

  std::vector<double> pts{-0.6, 0.1, 0.35, 0.8}, perm{0.35, -0.6, 0.8, 0.1};
  const std::vector<int> idx{2, 0, 3, 1};
  const auto A = fluctuation_covariance(k0, src, 0.02, 0.5, 1e-3, pts, quad);
  const auto B = fluctuation_covariance(k0, src, 0.02, 0.5, 1e-3, perm, quad);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(B.C(i, j) == doctest::Approx(A.C(idx[i], idx[j])).epsilon(1e-13));

  std::vector<double> eps{1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256}, dev;
  for (double e : eps) {
    const auto fc = fluctuation_covariance(k0, src, e, 0.5, 1e-3, pts, quad);
    Eigen::MatrixXd D = fc.C;
    D.diagonal().array() -= 1e-6;
    dev.push_back(D.cwiseAbs().maxCoeff());
    CHECK(fc.jitter_level <= 1);
  }
  CHECK(stats::loglog_slope(eps, dev) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("CLT diagnostic at small amplitude") {
  CltConfig cfg;
  cfg.eps = 1.0 / 64.0;
  cfg.sigma = 0.0;
  cfg.replicates = 10;
  const auto zero = clt_diagnostic(cfg);
  CHECK(zero.points[0].empirical_var == 0.0);
  CHECK(zero.points[0].mean == 0.0);

  cfg.sigma = 0.25;
  cfg.replicates = 1000;
  cfg.seed = 4;
  cfg.points = {0.0, 0.5};
  const auto rep = clt_diagnostic(cfg);
  const double s2 = cfg.sigma * cfg.sigma;
  CHECK(rep.points[0].predicted_var == doctest::Approx(s2 / 6.0).epsilon(1e-4));
  CHECK(rep.points[0].literal_var == doctest::Approx(s2 / 15.0).epsilon(1e-3));
  CHECK(rep.points[1].predicted_var == doctest::Approx(s2 * unit_kernel(0.5, 0.5)).epsilon(1e-3));
  for (const auto& p : rep.points) {
    CHECK(p.empirical_var == doctest::Approx(p.predicted_var).epsilon(0.2));
    CHECK(std::abs(p.empirical_var - p.literal_var) > 0.3 * p.predicted_var);
  }
  CHECK(rep.table().rows() == 2);
}

TEST_CASE("negative log posterior against a hand-assembled Gaussian") {
  const std::vector<double> pts{-0.5, 0.0, 0.25};
  const std::vector<double> y{0.2, 0.31, 0.27};
  const double gamma = 0.05;
  auto prob = unit_problem(pts, y, gamma);
  prob.prior_mean = {0.1};
  prob.prior_sd = {0.7};

  // One coefficient: k0 = exp(theta) so G_j(theta) = exp(-theta)(1 - x_j^2)/2
  // at grid nodes.
  auto residual = [&](double th) {
    Eigen::VectorXd r(3);
    for (int j = 0; j < 3; ++j) r(j) = y[j] - std::exp(-th) * 0.5 * (1.0 - pts[j] * pts[j]);
    return r;
  };
  auto prior = [&](double th) {
    const double d = (th - 0.1) / 0.7;
    return 0.5 * d * d;
  };
  for (double th : {-0.3, 0.2, 0.9}) {
    const std::vector<double> t{th};
    const auto r = residual(th);
    const double hand = 3.0 * std::log(gamma) + 0.5 * r.squaredNorm() / (gamma * gamma) + prior(th);
    CHECK(neg_log_posterior(prob, t) == doctest::Approx(hand).epsilon(1e-10));

    prob.use_model_error = true;
    prob.eps = 0.0;
    prob.sigma = 0.5;
    CHECK(neg_log_posterior(prob, t) == doctest::Approx(hand).epsilon(1e-12));

    prob.eps = 0.02;
    Eigen::MatrixXd C(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        C(i, j) = prob.eps * prob.sigma * prob.sigma * unit_kernel_trapezoid(pts[i], pts[j], prob.quad) +
                  (i == j ? gamma * gamma : 0.0);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(C);
    const double logdet = ldlt.vectorD().array().log().sum();
    const double with_model = 0.5 * logdet + 0.5 * r.dot(ldlt.solve(r)) + prior(th);
    CHECK(neg_log_posterior(prob, t) == doctest::Approx(with_model).epsilon(1e-10));
    prob.use_model_error = false;
    prob.eps = 0.0;
  }
}

TEST_CASE("MAP estimates") {
  const FourierLogCoefficient truth{{0.3, 0.4, -0.2}};
  std::vector<double> pts;
  for (int j = 1; j <= 32; ++j) pts.push_back(-1.0 + 2.0 * j / 33.0);
  const Grid1D quad(-1.0, 1.0, 1025);
  const auto src = SourceTerm::constant(1.0, -1.0);
  const auto sol = solve_exact([&](double x) { return truth.k0(x); }, src, quad);
  std::vector<double> y;
  for (double x : pts) y.push_back(quad.interpolate(sol.p, x));

  auto prob = unit_problem(pts, y, 1e-3);
  prob.prior_mean = {0.0, 0.0, 0.0};
  prob.prior_sd = {1.0, 1.0, 1.0};
  std::vector<double> out{-1.0, 0.0, 1.0};
  const auto k2 = map_estimate(prob, out);
  CHECK(k2.converged);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(k2.theta[i] - truth.theta[i]) <= 1e-4);
  CHECK(k2.k_hat[1] == doctest::Approx(truth.k0(0.0)).epsilon(1e-3));

  prob.use_model_error = true;
  prob.sigma = 0.5;
  prob.eps = 0.0;
  const auto k1 = map_estimate(prob, out);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(k1.theta[i] - k2.theta[i]) <= 1e-6);

  auto vac = unit_problem(pts, y, 1e6);
  vac.prior_mean = {0.2, -0.1, 0.05};
  vac.prior_sd = {1.0, 1.0, 1.0};
  const auto v = map_estimate(vac, out);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(v.theta[i] - vac.prior_mean[i]) <= 1e-3);
}

TEST_CASE("variance study plumbing") {
  VarianceStudyConfig cfg;
  cfg.replicates = 4;
  cfg.N = 16;
  cfg.eps = 1.0 / 32.0;
  cfg.output_points = 5;
  cfg.seed = 8;
  const auto a = variance_study(cfg);
  const auto b = variance_study(cfg);
  CHECK(a.x.size() == 5);
  CHECK(a.var_k1 == b.var_k1);
  CHECK(a.var_k2 == b.var_k2);
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    CHECK(a.var_k1[i] >= 0.0);
    CHECK(a.var_k2[i] >= 0.0);
  }
  CHECK(a.summary_table().rows() == 5);
  CHECK(a.replicate_table().rows() == 8 - a.failures_k1 - a.failures_k2);
}
