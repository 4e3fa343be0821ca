#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "homest/errors.hpp"
#include "homest/inference.hpp"
#include "homest/stats.hpp"

using namespace homest;

namespace {

GaussianPrior scalar_prior(double sd) {
  GaussianPrior p;
  p.basis = {[](double) { return 1.0; }};
  p.weights = {sd};
  return p;
}

}  // namespace

TEST_CASE("misfit values") {
  std::vector<double> y{1.0, 2.0}, g{1.0, 2.0}, gam{1.0, 1.0};
  CHECK(weighted_misfit(y, g, gam) == 0.0);
  std::vector<double> y1{3.0}, g1{1.0}, gam4{4.0}, gam8{8.0};
  CHECK(weighted_misfit(y1, g1, gam4) == doctest::Approx(0.5));
  CHECK(weighted_misfit(y1, g1, gam8) == doctest::Approx(0.25));
  std::vector<double> bad{0.0};
  CHECK_THROWS_AS(weighted_misfit(y1, g1, bad), CovarianceError);

  MisfitSpec spec{[](std::span<const double> th) { return std::vector<double>{2.0 * th[0]}; },
                  {4.0}};
  std::vector<double> th{1.0}, yy{4.0};
  CHECK(misfit(spec, yy, th) == doctest::Approx(0.5));
}

TEST_CASE("scalar estimator") {
  const Grid1D g(0.0, 1.0, 1025);
  const auto src = SourceTerm::constant(1.0, 0.0);
  const auto pstar = solve_exact([](double) { return 1.0; }, src, g);
  std::vector<Functional> fns{Functional::point(0.25), Functional::point(0.5),
                              Functional::point(0.75)};
  const auto l = apply_functionals(fns, pstar);
  CHECK(l[0] == doctest::Approx(0.09375));
  CHECK(l[1] == doctest::Approx(0.125));
  CHECK(l[2] == doctest::Approx(0.09375));
  const auto p2 = solve_exact([](double) { return 2.0; }, src, g);
  const auto y = apply_functionals(fns, p2);
  const auto e = scalar_estimate(y, l);
  CHECK(e.ratio == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(e.u_bar == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_FALSE(e.sign_failure);

  std::vector<double> zero(3, 0.0);
  const auto z = scalar_estimate(zero, l);
  CHECK(z.sign_failure);
  CHECK(z.ratio == 0.0);
  CHECK(std::isnan(z.u_bar));
  CHECK_THROWS_AS(scalar_estimate(l, zero), PreconditionError);
}

TEST_CASE("scalar consistency: exact recovery without noise and the N^-1/2 law") {
  ConsistencyConfig cfg;
  cfg.u0 = std::log(2.0);
  cfg.N_list = {16, 64, 256};
  cfg.gamma = 0.0;
  cfg.replicates = 3;
  const auto exact = consistency_experiment(cfg);
  for (const auto& r : exact.rows) CHECK(r.mean_err <= 1e-10);

  cfg.gamma = 0.1;
  cfg.replicates = 200;
  cfg.seed = 21;
  const auto t = consistency_experiment(cfg);
  CHECK(t.slope == doctest::Approx(-0.5).epsilon(0.2));
  for (std::size_t i = 0; i + 1 < t.rows.size(); ++i)
    CHECK(t.rows[i + 1].mean_err / t.rows[i].mean_err == doctest::Approx(0.5).epsilon(0.25));
  CHECK(t.table().rows() == 3);
}

TEST_CASE("calibrated two-scale field has the target harmonic mean") {
  const auto f = calibrated_two_scale_field(0.4, 0.0, 1.0);
  for (double x : {0.0, 0.3, 1.0}) {
    double s = 0.0;
    const int n = 1 << 14;
    for (int i = 0; i < n; ++i) s += 1.0 / f.k(x, static_cast<double>(i) / n);
    CHECK(n / s == doctest::Approx(std::exp(0.4)).epsilon(1e-12));
  }
}

TEST_CASE("multiscale consistency: bounded rows obey the bound, difference quotients do not") {
  const auto field = calibrated_two_scale_field(0.0, 0.0, 1.0);
  MultiscaleConfig cfg;
  cfg.N_list = {8, 16, 32};
  cfg.eps_list = {1.0 / 16, 1.0 / 32};
  cfg.replicates = 1;
  const auto t = multiscale_consistency_experiment(field, SourceTerm::constant(1.0, 0.0), cfg);
  REQUIRE(t.rows.size() == 6);
  for (std::size_t i = 0; i < t.rows.size(); i += 2) {
    const auto& pt = t.rows[i];
    const auto& dq = t.rows[i + 1];
    CHECK(pt.functional == "point_eval");
    CHECK(dq.functional == "scaled_difference_quotient");
    CHECK(pt.mean_err <= pt.bound * (1.0 + 1e-9));
    CHECK(dq.mean_err >= 5.0 * pt.mean_err);
  }
  CHECK(t.rows[5].mean_err >= t.rows[3].mean_err);
}

TEST_CASE("bounded solve") {
  std::vector<double> l{0.09375, 0.125, 0.09375}, y{0.05, 0.061, 0.045};
  auto phi = [&](double u) {
    double s = 0.0;
    for (std::size_t j = 0; j < l.size(); ++j) {
      const double r = y[j] - std::exp(-u) * l[j];
      s += r * r;
    }
    return 0.5 * s / 1e-4;
  };
  const auto est = scalar_estimate(y, l);
  CHECK(bounded_solve(phi, {2.0}) == doctest::Approx(est.u_bar).epsilon(1e-6));
  CHECK(bounded_solve(phi, {0.3}) == 0.3);
  CHECK(bounded_solve([](double) { return 1.0; }, {0.7}) == 0.0);
  for (double alpha : {0.01, 0.5, 5.0}) {
    const double u = bounded_solve([](double v) { return -v; }, {alpha});
    CHECK(u == alpha);
    CHECK(std::abs(u) <= alpha);
  }
}

TEST_CASE("Tikhonov solve") {
  std::vector<double> t{1.0, -2.0, 0.5};
  auto quad = [&](std::span<const double> th) {
    double s = 0.0;
    for (std::size_t i = 0; i < th.size(); ++i) s += (th[i] - t[i]) * (th[i] - t[i]);
    return 0.5 * s;
  };
  TikhonovSpec spec{2.0, {1.0, 0.5, 3.0}};
  std::vector<double> th0(3, 0.0);
  const auto res = tikhonov_solve(quad, spec, th0);
  CHECK_FALSE(res.flagged);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(res.opt.x[i] == doctest::Approx(t[i] / (1.0 + spec.lambda * spec.weights[i])).epsilon(1e-4));

  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {1e2, 1e3, 1e4}) {
    const auto r = tikhonov_solve(quad, {lambda, {}}, th0);
    double norm = 0.0;
    for (double v : r.opt.x) norm = std::max(norm, std::abs(v));
    CHECK(norm * lambda <= 2.0 * 2.0);
    CHECK(norm < prev);
    prev = norm;
  }

  std::vector<double> l{0.09375, 0.125, 0.09375}, y{0.05, 0.061, 0.045};
  auto phi = [&](std::span<const double> u) {
    double s = 0.0;
    for (std::size_t j = 0; j < l.size(); ++j) {
      const double r = y[j] - std::exp(-u[0]) * l[j];
      s += r * r;
    }
    return 0.5 * s / 1e-4;
  };
  std::vector<double> u0{0.0};
  const auto r0 = tikhonov_solve(phi, {0.0, {}}, u0);
  CHECK(r0.opt.x[0] == doctest::Approx(scalar_estimate(y, l).u_bar).epsilon(1e-4));
}

TEST_CASE("posterior density and the MAP-Tikhonov coincidence") {
  auto prior = GaussianPrior::fourier(0.0, 1.0, 3, 1.0);
  auto phi = [](std::span<const double> th) {
    const double g1 = std::exp(-th[0]) + th[1];
    const double g2 = th[1] * th[2] + 0.5 * th[2];
    return 0.5 * ((g1 - 1.3) * (g1 - 1.3) + (g2 - 0.2) * (g2 - 0.2)) / 0.01;
  };
  std::vector<double> a{0.1, 0.2, 0.3}, b{-0.2, 0.4, 0.0};
  const double Ia = phi(a) - prior_log_density(prior, a);
  const double Ib = phi(b) - prior_log_density(prior, b);
  CHECK(std::exp(posterior_log_density(prior, phi, a) - posterior_log_density(prior, phi, b)) ==
        doctest::Approx(std::exp(Ib - Ia)));

  auto vacuous = [](std::span<const double>) { return 0.0; };
  CHECK(posterior_log_density(prior, vacuous, a) == prior_log_density(prior, a));

  auto neg_post = [&](std::span<const double> th) { return -posterior_log_density(prior, phi, th); };
  std::vector<double> start(3, 0.0);
  std::vector<std::vector<double>> starts{start, start, start};
  for (std::size_t i = 0; i < 3; ++i) {
    starts[1][i] += prior.weights[i];
    starts[2][i] -= prior.weights[i];
  }
  const auto map = nelder_mead_restarts(neg_post, starts);

  TikhonovSpec spec;
  spec.lambda = 1.0;
  for (double s : prior.weights) spec.weights.push_back(1.0 / (s * s));
  const auto tik = tikhonov_solve(phi, spec, start);
  CHECK(map.converged);
  CHECK_FALSE(tik.flagged);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(map.x[i] - tik.opt.x[i]) <= 1e-4);
}

TEST_CASE("Hellinger distance against the Gaussian closed form") {
  const Grid1D g(-12.0, 13.0, 20001);
  auto n0 = [](double x) { return -0.5 * x * x; };
  auto n1 = [](double x) { return -0.5 * (x - 1.0) * (x - 1.0); };
  CHECK(hellinger_distance(n0, n0, g) == doctest::Approx(0.0).scale(1.0));
  const double d = hellinger_distance(n0, n1, g);
  CHECK(std::abs(d - std::sqrt(1.0 - std::exp(-1.0 / 8.0))) <= 1e-6);
  CHECK(std::abs(d - 0.342787) <= 1e-6);
  CHECK_THROWS_AS(hellinger_distance(n0, n1, Grid1D(-2.0, 2.0, 401)), CoverageError);

  const Grid1D gx(-10.0, 11.0, 801), gy(-10.0, 11.0, 801);
  auto m0 = [](double x, double y) { return -0.5 * (x * x + y * y); };
  auto m1 = [](double x, double y) { return -0.5 * ((x - 0.6) * (x - 0.6) + (y - 0.8) * (y - 0.8)); };
  CHECK(std::abs(hellinger_distance_2d(m0, m1, gx, gy) - std::sqrt(1.0 - std::exp(-1.0 / 8.0))) <=
        1e-6);
}

TEST_CASE("posterior Hellinger distance is locally Lipschitz in the data") {
  const Grid1D g(-6.0, 6.0, 4001);
  const double gamma = 0.2, l = 0.5;
  auto logpost = [&](double y) {
    return [=](double u) {
      const double r = y - std::exp(-u) * l;
      return -0.5 * r * r / (gamma * gamma) - 0.5 * u * u;
    };
  };
  const double y0 = 0.4;
  auto fit = [&](double range) {
    std::vector<double> ds, hs;
    for (int i = 1; i <= 8; ++i) {
      const double dy = range * i / 8.0;
      ds.push_back(dy);
      hs.push_back(hellinger_distance(logpost(y0), logpost(y0 + dy), g));
    }
    return lipschitz_constant(ds, hs);
  };
  const double c1 = fit(0.5), c2 = fit(0.25);
  CHECK(c1 > 0.0);
  CHECK(c2 / c1 <= 2.0);
  CHECK(c1 / c2 <= 2.0);
}

TEST_CASE("small-ball ratio approaches the MAP functional ratio") {
  const auto prior = scalar_prior(1.0);
  const double y = 0.3, gamma = 0.5;
  auto phi = [&](std::span<const double> th) {
    const double r = y - th[0];
    return 0.5 * r * r / (gamma * gamma);
  };
  std::vector<double> z1{0.2}, z2{0.6};
  std::vector<double> deltas{0.01, 10.0};
  const auto res = small_ball_ratio(prior, phi, z1, z2, deltas, 1000000, 0);
  const auto& r = res.rows[0];
  REQUIRE_FALSE(r.inconclusive);
  CHECK(std::abs(r.ratio - res.limit) <= 2.0 * r.stderr_ratio);
  CHECK(res.rows[1].ratio == doctest::Approx(1.0));

  const auto same = small_ball_ratio(prior, phi, z1, z1, deltas, 10000, 3);
  for (const auto& row : same.rows) CHECK(row.ratio == 1.0);

  std::vector<double> far{40.0}, tiny{1e-9};
  const auto none = small_ball_ratio(prior, phi, z1, far, tiny, 1000, 3);
  CHECK(none.rows[0].inconclusive);
  CHECK(res.table().rows() == 2);
}
