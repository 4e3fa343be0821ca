#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "homest/csv.hpp"
#include "homest/elliptic1d.hpp"
#include "homest/errors.hpp"

using namespace homest;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

auto one = [](double) { return 1.0; };

}  // namespace

TEST_CASE("constant coefficient closed forms") {
  const Grid1D g(0.0, 1.0, 101);
  const auto s = solve_exact(one, SourceTerm::constant(1.0, 0.0), g);
  CHECK(s.pressure_at(0.5) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(s.p.front() == 0.0);
  CHECK(s.p.back() == 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.node(i);
    CHECK(s.p[i] == doctest::Approx(0.5 * x * (1.0 - x)).epsilon(1e-12));
  }

  const Grid1D g2(-1.0, 1.0, 201);
  const auto s2 = solve_exact(one, SourceTerm::constant(1.0, -1.0), g2);
  CHECK(s2.pressure_at(0.0) == doctest::Approx(0.5).epsilon(1e-12));

  const auto s3 = solve_exact([](double) { return 2.0; }, SourceTerm::constant(1.0, 0.0), g);
  CHECK(s3.pressure_at(0.5) == doctest::Approx(0.0625).epsilon(1e-12));
}

TEST_CASE("solver preconditions") {
  const Grid1D g(0.0, 1.0, 65);
  SolveOptions opts;
  opts.alpha = 0.5;
  CHECK_THROWS_AS(solve_exact([](double x) { return x < 0.5 ? 1.0 : 0.1; },
                              SourceTerm::constant(1.0, 0.0), g, opts),
                  CoefficientError);
  SolveOptions res;
  res.resolved_scale = 1.0 / 16.0;
  CHECK_THROWS_AS(solve_exact(one, SourceTerm::constant(1.0, 0.0), g, res), ResolutionError);
}

TEST_CASE("finite-difference solver") {
  const Grid1D g(0.0, 1.0, 201);
  const auto s = solve_fd(one, SourceTerm::constant(1.0, 0.0), g);
  CHECK(std::abs(s.pressure_at(0.5) - 0.125) <= 1e-5);
  CHECK(s.p.front() == 0.0);
  CHECK(s.p.back() == 0.0);
}

TEST_CASE("finite differences converge at second order against the exact formula") {
  const double eps = 1.0 / 16.0;
  auto k = [eps](double x) { return std::exp(std::sin(2.0 * kPi * x / eps)); };
  SourceTerm src;
  src.f = [](double x) { return 1.0 + x; };
  src.F = [](double x) { return x + 0.5 * x * x; };

  // Reference: the exact formula on a grid 64 times finer, sampled at the
  // coarse nodes.
  std::vector<double> errs;
  for (std::size_t n : {257u, 513u, 1025u}) {
    const Grid1D g(0.0, 1.0, n);
    const Grid1D fine(0.0, 1.0, (n - 1) * 64 + 1);
    const auto ref = solve_exact(k, src, fine);
    const auto fd = solve_fd(k, src, g);
    std::vector<double> sampled(n);
    for (std::size_t i = 0; i < n; ++i) sampled[i] = ref.p[i * 64];
    errs.push_back(max_abs_diff(fd.p, sampled));
  }
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    const double ratio = errs[i] / errs[i + 1];
    MESSAGE("FD Richardson ratio " << ratio);
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
  }
}

TEST_CASE("flux identity holds at every node") {
  const double eps = 1.0 / 32.0;
  auto k = [eps](double x) { return std::exp(std::sin(2.0 * kPi * x / eps)); };
  SourceTerm src;
  src.f = [](double x) { return std::cos(3.0 * x); };
  src.F = [](double x) { return std::sin(3.0 * x) / 3.0; };
  const auto g = Grid1D::with_max_spacing(0.0, 1.0, eps / 16.0);
  const auto s = solve_exact(k, src, g);
  double scale = 0.0;
  for (double v : s.v) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(std::abs(s.v[i] + src.F(g.node(i)) - s.c_eps) <= 1e-10 * scale);
}

TEST_CASE("linearity in the source and exp(-u) scaling") {
  auto k = [](double x) { return 1.0 + 0.5 * std::sin(5.0 * x); };
  SourceTerm a, b, ab;
  a.f = [](double x) { return x; };
  b.f = [](double x) { return std::exp(x); };
  ab.f = [](double x) { return 2.0 * x - 3.0 * std::exp(x); };
  const Grid1D g(0.0, 2.0, 401);
  const auto pa = solve_exact(k, a, g), pb = solve_exact(k, b, g), pab = solve_exact(k, ab, g);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(pab.p[i] == doctest::Approx(2.0 * pa.p[i] - 3.0 * pb.p[i]).epsilon(1e-10).scale(1.0));

  const double u = 0.7;
  const auto pu = solve_exact([&](double x) { return std::exp(u) * k(x); }, a, g);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(pu.p[i] == doctest::Approx(std::exp(-u) * pa.p[i]).epsilon(1e-12).scale(1e-3));
}

TEST_CASE("simpson antiderivative of f") {
  SourceTerm s;
  s.f = [](double x) { return std::cos(x); };
  const Grid1D g(0.0, 2.0, 101);
  const auto F = s.antiderivative_on(g);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(F[i] == doctest::Approx(std::sin(g.node(i))).epsilon(1e-10).scale(1.0));
  // F' = f by central differences.
  for (std::size_t i = 1; i + 1 < g.size(); ++i) {
    const double d = (F[i + 1] - F[i - 1]) / (2.0 * g.spacing());
    CHECK(std::abs(d - std::cos(g.node(i))) <= g.spacing() * g.spacing());
  }
}

TEST_CASE("observation functionals") {
  const Grid1D g(0.0, 1.0, 1025);
  const auto s = solve_exact(one, SourceTerm::constant(1.0, 0.0), g);
  CHECK(apply_functional(Functional::point(0.25), s) == doctest::Approx(0.09375).epsilon(1e-12));

  std::vector<double> c(g.size(), 3.25);
  CHECK(apply_functional(Functional::average(0.4, 0.1234), g, c) ==
        doctest::Approx(3.25).epsilon(1e-14));
  // Average of x(1-x)/2 over [0.3, 0.5]: closed form.
  const double w = 0.2, lo = 0.3, hi = 0.5;
  auto P = [](double x) { return x * x / 4.0 - x * x * x / 6.0; };
  CHECK(apply_functional(Functional::average(0.4, w), s) ==
        doctest::Approx((P(hi) - P(lo)) / w).epsilon(1e-6));

  for (double h : {1e-2, 5e-3, 2.5e-3}) {
    const double dq = apply_functional(Functional::difference_quotient(0.3, h), s);
    CHECK(std::abs(dq - (0.5 - 0.3)) <= 0.6 * h);
  }
  CHECK_THROWS_AS(apply_functional(Functional::point(1.5), s), DomainError);
  CHECK_THROWS_AS(apply_functional(Functional::average(0.02, 0.1), s), DomainError);
  CHECK_THROWS_AS(apply_functional(Functional::difference_quotient(0.95, 0.1), s), DomainError);

  CHECK(functional_kind_from_string(to_string(Functional::Kind::local_average)) ==
        Functional::Kind::local_average);
  CHECK_THROWS_AS(functional_kind_from_string("gradient"), PreconditionError);
}

TEST_CASE("observation and solution CSV round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "homest_test_obs";
  std::filesystem::create_directories(dir);
  ObservationSet obs;
  obs.functionals = {Functional::point(0.25), Functional::average(0.5, 0.1),
                     Functional::difference_quotient(0.6, 0.01)};
  obs.y = {0.1, 0.2, 1.0 / 3.0};
  obs.gamma = 0.01;
  write_observations_csv(obs, dir / "obs.csv");
  const auto back = read_observations_csv(dir / "obs.csv", 0.01);
  REQUIRE(back.size() == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(back.functionals[j].kind == obs.functionals[j].kind);
    CHECK(back.functionals[j].location == obs.functionals[j].location);
    CHECK(back.y[j] == obs.y[j]);
  }
  CHECK(back.functionals[1].width == 0.1);
  CHECK(back.functionals[2].scale == 0.01);

  const Grid1D g(0.0, 1.0, 5);
  write_solution_csv(solve_exact(one, SourceTerm::constant(1.0, 0.0), g), dir / "p.csv");
  const auto csv = read_csv(dir / "p.csv");
  CHECK(csv.header == std::vector<std::string>{"x", "p", "v"});
  CHECK(std::stod(csv.rows[2][csv.column("p")]) == 0.125);
  std::filesystem::remove_all(dir);
}

TEST_CASE("Green's kernel closed-form values") {
  const Grid1D g(0.0, 1.0, 101);
  std::vector<double> inv(g.size(), 1.0);
  std::vector<double> pts{0.5, 0.25, 0.0};
  const auto Q = greens_kernel_at(pts, g, inv);
  CHECK(Q(0, 25) == doctest::Approx(0.5));
  CHECK(Q(1, 50) == doctest::Approx(-0.25));
  for (std::size_t j = 1; j < g.size(); ++j) CHECK(Q(2, j) == doctest::Approx(0.0).scale(1.0));
  const auto Qg = greens_kernel([](double x) { return 1.0 + x; }, g);
  for (std::size_t j = 1; j < g.size(); ++j) CHECK(std::abs(Qg(0, j)) <= 1e-15);
}

TEST_CASE("Green's kernel matches a perturbation of the exact solver") {
  auto k0 = [](double x) { return std::exp(0.4 * std::sin(kPi * x) - 0.2 * x); };
  const auto src = SourceTerm::constant(1.0, -1.0);
  const Grid1D g(-1.0, 1.0, 8001);
  std::vector<double> inv(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) inv[i] = 1.0 / k0(g.node(i));
  const auto F = src.antiderivative_on(g);
  const auto base = solve_exact_nodal(g, inv, F);

  const double eta = 1e-6;
  for (double y0 : {-0.6, 0.1, 0.55}) {
    // Smooth bump of width 0.05 in 1/k0 around y0.
    std::vector<double> bump(g.size()), pert(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = (g.node(i) - y0) / 0.05;
      bump[i] = std::exp(-0.5 * s * s);
      pert[i] = inv[i] + eta * bump[i];
    }
    const auto moved = solve_exact_nodal(g, pert, F);
    std::vector<double> pts{-0.3, 0.3, 0.8};
    const auto Q = greens_kernel_at(pts, g, inv);
    for (std::size_t r = 0; r < pts.size(); ++r) {
      const double response =
          (g.interpolate(moved.p, pts[r]) - g.interpolate(base.p, pts[r])) / eta;
      std::vector<double> integrand(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) integrand[i] = Q(r, i) * base.v[i] * bump[i];
      const double predicted = trapezoid(g, integrand);
      CHECK(predicted == doctest::Approx(response).epsilon(0.01));
    }
  }
}

TEST_CASE("lipschitz probe") {
  const auto src = SourceTerm::constant(1.0, 0.0);
  const auto same = lipschitz_probe(0.3, 0.3, src, Grid1D(0.0, 1.0, 101));
  CHECK(same.solution_distance == 0.0);
  CHECK(same.input_distance == 0.0);

  auto sup_ratio = [&](std::size_t n) {
    const Grid1D g(0.0, 1.0, n);
    double sup = 0.0;
    for (int i = 0; i < 20; ++i) {
      const double u = -1.0 + 2.0 * i / 19.0;
      const auto s = lipschitz_probe(u, u + 0.05, src, g);
      sup = std::max(sup, s.solution_distance / s.input_distance);
    }
    return sup;
  };
  const double r1 = sup_ratio(101), r2 = sup_ratio(201);
  CHECK(std::isfinite(r1));
  CHECK(r2 == doctest::Approx(r1).epsilon(0.01));

  const Grid1D g(0.0, 1.0, 201);
  double prev = lipschitz_probe(-0.2, 0.2, src, g).solution_distance;
  for (double d : {0.2, 0.1, 0.05, 0.025}) {
    const double cur = lipschitz_probe(-0.5 * d, 0.5 * d, src, g).solution_distance;
    CHECK(cur <= 0.5 * prev * 1.1);
    prev = cur;
  }
}
