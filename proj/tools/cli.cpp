#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include <openssl/evp.h>

#include "homest/elliptic1d.hpp"
#include "homest/errors.hpp"
#include "homest/fields.hpp"
#include "homest/fluctuation.hpp"
#include "homest/homogenization.hpp"
#include "homest/inference.hpp"
#include "homest/rng.hpp"
#include "homest/stats.hpp"
#include "homest/transport.hpp"

#ifndef HOMEST_VERSION
#define HOMEST_VERSION "unknown"
#endif

namespace homest::cli {

namespace {

constexpr double kPi = std::numbers::pi;

/// View on one JSON object that fills in defaults as they are read.
class Params {
 public:
  Params(Json& j, std::string ctx) : j_(j), ctx_(std::move(ctx)) {
    if (!j_.is_object()) throw ConfigError(ctx_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T req(const std::string& key) const {
    if (!j_.contains(key)) throw ConfigError(ctx_ + ": missing required '" + key + "'");
    return get<T>(key);
  }

  template <class T>
  T opt(const std::string& key, T fallback) {
    if (!j_.contains(key)) j_[key] = fallback;
    return get<T>(key);
  }

  Params sub(const std::string& key) const {
    if (!j_.contains(key)) throw ConfigError(ctx_ + ": missing required '" + key + "'");
    return Params(j_[key], ctx_ + "." + key);
  }

  Params sub_or_empty(const std::string& key) {
    if (!j_.contains(key)) j_[key] = Json::object();
    return Params(j_[key], ctx_ + "." + key);
  }

  const std::string& context() const { return ctx_; }

 private:
  template <class T>
  T get(const std::string& key) const {
    try {
      return j_[key].get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(ctx_ + "." + key + ": wrong type");
    }
  }

  Json& j_;
  std::string ctx_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

double positive(double v, const std::string& name) {
  require(v > 0.0, name + " must be positive");
  return v;
}

double nonnegative(double v, const std::string& name) {
  require(v >= 0.0, name + " must be nonnegative");
  return v;
}

struct Domain {
  double a = 0.0, b = 1.0;
};

Domain parse_domain(Params p) {
  Domain d{p.req<double>("a"), p.req<double>("b")};
  require(d.b > d.a, "domain: need a < b");
  return d;
}

struct Coefficient {
  std::string type;
  CoefficientField field;
  /// True when k does not oscillate, so no eps is needed.
  bool scale_free = false;
};

/// Two-scale coefficient: constant, periodic sine profile, two-layer cell,
/// or the calibrated field with harmonic mean exp(u0).
Coefficient parse_coefficient(Params p, const Domain& d) {
  Coefficient c;
  c.type = p.req<std::string>("type");
  if (c.type == "constant") {
    const double v = positive(p.req<double>("value"), "coefficient.value");
    c.field = CoefficientField::constant(v, d.a, d.b);
    c.scale_free = true;
  } else if (c.type == "sine") {
    const double amp = p.opt<double>("amplitude", 1.0);
    const double mean = p.opt<double>("mean", 0.0);
    c.field = CoefficientField::periodic(
        [amp, mean](double y) { return mean + amp * std::sin(2.0 * kPi * y); }, d.a, d.b);
  } else if (c.type == "layered") {
    const auto v = p.req<std::vector<double>>("values");
    require(v.size() == 2 && v[0] > 0.0 && v[1] > 0.0, "coefficient.values: need two positive values");
    const double fraction = p.opt<double>("fraction", 0.5);
    require(fraction > 0.0 && fraction < 1.0, "coefficient.fraction must be in (0, 1)");
    const double lo = std::log(v[0]), hi = std::log(v[1]);
    c.field = CoefficientField::periodic(
        [lo, hi, fraction](double y) { return y - std::floor(y) < fraction ? lo : hi; }, d.a,
        d.b);
  } else if (c.type == "calibrated") {
    c.field = calibrated_two_scale_field(p.req<double>("u0"), d.a, d.b);
  } else {
    throw ConfigError("coefficient.type: unknown '" + c.type + "'");
  }
  return c;
}

/// Slowly varying coefficient k0(x): constant or exp of a Fourier sum.
ScalarFunction parse_slow_coefficient(Params p) {
  const auto type = p.req<std::string>("type");
  if (type == "constant") {
    const double v = positive(p.req<double>("value"), "k0.value");
    return [v](double) { return v; };
  }
  if (type == "fourier") {
    const FourierLogCoefficient c{p.req<std::vector<double>>("theta")};
    require(!c.theta.empty(), "k0.theta must not be empty");
    return [c](double x) { return c.k0(x); };
  }
  throw ConfigError("k0.type: unknown '" + type + "'");
}

SourceTerm parse_source(Params p, const Domain& d) {
  const auto type = p.req<std::string>("type");
  if (type == "constant") return SourceTerm::constant(p.req<double>("value"), d.a);
  if (type == "zero") return SourceTerm::constant(0.0, d.a);
  if (type == "sine") {
    const double L = positive(p.req<double>("period"), "source.period");
    const double amp = p.opt<double>("amplitude", 1.0);
    const double a = d.a;
    SourceTerm s;
    s.f = [=](double x) { return amp * std::sin(2.0 * kPi * (x - a) / L); };
    s.F = [=](double x) { return amp * L / (2.0 * kPi) * (1.0 - std::cos(2.0 * kPi * (x - a) / L)); };
    return s;
  }
  throw ConfigError("source.type: unknown '" + type + "'");
}

std::vector<double> parse_eps_list(Params& p, const std::string& key) {
  auto v = p.req<std::vector<double>>(key);
  require(!v.empty(), key + " must not be empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    positive(v[i], key);
    require(i == 0 || v[i] < v[i - 1], key + " must be strictly decreasing");
  }
  return v;
}

std::uint64_t master_seed(const Json& cfg) {
  if (!cfg.contains("seed")) throw ConfigError("config: 'seed' is mandatory");
  try {
    return cfg["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: 'seed' must be a nonnegative integer");
  }
}

using Tables = std::map<std::string, CsvTable>;

struct Job {
  std::function<void(Tables&, bool&)> compute;
  std::string notes;
};

// ---------------------------------------------------------------------------

Job plan_homogenize(Params p, std::uint64_t) {
  const auto d = parse_domain(p.sub("domain"));
  const auto coef = parse_coefficient(p.sub("coefficient"), d);
  const auto cell_points = p.opt<std::size_t>("cell_points", 4096);
  const auto output_points = p.opt<std::size_t>("output_points", 17);
  const auto cell_dump = p.opt<std::size_t>("cell_dump_points", 256);
  require(cell_points >= 16, "cell_points must be >= 16");
  require(output_points >= 2, "output_points must be >= 2");
  require(cell_dump >= 2, "cell_dump_points must be >= 2");
  return {[=](Tables& t, bool&) {
            CsvTable k0({"x", "k0", "arithmetic_mean"});
            for (std::size_t i = 0; i < output_points; ++i) {
              const double x = d.a + (d.b - d.a) * static_cast<double>(i) /
                                         static_cast<double>(output_points - 1);
              k0.add_row({x, harmonic_homogenize(coef.field, x, cell_points),
                          arithmetic_mean(coef.field, x, cell_points)});
            }
            t.emplace("k0", std::move(k0));
            const auto cell = solve_cell(coef.field, d.a, cell_points);
            CsvTable chi({"y", "chi"});
            for (std::size_t i = 0; i <= cell_dump; ++i) {
              const double y = static_cast<double>(i) / static_cast<double>(cell_dump);
              chi.add_row({y, i == cell_dump ? cell.chi.back() : cell(y)});
            }
            t.emplace("cell", std::move(chi));
          },
          ""};
}

Job plan_forward(Params p, std::uint64_t) {
  const auto d = parse_domain(p.sub("domain"));
  const auto coef = parse_coefficient(p.sub("coefficient"), d);
  const auto source = parse_source(p.sub("source"), d);
  double eps = 0.0;
  if (!coef.scale_free) eps = positive(p.req<double>("eps"), "eps");
  const double npp = p.opt<double>("nodes_per_period", 16.0);
  std::size_t nodes = 0;
  if (coef.scale_free) {
    nodes = p.opt<std::size_t>("nodes", 1025);
  } else {
    const auto rule = static_cast<std::size_t>(std::ceil((d.b - d.a) * npp / eps - 1e-9)) + 1;
    nodes = p.opt<std::size_t>("nodes", std::max<std::size_t>(rule, 1025));
  }
  require(nodes >= 3, "nodes must be >= 3");
  std::vector<Functional> fns;
  if (p.has("observations")) {
    Json obs = p.req<Json>("observations");
    require(obs.is_array(), "observations must be an array");
    for (auto& o : obs) {
      Params q(o, "observations[]");
      const auto kind = functional_kind_from_string(q.req<std::string>("kind"));
      Functional fn{kind, q.req<double>("location"), 0.0, 0.0};
      if (kind == Functional::Kind::local_average) fn.width = q.req<double>("width");
      if (kind == Functional::Kind::scaled_difference_quotient) fn.scale = q.req<double>("width");
      fns.push_back(fn);
    }
  }
  return {[=](Tables& t, bool&) {
            const Grid1D grid(d.a, d.b, nodes);
            SolveOptions so;
            so.alpha = coef.field.alpha;
            so.resolved_scale = eps;
            so.nodes_per_scale = npp;
            const auto sol =
                coef.scale_free
                    ? solve_exact([&](double x) { return coef.field.k(x, 0.0); }, source, grid, so)
                    : solve_exact([&](double x) { return eval_two_scale(coef.field, x, eps); },
                                  source, grid, so);
            CsvTable pt({"x", "p", "v"});
            for (std::size_t i = 0; i < grid.size(); ++i) pt.add_row({grid.node(i), sol.p[i], sol.v[i]});
            t.emplace("p", std::move(pt));

            const auto F = source.antiderivative_on(grid);
            double residual = 0.0, scale = 0.0;
            for (std::size_t i = 0; i < grid.size(); ++i) {
              residual = std::max(residual, std::abs(sol.v[i] + F[i] - sol.c_eps));
              scale = std::max(scale, std::abs(sol.v[i]));
            }
            CsvTable flux({"c_eps", "max_flux_residual", "max_abs_flux", "nodes"});
            flux.add_row({sol.c_eps, residual, scale, static_cast<double>(grid.size())});
            t.emplace("flux", std::move(flux));

            if (!fns.empty()) {
              CsvTable obs({"functional_kind", "location", "width", "y"});
              for (const auto& fn : fns) {
                const double w = fn.kind == Functional::Kind::local_average ? fn.width : fn.scale;
                obs.add_row({to_string(fn.kind), format_double(fn.location), format_double(w),
                             format_double(apply_functional(fn, sol))});
              }
              t.emplace("observations", std::move(obs));
            }
          },
          ""};
}

Job plan_converge(Params p, std::uint64_t) {
  const auto d = parse_domain(p.sub("domain"));
  const auto coef = parse_coefficient(p.sub("coefficient"), d);
  const auto source = parse_source(p.sub("source"), d);
  const auto eps = parse_eps_list(p, "eps_list");
  ConvergenceOptions opts;
  opts.nodes_per_period = p.opt<double>("nodes_per_period", 16.0);
  opts.homogenize.cell_points = p.opt<std::size_t>("cell_points", 4096);
  opts.homogenize.macro_points = p.opt<std::size_t>("macro_points", 129);
  return {[=](Tables& t, bool&) {
            const auto rep = convergence_study(coef.field, source, eps, opts);
            t.emplace("convergence", rep.table());
            const auto grid =
                Grid1D::with_max_spacing(d.a, d.b, eps.back() / opts.nodes_per_period);
            CsvTable flux({"eps", "sup_norm", "c_gap"});
            std::vector<double> gaps;
            for (double e : eps) {
              const auto fd = flux_discrepancy(coef.field, source, e, grid);
              flux.add_row({e, fd.sup_norm, fd.c_gap});
              gaps.push_back(fd.c_gap);
            }
            const bool positive_gaps =
                std::all_of(gaps.begin(), gaps.end(), [](double g) { return g > 0.0; });
            const double slope = (eps.size() >= 2 && positive_gaps)
                                     ? stats::loglog_slope(eps, gaps)
                                     : std::numeric_limits<double>::quiet_NaN();
            flux.add_row({"rate", "", format_double(slope)});
            t.emplace("flux", std::move(flux));
          },
          ""};
}

Job plan_transport(Params p, std::uint64_t seed) {
  const double L = positive(p.req<double>("L"), "L");
  const Domain d{p.opt<double>("origin", 0.0), 0.0};
  const Domain per{d.a, d.a + L};
  const auto coef = parse_coefficient(p.sub("coefficient"), per);
  const auto source = parse_source(p.sub("source"), per);
  const auto eps = parse_eps_list(p, "eps_list");
  TransportConfig cfg;
  cfg.L = L;
  cfg.phi = positive(p.req<double>("phi"), "phi");
  cfg.eta0 = nonnegative(p.req<double>("eta0"), "eta0");
  cfg.T = positive(p.req<double>("T"), "T");
  cfg.x_init = p.req<double>("x_init");
  cfg.replicates = p.req<std::size_t>("replicates");
  require(cfg.replicates >= 1, "replicates must be >= 1");
  cfg.dt_safety = positive(p.opt<double>("dt_safety", 0.1), "dt_safety");
  cfg.nodes_per_period = p.opt<double>("nodes_per_period", 16.0);
  return {[=](Tables& t, bool&) {
            TransportConfig c = cfg;
            c.seed = seed;
            const auto rows = path_error_study(coef.field, source, c, eps);
            t.emplace("transport", path_error_table(rows));
          },
          "one-dimensional instance on the L-torus"};
}

Job plan_estimate_scalar(Params p, std::uint64_t seed) {
  const auto d = parse_domain(p.sub("domain"));
  ConsistencyConfig cfg;
  cfg.a = d.a;
  cfg.b = d.b;
  cfg.u0 = p.req<double>("u0");
  cfg.gamma = nonnegative(p.req<double>("gamma"), "gamma");
  cfg.N_list = p.req<std::vector<std::size_t>>("N_list");
  cfg.replicates = p.req<std::size_t>("replicates");
  cfg.grid_nodes = p.opt<std::size_t>("grid_nodes", 2049);
  require(!cfg.N_list.empty() && cfg.replicates >= 1, "N_list and replicates required");

  std::optional<MultiscaleConfig> ms;
  if (p.has("multiscale")) {
    Params q = p.sub("multiscale");
    MultiscaleConfig m;
    m.u0 = cfg.u0;
    m.seed = seed;
    m.N_list = q.req<std::vector<std::size_t>>("N_list");
    m.eps_list = parse_eps_list(q, "eps_list");
    m.gamma = nonnegative(q.req<double>("gamma"), "multiscale.gamma");
    m.replicates = q.req<std::size_t>("replicates");
    m.nodes_per_period = q.opt<double>("nodes_per_period", 64.0);
    m.dq_window_ratio = positive(q.opt<double>("dq_window_ratio", 0.5), "dq_window_ratio");
    ms = m;
  }
  return {[=](Tables& t, bool&) {
            ConsistencyConfig c = cfg;
            c.seed = seed;
            const auto single = consistency_experiment(c);
            auto tab = single.table();
            tab.add_row({"slope", "", "", format_double(single.slope), "", "", ""});
            t.emplace("consistency", std::move(tab));
            if (ms) {
              const auto field = calibrated_two_scale_field(cfg.u0, d.a, d.b);
              const auto multi =
                  multiscale_consistency_experiment(field, SourceTerm::constant(1.0, d.a), *ms);
              t.emplace("multiscale", multi.table());
            }
          },
          ""};
}

Job plan_clt(Params p, std::uint64_t seed) {
  const auto d = parse_domain(p.sub("domain"));
  CltConfig cfg;
  cfg.a = d.a;
  cfg.b = d.b;
  cfg.k0 = parse_slow_coefficient(p.sub("k0"));
  cfg.source = parse_source(p.sub("source"), d);
  cfg.points = p.req<std::vector<double>>("points");
  for (double x : cfg.points) require(x > d.a && x < d.b, "points must lie in (a, b)");
  cfg.eps = positive(p.req<double>("eps"), "eps");
  cfg.sigma = nonnegative(p.req<double>("sigma"), "sigma");
  cfg.replicates = p.req<std::size_t>("replicates");
  require(cfg.replicates >= 2, "replicates must be >= 2");
  cfg.nodes_per_period = p.opt<double>("nodes_per_period", 16.0);
  cfg.seed = seed;
  if (p.has("clamp_ceiling")) cfg.clamp_ceiling = positive(p.req<double>("clamp_ceiling"), "clamp_ceiling");
  return {[=](Tables& t, bool&) { t.emplace("clt", clt_diagnostic(cfg).table()); }, ""};
}

std::vector<double> uniform_points(double a, double b, std::size_t n, bool interior) {
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i)
    xs[i] = interior ? a + (b - a) * static_cast<double>(i + 1) / static_cast<double>(n + 1)
                     : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return xs;
}

Job plan_map(Params p, std::uint64_t seed) {
  const auto d = parse_domain(p.sub("domain"));
  const auto source = parse_source(p.sub("source"), d);
  const bool model_error = p.req<bool>("use_model_error");
  const double sigma = nonnegative(p.req<double>("sigma"), "sigma");
  const double eps = nonnegative(p.req<double>("eps"), "eps");
  const double gamma = positive(p.req<double>("gamma"), "gamma");
  const auto quad_nodes = p.opt<std::size_t>("quad_nodes", 1025);
  const auto output_points = p.opt<std::size_t>("output_points", 41);
  require(quad_nodes >= 512 || !model_error, "quad_nodes must be >= 512 with model error");
  require(output_points >= 2, "output_points must be >= 2");
  Params prior = p.sub("prior");
  const auto prior_sd = prior.req<std::vector<double>>("sd");
  for (double s : prior_sd) positive(s, "prior.sd");
  std::optional<std::vector<double>> prior_mean;
  if (prior.has("mean")) prior_mean = prior.req<std::vector<double>>("mean");
  NelderMeadOptions nm;
  Params opt = p.sub_or_empty("optimizer");
  nm.max_evaluations = opt.opt<std::size_t>("max_evaluations", 2000);
  nm.tolerance = opt.opt<double>("tolerance", 1e-9);

  Params data = p.sub("data");
  std::optional<std::string> file;
  std::vector<double> theta_true;
  std::size_t N = 0;
  double npp = 16.0;
  if (data.has("file")) {
    file = data.req<std::string>("file");
  } else {
    theta_true = data.req<std::vector<double>>("theta_true");
    N = data.req<std::size_t>("N");
    npp = data.opt<double>("nodes_per_period", 16.0);
    require(N >= 1, "data.N must be >= 1");
    require(theta_true.size() == prior_sd.size(), "data.theta_true and prior.sd differ in length");
    if (sigma > 0.0) positive(eps, "eps");
  }
  return {[=](Tables& t, bool&) {
            ObservationSet obs;
            if (file) {
              obs = read_observations_csv(*file, gamma);
            } else {
              const FourierLogCoefficient truth{theta_true};
              const auto xs = uniform_points(d.a, d.b, N, true);
              std::vector<double> p_true;
              Grid1D fine(d.a, d.b, 3);
              if (sigma > 0.0) {
                const auto cells =
                    static_cast<std::size_t>(std::ceil((d.b - d.a) * npp / eps - 1e-9));
                fine = Grid1D(d.a, d.b, cells + 1);
                MicrostructureModel model;
                model.sigma = sigma;
                model.epsilon = eps;
                const auto mu = sample_microstructure(model, fine, seed);
                const auto rc = compose_random_coefficient([&](double x) { return truth.k0(x); },
                                                           mu, sigma);
                p_true = solve_exact_nodal(fine, rc.inv_k, source.antiderivative_on(fine)).p;
              } else {
                fine = Grid1D(d.a, d.b, std::max<std::size_t>(quad_nodes, 4097));
                p_true = solve_exact([&](double x) { return truth.k0(x); }, source, fine).p;
              }
              Stream rng(seed, StreamTag::observation_noise, 0);
              obs.gamma = gamma;
              for (double x : xs) {
                obs.functionals.push_back(Functional::point(x));
                obs.y.push_back(fine.interpolate(p_true, x) + gamma * rng.normal());
              }
            }
            MapProblem prob;
            prob.observations = obs;
            prob.use_model_error = model_error;
            prob.sigma = sigma;
            prob.eps = eps;
            prob.quad = Grid1D(d.a, d.b, quad_nodes);
            prob.source = source;
            prob.prior_sd = prior_sd;
            if (prior_mean) {
              require(prior_mean->size() == prior_sd.size(), "prior.mean and prior.sd differ in length");
              prob.prior_mean = *prior_mean;
            } else {
              std::vector<double> lstar;
              const auto pstar = solve_exact([](double) { return 1.0; }, source, prob.quad);
              for (const auto& fn : obs.functionals) lstar.push_back(apply_functional(fn, pstar));
              const auto crude = scalar_estimate(obs.y, lstar);
              prob.prior_mean.assign(prior_sd.size(), 0.0);
              prob.prior_mean[0] = crude.sign_failure ? 0.0 : crude.u_bar;
            }
            const auto xs = uniform_points(d.a, d.b, output_points, false);
            const auto est = map_estimate(prob, xs, nm);
            CsvTable k({"x", "k_hat"});
            for (std::size_t i = 0; i < xs.size(); ++i) k.add_row({xs[i], est.k_hat[i]});
            t.emplace("map", std::move(k));
            CsvTable th({"index", "theta", "prior_mean"});
            for (std::size_t i = 0; i < est.theta.size(); ++i)
              th.add_row({static_cast<double>(i), est.theta[i], prob.prior_mean[i]});
            t.emplace("theta", std::move(th));
            CsvTable diag({"objective", "evaluations", "converged"});
            diag.add_row({est.value, static_cast<double>(est.evaluations), est.converged ? 1.0 : 0.0});
            t.emplace("diagnostics", std::move(diag));
            CsvTable o({"functional_kind", "location", "width", "y"});
            for (std::size_t j = 0; j < obs.size(); ++j)
              o.add_row({to_string(obs.functionals[j].kind), format_double(obs.functionals[j].location),
                         "0", format_double(obs.y[j])});
            t.emplace("observations", std::move(o));
          },
          ""};
}

Job plan_study(Params p, std::uint64_t seed) {
  const auto d = parse_domain(p.sub("domain"));
  VarianceStudyConfig cfg;
  cfg.a = d.a;
  cfg.b = d.b;
  cfg.theta_true = p.req<std::vector<double>>("theta_true");
  require(!cfg.theta_true.empty(), "theta_true must not be empty");
  cfg.N = p.req<std::size_t>("N");
  cfg.eps = positive(p.req<double>("eps"), "eps");
  cfg.sigma = nonnegative(p.req<double>("sigma"), "sigma");
  cfg.gamma = positive(p.req<double>("gamma"), "gamma");
  cfg.replicates = p.req<std::size_t>("replicates");
  require(cfg.replicates >= 2, "replicates must be >= 2");
  cfg.quad_nodes = p.opt<std::size_t>("quad_nodes", 1025);
  cfg.output_points = p.opt<std::size_t>("output_points", 41);
  cfg.nodes_per_period = p.opt<double>("nodes_per_period", 16.0);
  cfg.prior_sd = positive(p.opt<double>("prior_sd", 1.0), "prior_sd");
  cfg.max_failure_rate = p.opt<double>("max_failure_rate", 0.05);
  cfg.seed = seed;
  if (p.has("clamp_ceiling")) cfg.clamp_ceiling = positive(p.req<double>("clamp_ceiling"), "clamp_ceiling");
  Params opt = p.sub_or_empty("optimizer");
  cfg.optimizer.max_evaluations = opt.opt<std::size_t>("max_evaluations", 2000);
  cfg.optimizer.tolerance = opt.opt<double>("tolerance", 1e-9);
  return {[=](Tables& t, bool& flagged) {
            const auto st = variance_study(cfg);
            t.emplace("variance", st.summary_table());
            t.emplace("replicates", st.replicate_table());
            CsvTable s({"replicates", "failures_k1", "failures_k2", "failure_rate", "flagged",
                        "mean_ratio", "fraction_ratio_below_one", "max_clamp_fraction",
                        "clamp_warnings"});
            s.add_row({static_cast<double>(st.replicates), static_cast<double>(st.failures_k1),
                       static_cast<double>(st.failures_k2), st.failure_rate,
                       st.flagged ? 1.0 : 0.0, st.mean_ratio, st.fraction_ratio_below_one,
                       st.max_clamp_fraction, static_cast<double>(st.clamp_warnings)});
            t.emplace("summary", std::move(s));
            flagged = st.flagged;
          },
          ""};
}

Job plan_posterior(Params p, std::uint64_t seed) {
  const auto d = parse_domain(p.sub("domain"));
  const double u_true = p.req<double>("u_true");
  const double gamma = positive(p.req<double>("gamma"), "gamma");
  const auto N = p.req<std::size_t>("N");
  require(N >= 1, "N must be >= 1");
  const double prior_sd = positive(p.req<double>("prior_sd"), "prior_sd");
  const auto range = p.opt<std::vector<double>>("density_range", {-8.0, 8.0});
  require(range.size() == 2 && range[1] > range[0], "density_range must be [lo, hi]");
  const auto density_nodes = p.opt<std::size_t>("density_nodes", 4001);
  const double max_dy = positive(p.opt<double>("hellinger_max_dy", 0.01), "hellinger_max_dy");
  const auto sweep = p.opt<std::size_t>("hellinger_sweep_points", 8);
  Params sb = p.sub_or_empty("small_ball");
  const double z1 = sb.opt<double>("z1", u_true);
  const double z2 = sb.opt<double>("z2", u_true + 0.2);
  const auto deltas = sb.opt<std::vector<double>>("deltas", {0.2, 0.1, 0.05, 0.02, 0.01});
  const auto samples = sb.opt<std::size_t>("samples", 1000000);
  require(density_nodes >= 3 && sweep >= 1 && samples >= 1, "posterior: sizes must be positive");

  return {[=](Tables& t, bool&) {
            const Grid1D grid(d.a, d.b, 1025);
            const auto src = SourceTerm::constant(1.0, d.a);
            const auto pstar = solve_exact([](double) { return 1.0; }, src, grid);
            const auto xs = uniform_points(d.a, d.b, N, true);
            std::vector<double> l(N), y(N);
            Stream rng(seed, StreamTag::observation_noise, 0);
            for (std::size_t j = 0; j < N; ++j) {
              l[j] = grid.interpolate(pstar.p, xs[j]);
              y[j] = std::exp(-u_true) * l[j] + gamma * rng.normal();
            }
            auto phi_for = [&](std::vector<double> data) {
              return [data, l, gamma](double u) {
                double s = 0.0;
                for (std::size_t j = 0; j < l.size(); ++j) {
                  const double r = data[j] - std::exp(-u) * l[j];
                  s += r * r;
                }
                return 0.5 * s / (gamma * gamma);
              };
            };
            auto logpost_for = [&](std::vector<double> data) {
              auto phi = phi_for(std::move(data));
              return [phi, prior_sd](double u) { return -phi(u) - 0.5 * u * u / (prior_sd * prior_sd); };
            };
            const Grid1D dg(range[0], range[1], density_nodes);
            const auto lp = logpost_for(y);
            CsvTable dens({"theta", "logdens"});
            for (std::size_t i = 0; i < dg.size(); ++i) dens.add_row({dg.node(i), lp(dg.node(i))});
            t.emplace("density", std::move(dens));

            CsvTable hel({"dy", "distance"});
            auto fit = [&](double top) {
              std::vector<double> ds, hs;
              for (std::size_t i = 1; i <= sweep; ++i) {
                const double dy = top * static_cast<double>(i) / static_cast<double>(sweep);
                auto yy = y;
                for (double& v : yy) v += dy;
                ds.push_back(dy);
                hs.push_back(hellinger_distance(lp, logpost_for(yy), dg));
              }
              return std::make_pair(ds, hs);
            };
            const auto [ds, hs] = fit(max_dy);
            for (std::size_t i = 0; i < ds.size(); ++i) hel.add_row({ds[i], hs[i]});
            const auto [ds2, hs2] = fit(0.5 * max_dy);
            hel.add_row({"lipschitz_full_range", format_double(lipschitz_constant(ds, hs))});
            hel.add_row({"lipschitz_half_range", format_double(lipschitz_constant(ds2, hs2))});
            t.emplace("hellinger", std::move(hel));

            GaussianPrior prior;
            prior.basis = {[](double) { return 1.0; }};
            prior.weights = {prior_sd};
            auto phi = phi_for(y);
            Objective obj = [phi](std::span<const double> th) { return phi(th[0]); };
            const std::vector<double> a{z1}, b{z2};
            const auto res = small_ball_ratio(prior, obj, a, b, deltas, samples, seed);
            t.emplace("smallball", res.table());
          },
          ""};
}

Job plan(const std::string& sub, Json& cfg, std::uint64_t seed) {
  Params p(cfg, sub);
  if (sub == "homogenize") return plan_homogenize(p, seed);
  if (sub == "forward") return plan_forward(p, seed);
  if (sub == "converge") return plan_converge(p, seed);
  if (sub == "transport") return plan_transport(p, seed);
  if (sub == "estimate-scalar") return plan_estimate_scalar(p, seed);
  if (sub == "clt") return plan_clt(p, seed);
  if (sub == "map") return plan_map(p, seed);
  if (sub == "study") return plan_study(p, seed);
  if (sub == "posterior") return plan_posterior(p, seed);
  throw ConfigError("unknown subcommand '" + sub + "'");
}

bool safe_run_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"homogenize", "forward", "converge",
                                              "transport",  "estimate-scalar", "clt",
                                              "map",        "study",   "posterior"};
  return names;
}

Json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (j.contains("config") && j.contains("config_hash")) j = j["config"];
  return j;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

namespace {

struct Prepared {
  Job job;
  RunOutput out;
  std::uint64_t seed = 0;
};

Prepared prepare(const std::string& subcommand, Json config,
                 std::optional<std::uint64_t> seed_override) {
  if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end())
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  if (config.contains("experiment")) {
    if (!config["experiment"].is_string() || config["experiment"].get<std::string>() != subcommand)
      throw ConfigError("config experiment does not match subcommand '" + subcommand + "'");
  } else {
    config["experiment"] = subcommand;
  }
  if (seed_override) config["seed"] = *seed_override;
  Prepared pr;
  pr.seed = master_seed(config);
  std::optional<std::string> run_id;
  if (config.contains("run_id")) {
    if (!config["run_id"].is_string()) throw ConfigError("run_id must be a string");
    run_id = config["run_id"].get<std::string>();
    if (!safe_run_id(*run_id)) throw ConfigError("run_id may only contain [A-Za-z0-9._-]");
  }
  pr.job = plan(subcommand, config, pr.seed);
  pr.out.effective_config = config;
  pr.out.notes = pr.job.notes;
  pr.out.config_hash = sha256_hex(config.dump());
  pr.out.run_id = run_id ? *run_id : subcommand + "-" + pr.out.config_hash.substr(0, 12);
  return pr;
}

}  // namespace

RunOutput execute(const std::string& subcommand, Json config,
                  std::optional<std::uint64_t> seed_override) {
  auto pr = prepare(subcommand, std::move(config), seed_override);
  pr.job.compute(pr.out.tables, pr.out.flagged);
  return pr.out;
}

void write_outputs(const RunOutput& out, const std::filesystem::path& out_dir) {
  const auto dir = out_dir / out.run_id;
  std::filesystem::create_directories(dir);
  Json tables = Json::array();
  for (const auto& [name, table] : out.tables) {
    table.write(dir / (name + ".csv"));
    tables.push_back(name + ".csv");
  }
  Json manifest;
  manifest["homest_version"] = HOMEST_VERSION;
  manifest["experiment"] = out.effective_config["experiment"];
  manifest["run_id"] = out.run_id;
  manifest["seed"] = out.effective_config["seed"];
  manifest["config_hash"] = out.config_hash;
  manifest["flagged"] = out.flagged;
  if (!out.notes.empty()) manifest["notes"] = out.notes;
  manifest["tables"] = tables;
  manifest["config"] = out.effective_config;
  std::ofstream f(dir / "manifest.json", std::ios::binary);
  f << manifest.dump(2) << '\n';
  if (!f) throw std::runtime_error("cannot write manifest in " + dir.string());
}

int run(const RunOptions& opts) {
  if (opts.threads) stats::set_default_threads(*opts.threads);
  Prepared pr;
  try {
    pr = prepare(opts.subcommand, load_config(opts.config_path), opts.seed);
  } catch (const ConfigError& e) {
    std::cerr << "homest: config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "homest: config error: " << e.what() << '\n';
    return kConfigError;
  }
  const auto dir = opts.out_dir / pr.out.run_id;
  try {
      pr.job.compute(pr.out.tables, pr.out.flagged);
    write_outputs(pr.out, opts.out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "homest: config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::filesystem::create_directories(dir);
    std::ofstream diag(dir / "diagnostic.txt");
    diag << "experiment: " << opts.subcommand << '\n'
         << "config_hash: " << pr.out.config_hash << '\n'
         << "error: " << e.what() << '\n';
    std::cerr << "homest: numerical failure: " << e.what() << " (see " << (dir / "diagnostic.txt").string()
              << ")\n";
    return kNumericalFailure;
  }
  std::cout << dir.string() << '\n';
  if (pr.out.flagged) {
    std::cerr << "homest: study flagged (optimizer failure rate above threshold)\n";
    return kFlaggedStudy;
  }
  return kSuccess;
}

}  // namespace homest::cli
