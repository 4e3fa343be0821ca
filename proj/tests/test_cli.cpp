#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "homest/csv.hpp"

using namespace homest;
using cli::Json;

namespace {

namespace fs = std::filesystem;

Json forward_constant() {
  return Json::parse(R"({
    "experiment": "forward", "seed": 1,
    "domain": {"a": 0.0, "b": 1.0},
    "coefficient": {"type": "constant", "value": 1.0},
    "source": {"type": "constant", "value": 1.0},
    "observations": [{"kind": "point_eval", "location": 0.5}]
  })");
}

Json homogenize_sine() {
  return Json::parse(R"({
    "experiment": "homogenize", "seed": 1,
    "domain": {"a": 0.0, "b": 1.0},
    "coefficient": {"type": "sine", "amplitude": 1.0}
  })");
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("homest_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_json(const fs::path& dir, const std::string& name, const Json& j) {
  const auto path = dir / name;
  std::ofstream(path) << j.dump(2);
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("forward with k = 1, f = 1 gives p(1/2) = 1/8") {
  const auto out = cli::execute("forward", forward_constant(), std::nullopt);
  const auto& obs = out.tables.at("observations");
  REQUIRE(obs.rows() == 1);
  const auto dir = scratch("fwd");
  obs.write(dir / "obs.csv");
  const auto data = read_csv(dir / "obs.csv");
  CHECK(std::stod(data.rows[0][data.column("y")]) == doctest::Approx(0.125).epsilon(1e-12));
  const auto flux = read_csv((out.tables.at("flux").write(dir / "flux.csv"), dir / "flux.csv"));
  CHECK(std::stod(flux.rows[0][flux.column("max_flux_residual")]) < 1e-12);
}

TEST_CASE("homogenize reports the sine-profile effective coefficient") {
  const auto out = cli::execute("homogenize", homogenize_sine(), std::nullopt);
  const auto dir = scratch("hom");
  out.tables.at("k0").write(dir / "k0.csv");
  const auto data = read_csv(dir / "k0.csv");
  for (const auto& row : data.rows)
    CHECK(std::stod(row[data.column("k0")]) == doctest::Approx(0.78984).epsilon(1e-4 / 0.78984));
}

TEST_CASE("effective config echoes defaults and hashes deterministically") {
  const auto a = cli::execute("homogenize", homogenize_sine(), std::nullopt);
  const auto b = cli::execute("homogenize", homogenize_sine(), std::nullopt);
  CHECK(a.config_hash == b.config_hash);
  CHECK(a.config_hash.size() == 64);
  CHECK(a.run_id == "homogenize-" + a.config_hash.substr(0, 12));
  CHECK(a.effective_config.contains("cell_points"));
  CHECK(a.effective_config["coefficient"].contains("mean"));

  const auto c = cli::execute("homogenize", homogenize_sine(), 99);
  CHECK(c.config_hash != a.config_hash);
  CHECK(c.effective_config["seed"] == 99);
}

TEST_CASE("sha256 known vectors") {
  CHECK(cli::sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(cli::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("reruns are byte-identical and manifests replay") {
  const auto dir = scratch("replay");
  auto cfg = Json::parse(R"({
    "experiment": "clt", "seed": 4,
    "domain": {"a": -1.0, "b": 1.0},
    "k0": {"type": "constant", "value": 1.0},
    "source": {"type": "constant", "value": 1.0},
    "points": [-0.5, 0.0, 0.5],
    "eps": 0.0625, "sigma": 0.25, "replicates": 50
  })");
  const auto path = write_json(dir, "clt.json", cfg);

  cli::RunOptions opts;
  opts.subcommand = "clt";
  opts.config_path = path;
  opts.out_dir = dir / "first";
  REQUIRE(cli::run(opts) == cli::kSuccess);
  opts.out_dir = dir / "second";
  REQUIRE(cli::run(opts) == cli::kSuccess);

  const auto first = cli::execute("clt", cfg, std::nullopt);
  const auto run1 = dir / "first" / first.run_id;
  const auto run2 = dir / "second" / first.run_id;
  CHECK(slurp(run1 / "clt.csv") == slurp(run2 / "clt.csv"));
  CHECK(slurp(run1 / "manifest.json") == slurp(run2 / "manifest.json"));

  opts.config_path = run1 / "manifest.json";
  opts.out_dir = dir / "replayed";
  REQUIRE(cli::run(opts) == cli::kSuccess);
  CHECK(slurp(dir / "replayed" / first.run_id / "clt.csv") == slurp(run1 / "clt.csv"));
  CHECK(slurp(dir / "replayed" / first.run_id / "manifest.json") == slurp(run1 / "manifest.json"));

  opts.config_path = path;
  opts.seed = 5;
  opts.out_dir = dir / "reseeded";
  REQUIRE(cli::run(opts) == cli::kSuccess);
  const auto reseeded = cli::execute("clt", cfg, 5);
  CHECK(slurp(dir / "reseeded" / reseeded.run_id / "clt.csv") != slurp(run1 / "clt.csv"));
}

TEST_CASE("config errors map to exit code 2") {
  const auto dir = scratch("errors");
  cli::RunOptions opts;
  opts.out_dir = dir / "out";

  auto no_seed = forward_constant();
  no_seed.erase("seed");
  opts.subcommand = "forward";
  opts.config_path = write_json(dir, "no_seed.json", no_seed);
  CHECK(cli::run(opts) == cli::kConfigError);

  opts.config_path = write_json(dir, "ok.json", forward_constant());
  opts.subcommand = "clt";
  CHECK(cli::run(opts) == cli::kConfigError);

  auto no_eps = forward_constant();
  no_eps["coefficient"] = Json::parse(R"({"type": "sine"})");
  opts.subcommand = "forward";
  opts.config_path = write_json(dir, "no_eps.json", no_eps);
  CHECK(cli::run(opts) == cli::kConfigError);

  auto bad_type = forward_constant();
  bad_type["coefficient"]["value"] = "one";
  opts.config_path = write_json(dir, "bad_type.json", bad_type);
  CHECK(cli::run(opts) == cli::kConfigError);

  auto bad_id = forward_constant();
  bad_id["run_id"] = "../escape";
  opts.config_path = write_json(dir, "bad_id.json", bad_id);
  CHECK(cli::run(opts) == cli::kConfigError);

  opts.config_path = dir / "missing.json";
  CHECK(cli::run(opts) == cli::kConfigError);

  std::ofstream(dir / "garbage.json") << "{not json";
  opts.config_path = dir / "garbage.json";
  CHECK(cli::run(opts) == cli::kConfigError);
}

TEST_CASE("numerical failures map to exit code 3 with a diagnostic") {
  const auto dir = scratch("numerical");
  auto cfg = Json::parse(R"({
    "experiment": "posterior", "seed": 1, "run_id": "narrow",
    "domain": {"a": 0.0, "b": 1.0},
    "u_true": 0.3, "gamma": 0.05, "N": 8, "prior_sd": 1.0,
    "density_range": [-1.0, 1.0]
  })");
  cli::RunOptions opts;
  opts.subcommand = "posterior";
  opts.config_path = write_json(dir, "p.json", cfg);
  opts.out_dir = dir / "out";
  CHECK(cli::run(opts) == cli::kNumericalFailure);
  CHECK(fs::exists(dir / "out" / "narrow" / "diagnostic.txt"));
}

TEST_CASE("explicit run_id names the run directory") {
  const auto dir = scratch("runid");
  auto cfg = forward_constant();
  cfg["run_id"] = "unit_case";
  cli::RunOptions opts;
  opts.subcommand = "forward";
  opts.config_path = write_json(dir, "f.json", cfg);
  opts.out_dir = dir / "out";
  REQUIRE(cli::run(opts) == cli::kSuccess);
  CHECK(fs::exists(dir / "out" / "unit_case" / "p.csv"));
  const auto manifest = cli::load_config(dir / "out" / "unit_case" / "manifest.json");
  CHECK(manifest["run_id"] == "unit_case");
}
