#include <iostream>

#include <CLI11.hpp>

#include "cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"homest: multiscale Darcy homogenization and parameter estimation"};
  app.require_subcommand(1);

  homest::cli::RunOptions opts;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  for (const auto& name : homest::cli::subcommands()) {
    auto* sub = app.add_subcommand(name, "run the '" + name + "' experiment");
    sub->add_option("--config", opts.config_path, "JSON config or manifest")->required();
    sub->add_option("--seed", seed, "override the config master seed");
    sub->add_option("--threads", threads, "worker threads (default: hardware)");
    sub->add_option("--out", opts.out_dir, "output root directory");
    sub->callback([&, name, sub] {
      opts.subcommand = name;
      if (sub->count("--seed")) opts.seed = seed;
      if (sub->count("--threads")) opts.threads = threads;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : homest::cli::kConfigError;
  }
  return homest::cli::run(opts);
}
