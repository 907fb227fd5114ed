#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stgp/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spatiotemporal Gaussian process with Kronecker-sum covariance"};
  app.require_subcommand(1);

  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  const char* names[] = {"simulate", "fit", "predict", "summarize", "bench"};
  const char* help[] = {"generate a synthetic dataset", "run MCMC and write posterior samples",
                        "posterior predictions", "TESD estimate and connection graph",
                        "structured vs dense cost comparison"};
  for (int n = 0; n < 5; ++n) {
    CLI::App* sub = app.add_subcommand(names[n], help[n]);
    sub->add_option("--config", config, "JSON config file")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out, "override the output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : stgp::kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  std::optional<std::uint64_t> seed_opt;
  if (sub->count("--seed")) seed_opt = seed;
  std::optional<std::filesystem::path> out_opt;
  if (sub->count("--out")) out_opt = out;
  return stgp::run_command(sub->get_name(), config, seed_opt, out_opt, std::cerr);
}
