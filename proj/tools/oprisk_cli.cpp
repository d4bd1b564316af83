#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <oprisk/commands.hpp>

int main(int argc, char** argv) {
  CLI::App app{"Operational-risk priors, posteriors and Monte Carlo capital"};
  app.require_subcommand(1);

  std::string config;
  oprisk::cli::Overrides overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> samples;
  std::optional<double> quantile;
  std::optional<std::string> out;
  std::optional<unsigned> threads;

  const std::pair<const char*, const char*> commands[] = {
      {"fit-prior", "Fit prior hyperparameters to expert opinions"},
      {"update", "Posterior trajectory from observed counts or losses"},
      {"calibrate", "Empirical-Bayes hyperparameters from a multi-bank count panel"},
      {"simulate", "Monte Carlo annual losses and quantile capital"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--samples", samples, "Monte Carlo replications K");
    sub->add_option("--quantile", quantile, "Quantile level, default 0.999");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--threads", threads, "Worker threads (0 = all cores); results do not depend on it");
    sub->add_flag("--audit", overrides.audit, "Fail instead of defaulting a missing seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : oprisk::cli::exit_validation;
  }

  overrides.seed = seed;
  overrides.samples = samples;
  overrides.quantile = quantile;
  overrides.threads = threads;
  if (out) overrides.out = *out;
  const auto* sub = app.get_subcommands().front();
  return oprisk::cli::run_command(sub->get_name(), config, overrides, std::cout, std::cerr);
}
