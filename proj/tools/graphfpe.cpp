#include <cstdlib>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "graphfpe/harness.hpp"

namespace {

void configure_logging() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("GRAPHFPE_LOG")) {
    const std::string level = env;
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "warn") spdlog::set_level(spdlog::level::warn);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("ignoring GRAPHFPE_LOG={} (expected error, warn, info or debug)", level);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Fokker-Planck flows, rates and Wasserstein distances on graphs"};
  app.set_version_flag("--version", graphfpe::kVersion);
  std::string command;
  std::string config;
  graphfpe::harness::RunOptions opts;
  std::string out_dir = ".";
  long long seed = -1;
  app.add_option("command", command, "gibbs | simulate | rates | lsi | w2 | decompose")
      ->required()
      ->check(CLI::IsMember({"gibbs", "simulate", "rates", "lsi", "w2", "decompose"}));
  app.add_option("--config", config, "experiment config (JSON)")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--jobs", opts.jobs, "worker threads for sampling and batch loops")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "override the sampler seed")->check(CLI::NonNegativeNumber);
  app.add_flag("--equilibrium", opts.equilibrium, "rates: local rates per equilibrium only");
  app.add_flag("--timing", opts.timing, "simulate: record wall time in summary.json");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : graphfpe::harness::kConfigError;
  }
  opts.out_dir = out_dir;
  if (seed >= 0) opts.seed = static_cast<std::uint64_t>(seed);
  return graphfpe::harness::run(command, config, opts);
}
