#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "latentalpha/commands.hpp"
#include "latentalpha/config.hpp"
#include "latentalpha/error.hpp"

namespace {

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<std::string> states;
};

void add_common(CLI::App* cmd, Options& opt, bool config_required) {
  auto* c = cmd->add_option("--config", opt.config, "JSON run configuration");
  if (config_required) c->required();
  cmd->add_option("--seed", opt.seed, "master random seed (overrides the config)");
  cmd->add_option("--paths", opt.paths, "number of Monte Carlo paths or synthetic days");
}

latentalpha::RunConfig resolve(const Options& opt) {
  latentalpha::RunConfig cfg = opt.config.empty() ? latentalpha::RunConfig{} : latentalpha::load_config(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.paths) {
    cfg.paths = *opt.paths;
    if (cfg.synthetic) cfg.synthetic->days = *opt.paths;
  }
  if (opt.states) latentalpha::parse_state_range(*opt.states, cfg.states_lo, cfg.states_hi);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal execution and statistical arbitrage under latent alpha models"};
  app.require_subcommand(1);
  Options opt;

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study of the optimal strategy against Almgren-Chriss");
  add_common(simulate, opt, true);
  simulate->add_option("--out", opt.out, "output directory")->required();

  auto* calibrate = app.add_subcommand("calibrate", "EM calibration of the censored pure-jump model");
  add_common(calibrate, opt, false);
  calibrate->add_option("--data", opt.data, "day,t,F price file")->required();
  calibrate->add_option("--out", opt.out, "output directory")->required();
  calibrate->add_option("--states", opt.states, "number of latent states, N or LO..HI");

  auto* filter = app.add_subcommand("filter", "posterior over latent states for each day of a price file");
  add_common(filter, opt, true);
  filter->add_option("--data", opt.data, "day,t,F price file")->required();
  filter->add_option("--out", opt.out, "output directory")->required();

  auto* synthesize = app.add_subcommand("synthesize", "write a synthetic day,t,F price file");
  add_common(synthesize, opt, true);
  synthesize->add_option("--out", opt.out, "output CSV file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const latentalpha::RunConfig cfg = resolve(opt);
    if (simulate->parsed()) {
      latentalpha::cmd_simulate(cfg, opt.out);
    } else if (calibrate->parsed()) {
      latentalpha::cmd_calibrate(cfg, opt.data, opt.out);
    } else if (filter->parsed()) {
      latentalpha::cmd_filter(cfg, opt.data, opt.out);
    } else {
      latentalpha::cmd_synthesize(cfg, opt.out);
    }
  } catch (const latentalpha::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
