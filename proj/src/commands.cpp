#include "latentalpha/commands.hpp"

#include <fmt/format.h>

#include <cmath>
#include <filesystem>

#include "latentalpha/csv.hpp"
#include "latentalpha/error.hpp"

namespace latentalpha {

namespace {

constexpr double kSecondsPerHour = 3600.0;

std::string prepare_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw Error(ErrorKind::Io, "cannot create output directory '" + out_dir + "'");
  return out_dir;
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void require_model(const RunConfig& config) {
  if (!config.has_model) throw Error(ErrorKind::Config, "this command needs 'model' and 'theta' in the config");
}

std::vector<std::string> pi_columns(std::size_t states) {
  std::vector<std::string> cols;
  for (std::size_t j = 1; j <= states; ++j) cols.push_back("pi_" + std::to_string(j));
  return cols;
}

// Market path in model time (hours) from one day of a price file (seconds).
MarketPath market_from_day(const DayPrices& day, const ModelSpec& model) {
  if (day.t.size() < 2) throw Error(ErrorKind::DataFormat, fmt::format("day {} has fewer than two samples", day.day));
  MarketPath path;
  const std::size_t n = day.t.size() - 1;
  path.t.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) path.t[k] = (day.t[k] - day.t[0]) / kSecondsPerHour;
  path.dt = path.t[1] - path.t[0];
  path.F = day.F;
  path.dN_plus.assign(n, 0);
  path.dN_minus.assign(n, 0);
  if (model.is_jump()) {
    const double b = model.cost.b;
    for (std::size_t k = 0; k < n; ++k) {
      const double ticks = (day.F[k + 1] - day.F[k]) / b;
      const double whole = std::round(ticks);
      if (std::abs(ticks - whole) > 1e-6)
        throw Error(ErrorKind::DataFormat, fmt::format("day {}: price change at step {} is not a multiple of the tick",
                                                       day.day, k));
      const int m = static_cast<int>(whole);
      path.dN_plus[k] = std::max(m, 0);
      path.dN_minus[k] = std::max(-m, 0);
    }
  }
  path.latent = fixed_chain_path(path.t.back(), {}, {0});
  return path;
}

}  // namespace

void cmd_simulate(const RunConfig& config, const std::string& out_dir) {
  require_model(config);
  const std::string dir = prepare_dir(out_dir);
  const StudySummary s = monte_carlo_study(config.study, config.paths, config.seed);
  const std::size_t states = static_cast<std::size_t>(config.study.model.chain.theta.size());

  std::vector<std::vector<std::string>> summary = {
      {"n_paths", std::to_string(s.n_paths)},
      {"seed", std::to_string(config.seed)},
      {"fraction_positive_profit", format_number(s.fraction_positive_profit)},
      {"mean_profit", format_number(s.mean_profit)},
      {"mean_profit_ac", format_number(s.mean_profit_ac)},
      {"fraction_negative_ac", format_number(s.fraction_negative_ac)},
      {"mean_terminal_true_posterior", format_number(s.mean_terminal_true_posterior)},
      {"max_abs_terminal_inventory", format_number(s.max_abs_terminal_inventory)},
  };
  if (s.excess_defined) {
    summary.push_back({"fraction_positive_excess", format_number(s.fraction_positive_excess)});
    summary.push_back({"mean_excess_bps", format_number(s.mean_excess_bps)});
    summary.push_back({"median_excess_bps", format_number(s.median_excess_bps)});
  }
  write_csv(join(dir, "summary.csv"), {"metric", "value"}, summary);

  for (const auto& g : s.grids) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < g.times.size(); ++i)
      for (std::size_t b = 0; b < g.counts[i].size(); ++b)
        rows.push_back({format_number(g.times[i]), format_number(g.edges[b]), format_number(g.edges[b + 1]),
                        std::to_string(g.counts[i][b])});
    write_csv(join(dir, "grid_" + g.name + ".csv"), {"t", "bin_lo", "bin_hi", "count"}, rows);
  }

  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t b = 0; b < s.histogram.counts.size(); ++b)
      rows.push_back({s.histogram.metric, format_number(s.histogram.edges[b]), format_number(s.histogram.edges[b + 1]),
                      std::to_string(s.histogram.counts[b])});
    write_csv(join(dir, "histogram.csv"), {"metric", "bin_lo", "bin_hi", "count"}, rows);
  }

  {
    std::vector<std::string> header = {"t"};
    for (const auto& c : s.curves) {
      header.push_back(c.name + "_mean");
      header.push_back(c.name + "_median");
    }
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < s.slice_times.size(); ++i) {
      std::vector<std::string> row = {format_number(s.slice_times[i])};
      for (const auto& c : s.curves) {
        row.push_back(format_number(c.mean[i]));
        row.push_back(format_number(c.median[i]));
      }
      rows.push_back(std::move(row));
    }
    write_csv(join(dir, "curves.csv"), header, rows);
  }

  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < s.profit.size(); ++i)
      rows.push_back({std::to_string(i), format_number(s.terminal_value[i]), format_number(s.terminal_value_ac[i]),
                      format_number(s.profit[i]),
                      s.excess_defined ? format_number(s.excess_bps[i]) : std::string("nan")});
    write_csv(join(dir, "per_path.csv"), {"path", "X_T", "X_T_ac", "profit", "excess_bps"}, rows);
  }

  {
    std::vector<std::string> header = {"path", "t", "F", "S", "Q", "X", "nu"};
    for (const auto& c : pi_columns(states)) header.push_back(c);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t p = 0; p < s.samples.size(); ++p) {
      const TrajectoryRecord& r = s.samples[p];
      for (std::size_t k = 0; k < r.t.size(); ++k) {
        std::vector<std::string> row = {std::to_string(p), format_number(r.t[k]), format_number(r.F[k]),
                                        format_number(r.S[k]), format_number(r.Q[k]), format_number(r.X[k]),
                                        format_number(r.nu[k])};
        for (Eigen::Index j = 0; j < r.pi.cols(); ++j) row.push_back(format_number(r.pi(static_cast<Eigen::Index>(k), j)));
        rows.push_back(std::move(row));
      }
    }
    write_csv(join(dir, "sample_paths.csv"), header, rows);
  }
}

void cmd_calibrate(const RunConfig& config, const std::string& data_csv, const std::string& out_dir) {
  const std::vector<DayPrices> days = read_price_csv(data_csv);
  const DayPrices& first = days.front();
  if (first.t.size() < 2) throw Error(ErrorKind::DataFormat, "each day needs at least two samples");
  const double dt = first.t[1] - first.t[0];
  std::vector<std::vector<double>> raw;
  for (const auto& d : days) {
    if (d.t.size() != first.t.size()) throw Error(ErrorKind::DataFormat, fmt::format("day {} has a different length", d.day));
    if (std::abs((d.t[1] - d.t[0]) - dt) > 1e-6 * std::max(1.0, dt))
      throw Error(ErrorKind::DataFormat, fmt::format("day {} uses a different sampling interval", d.day));
    raw.push_back(d.F);
  }
  const Dataset data = Dataset::from_prices(std::move(raw), dt, config.tick);
  const std::string dir = prepare_dir(out_dir);

  write_csv(join(dir, "data_report.csv"), {"metric", "value"},
            {{"days", std::to_string(data.path_count())},
             {"steps", std::to_string(data.steps())},
             {"dt", format_number(data.dt)},
             {"tick", format_number(data.tick)},
             {"truncated_increments", std::to_string(data.truncated_increments)}});

  std::vector<std::vector<std::string>> selection;
  for (std::size_t states = config.states_lo; states <= config.states_hi; ++states) {
    const EMFit fit = fit_em(data, initial_guess(data, states), config.em);
    const int n_params = free_parameter_count(states);
    const double b = bic(fit.loglik, n_params, data.steps(), data.path_count());
    const double i = icl(data, fit.params);
    selection.push_back({std::to_string(states), format_number(fit.loglik), std::to_string(n_params), format_number(b),
                         format_number(i), std::to_string(fit.iterations), fit.converged ? "1" : "0",
                         fit.generator_clamped ? "1" : "0"});

    std::vector<std::string> header = {"state", "pi0", "mu", "kappa", "theta"};
    for (std::size_t c = 1; c <= states; ++c) header.push_back("P_" + std::to_string(c));
    for (std::size_t c = 1; c <= states; ++c) header.push_back("C_" + std::to_string(c));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 0; r < states; ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      const EmissionParams& p = fit.params.psi[r];
      std::vector<std::string> row = {std::to_string(r + 1), format_number(fit.params.pi0(ri)), format_number(p.mu),
                                      format_number(p.kappa), format_number(p.theta)};
      for (Eigen::Index c = 0; c < fit.params.P.cols(); ++c) row.push_back(format_number(fit.params.P(ri, c)));
      for (Eigen::Index c = 0; c < fit.generator.cols(); ++c) row.push_back(format_number(fit.generator(ri, c)));
      rows.push_back(std::move(row));
    }
    write_csv(join(dir, fmt::format("params_J{}.csv", states)), header, rows);

    std::vector<std::vector<std::string>> trace;
    for (std::size_t k = 0; k < fit.loglik_trace.size(); ++k)
      trace.push_back({std::to_string(k), format_number(fit.loglik_trace[k])});
    write_csv(join(dir, fmt::format("trace_J{}.csv", states)), {"iteration", "loglik"}, trace);
  }
  write_csv(join(dir, "model_selection.csv"),
            {"states", "loglik", "n_params", "bic", "icl", "iterations", "converged", "generator_clamped"}, selection);
}

void cmd_filter(const RunConfig& config, const std::string& data_csv, const std::string& out_dir) {
  require_model(config);
  const ModelSpec& model = config.study.model;
  const std::vector<DayPrices> days = read_price_csv(data_csv);
  const std::string dir = prepare_dir(out_dir);
  std::vector<std::string> header = {"t"};
  for (const auto& c : pi_columns(static_cast<std::size_t>(model.chain.theta.size()))) header.push_back(c);

  for (const auto& day : days) {
    const MarketPath path = market_from_day(day, model);
    const Matrix pi = posterior_path(path, model, model.chain.prior);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < day.t.size(); ++k) {
      std::vector<std::string> row = {format_number(day.t[k])};
      for (Eigen::Index j = 0; j < pi.cols(); ++j) row.push_back(format_number(pi(static_cast<Eigen::Index>(k), j)));
      rows.push_back(std::move(row));
    }
    const std::string name = days.size() == 1 ? "filter.csv" : fmt::format("filter_day{}.csv", day.day);
    write_csv(join(dir, name), header, rows);
  }
}

void cmd_synthesize(const RunConfig& config, const std::string& out_csv) {
  std::vector<DayPrices> days;
  if (config.synthetic) {
    const SyntheticSpec& s = *config.synthetic;
    const Dataset data = simulate_censored_dataset(s.prior, s.transition, s.psi, s.days, s.steps, 1.0, config.tick,
                                                   s.start_price, config.seed);
    for (std::size_t d = 0; d < data.path_count(); ++d) {
      DayPrices day{static_cast<long>(d), {}, data.paths[d]};
      for (std::size_t k = 0; k < data.steps(); ++k) day.t.push_back(static_cast<double>(k));
      days.push_back(std::move(day));
    }
  } else {
    require_model(config);
    const StudyConfig& st = config.study;
    for (std::size_t d = 0; d < config.paths; ++d) {
      Rng rng = stream_for(config.seed, d);
      const ChainPath latent = st.latent_path ? *st.latent_path : sample_chain_path(st.model.chain, st.model.cost.T, rng);
      const MarketPath m = simulate_market(st.model, latent, st.dt, rng, st.sampling);
      DayPrices day{static_cast<long>(d), {}, m.F};
      for (double t : m.t) day.t.push_back(std::round(t * kSecondsPerHour * 1e6) / 1e6);
      days.push_back(std::move(day));
    }
  }
  const auto parent = std::filesystem::path(out_csv).parent_path();
  if (!parent.empty()) prepare_dir(parent.string());
  write_price_csv(out_csv, days);
}

}  // namespace latentalpha
