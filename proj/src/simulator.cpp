#include "latentalpha/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include "latentalpha/error.hpp"

namespace latentalpha {

namespace {

void check_grid(double T, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::StepSize, "dt must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw Error(ErrorKind::InvalidArgument, "horizon must be positive");
}

std::vector<double> time_grid(std::size_t n, double dt, double T) {
  std::vector<double> t(n + 1);
  for (std::size_t k = 0; k <= n; ++k) t[k] = static_cast<double>(k) * dt;
  t[n] = T;
  return t;
}

void intensities(double theta, double mu, double kappa, double F, double& up, double& down) {
  const double gap = theta - F;
  up = mu + kappa * std::max(gap, 0.0);
  down = mu + kappa * std::max(-gap, 0.0);
}

// Per-step pieces of the optimal control: speed = ac[k] Q + h1_k / (2a).
struct ControlTable {
  std::vector<double> ac;
  std::vector<double> ou_discount;
  std::vector<JumpH1Coefficients> jump;
};

ControlTable control_table(const ModelSpec& model, const std::vector<double>& t, bool with_h1) {
  const std::size_t n = t.size() - 1;
  ControlTable table;
  table.ac.resize(n);
  for (std::size_t k = 0; k < n; ++k) table.ac[k] = ac_speed(t[k], 1.0, model.cost);
  if (!with_h1) return table;
  if (const auto* ou = std::get_if<OuModel>(&model.dynamics)) {
    table.ou_discount.resize(n);
    for (std::size_t k = 0; k < n; ++k) table.ou_discount[k] = weighted_exp_integral(t[k], -ou->kappa, model.cost);
  } else {
    const double kappa = std::get<JumpModel>(model.dynamics).kappa;
    table.jump.reserve(n);
    for (std::size_t k = 0; k < n; ++k) table.jump.push_back(jump_h1_coefficients(t[k], model.chain, kappa, model.cost));
  }
  return table;
}

double table_h1(const ControlTable& table, const ModelSpec& model, std::size_t k, double F, const Vector& pi) {
  if (!table.jump.empty()) return table.jump[k].evaluate(F, pi);
  const double kappa = std::get<OuModel>(model.dynamics).kappa;
  return kappa * (pi.dot(model.chain.theta) - F) * table.ou_discount[k];
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<double> bin_edges(double lo, double hi, std::size_t bins) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<double> edges(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  edges[bins] = hi;
  return edges;
}

std::size_t bin_index(const std::vector<double>& edges, double v) {
  const std::size_t bins = edges.size() - 1;
  if (v >= edges[bins]) return bins - 1;
  if (v <= edges[0]) return 0;
  const auto it = std::upper_bound(edges.begin(), edges.end(), v);
  return std::min(bins - 1, static_cast<std::size_t>(it - edges.begin()) - 1);
}

LatentChainSpec pinned_chain(const LatentChainSpec& chain, int state) {
  LatentChainSpec pinned = chain;
  pinned.prior = Vector::Zero(chain.theta.size());
  pinned.prior(state) = 1.0;
  return pinned;
}

}  // namespace

std::size_t grid_steps(double T, double dt) {
  check_grid(T, dt);
  const double ratio = T / dt;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
    throw Error(ErrorKind::StepSize, "horizon must be an integer multiple of dt");
  return static_cast<std::size_t>(n);
}

MarketPath simulate_ou_path(double theta_true, double kappa, double sigma, double F0, double T, double dt, Rng& rng) {
  return simulate_ou_path(fixed_chain_path(T, {}, {0}), Vector::Constant(1, theta_true), kappa, sigma, F0, T, dt, rng);
}

MarketPath simulate_ou_path(const ChainPath& latent, const Vector& theta, double kappa, double sigma, double F0,
                            double T, double dt, Rng& rng) {
  if (sigma < 0.0 || kappa < 0.0) throw Error(ErrorKind::InvalidArgument, "OU path needs sigma >= 0, kappa >= 0");
  const std::size_t n = grid_steps(T, dt);
  MarketPath path;
  path.dt = dt;
  path.t = time_grid(n, dt, T);
  path.F.resize(n + 1);
  path.dN_plus.assign(n, 0);
  path.dN_minus.assign(n, 0);
  path.latent = latent;
  path.F[0] = F0;
  std::normal_distribution<double> normal(0.0, 1.0);
  const double vol = sigma * std::sqrt(dt);
  for (std::size_t k = 0; k < n; ++k) {
    const double level = theta(state_at(latent, path.t[k]));
    path.F[k + 1] = path.F[k] + kappa * (level - path.F[k]) * dt + vol * normal(rng);
  }
  return path;
}

MarketPath simulate_jump_path(const ChainPath& latent, const Vector& theta, double mu, double kappa, double b,
                              double F0, double T, double dt, Rng& rng, JumpSampling sampling) {
  if (!(mu > 0.0) || kappa < 0.0 || !(b > 0.0))
    throw Error(ErrorKind::InvalidArgument, "jump path needs mu > 0, kappa >= 0, b > 0");
  const std::size_t n = grid_steps(T, dt);
  MarketPath path;
  path.dt = dt;
  path.t = time_grid(n, dt, T);
  path.F.resize(n + 1);
  path.dN_plus.assign(n, 0);
  path.dN_minus.assign(n, 0);
  path.latent = latent;
  path.F[0] = F0;

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  long level = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t0 = path.t[k];
    const double t1 = path.t[k + 1];
    int state = state_at(latent, t0);
    double up = 0.0, down = 0.0;
    intensities(theta(state), mu, kappa, F0 + static_cast<double>(level) * b, up, down);
    const double step = t1 - t0;
    const bool exact = sampling == JumpSampling::Exact ||
                       (sampling == JumpSampling::Auto && std::max(up, down) * step >= 0.1);
    if (!exact) {
      if (up * step >= 1.0 || down * step >= 1.0)
        throw Error(ErrorKind::StepSize, "lambda dt >= 1 under Bernoulli sampling");
      const bool jump_up = unif(rng) < up * step;
      const bool jump_down = unif(rng) < down * step;
      path.dN_plus[k] = jump_up ? 1 : 0;
      path.dN_minus[k] = jump_down ? 1 : 0;
      level += path.dN_plus[k] - path.dN_minus[k];
    } else {
      // Intensities are constant between order arrivals and latent switches.
      double s = t0;
      while (true) {
        const auto next_switch = std::upper_bound(latent.jump_times.begin(), latent.jump_times.end(), s);
        const double boundary = (next_switch != latent.jump_times.end() && *next_switch < t1) ? *next_switch : t1;
        intensities(theta(state), mu, kappa, F0 + static_cast<double>(level) * b, up, down);
        const double rate = up + down;
        const double wait = std::exponential_distribution<double>(rate)(rng);
        if (s + wait < boundary) {
          s += wait;
          if (unif(rng) * rate < up) {
            ++path.dN_plus[k];
            ++level;
          } else {
            ++path.dN_minus[k];
            --level;
          }
          continue;
        }
        if (boundary >= t1) break;
        s = boundary;
        state = state_at(latent, s);
      }
    }
    path.F[k + 1] = F0 + static_cast<double>(level) * b;
  }
  return path;
}

MarketPath simulate_market(const ModelSpec& model, const ChainPath& latent, double dt, Rng& rng,
                           JumpSampling sampling) {
  if (const auto* ou = std::get_if<OuModel>(&model.dynamics))
    return simulate_ou_path(latent, model.chain.theta, ou->kappa, ou->sigma, model.F0, model.cost.T, dt, rng);
  const auto& jm = std::get<JumpModel>(model.dynamics);
  return simulate_jump_path(latent, model.chain.theta, jm.mu, jm.kappa, model.cost.b, model.F0, model.cost.T, dt,
                            rng, sampling);
}

Matrix posterior_path(const MarketPath& path, const ModelSpec& model, const Vector& prior) {
  const std::size_t n = path.steps();
  const Eigen::Index j = model.chain.theta.size();
  Matrix pi(static_cast<Eigen::Index>(n + 1), j);
  FilterState state = FilterState::from_prior(prior, path.t.front());
  pi.row(0) = normalize(state).transpose();

  const auto* ou = std::get_if<OuModel>(&model.dynamics);
  const bool frozen = model.chain.generator.cwiseAbs().maxCoeff() == 0.0;
  StepCoefficients coeffs;
  if (ou && !frozen) {
    coeffs.lambda_plus = Vector::Ones(j);
    coeffs.lambda_minus = Vector::Ones(j);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double dt = path.t[k + 1] - path.t[k];
    if (ou && frozen) {
      state = ou_filter_update(state, model.chain.theta, ou->kappa, ou->sigma, path.F[k], path.F[k + 1], dt);
    } else if (ou) {
      coeffs.drift = ou->kappa * (model.chain.theta.array() - path.F[k]).matrix();
      const ObservationStep obs{dt, path.F[k + 1] - path.F[k], 0, 0};
      state = generic_filter_step(state, obs, coeffs, 0.0, ou->sigma, model.chain.generator);
    } else {
      const auto& jm = std::get<JumpModel>(model.dynamics);
      const ObservationStep obs{dt, path.F[k + 1] - path.F[k], path.dN_plus[k], path.dN_minus[k]};
      state = jump_filter_step(state, obs, jm.mu, jm.kappa, path.F[k], model.chain);
    }
    pi.row(static_cast<Eigen::Index>(k + 1)) = normalize(state).transpose();
  }
  return pi;
}

TrajectoryRecord run_strategy(const MarketPath& path, const CostParams& cost, const Strategy& strategy,
                              const Matrix& posterior) {
  cost.validate();
  const std::size_t n = path.steps();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "market path has no steps");
  if (static_cast<std::size_t>(posterior.rows()) != n + 1)
    throw Error(ErrorKind::InvalidArgument, "posterior must have one row per grid point");

  TrajectoryRecord rec;
  for (auto* v : {&rec.t, &rec.F, &rec.S, &rec.Q, &rec.X, &rec.nu}) v->resize(n + 1);
  rec.pi = posterior;

  TraderState st;
  st.Q = cost.N_init;
  for (std::size_t k = 0; k <= n; ++k) {
    st.t = path.t[k];
    st.F = path.F[k];
    rec.t[k] = st.t;
    rec.F[k] = st.F;
    rec.S[k] = st.S(cost.beta, cost.N_init);
    rec.Q[k] = st.Q;
    rec.X[k] = st.X;
    if (k == n) break;

    const double dt = path.t[k + 1] - path.t[k];
    double nu = 0.0;
    if (cost.alpha_infinite && k + 1 == n) {
      nu = -st.Q / dt;
    } else {
      const Vector pi = posterior.row(static_cast<Eigen::Index>(k)).transpose();
      nu = strategy(k, st, pi);
    }
    if (!std::isfinite(nu)) throw Error(ErrorKind::SimulationDiverged, "non-finite trading rate at step " + std::to_string(k));
    rec.nu[k] = nu;
    st.X -= nu * (rec.S[k] + cost.a * nu) * dt;
    st.Q += nu * dt;
    st.N_plus += path.dN_plus[k];
    st.N_minus += path.dN_minus[k];
    if (!std::isfinite(st.X) || !std::isfinite(st.Q))
      throw Error(ErrorKind::SimulationDiverged, "cash or inventory diverged at step " + std::to_string(k));
  }
  rec.nu[n] = 0.0;
  rec.Q_T = st.Q;
  const double penalty = cost.alpha_infinite ? 0.0 : cost.alpha;
  rec.liquidation_price = rec.S[n] - penalty * st.Q;
  rec.terminal_value = st.X + st.Q * rec.liquidation_price;
  return rec;
}

Strategy make_optimal_strategy(const ModelSpec& model, double dt) {
  model.validate();
  const std::size_t n = grid_steps(model.cost.T, dt);
  const std::vector<double> t = time_grid(n, dt, model.cost.T);
  auto table = std::make_shared<const ControlTable>(control_table(model, t, true));
  auto spec = std::make_shared<const ModelSpec>(model);
  return [table, spec](std::size_t k, const TraderState& st, const Vector& pi) {
    if (k >= table->ac.size()) throw Error(ErrorKind::InvalidArgument, "step index outside the control grid");
    return table->ac[k] * st.Q + table_h1(*table, *spec, k, st.F, pi) / (2.0 * spec->cost.a);
  };
}

Strategy make_ac_strategy(const CostParams& cost, double dt) {
  cost.validate();
  const std::size_t n = grid_steps(cost.T, dt);
  auto gains = std::make_shared<std::vector<double>>(n);
  for (std::size_t k = 0; k < n; ++k) (*gains)[k] = ac_speed(static_cast<double>(k) * dt, 1.0, cost);
  return [gains](std::size_t k, const TraderState& st, const Vector&) {
    if (k >= gains->size()) throw Error(ErrorKind::InvalidArgument, "step index outside the control grid");
    return (*gains)[k] * st.Q;
  };
}

Strategy make_twap_strategy(const CostParams& cost, double dt) {
  cost.validate();
  const double T = cost.T;
  grid_steps(T, dt);
  return [T](std::size_t, const TraderState& st, const Vector&) { return twap_speed(st.t, st.Q, T); };
}

double excess_return(const TrajectoryRecord& star, const TrajectoryRecord& ac) {
  if (ac.terminal_value == 0.0) throw Error(ErrorKind::UndefinedBaseline, "baseline terminal cash is zero");
  return (star.terminal_value - ac.terminal_value) / std::abs(ac.terminal_value) * 1e4;
}

StudySummary monte_carlo_study(const StudyConfig& config, std::size_t n_paths, std::uint64_t seed) {
  const ModelSpec& model = config.model;
  model.validate();
  if (n_paths < 1) throw Error(ErrorKind::InvalidArgument, "need at least one path");
  if (config.time_slices < 2 || config.value_bins < 1 || config.histogram_bins < 1)
    throw Error(ErrorKind::InvalidArgument, "grid sizes must be positive");
  const std::size_t n = grid_steps(model.cost.T, config.dt);
  const Strategy optimal = make_optimal_strategy(model, config.dt);
  const Strategy ac = make_ac_strategy(model.cost, config.dt);

  StudySummary out;
  out.n_paths = n_paths;
  out.excess_defined = model.cost.N_init != 0.0;

  std::vector<std::size_t> slice_index(config.time_slices);
  for (std::size_t s = 0; s < config.time_slices; ++s) {
    slice_index[s] = static_cast<std::size_t>(
        std::llround(static_cast<double>(s) * static_cast<double>(n) / static_cast<double>(config.time_slices - 1)));
    out.slice_times.push_back(static_cast<double>(slice_index[s]) * config.dt);
  }
  out.slice_times.back() = model.cost.T;

  const auto j = static_cast<std::size_t>(model.chain.theta.size());
  std::vector<std::string> names = {"nu", "Q", "nu_ac", "Q_ac", "F"};
  for (std::size_t s = 0; s < j; ++s) names.push_back("pi_" + std::to_string(s + 1));
  // values[quantity][slice][path]
  std::vector<std::vector<std::vector<double>>> values(
      names.size(), std::vector<std::vector<double>>(config.time_slices, std::vector<double>(n_paths)));

  double true_posterior = 0.0;
  std::size_t positive_excess = 0, positive_profit = 0, negative_ac = 0;
  double profit_ac_sum = 0.0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    Rng rng = stream_for(seed, i);
    const ChainPath latent =
        config.latent_path ? *config.latent_path : sample_chain_path(model.chain, model.cost.T, rng);
    const MarketPath market = simulate_market(model, latent, config.dt, rng, config.sampling);
    const Matrix pi = posterior_path(market, model, model.chain.prior);
    TrajectoryRecord star = run_strategy(market, model.cost, optimal, pi);
    TrajectoryRecord base = run_strategy(market, model.cost, ac, pi);

    const double profit = star.terminal_value - model.cost.N_init * model.F0;
    out.profit.push_back(profit);
    profit_ac_sum += base.terminal_value - model.cost.N_init * model.F0;
    if (profit > 0.0) ++positive_profit;
    out.terminal_value.push_back(star.terminal_value);
    out.terminal_value_ac.push_back(base.terminal_value);
    if (base.terminal_value < 0.0) ++negative_ac;
    if (out.excess_defined) {
      const double ex = excess_return(star, base);
      out.excess_bps.push_back(ex);
      if (ex > 0.0) ++positive_excess;
    }
    true_posterior += pi(static_cast<Eigen::Index>(n), state_at(latent, model.cost.T));
    out.max_abs_terminal_inventory = std::max(out.max_abs_terminal_inventory, std::abs(star.Q_T));

    for (std::size_t s = 0; s < config.time_slices; ++s) {
      const std::size_t k = slice_index[s];
      values[0][s][i] = star.nu[std::min(k, n - 1)];
      values[1][s][i] = star.Q[k];
      values[2][s][i] = base.nu[std::min(k, n - 1)];
      values[3][s][i] = base.Q[k];
      values[4][s][i] = market.F[k];
      for (std::size_t q = 0; q < j; ++q) values[5 + q][s][i] = pi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(q));
    }
    if (out.samples.size() < config.sample_paths) out.samples.push_back(std::move(star));
  }

  const auto count = static_cast<double>(n_paths);
  out.fraction_positive_profit = static_cast<double>(positive_profit) / count;
  out.mean_profit = std::accumulate(out.profit.begin(), out.profit.end(), 0.0) / count;
  out.mean_profit_ac = profit_ac_sum / count;
  out.fraction_negative_ac = static_cast<double>(negative_ac) / count;
  out.mean_terminal_true_posterior = true_posterior / count;
  if (out.excess_defined) {
    out.fraction_positive_excess = static_cast<double>(positive_excess) / count;
    out.mean_excess_bps = std::accumulate(out.excess_bps.begin(), out.excess_bps.end(), 0.0) / count;
    out.median_excess_bps = median_of(out.excess_bps);
  }

  const std::vector<double>& hist_values = out.excess_defined ? out.excess_bps : out.profit;
  out.histogram.metric = out.excess_defined ? "excess_bps" : "profit";
  const auto [hmin, hmax] = std::minmax_element(hist_values.begin(), hist_values.end());
  out.histogram.edges = bin_edges(*hmin, *hmax, config.histogram_bins);
  out.histogram.counts.assign(config.histogram_bins, 0);
  for (double v : hist_values) ++out.histogram.counts[bin_index(out.histogram.edges, v)];

  for (std::size_t q = 0; q < names.size(); ++q) {
    double lo = values[q][0][0], hi = lo;
    for (const auto& slice : values[q])
      for (double v : slice) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    OccupancyGrid grid;
    grid.name = names[q];
    grid.times = out.slice_times;
    grid.edges = bin_edges(lo, hi, config.value_bins);
    grid.counts.assign(config.time_slices, std::vector<std::size_t>(config.value_bins, 0));
    Curve curve;
    curve.name = names[q];
    for (std::size_t s = 0; s < config.time_slices; ++s) {
      for (double v : values[q][s]) ++grid.counts[s][bin_index(grid.edges, v)];
      curve.mean.push_back(std::accumulate(values[q][s].begin(), values[q][s].end(), 0.0) / count);
      curve.median.push_back(median_of(values[q][s]));
    }
    out.grids.push_back(std::move(grid));
    out.curves.push_back(std::move(curve));
  }
  return out;
}

MonteCarloEstimate h0_estimate(double t, double F, const Vector& pi, const ModelSpec& model, double dt,
                               std::size_t n_paths, std::uint64_t seed) {
  model.validate();
  if (n_paths < 1) throw Error(ErrorKind::InvalidArgument, "need at least one path");
  if (pi.size() != model.chain.theta.size()) throw Error(ErrorKind::InvalidArgument, "pi size must equal J");
  if (t < 0.0 || t >= model.cost.T) throw Error(ErrorKind::InvalidArgument, "t must lie in [0, T)");
  const double tau = model.cost.T - t;
  const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(tau / dt)));
  const double step = tau / static_cast<double>(m);

  ModelSpec local = model;
  local.F0 = F;
  local.cost.T = tau;
  std::vector<double> grid(m + 1);
  for (std::size_t k = 0; k <= m; ++k) grid[k] = t + static_cast<double>(k) * step;
  grid[m] = model.cost.T;
  const ControlTable table = control_table(model, grid, true);

  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    Rng rng = stream_for(seed, i);
    std::discrete_distribution<int> draw(pi.data(), pi.data() + pi.size());
    const int z = draw(rng);
    const ChainPath latent = sample_chain_path(pinned_chain(model.chain, z), tau, rng);
    const MarketPath market = simulate_market(local, latent, step, rng);
    const Matrix post = posterior_path(market, local, pi);
    double integral = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const Vector pk = post.row(static_cast<Eigen::Index>(k)).transpose();
      const double h = table_h1(table, model, k, market.F[k], pk);
      integral += h * h * step;
    }
    const double sample = integral / (4.0 * model.cost.a);
    sum += sample;
    sum_sq += sample * sample;
  }
  MonteCarloEstimate est;
  est.samples = n_paths;
  est.mean = sum / static_cast<double>(n_paths);
  if (n_paths > 1) {
    const double var = std::max(0.0, (sum_sq - sum * est.mean) / static_cast<double>(n_paths - 1));
    est.std_error = std::sqrt(var / static_cast<double>(n_paths));
  }
  return est;
}

}  // namespace latentalpha
