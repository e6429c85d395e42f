#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "latentalpha/control.hpp"
#include "latentalpha/error.hpp"
#include "latentalpha/simulator.hpp"

using namespace latentalpha;

namespace {

CostParams ou_cost() {
  CostParams c;
  c.a = 1e-5;
  c.beta = 1e-3;
  c.phi = 2e-5;
  c.alpha_infinite = true;
  c.T = 1.0;
  c.N_init = 1e4;
  return c;
}

ModelSpec ou_model() {
  ModelSpec m;
  m.dynamics = OuModel{2.0, 0.15};
  m.chain.theta = Vector(2);
  m.chain.theta << 4.85, 5.15;
  m.chain.generator = Matrix::Zero(2, 2);
  m.chain.prior = Vector::Constant(2, 0.5);
  m.cost = ou_cost();
  m.F0 = 5.0;
  return m;
}

ModelSpec jump_model() {
  ModelSpec m;
  m.dynamics = JumpModel{481.0, 1077.0};
  m.chain.theta = Vector(2);
  m.chain.theta << 4.9, 5.1;
  m.chain.generator.resize(2, 2);
  m.chain.generator << -10, 10, 10, -10;
  m.chain.prior = Vector::Constant(2, 0.5);
  m.cost = ou_cost();
  m.cost.b = 0.01;
  m.cost.phi = 3e-6;
  m.cost.N_init = 0.0;
  m.F0 = 5.0;
  return m;
}

MarketPath flat_path(double F, double T, double dt) {
  Rng rng(1);
  return simulate_ou_path(F, 1.0, 0.0, F, T, dt, rng);
}

Matrix flat_posterior(std::size_t rows, Eigen::Index j) {
  return Matrix::Constant(static_cast<Eigen::Index>(rows), j, 1.0 / static_cast<double>(j));
}

Strategy constant_rate(double nu) {
  return [nu](std::size_t, const TraderState&, const Vector&) { return nu; };
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST(GridSteps, IntegerRatiosOnly) {
  EXPECT_EQ(grid_steps(1.0, 1.0 / 3600.0), 3600u);
  EXPECT_EQ(grid_steps(2.0, 0.5), 4u);
  try {
    grid_steps(1.0, 0.3);
    FAIL() << "expected a step-size error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::StepSize);
  }
  EXPECT_THROW(grid_steps(1.0, 0.0), Error);
  EXPECT_THROW(grid_steps(1.0, -0.1), Error);
  EXPECT_THROW(grid_steps(1.0, 2.0), Error);
}

TEST(OuPath, NoNoiseAtTargetStaysFlat) {
  const MarketPath p = flat_path(5.0, 1.0, 0.01);
  ASSERT_EQ(p.F.size(), 101u);
  for (double f : p.F) EXPECT_EQ(f, 5.0);
  EXPECT_DOUBLE_EQ(p.t.back(), 1.0);
}

TEST(OuPath, NoNoiseDecaysGeometrically) {
  Rng rng(3);
  const double dt = 0.01, kappa = 2.0;
  const MarketPath p = simulate_ou_path(5.15, kappa, 0.0, 5.0, 1.0, dt, rng);
  for (std::size_t k = 0; k < p.F.size(); ++k)
    EXPECT_NEAR(p.F[k], 5.15 - 0.15 * std::pow(1.0 - kappa * dt, static_cast<double>(k)), 1e-13);
}

TEST(OuPath, TerminalMomentsMatchTheEulerRecursion) {
  const double dt = 0.01, kappa = 2.0, sigma = 0.15, theta = 5.15, F0 = 5.0;
  const std::size_t n = 100, paths = 10000;
  std::vector<double> terminal;
  for (std::size_t i = 0; i < paths; ++i) {
    Rng rng = stream_for(77, i);
    terminal.push_back(simulate_ou_path(theta, kappa, sigma, F0, 1.0, dt, rng).F.back());
  }
  const double r = 1.0 - kappa * dt;
  const double want_mean = theta + (F0 - theta) * std::pow(r, static_cast<double>(n));
  double want_var = 0.0;
  for (std::size_t k = 0; k < n; ++k) want_var += sigma * sigma * dt * std::pow(r, 2.0 * static_cast<double>(k));
  const double se = std::sqrt(want_var / static_cast<double>(paths));
  EXPECT_NEAR(mean(terminal), want_mean, 4.0 * se);
  // Sample variance has relative standard error sqrt(2 / (n - 1)) for normal data.
  EXPECT_NEAR(variance(terminal) / want_var, 1.0, 4.0 * std::sqrt(2.0 / paths));
}

TEST(OuPath, FollowsTheLatentPath) {
  Rng rng(5);
  Vector theta(2);
  theta << 4.0, 6.0;
  const ChainPath latent = fixed_chain_path(1.0, {0.5}, {0, 1});
  const MarketPath p = simulate_ou_path(latent, theta, 50.0, 0.0, 4.0, 1.0, 0.001, rng);
  EXPECT_NEAR(p.F[500], 4.0, 1e-12);
  EXPECT_NEAR(p.F.back(), 6.0, 1e-9);
}

TEST(JumpPath, PriceMovesByWholeTicks) {
  const ModelSpec m = jump_model();
  Rng rng(11);
  const ChainPath latent = sample_chain_path(m.chain, 1.0, rng);
  const MarketPath p = simulate_market(m, latent, 1.0 / 3600.0, rng);
  ASSERT_EQ(p.dN_plus.size(), p.steps());
  for (std::size_t k = 0; k < p.steps(); ++k) {
    EXPECT_GE(p.dN_plus[k], 0);
    EXPECT_GE(p.dN_minus[k], 0);
    EXPECT_NEAR(p.F[k + 1] - p.F[k], 0.01 * (p.dN_plus[k] - p.dN_minus[k]), 1e-12);
  }
}

TEST(JumpPath, NoMeanReversionGivesPoissonCounts) {
  const double mu = 20.0, T = 1.0;
  const std::size_t paths = 4000;
  Vector theta = Vector::Constant(1, 5.0);
  const ChainPath latent = fixed_chain_path(T, {}, {0});
  for (JumpSampling mode : {JumpSampling::Exact, JumpSampling::Bernoulli}) {
    std::vector<double> up, down;
    for (std::size_t i = 0; i < paths; ++i) {
      Rng rng = stream_for(13, i);
      const MarketPath p = simulate_jump_path(latent, theta, mu, 0.0, 0.01, 5.0, T, 1e-3, rng, mode);
      up.push_back(std::accumulate(p.dN_plus.begin(), p.dN_plus.end(), 0.0));
      down.push_back(std::accumulate(p.dN_minus.begin(), p.dN_minus.end(), 0.0));
    }
    const double se = std::sqrt(mu * T / static_cast<double>(paths));
    EXPECT_NEAR(mean(up), mu * T, 4.0 * se);
    EXPECT_NEAR(mean(down), mu * T, 4.0 * se);
    // Bernoulli thinning lowers the variance by a factor (1 - mu dt).
    EXPECT_NEAR(variance(up) / (mu * T), 1.0, 0.1);
  }
}

TEST(JumpPath, StrongReversionPullsPriceToTheLevel) {
  Vector theta = Vector::Constant(1, 5.2);
  const ChainPath latent = fixed_chain_path(1.0, {}, {0});
  std::vector<double> terminal;
  for (std::size_t i = 0; i < 500; ++i) {
    Rng rng = stream_for(17, i);
    terminal.push_back(simulate_jump_path(latent, theta, 5.0, 5000.0, 0.01, 5.0, 1.0, 1e-3, rng).F.back());
  }
  EXPECT_NEAR(mean(terminal), 5.2, 0.01);
}

TEST(JumpPath, BernoulliRejectsLargeIntensitySteps) {
  Vector theta = Vector::Constant(1, 5.0);
  const ChainPath latent = fixed_chain_path(1.0, {}, {0});
  Rng rng(1);
  try {
    simulate_jump_path(latent, theta, 200.0, 0.0, 0.01, 5.0, 1.0, 0.01, rng, JumpSampling::Bernoulli);
    FAIL() << "expected a step-size error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::StepSize);
  }
}

TEST(PosteriorPath, RowsAreProbabilityVectors) {
  for (const ModelSpec& m : {ou_model(), jump_model()}) {
    Rng rng(19);
    const ChainPath latent = sample_chain_path(m.chain, 1.0, rng);
    const MarketPath p = simulate_market(m, latent, 1.0 / 3600.0, rng);
    const Matrix pi = posterior_path(p, m, m.chain.prior);
    ASSERT_EQ(static_cast<std::size_t>(pi.rows()), p.F.size());
    EXPECT_NEAR((pi.row(0) - m.chain.prior.transpose()).cwiseAbs().maxCoeff(), 0.0, 1e-15);
    for (Eigen::Index k = 0; k < pi.rows(); ++k) {
      EXPECT_NEAR(pi.row(k).sum(), 1.0, 1e-12);
      EXPECT_GE(pi.row(k).minCoeff(), 0.0);
    }
  }
}

TEST(RunStrategy, HoldingPaysTerminalPenalty) {
  CostParams c = ou_cost();
  c.alpha_infinite = false;
  c.alpha = 0.01;
  const MarketPath p = flat_path(5.0, 1.0, 0.01);
  const TrajectoryRecord r = run_strategy(p, c, constant_rate(0.0), flat_posterior(p.F.size(), 2));
  EXPECT_EQ(r.Q_T, c.N_init);
  for (double x : r.X) EXPECT_EQ(x, 0.0);
  EXPECT_DOUBLE_EQ(r.liquidation_price, 5.0 - 0.01 * c.N_init);
  EXPECT_DOUBLE_EQ(r.terminal_value, c.N_init * (5.0 - 0.01 * c.N_init));
}

TEST(RunStrategy, FrictionlessTwapRecoversInitialValue) {
  CostParams c = ou_cost();
  c.a = 1e-12;
  c.beta = 0.0;
  c.phi = 0.0;
  const double dt = 1e-3;
  const MarketPath p = flat_path(5.0, 1.0, dt);
  const TrajectoryRecord r = run_strategy(p, c, make_twap_strategy(c, dt), flat_posterior(p.F.size(), 2));
  EXPECT_NEAR(r.Q_T, 0.0, 1e-9);
  // Temporary cost is a N^2 / T = 1e-4.
  EXPECT_NEAR(r.terminal_value, c.N_init * 5.0, 2e-4);
  for (std::size_t k = 0; k + 1 < r.Q.size(); ++k)
    EXPECT_NEAR(r.Q[k], c.N_init * (1.0 - r.t[k]), 1e-6);
}

TEST(RunStrategy, CashAndInventoryFollowTheTradingRate) {
  const ModelSpec m = ou_model();
  Rng rng(23);
  const double dt = 1.0 / 3600.0;
  const MarketPath p = simulate_market(m, fixed_chain_path(1.0, {}, {1}), dt, rng);
  const Matrix pi = posterior_path(p, m, m.chain.prior);
  const TrajectoryRecord r = run_strategy(p, m.cost, make_optimal_strategy(m, dt), pi);
  for (std::size_t k = 0; k + 1 < r.t.size(); ++k) {
    const double step = r.t[k + 1] - r.t[k];
    EXPECT_NEAR(r.Q[k + 1] - r.Q[k], r.nu[k] * step, 1e-9);
    EXPECT_NEAR(r.X[k + 1] - r.X[k], -r.nu[k] * (r.S[k] + m.cost.a * r.nu[k]) * step, 1e-7);
    EXPECT_DOUBLE_EQ(r.S[k], r.F[k] + m.cost.beta * (r.Q[k] - m.cost.N_init));
  }
  EXPECT_LE(std::abs(r.Q_T), 1e-6 * m.cost.N_init);
  EXPECT_DOUBLE_EQ(r.terminal_value, r.X.back() + r.Q_T * r.S.back());
}

TEST(RunStrategy, AcInventoryTracksSinhProfile) {
  const CostParams c = ou_cost();
  const double dt = 1e-4;
  const MarketPath p = flat_path(5.0, 1.0, dt);
  const TrajectoryRecord r = run_strategy(p, c, make_ac_strategy(c, dt), flat_posterior(p.F.size(), 2));
  const double gamma = std::sqrt(c.phi / c.a);
  for (std::size_t k = 0; k < r.t.size(); k += 500) {
    if (r.t[k] > 0.95) break;
    const double want = c.N_init * std::sinh(gamma * (c.T - r.t[k])) / std::sinh(gamma * c.T);
    EXPECT_NEAR(r.Q[k], want, 1e-3 * c.N_init) << "t=" << r.t[k];
  }
  EXPECT_NEAR(r.Q_T, 0.0, 1e-9);
}

TEST(RunStrategy, RejectsMismatchedPosterior) {
  const MarketPath p = flat_path(5.0, 1.0, 0.1);
  EXPECT_THROW(run_strategy(p, ou_cost(), constant_rate(0.0), flat_posterior(5, 2)), Error);
}

TEST(RunStrategy, DivergenceIsReported) {
  const MarketPath p = flat_path(5.0, 1.0, 0.1);
  try {
    run_strategy(p, ou_cost(), constant_rate(std::nan("")), flat_posterior(p.F.size(), 2));
    FAIL() << "expected a divergence error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SimulationDiverged);
  }
}

TEST(OptimalStrategy, EqualLevelsAtTheLevelReduceToAc) {
  ModelSpec m = ou_model();
  m.chain.theta << 5.0, 5.0;
  const double dt = 1.0 / 3600.0;
  const MarketPath p = flat_path(5.0, 1.0, dt);
  const Matrix pi = flat_posterior(p.F.size(), 2);
  const TrajectoryRecord star = run_strategy(p, m.cost, make_optimal_strategy(m, dt), pi);
  const TrajectoryRecord ac = run_strategy(p, m.cost, make_ac_strategy(m.cost, dt), pi);
  for (std::size_t k = 0; k < star.nu.size(); ++k) EXPECT_NEAR(star.nu[k], ac.nu[k], 1e-9 * std::abs(ac.nu[k]) + 1e-9);
  EXPECT_NEAR(excess_return(star, ac), 0.0, 1e-9);
}

TEST(ExcessReturn, BasisPointsAgainstBaseline) {
  TrajectoryRecord star, ac;
  ac.terminal_value = 5e4;
  star.terminal_value = 5e4;
  EXPECT_EQ(excess_return(star, ac), 0.0);
  star.terminal_value = 1.01 * 5e4;
  EXPECT_NEAR(excess_return(star, ac), 100.0, 1e-9);
  star.terminal_value = 0.99 * 5e4;
  EXPECT_NEAR(excess_return(star, ac), -100.0, 1e-9);
}

TEST(ExcessReturn, SignFollowsOutperformanceForNegativeBaseline) {
  TrajectoryRecord star, ac;
  ac.terminal_value = -100.0;
  star.terminal_value = -90.0;
  EXPECT_NEAR(excess_return(star, ac), 1000.0, 1e-9);
  star.terminal_value = -110.0;
  EXPECT_NEAR(excess_return(star, ac), -1000.0, 1e-9);
}

TEST(ExcessReturn, ZeroBaselineIsUndefined) {
  TrajectoryRecord star, ac;
  star.terminal_value = 1.0;
  try {
    excess_return(star, ac);
    FAIL() << "expected an undefined-baseline error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UndefinedBaseline);
  }
}

TEST(Study, DeterministicForASeed) {
  StudyConfig cfg;
  cfg.model = ou_model();
  cfg.dt = 1.0 / 360.0;
  const StudySummary a = monte_carlo_study(cfg, 40, 99);
  const StudySummary b = monte_carlo_study(cfg, 40, 99);
  const StudySummary c = monte_carlo_study(cfg, 40, 100);
  EXPECT_EQ(a.terminal_value, b.terminal_value);
  EXPECT_EQ(a.excess_bps, b.excess_bps);
  EXPECT_NE(a.terminal_value, c.terminal_value);
}

TEST(Study, PrefixOfPathsIsStable) {
  StudyConfig cfg;
  cfg.model = jump_model();
  cfg.dt = 1.0 / 360.0;
  const StudySummary small = monte_carlo_study(cfg, 5, 7);
  const StudySummary large = monte_carlo_study(cfg, 20, 7);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(small.profit[i], large.profit[i]);
}

TEST(Study, GridsHoldEveryPathInEverySlice) {
  StudyConfig cfg;
  cfg.model = ou_model();
  cfg.dt = 1.0 / 360.0;
  cfg.time_slices = 11;
  cfg.value_bins = 7;
  for (std::size_t n : {1u, 30u}) {
    const StudySummary s = monte_carlo_study(cfg, n, 3);
    ASSERT_EQ(s.grids.size(), 7u);  // nu, Q, nu_ac, Q_ac, F, pi_1, pi_2
    for (const auto& g : s.grids) {
      ASSERT_EQ(g.counts.size(), 11u);
      ASSERT_EQ(g.edges.size(), 8u);
      for (const auto& row : g.counts) EXPECT_EQ(std::accumulate(row.begin(), row.end(), std::size_t{0}), n);
    }
    EXPECT_EQ(std::accumulate(s.histogram.counts.begin(), s.histogram.counts.end(), std::size_t{0}), n);
    EXPECT_DOUBLE_EQ(s.slice_times.front(), 0.0);
    EXPECT_DOUBLE_EQ(s.slice_times.back(), 1.0);
    EXPECT_LE(s.max_abs_terminal_inventory, 1e-6 * cfg.model.cost.N_init);
    EXPECT_EQ(s.samples.size(), std::min<std::size_t>(n, cfg.sample_paths));
  }
}

TEST(Study, LabelPermutationLeavesOutcomesUnchanged) {
  StudyConfig a;
  a.model = ou_model();
  a.dt = 1.0 / 360.0;
  a.latent_path = fixed_chain_path(1.0, {}, {1});
  StudyConfig b = a;
  b.model.chain.theta << 5.15, 4.85;
  b.latent_path = fixed_chain_path(1.0, {}, {0});
  const StudySummary sa = monte_carlo_study(a, 20, 5);
  const StudySummary sb = monte_carlo_study(b, 20, 5);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(sa.profit[i], sb.profit[i], 1e-9 * std::abs(sa.profit[i]) + 1e-9);
  EXPECT_NEAR(sa.mean_terminal_true_posterior, sb.mean_terminal_true_posterior, 1e-12);
}

TEST(Study, ZeroInventoryLeavesExcessUndefined) {
  StudyConfig cfg;
  cfg.model = jump_model();
  cfg.dt = 1.0 / 360.0;
  const StudySummary s = monte_carlo_study(cfg, 10, 1);
  EXPECT_FALSE(s.excess_defined);
  EXPECT_TRUE(s.excess_bps.empty());
  EXPECT_EQ(s.histogram.metric, "profit");
}

TEST(H0Estimate, StandardErrorShrinksWithPaths) {
  const ModelSpec m = ou_model();
  const MonteCarloEstimate few = h0_estimate(0.0, 5.0, m.chain.prior, m, 1.0 / 360.0, 100, 1);
  const MonteCarloEstimate many = h0_estimate(0.0, 5.0, m.chain.prior, m, 1.0 / 360.0, 1600, 1);
  EXPECT_NEAR(many.mean, few.mean, 4.0 * few.std_error + 4.0 * many.std_error);
  EXPECT_NEAR(many.std_error / few.std_error, 0.25, 0.08);
}
