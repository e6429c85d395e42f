#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "latentalpha/control.hpp"
#include "latentalpha/filtering.hpp"
#include "latentalpha/model.hpp"

namespace latentalpha {

enum class JumpSampling {
  Auto,       ///< exact event simulation on steps where max(lambda+-) dt >= 0.1
  Bernoulli,  ///< one Bernoulli(lambda dt) draw per side per step
  Exact,
};

/// Observed market on a uniform grid t_k = k dt, k = 0..n.
struct MarketPath {
  double dt = 0.0;
  std::vector<double> t;
  std::vector<double> F;
  std::vector<int> dN_plus;   ///< n entries, jumps in (t_k, t_{k+1}]
  std::vector<int> dN_minus;
  ChainPath latent;

  std::size_t steps() const { return F.empty() ? 0 : F.size() - 1; }
};

/// Number of grid steps for horizon T; throws Error{StepSize} unless T / dt is an integer.
std::size_t grid_steps(double T, double dt);

MarketPath simulate_ou_path(double theta_true, double kappa, double sigma, double F0, double T, double dt, Rng& rng);
MarketPath simulate_ou_path(const ChainPath& latent, const Vector& theta, double kappa, double sigma, double F0,
                            double T, double dt, Rng& rng);

MarketPath simulate_jump_path(const ChainPath& latent, const Vector& theta, double mu, double kappa, double b,
                              double F0, double T, double dt, Rng& rng, JumpSampling sampling = JumpSampling::Auto);

/// Simulates the market for `model` along a given latent path.
MarketPath simulate_market(const ModelSpec& model, const ChainPath& latent, double dt, Rng& rng,
                           JumpSampling sampling = JumpSampling::Auto);

/// Posterior after each observation, (n + 1) x J; row k uses data up to t_k.
Matrix posterior_path(const MarketPath& path, const ModelSpec& model, const Vector& prior);

struct TraderState {
  double t = 0.0;
  double F = 0.0;
  double Q = 0.0;
  double X = 0.0;
  int N_plus = 0;
  int N_minus = 0;

  /// Impacted midprice F + beta (Q - N_init).
  double S(double beta, double N_init) const { return F + beta * (Q - N_init); }
};

/// Trading rate at grid step k given the state and the current posterior.
using Strategy = std::function<double(std::size_t k, const TraderState& state, const Vector& pi)>;

struct TrajectoryRecord {
  std::vector<double> t, F, S, Q, X, nu;  ///< n + 1 entries; nu.back() = 0
  Matrix pi;                              ///< (n + 1) x J
  double terminal_value = 0.0;            ///< cash after terminal liquidation
  double Q_T = 0.0;
  double liquidation_price = 0.0;         ///< price per share received at T
};

/// Runs a strategy along a market path. In the infinite-alpha mode the last
/// step trades -Q / dt and the residual is booked at S_T.
TrajectoryRecord run_strategy(const MarketPath& path, const CostParams& cost, const Strategy& strategy,
                              const Matrix& posterior);

/// Optimal feedback control with coefficients precomputed on the path grid.
Strategy make_optimal_strategy(const ModelSpec& model, double dt);
Strategy make_ac_strategy(const CostParams& cost, double dt);
Strategy make_twap_strategy(const CostParams& cost, double dt);

/// (X* - X_AC) / |X_AC| in basis points; positive exactly when X* > X_AC.
double excess_return(const TrajectoryRecord& star, const TrajectoryRecord& ac);

struct StudyConfig {
  ModelSpec model;
  double dt = 1.0 / 3600.0;
  /// Latent path shared by every scenario; sampled from the chain when empty.
  std::optional<ChainPath> latent_path;
  JumpSampling sampling = JumpSampling::Auto;
  std::size_t time_slices = 61;
  std::size_t value_bins = 50;
  std::size_t histogram_bins = 50;
  std::size_t sample_paths = 5;
};

/// Counts of trajectories per (time slice, value bin).
struct OccupancyGrid {
  std::string name;
  std::vector<double> times;
  std::vector<double> edges;                    ///< bins + 1
  std::vector<std::vector<std::size_t>> counts;  ///< slices x bins
};

struct Histogram {
  std::string metric;
  std::vector<double> edges;
  std::vector<std::size_t> counts;
};

struct Curve {
  std::string name;
  std::vector<double> mean;
  std::vector<double> median;
};

struct StudySummary {
  std::size_t n_paths = 0;
  bool excess_defined = false;
  double fraction_positive_excess = 0.0;
  double fraction_positive_profit = 0.0;
  double mean_excess_bps = 0.0;
  double median_excess_bps = 0.0;
  double mean_profit = 0.0;
  double mean_profit_ac = 0.0;
  double fraction_negative_ac = 0.0;    ///< share of paths with X^AC_T < 0
  double mean_terminal_true_posterior = 0.0;
  double max_abs_terminal_inventory = 0.0;
  std::vector<double> excess_bps;  ///< per path; empty when undefined
  std::vector<double> profit;      ///< terminal value - N_init F0, per path
  std::vector<double> terminal_value;
  std::vector<double> terminal_value_ac;
  std::vector<double> slice_times;
  Histogram histogram;
  std::vector<OccupancyGrid> grids;
  std::vector<Curve> curves;
  std::vector<TrajectoryRecord> samples;
};

/// Paired optimal vs Almgren-Chriss runs on common market paths. Path i uses
/// the random stream derived from (seed, i).
StudySummary monte_carlo_study(const StudyConfig& config, std::size_t n_paths, std::uint64_t seed);

}  // namespace latentalpha
