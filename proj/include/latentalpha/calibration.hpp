#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latentalpha/latent_chain.hpp"

namespace latentalpha {

/// D independent price paths, each with K samples spaced `dt` apart. In the
/// censored jump model consecutive prices differ by 0 or +/- `tick`.
struct Dataset {
  double dt = 1.0;
  double tick = 0.01;
  std::vector<std::vector<double>> paths;
  /// Increments larger than one tick that were clipped to +/- tick on ingestion.
  std::size_t truncated_increments = 0;

  std::size_t path_count() const { return paths.size(); }
  std::size_t steps() const { return paths.empty() ? 0 : paths.front().size(); }

  /// D >= 1, K >= 2, equal lengths, finite prices, increments on the tick grid.
  void validate() const;

  /// Builds a dataset from raw paths, clipping multi-tick moves to one tick.
  static Dataset from_prices(std::vector<std::vector<double>> raw, double dt, double tick);
};

/// Per-state emission parameters: base noise level, mean-reversion rate and
/// mean-reversion level.
struct EmissionParams {
  double mu = 0.0;
  double kappa = 0.0;
  double theta = 0.0;
};

struct EMParams {
  Vector pi0;
  Matrix P;
  std::vector<EmissionParams> psi;

  std::size_t states() const { return psi.size(); }
  void validate() const;
};

struct ForwardResult {
  Matrix alpha;  ///< K x J filtered posteriors
  Vector c;      ///< K normalization constants; c(0) = 1
  double loglik = 0.0;
};

struct FBResult {
  Matrix alpha;
  Vector c;
  Matrix beta;
  Matrix gamma;
  std::vector<Matrix> xi;  ///< K-1 two-slice marginals, each J x J
  double loglik = 0.0;
};

enum class Move { Down, Flat, Up };

/// Classifies an increment; throws Error{DataFormat} unless it is 0 or +/- tick.
Move classify_move(double price_next, double price_prev, double tick);

/// Censored emission probability of one step given the state's parameters.
double emission_prob(Move move, double price_prev, const EmissionParams& psi, double dt);
double emission_prob(double price_next, double price_prev, const EmissionParams& psi, double dt, double tick);

/// (K-1) x J matrix of emission probabilities f(y_{k+1} | y_k, state j).
Matrix emission_matrix(std::span<const double> path, const EMParams& params, double dt, double tick);

ForwardResult forward_pass(std::span<const double> path, const EMParams& params, double dt, double tick);
Matrix backward_pass(std::span<const double> path, const EMParams& params, const ForwardResult& forward, double dt,
                     double tick);
FBResult smoother_and_two_slice(const ForwardResult& forward, const Matrix& beta, std::span<const double> path,
                                const EMParams& params, double dt, double tick);
FBResult forward_backward(std::span<const double> path, const EMParams& params, double dt, double tick);

/// Total log-likelihood over all paths.
double log_likelihood(const Dataset& data, const EMParams& params);

struct EMStepResult {
  EMParams params;
  double loglik = 0.0;  ///< log-likelihood of the input parameters
  bool psi_not_improved = false;
};

/// One EM iteration: E-step over all paths, closed-form prior/transition
/// update, Nelder-Mead update of each state's emission parameters.
EMStepResult em_step(const Dataset& data, const EMParams& params);

struct EMOptions {
  double relative_tolerance = 1e-8;
  int max_iterations = 500;
};

struct EMFit {
  EMParams params;
  Matrix generator;  ///< log(P) / dt, clamped to a valid generator
  bool generator_clamped = false;
  std::vector<double> loglik_trace;  ///< loglik of each iterate, starting with the initial guess
  double loglik = 0.0;               ///< loglik of the returned parameters
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

EMFit fit_em(const Dataset& data, EMParams initial, const EMOptions& options = {});

/// Initial guess for J states: a single-state fit split by noise level.
EMParams initial_guess(const Dataset& data, std::size_t states);

/// Reorders states by mu descending.
EMParams sort_states_by_mu(const EMParams& params);

/// Maximum a posteriori latent path (0-based indices).
std::vector<int> viterbi(std::span<const double> path, const EMParams& params, double dt, double tick);

int free_parameter_count(std::size_t states);
double bic(double loglik, int n_params, std::size_t steps, std::size_t paths);
double icl(const Dataset& data, const EMParams& params);

/// Principal matrix logarithm of P divided by dt; negative off-diagonals
/// beyond -1e-10 are clamped to zero and the diagonal rebalanced.
Matrix generator_from_transition(const Matrix& P, double dt, bool* clamped = nullptr);

/// Simulates censored jump data from a latent chain with per-state emission
/// parameters. Prices start at `start_price` and move on the tick grid.
Dataset simulate_censored_dataset(const Vector& pi0, const Matrix& P, const std::vector<EmissionParams>& psi,
                                  std::size_t paths, std::size_t steps, double dt, double tick, double start_price,
                                  std::uint64_t seed);

}  // namespace latentalpha
