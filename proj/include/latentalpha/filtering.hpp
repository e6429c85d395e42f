#pragma once

#include <span>

#include "latentalpha/latent_chain.hpp"

namespace latentalpha {

/// Unnormalized posterior weights, stored as logs.
struct FilterState {
  Vector log_lambda;
  double t = 0.0;

  /// Lambda_0 = pi_0. Zero prior mass maps to -inf.
  static FilterState from_prior(const Vector& prior, double t0 = 0.0);
};

/// pi_j = Lambda_j / sum_i Lambda_i, via logsumexp.
Vector normalize(const FilterState& state);

/// Observation over one step: price increment and the number of up/down
/// order-flow jumps seen in it.
struct ObservationStep {
  double dt = 0.0;
  double dF = 0.0;
  int dN_plus = 0;
  int dN_minus = 0;
};

/// Per-state model coefficients evaluated at the left end of a step.
struct StepCoefficients {
  Vector drift;         ///< A^j
  Vector lambda_plus;   ///< lambda^{+,j}
  Vector lambda_minus;  ///< lambda^{-,j}
};

/// Closed-form filter for the OU model with a constant latent level (C = 0);
/// both integrals use left-endpoint Riemann sums over the sampled path.
FilterState ou_filter_from_path(const LatentChainSpec& spec, double kappa, double sigma,
                                std::span<const double> times, std::span<const double> prices);

/// Incremental form of `ou_filter_from_path`: adds one left-endpoint Riemann term.
FilterState ou_filter_update(const FilterState& state, const Vector& theta, double kappa, double sigma,
                             double price_prev, double price_next, double dt);

/// One Euler step of the log of the unnormalized filter SDE. With sigma > 0
/// this is the diffusive branch; sigma == 0 requires zero drift and gives the
/// pure-jump branch.
FilterState generic_filter_step(const FilterState& state, const ObservationStep& obs, const StepCoefficients& coeffs,
                                double jump_size, double sigma, const Matrix& generator);

/// Recursion for the mean-reverting pure-jump model with intensities
/// mu + kappa (theta_j - F)_{+/-}, using the price at the start of the step.
FilterState jump_filter_step(const FilterState& state, const ObservationStep& obs, double mu, double kappa,
                             double price_prev, const LatentChainSpec& chain);

/// Discrete forward filter (the calibration E-step recursion) run over a
/// price slice observed every `dt`; returns the posterior at the last sample.
Vector forward_filter_as_continuous_check(std::span<const double> prices, double dt, double tick,
                                          const LatentChainSpec& chain, double mu, double kappa);

}  // namespace latentalpha
