#pragma once

#include <cstddef>
#include <cstdint>

#include "latentalpha/model.hpp"

namespace latentalpha {

struct ControlConstants {
  double gamma = 0.0;  ///< sqrt(phi / a)
  double zeta = 1.0;   ///< 1 in the infinite-alpha mode
  bool equal_case = false;  ///< alpha - beta/2 == sqrt(a phi)

  static ControlConstants from(const CostParams& params);
};

/// Inventory coefficient of the value function. Finite alpha: h2(T) = -alpha.
double h2(double t, const CostParams& params);

/// d/dt h2 - phi + (beta + 2 h2)^2 / (4a), with a central difference of width `step`.
double riccati_residual(double t, const CostParams& params, double step = 1e-5);

/// Weight applied at time u to the expected drift when forming h1 at time t.
double h1_weight(double t, double u, const CostParams& params);

/// int_0^tau e^{y s} ds
double psi2_scalar(double tau, double y);
/// int_0^tau e^{y s} sinh(gamma (tau - s)) / sinh(gamma tau) ds; the kernel is
/// (tau - s) / tau when gamma = 0.
double psi1_scalar(double tau, double y, double gamma);
Matrix psi2_matrix(double tau, const Matrix& y);
Matrix psi1_matrix(double tau, const Matrix& y, double gamma);

/// int_t^T w(t, u) e^{y (u - t)} du with w = h1_weight.
double weighted_exp_integral(double t, double y, const CostParams& params);
/// Matrix analogue: int_t^T w(t, u) e^{(u - t) Y} du.
Matrix weighted_exp_integral(double t, const Matrix& y, const CostParams& params);

/// h1 for the OU model with a constant latent level.
double h1_ou(double t, double F, const Vector& pi, const Vector& theta, double kappa, const CostParams& params);

/// h1 = f_coef * F + pi . pi_coef for the pure-jump model at a fixed t.
struct JumpH1Coefficients {
  double f_coef = 0.0;
  Vector pi_coef;

  double evaluate(double F, const Vector& pi) const { return f_coef * F + pi.dot(pi_coef); }
};

JumpH1Coefficients jump_h1_coefficients(double t, const LatentChainSpec& chain, double kappa,
                                        const CostParams& params);

/// h1 for the mean-reverting pure-jump model with a switching latent level.
double h1_jump(double t, double F, const Vector& pi, const LatentChainSpec& chain, double kappa,
               const CostParams& params);

/// h1 for either model.
double h1(double t, double F, const Vector& pi, const ModelSpec& model);

/// Feedback speed ((2 h2 + beta) Q + h1) / (2a).
double optimal_speed(double t, double Q, double h1_value, const CostParams& params);
double ac_speed(double t, double Q, const CostParams& params);
double twap_speed(double t, double Q, double T);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Monte Carlo estimate of h0 = E[int_t^T h1^2 du] / (4a) from state (t, F, pi),
/// integrating on a grid of width dt.
MonteCarloEstimate h0_estimate(double t, double F, const Vector& pi, const ModelSpec& model, double dt,
                               std::size_t n_paths, std::uint64_t seed);

}  // namespace latentalpha
