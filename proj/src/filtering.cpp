#include "latentalpha/filtering.hpp"

#include <cmath>
#include <limits>

#include "latentalpha/calibration.hpp"
#include "latentalpha/error.hpp"

namespace latentalpha {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Vector& logs) {
  const double m = logs.maxCoeff();
  if (m == kNegInf) return kNegInf;
  return m + std::log((logs.array() - m).exp().sum());
}

// Lambda_j <- Lambda_j (1 + sum_i (Lambda_i / Lambda_j) C_{i,j} dt), applied in
// logs on top of the observation increment. States with zero weight only
// receive inflow, so their new log weight is set from the inflow directly.
void apply_coupling(const Vector& before, Vector& after, const Matrix& generator, double dt) {
  const Eigen::Index n = before.size();
  if (generator.rows() != n || generator.cols() != n)
    throw Error(ErrorKind::InvalidArgument, "generator dimension does not match the filter");
  for (Eigen::Index j = 0; j < n; ++j) {
    if (before(j) == kNegInf) {
      double inflow = 0.0;
      const double shift = before.maxCoeff();
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j && before(i) != kNegInf) inflow += std::exp(before(i) - shift) * generator(i, j) * dt;
      after(j) = inflow > 0.0 ? shift + std::log(inflow) : kNegInf;
      continue;
    }
    double rate = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (generator(i, j) == 0.0 || before(i) == kNegInf) continue;
      rate += std::exp(before(i) - before(j)) * generator(i, j);
    }
    const double growth = rate * dt;
    if (!(growth > -1.0)) throw Error(ErrorKind::StepSize, "step too large for the latent chain's exit rate");
    after(j) += std::log1p(growth);
  }
}

}  // namespace

FilterState FilterState::from_prior(const Vector& prior, double t0) {
  FilterState s;
  s.t = t0;
  s.log_lambda = prior.unaryExpr([](double p) { return p > 0.0 ? std::log(p) : kNegInf; });
  return s;
}

Vector normalize(const FilterState& state) {
  if (state.log_lambda.size() == 0) throw Error(ErrorKind::InvalidArgument, "empty filter state");
  if (state.log_lambda.array().isNaN().any()) throw Error(ErrorKind::DegenerateFilter, "NaN filter weight");
  const double lse = log_sum_exp(state.log_lambda);
  if (!std::isfinite(lse)) throw Error(ErrorKind::DegenerateFilter, "all filter weights are zero or infinite");
  return (state.log_lambda.array() - lse).exp().matrix();
}

FilterState ou_filter_update(const FilterState& state, const Vector& theta, double kappa, double sigma,
                             double price_prev, double price_next, double dt) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive");
  FilterState next = state;
  const double inv_var = 1.0 / (sigma * sigma);
  const double dF = price_next - price_prev;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double drift = kappa * (theta(j) - price_prev);
    next.log_lambda(j) += inv_var * (drift * dF - 0.5 * drift * drift * dt);
  }
  next.t = state.t + dt;
  return next;
}

FilterState ou_filter_from_path(const LatentChainSpec& spec, double kappa, double sigma,
                                std::span<const double> times, std::span<const double> prices) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive");
  if (times.size() != prices.size() || times.size() < 2)
    throw Error(ErrorKind::InvalidArgument, "path needs at least two timestamped samples");
  if (spec.generator.size() != 0 && spec.generator.cwiseAbs().maxCoeff() != 0.0)
    throw Error(ErrorKind::InvalidArgument, "closed-form OU filter requires a constant latent state (C = 0)");

  FilterState state = FilterState::from_prior(spec.prior, times.front());
  for (std::size_t k = 0; k + 1 < prices.size(); ++k) {
    const double dt = times[k + 1] - times[k];
    if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "timestamps must be strictly increasing");
    state = ou_filter_update(state, spec.theta, kappa, sigma, prices[k], prices[k + 1], dt);
  }
  state.t = times.back();
  return state;
}

FilterState generic_filter_step(const FilterState& state, const ObservationStep& obs, const StepCoefficients& coeffs,
                                double jump_size, double sigma, const Matrix& generator) {
  const Eigen::Index n = state.log_lambda.size();
  if (coeffs.drift.size() != n || coeffs.lambda_plus.size() != n || coeffs.lambda_minus.size() != n)
    throw Error(ErrorKind::InvalidArgument, "coefficient vectors must have one entry per state");
  if (!(obs.dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
  if (obs.dN_plus < 0 || obs.dN_minus < 0) throw Error(ErrorKind::InvalidArgument, "jump counts must be >= 0");
  if (sigma < 0.0) throw Error(ErrorKind::InvalidArgument, "sigma must be >= 0");
  if (sigma == 0.0 && coeffs.drift.cwiseAbs().maxCoeff() != 0.0)
    throw Error(ErrorKind::InvalidArgument, "sigma = 0 requires zero drift");

  FilterState next = state;
  const double continuous = obs.dF - jump_size * (obs.dN_plus - obs.dN_minus);
  for (Eigen::Index j = 0; j < n; ++j) {
    double inc = 0.0;
    if (sigma > 0.0) {
      const double a = coeffs.drift(j);
      inc += (a * continuous - 0.5 * a * a * obs.dt) / (sigma * sigma);
    }
    const double lp = coeffs.lambda_plus(j);
    const double lm = coeffs.lambda_minus(j);
    if ((obs.dN_plus > 0 && !(lp > 0.0)) || (obs.dN_minus > 0 && !(lm > 0.0)))
      throw Error(ErrorKind::InvalidArgument, "non-positive intensity with an observed jump");
    if (obs.dN_plus > 0) inc += obs.dN_plus * std::log(lp);
    if (obs.dN_minus > 0) inc += obs.dN_minus * std::log(lm);
    inc -= (lp + lm - 2.0) * obs.dt;
    next.log_lambda(j) += inc;
  }
  apply_coupling(state.log_lambda, next.log_lambda, generator, obs.dt);
  next.t = state.t + obs.dt;
  return next;
}

FilterState jump_filter_step(const FilterState& state, const ObservationStep& obs, double mu, double kappa,
                             double price_prev, const LatentChainSpec& chain) {
  if (mu < 0.0 || kappa < 0.0) throw Error(ErrorKind::InvalidArgument, "mu and kappa must be non-negative");
  if (!(obs.dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
  if (obs.dN_plus < 0 || obs.dN_minus < 0) throw Error(ErrorKind::InvalidArgument, "jump counts must be >= 0");
  const Eigen::Index n = state.log_lambda.size();
  if (chain.theta.size() != n) throw Error(ErrorKind::InvalidArgument, "theta dimension does not match the filter");

  FilterState next = state;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double gap = chain.theta(j) - price_prev;
    const double up = mu + kappa * std::max(gap, 0.0);
    const double down = mu + kappa * std::max(-gap, 0.0);
    if ((obs.dN_plus > 0 && up == 0.0) || (obs.dN_minus > 0 && down == 0.0))
      throw Error(ErrorKind::DegenerateFilter, "zero intensity with an observed jump");
    double inc = 2.0 * (1.0 - mu - 0.5 * kappa * std::abs(gap)) * obs.dt;
    if (obs.dN_plus > 0) inc += obs.dN_plus * std::log(up);
    if (obs.dN_minus > 0) inc += obs.dN_minus * std::log(down);
    next.log_lambda(j) += inc;
  }
  apply_coupling(state.log_lambda, next.log_lambda, chain.generator, obs.dt);
  next.t = state.t + obs.dt;
  return next;
}

Vector forward_filter_as_continuous_check(std::span<const double> prices, double dt, double tick,
                                          const LatentChainSpec& chain, double mu, double kappa) {
  chain.validate();
  EMParams params;
  params.pi0 = chain.prior;
  params.P = matrix_exponential(chain.generator, dt);
  for (Eigen::Index j = 0; j < chain.theta.size(); ++j) params.psi.push_back({mu, kappa, chain.theta(j)});
  if (prices.size() == 1) return chain.prior;
  const ForwardResult fwd = forward_pass(prices, params, dt, tick);
  return fwd.alpha.row(fwd.alpha.rows() - 1).transpose();
}

}  // namespace latentalpha
