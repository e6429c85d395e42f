#include "latentalpha/control.hpp"

#include <cmath>
#include <limits>

#include "latentalpha/error.hpp"

namespace latentalpha {

namespace {

// Discount kernel w(s), s = u - t in [0, tau]. Two shapes cover every regime:
//   exponential: p e^{-gamma s} + q e^{gamma s}, q e^{gamma s} = qcoef e^{-gamma (2 tau - s)}
//   linear:      (tau + c - s) / (tau + c)
struct Kernel {
  bool linear = false;
  double tau = 0.0;
  double gamma = 0.0;
  double p = 1.0;
  double qcoef = 0.0;
  double c = 0.0;
  // -(2 h2 + beta) / (2a) expressed without cancellation.
  double gain = 0.0;
};

double phi2_series(double z) {
  return 0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z * (1.0 / 120.0 + z * (1.0 / 720.0 + z / 5040.0))));
}

// int_0^tau (tau - s) e^{y s} ds
double linear_exp_integral(double tau, double y) {
  const double z = y * tau;
  if (std::abs(z) < 1e-2) return tau * tau * phi2_series(z);
  return (std::expm1(z) - z) / (y * y);
}

void check_time(double t, const CostParams& params) {
  if (!(t >= 0.0) || t > params.T) throw Error(ErrorKind::InvalidArgument, "t outside [0, T]");
}

Kernel make_kernel(double t, const CostParams& params) {
  params.validate();
  check_time(t, params);
  const ControlConstants k = ControlConstants::from(params);
  Kernel w;
  w.tau = params.T - t;
  w.gamma = k.gamma;

  if (params.alpha_infinite) {
    if (w.tau <= 0.0) throw Error(ErrorKind::SingularHorizon, "infinite-alpha kernel is singular at t = T");
    if (k.gamma == 0.0) {
      w.linear = true;
      w.c = 0.0;
      w.gain = 1.0 / w.tau;
      return w;
    }
    const double e = std::exp(-2.0 * k.gamma * w.tau);
    const double den = -std::expm1(-2.0 * k.gamma * w.tau);
    w.p = 1.0 / den;
    w.qcoef = -1.0 / den;
    w.gain = k.gamma * (1.0 + e) / den;
    return w;
  }

  const double excess = params.alpha - 0.5 * params.beta;
  if (k.gamma == 0.0) {
    w.linear = true;
    w.c = params.a / excess;
    // The pole of h2 lies in [t, T] when tau + c and c differ in sign.
    if (w.c * (w.tau + w.c) <= 0.0)
      throw Error(ErrorKind::SingularHorizon, "terminal penalty too small: h2 has a pole before T");
    w.gain = 1.0 / (w.tau + w.c);
    return w;
  }

  // zeta = (x + r) / (x - r) with x = alpha - beta/2, r = a gamma; numerator
  // and denominator are multiplied through by (x - r) to avoid cancellation
  // when zeta is close to 1.
  const double r = params.a * k.gamma;
  const double e = std::exp(-2.0 * k.gamma * w.tau);
  const double den = excess * (-std::expm1(-2.0 * k.gamma * w.tau)) + r * (1.0 + e);
  if (den <= 0.0) throw Error(ErrorKind::SingularHorizon, "terminal penalty too small: h2 has a pole before T");
  w.p = (excess + r) / den;
  w.qcoef = -(excess - r) / den;
  w.gain = k.gamma * (excess * (1.0 + e) + r * (-std::expm1(-2.0 * k.gamma * w.tau))) / den;
  return w;
}

double kernel_at(const Kernel& w, double s) {
  if (w.linear) return (w.tau + w.c - s) / (w.tau + w.c);
  double v = w.p * std::exp(-w.gamma * s);
  if (w.qcoef != 0.0) v += w.qcoef * std::exp(-w.gamma * (2.0 * w.tau - s));
  return v;
}

double kernel_integral(const Kernel& w, double y) {
  if (w.linear) return (w.c * psi2_scalar(w.tau, y) + linear_exp_integral(w.tau, y)) / (w.tau + w.c);
  double v = w.p * psi2_scalar(w.tau, y - w.gamma);
  if (w.qcoef != 0.0) v += w.qcoef * std::exp(-2.0 * w.gamma * w.tau) * psi2_scalar(w.tau, y + w.gamma);
  return v;
}

// Blocks of exp([[Y, I, 0], [0, 0, I], [0, 0, 0]] tau): (1,2) = int e^{sY} ds,
// (1,3) = int (tau - s) e^{sY} ds.
void exp_integrals(double tau, const Matrix& y, Matrix* plain, Matrix* linear) {
  const Eigen::Index n = y.rows();
  if (y.cols() != n) throw Error(ErrorKind::InvalidArgument, "matrix must be square");
  const Eigen::Index blocks = linear ? 3 : 2;
  Matrix aug = Matrix::Zero(blocks * n, blocks * n);
  aug.topLeftCorner(n, n) = y;
  aug.block(0, n, n, n) = Matrix::Identity(n, n);
  if (linear) aug.block(n, 2 * n, n, n) = Matrix::Identity(n, n);
  const Matrix e = matrix_exponential(aug, tau);
  if (plain) *plain = e.block(0, n, n, n);
  if (linear) *linear = e.block(0, 2 * n, n, n);
}

Matrix kernel_integral(const Kernel& w, const Matrix& y) {
  const Eigen::Index n = y.rows();
  const Matrix ident = Matrix::Identity(n, n);
  if (w.linear) {
    Matrix plain, lin;
    exp_integrals(w.tau, y, &plain, &lin);
    return (w.c * plain + lin) / (w.tau + w.c);
  }
  Matrix v = w.p * psi2_matrix(w.tau, y - w.gamma * ident);
  if (w.qcoef != 0.0) v += w.qcoef * std::exp(-2.0 * w.gamma * w.tau) * psi2_matrix(w.tau, y + w.gamma * ident);
  return v;
}

}  // namespace

void CostParams::validate() const {
  if (!(a > 0.0) || !std::isfinite(a)) throw Error(ErrorKind::InvalidArgument, "a must be positive");
  if (!(b >= 0.0) || !std::isfinite(b)) throw Error(ErrorKind::InvalidArgument, "b must be >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::InvalidArgument, "beta must be >= 0");
  if (!(phi >= 0.0) || !std::isfinite(phi)) throw Error(ErrorKind::InvalidArgument, "phi must be >= 0");
  if (!(T > 0.0) || !std::isfinite(T)) throw Error(ErrorKind::InvalidArgument, "T must be positive");
  if (!alpha_infinite && (!(alpha >= 0.0) || !std::isfinite(alpha)))
    throw Error(ErrorKind::InvalidArgument, "alpha must be >= 0 or infinite");
  if (!std::isfinite(N_init)) throw Error(ErrorKind::InvalidArgument, "initial inventory must be finite");
}

void ModelSpec::validate() const {
  chain.validate();
  cost.validate();
  if (!std::isfinite(F0)) throw Error(ErrorKind::InvalidArgument, "F0 must be finite");
  if (const auto* ou = std::get_if<OuModel>(&dynamics)) {
    if (!(ou->sigma > 0.0) || !(ou->kappa >= 0.0)) throw Error(ErrorKind::InvalidArgument, "OU model needs sigma > 0, kappa >= 0");
  } else {
    const auto& jm = std::get<JumpModel>(dynamics);
    if (!(jm.mu > 0.0) || !(jm.kappa >= 0.0)) throw Error(ErrorKind::InvalidArgument, "jump model needs mu > 0, kappa >= 0");
    if (!(cost.b > 0.0)) throw Error(ErrorKind::InvalidArgument, "jump model needs a positive jump size b");
  }
}

ControlConstants ControlConstants::from(const CostParams& params) {
  ControlConstants k;
  k.gamma = std::sqrt(params.phi / params.a);
  if (params.alpha_infinite) return k;
  const double excess = params.alpha - 0.5 * params.beta;
  const double root = std::sqrt(params.a * params.phi);
  k.equal_case = std::abs(excess - root) < 1e-12 * std::max(1.0, params.alpha);
  k.zeta = k.equal_case ? std::numeric_limits<double>::infinity() : (excess + root) / (excess - root);
  return k;
}

double h2(double t, const CostParams& params) {
  const Kernel w = make_kernel(t, params);
  return -params.a * w.gain - 0.5 * params.beta;
}

double riccati_residual(double t, const CostParams& params, double step) {
  const double derivative = (h2(t + step, params) - h2(t - step, params)) / (2.0 * step);
  const double v = params.beta + 2.0 * h2(t, params);
  return derivative - params.phi + v * v / (4.0 * params.a);
}

double h1_weight(double t, double u, const CostParams& params) {
  const Kernel w = make_kernel(t, params);
  if (u < t || u > params.T) throw Error(ErrorKind::InvalidArgument, "u outside [t, T]");
  return kernel_at(w, u - t);
}

double psi2_scalar(double tau, double y) {
  if (tau < 0.0) throw Error(ErrorKind::InvalidArgument, "tau must be >= 0");
  const double z = y * tau;
  if (std::abs(z) < 1e-6) return tau * (1.0 + z * (0.5 + z / 6.0));
  return std::expm1(z) / y;
}

double psi1_scalar(double tau, double y, double gamma) {
  if (tau < 0.0) throw Error(ErrorKind::InvalidArgument, "tau must be >= 0");
  if (tau == 0.0) return 0.0;
  if (gamma == 0.0) return linear_exp_integral(tau, y) / tau;
  const double e = std::exp(-2.0 * gamma * tau);
  return (psi2_scalar(tau, y - gamma) - e * psi2_scalar(tau, y + gamma)) / (-std::expm1(-2.0 * gamma * tau));
}

Matrix psi2_matrix(double tau, const Matrix& y) {
  if (tau < 0.0) throw Error(ErrorKind::InvalidArgument, "tau must be >= 0");
  Matrix plain;
  exp_integrals(tau, y, &plain, nullptr);
  return plain;
}

Matrix psi1_matrix(double tau, const Matrix& y, double gamma) {
  if (tau < 0.0) throw Error(ErrorKind::InvalidArgument, "tau must be >= 0");
  const Eigen::Index n = y.rows();
  if (tau == 0.0) return Matrix::Zero(n, n);
  if (gamma == 0.0) {
    Matrix lin;
    exp_integrals(tau, y, nullptr, &lin);
    return lin / tau;
  }
  const Matrix ident = Matrix::Identity(n, n);
  const double e = std::exp(-2.0 * gamma * tau);
  return (psi2_matrix(tau, y - gamma * ident) - e * psi2_matrix(tau, y + gamma * ident)) /
         (-std::expm1(-2.0 * gamma * tau));
}

double weighted_exp_integral(double t, double y, const CostParams& params) {
  return kernel_integral(make_kernel(t, params), y);
}

Matrix weighted_exp_integral(double t, const Matrix& y, const CostParams& params) {
  return kernel_integral(make_kernel(t, params), y);
}

double h1_ou(double t, double F, const Vector& pi, const Vector& theta, double kappa, const CostParams& params) {
  if (pi.size() != theta.size()) throw Error(ErrorKind::InvalidArgument, "pi and theta sizes differ");
  if (kappa < 0.0) throw Error(ErrorKind::InvalidArgument, "kappa must be >= 0");
  const double discount = weighted_exp_integral(t, -kappa, params);
  double total = 0.0;
  for (Eigen::Index j = 0; j < pi.size(); ++j) total += pi(j) * kappa * (theta(j) - F);
  return total * discount;
}

JumpH1Coefficients jump_h1_coefficients(double t, const LatentChainSpec& chain, double kappa,
                                        const CostParams& params) {
  if (kappa < 0.0) throw Error(ErrorKind::InvalidArgument, "kappa must be >= 0");
  const Kernel w = make_kernel(t, params);
  const Eigen::Index n = chain.theta.size();
  JumpH1Coefficients out;
  out.pi_coef = Vector::Zero(n);
  const double ks = params.b * kappa;
  if (ks == 0.0) return out;

  const double scalar = kernel_integral(w, -ks);
  const Matrix km = kernel_integral(w, chain.generator);
  const Matrix cstar = chain.generator + ks * Matrix::Identity(n, n);
  const Vector k_theta = km * chain.theta;
  const Vector relax = cstar.partialPivLu().solve(k_theta - scalar * chain.theta);
  out.f_coef = -ks * scalar;
  out.pi_coef = ks * (k_theta - ks * relax);
  return out;
}

double h1_jump(double t, double F, const Vector& pi, const LatentChainSpec& chain, double kappa,
               const CostParams& params) {
  if (pi.size() != chain.theta.size()) throw Error(ErrorKind::InvalidArgument, "pi and theta sizes differ");
  return jump_h1_coefficients(t, chain, kappa, params).evaluate(F, pi);
}

double h1(double t, double F, const Vector& pi, const ModelSpec& model) {
  if (const auto* ou = std::get_if<OuModel>(&model.dynamics))
    return h1_ou(t, F, pi, model.chain.theta, ou->kappa, model.cost);
  return h1_jump(t, F, pi, model.chain, std::get<JumpModel>(model.dynamics).kappa, model.cost);
}

double optimal_speed(double t, double Q, double h1_value, const CostParams& params) {
  if (params.alpha_infinite && t >= params.T)
    throw Error(ErrorKind::SingularHorizon, "infinite-alpha control is undefined at t >= T");
  const Kernel w = make_kernel(t, params);
  return -w.gain * Q + h1_value / (2.0 * params.a);
}

double ac_speed(double t, double Q, const CostParams& params) { return optimal_speed(t, Q, 0.0, params); }

double twap_speed(double t, double Q, double T) {
  if (t >= T) throw Error(ErrorKind::SingularHorizon, "TWAP is undefined at t >= T");
  return -Q / (T - t);
}

}  // namespace latentalpha
