#include "latentalpha/calibration.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <unsupported/Eigen/MatrixFunctions>
#include <utility>

#include "latentalpha/error.hpp"
#include "latentalpha/random.hpp"

namespace latentalpha {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

void intensities(double price_prev, const EmissionParams& psi, double& up, double& down) {
  const double gap = psi.theta - price_prev;
  up = psi.mu + psi.kappa * std::max(gap, 0.0);
  down = psi.mu + psi.kappa * std::max(-gap, 0.0);
}

// Emission log-likelihood grouped by (previous price, move). Prices on a
// discrete grid repeat exactly, so the group count stays small.
struct EmissionGroups {
  std::vector<double> price_prev;
  std::vector<Move> move;
  Matrix weight;  // groups x J
};

EmissionGroups group_emissions(const Dataset& data, const std::vector<FBResult>& fb, std::size_t states) {
  std::map<std::pair<double, int>, std::size_t> index;
  EmissionGroups g;
  std::vector<std::vector<double>> w;
  for (std::size_t d = 0; d < data.paths.size(); ++d) {
    const auto& path = data.paths[d];
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const Move m = classify_move(path[k + 1], path[k], data.tick);
      const auto key = std::make_pair(path[k], static_cast<int>(m));
      auto [it, inserted] = index.emplace(key, g.price_prev.size());
      if (inserted) {
        g.price_prev.push_back(path[k]);
        g.move.push_back(m);
        w.emplace_back(states, 0.0);
      }
      for (std::size_t j = 0; j < states; ++j)
        w[it->second][j] += fb.empty() ? 1.0 : fb[d].gamma(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
    }
  }
  g.weight.resize(static_cast<Eigen::Index>(w.size()), static_cast<Eigen::Index>(states));
  for (std::size_t r = 0; r < w.size(); ++r)
    for (std::size_t j = 0; j < states; ++j) g.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = w[r][j];
  return g;
}

struct PsiObjective {
  const EmissionGroups* groups;
  Eigen::Index state;
  double dt;
};

double psi_value(const EmissionGroups& g, Eigen::Index state, const EmissionParams& psi, double dt) {
  double total = 0.0;
  for (std::size_t r = 0; r < g.price_prev.size(); ++r) {
    const double w = g.weight(static_cast<Eigen::Index>(r), state);
    if (w == 0.0) continue;
    const double p = emission_prob(g.move[r], g.price_prev[r], psi, dt);
    if (!(p > 0.0)) return kNegInf;
    total += w * std::log(p);
  }
  return total;
}

EmissionParams from_free(const gsl_vector* x) {
  return {std::exp(gsl_vector_get(x, 0)), std::exp(gsl_vector_get(x, 1)), gsl_vector_get(x, 2)};
}

double nm_cost(const gsl_vector* x, void* raw) {
  const auto* obj = static_cast<const PsiObjective*>(raw);
  const EmissionParams psi = from_free(x);
  if (!std::isfinite(psi.mu) || !std::isfinite(psi.kappa) || psi.mu <= 0.0) return 1e300;
  const double v = psi_value(*obj->groups, obj->state, psi, obj->dt);
  return std::isfinite(v) ? -v : 1e300;
}

// Nelder-Mead over (log mu, log kappa, theta). Returns the start point when
// the simplex does not improve on it.
EmissionParams maximize_psi(const EmissionGroups& g, Eigen::Index state, const EmissionParams& start, double dt,
                            double tick, bool& improved) {
  PsiObjective obj{&g, state, dt};
  gsl_multimin_function fn{&nm_cost, 3, &obj};

  gsl_vector* x = gsl_vector_alloc(3);
  gsl_vector* step = gsl_vector_alloc(3);
  gsl_vector_set(x, 0, std::log(std::max(start.mu, 1e-12)));
  gsl_vector_set(x, 1, std::log(std::max(start.kappa, 1e-12)));
  gsl_vector_set(x, 2, start.theta);
  gsl_vector_set(step, 0, 0.3);
  gsl_vector_set(step, 1, 0.3);
  gsl_vector_set(step, 2, std::max(tick, 0.1 * std::abs(start.theta)));

  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  for (int iter = 0; iter < 3000; ++iter) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-10) == GSL_SUCCESS) break;
  }
  const EmissionParams candidate = from_free(gsl_multimin_fminimizer_x(s));
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);

  const double before = psi_value(g, state, start, dt);
  const double after = psi_value(g, state, candidate, dt);
  improved = std::isfinite(after) && after >= before;
  return improved ? candidate : start;
}

struct GslErrorsOff {
  gsl_error_handler_t* previous = gsl_set_error_handler_off();
  ~GslErrorsOff() { gsl_set_error_handler(previous); }
};

}  // namespace

void Dataset::validate() const {
  if (paths.empty()) throw Error(ErrorKind::DataFormat, "dataset has no paths");
  if (!(dt > 0.0) || !(tick > 0.0)) throw Error(ErrorKind::DataFormat, "dt and tick must be positive");
  const std::size_t k = paths.front().size();
  if (k < 2) throw Error(ErrorKind::DataFormat, "each path needs at least two samples");
  for (std::size_t d = 0; d < paths.size(); ++d) {
    if (paths[d].size() != k) throw Error(ErrorKind::DataFormat, "path " + std::to_string(d) + " has a different length");
    for (std::size_t n = 0; n < k; ++n) {
      if (!std::isfinite(paths[d][n])) throw Error(ErrorKind::DataFormat, "non-finite price in path " + std::to_string(d));
      if (n > 0) classify_move(paths[d][n], paths[d][n - 1], tick);
    }
  }
}

Dataset Dataset::from_prices(std::vector<std::vector<double>> raw, double dt, double tick) {
  Dataset data;
  data.dt = dt;
  data.tick = tick;
  for (auto& path : raw) {
    if (path.empty()) continue;
    std::vector<double> clean(path.size());
    // Rebuild on the tick grid from the first price so clipped moves stay consistent.
    clean[0] = path[0];
    long level = 0;
    for (std::size_t n = 1; n < path.size(); ++n) {
      const double ticks = (path[n] - path[0]) / tick;
      const long target = std::lround(ticks);
      if (!(std::abs(ticks - static_cast<double>(target)) <= 1e-6))
        throw Error(ErrorKind::DataFormat, "price " + std::to_string(n) + " is off the tick grid");
      long move = target - level;
      if (move > 1 || move < -1) {
        ++data.truncated_increments;
        move = move > 0 ? 1 : -1;
      }
      level += move;
      clean[n] = path[0] + static_cast<double>(level) * tick;
    }
    data.paths.push_back(std::move(clean));
  }
  data.validate();
  return data;
}

void EMParams::validate() const {
  const auto j = static_cast<Eigen::Index>(psi.size());
  if (j < 1) throw Error(ErrorKind::InvalidArgument, "need at least one state");
  if (pi0.size() != j || P.rows() != j || P.cols() != j)
    throw Error(ErrorKind::InvalidArgument, "pi0 and P dimensions must match the number of states");
  if ((pi0.array() < 0.0).any() || std::abs(pi0.sum() - 1.0) > 1e-10)
    throw Error(ErrorKind::InvalidArgument, "pi0 must be a probability vector");
  for (Eigen::Index r = 0; r < j; ++r)
    if ((P.row(r).array() < 0.0).any() || std::abs(P.row(r).sum() - 1.0) > 1e-10)
      throw Error(ErrorKind::InvalidArgument, "rows of P must be probability vectors");
  for (const auto& p : psi)
    if (!(p.mu > 0.0) || p.kappa < 0.0 || !std::isfinite(p.theta) || !std::isfinite(p.kappa))
      throw Error(ErrorKind::InvalidArgument, "emission parameters need mu > 0, kappa >= 0");
}

Move classify_move(double price_next, double price_prev, double tick) {
  const double dF = price_next - price_prev;
  const double tol = 1e-6 * tick;
  if (std::abs(dF) <= tol) return Move::Flat;
  if (std::abs(dF - tick) <= tol) return Move::Up;
  if (std::abs(dF + tick) <= tol) return Move::Down;
  throw Error(ErrorKind::DataFormat, "price increment is not in {-tick, 0, +tick}");
}

double emission_prob(Move move, double price_prev, const EmissionParams& psi, double dt) {
  double up = 0.0, down = 0.0;
  intensities(price_prev, psi, up, down);
  const double p_up = -std::expm1(-dt * up);
  const double p_down = -std::expm1(-dt * down);
  switch (move) {
    case Move::Up:
      return std::exp(-dt * down) * p_up;
    case Move::Down:
      return std::exp(-dt * up) * p_down;
    case Move::Flat:
      break;
  }
  return std::exp(-dt * (up + down)) + p_up * p_down;
}

double emission_prob(double price_next, double price_prev, const EmissionParams& psi, double dt, double tick) {
  return emission_prob(classify_move(price_next, price_prev, tick), price_prev, psi, dt);
}

Matrix emission_matrix(std::span<const double> path, const EMParams& params, double dt, double tick) {
  if (path.size() < 2) throw Error(ErrorKind::DataFormat, "path needs at least two samples");
  const auto j = static_cast<Eigen::Index>(params.states());
  Matrix e(static_cast<Eigen::Index>(path.size() - 1), j);
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const Move m = classify_move(path[k + 1], path[k], tick);
    for (Eigen::Index s = 0; s < j; ++s)
      e(static_cast<Eigen::Index>(k), s) = emission_prob(m, path[k], params.psi[static_cast<std::size_t>(s)], dt);
  }
  return e;
}

ForwardResult forward_pass(std::span<const double> path, const EMParams& params, double dt, double tick) {
  params.validate();
  const Matrix e = emission_matrix(path, params, dt, tick);
  const auto k = static_cast<Eigen::Index>(path.size());
  const auto j = static_cast<Eigen::Index>(params.states());
  ForwardResult r;
  r.alpha.resize(k, j);
  r.c.resize(k);
  r.alpha.row(0) = params.pi0.transpose();
  r.c(0) = 1.0;
  r.loglik = 0.0;
  for (Eigen::Index n = 1; n < k; ++n) {
    const Eigen::RowVectorXd weighted = r.alpha.row(n - 1).cwiseProduct(e.row(n - 1));
    const Eigen::RowVectorXd next = weighted * params.P;
    const double c = next.sum();
    if (!(c > 0.0) || !std::isfinite(c))
      throw Error(ErrorKind::ImpossibleObservation, "zero forward normalizer at step " + std::to_string(n));
    r.c(n) = c;
    r.alpha.row(n) = next / c;
    r.loglik += std::log(c);
  }
  return r;
}

Matrix backward_pass(std::span<const double> path, const EMParams& params, const ForwardResult& forward, double dt,
                     double tick) {
  const Matrix e = emission_matrix(path, params, dt, tick);
  const auto k = static_cast<Eigen::Index>(path.size());
  const auto j = static_cast<Eigen::Index>(params.states());
  if (forward.alpha.rows() != k || forward.alpha.cols() != j)
    throw Error(ErrorKind::InvalidArgument, "forward result does not match the path");
  Matrix beta(k, j);
  beta.row(k - 1).setOnes();
  for (Eigen::Index n = k - 2; n >= 0; --n) {
    const Vector future = params.P * beta.row(n + 1).transpose();
    const Eigen::RowVectorXd raw = e.row(n).cwiseProduct(future.transpose());
    const double norm = raw.dot(forward.alpha.row(n));
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw Error(ErrorKind::ImpossibleObservation, "zero backward normalizer at step " + std::to_string(n));
    beta.row(n) = raw / norm;
  }
  return beta;
}

FBResult smoother_and_two_slice(const ForwardResult& forward, const Matrix& beta, std::span<const double> path,
                                const EMParams& params, double dt, double tick) {
  const Matrix e = emission_matrix(path, params, dt, tick);
  const auto k = static_cast<Eigen::Index>(path.size());
  const auto j = static_cast<Eigen::Index>(params.states());
  FBResult r;
  r.alpha = forward.alpha;
  r.c = forward.c;
  r.beta = beta;
  r.loglik = forward.loglik;
  r.gamma = forward.alpha.cwiseProduct(beta);
  r.xi.reserve(static_cast<std::size_t>(k - 1));
  for (Eigen::Index n = 0; n + 1 < k; ++n) {
    Matrix xi(j, j);
    for (Eigen::Index a = 0; a < j; ++a)
      for (Eigen::Index b = 0; b < j; ++b)
        xi(a, b) = forward.alpha(n, a) * e(n, a) * params.P(a, b) * beta(n + 1, b) / forward.c(n + 1);
    r.xi.push_back(std::move(xi));
  }
  return r;
}

FBResult forward_backward(std::span<const double> path, const EMParams& params, double dt, double tick) {
  const ForwardResult f = forward_pass(path, params, dt, tick);
  const Matrix b = backward_pass(path, params, f, dt, tick);
  return smoother_and_two_slice(f, b, path, params, dt, tick);
}

double log_likelihood(const Dataset& data, const EMParams& params) {
  double total = 0.0;
  for (const auto& path : data.paths) total += forward_pass(path, params, data.dt, data.tick).loglik;
  return total;
}

EMStepResult em_step(const Dataset& data, const EMParams& params) {
  params.validate();
  const std::size_t states = params.states();
  const auto j = static_cast<Eigen::Index>(states);

  std::vector<FBResult> fb;
  fb.reserve(data.paths.size());
  EMStepResult out;
  out.loglik = 0.0;
  for (const auto& path : data.paths) {
    fb.push_back(forward_backward(path, params, data.dt, data.tick));
    out.loglik += fb.back().loglik;
  }

  EMParams next = params;
  next.pi0 = Vector::Zero(j);
  Matrix trans = Matrix::Zero(j, j);
  for (const auto& r : fb) {
    next.pi0 += r.gamma.row(0).transpose();
    for (const auto& xi : r.xi) trans += xi;
  }
  next.pi0 /= static_cast<double>(fb.size());
  next.pi0 /= next.pi0.sum();
  for (Eigen::Index a = 0; a < j; ++a) {
    const double row = trans.row(a).sum();
    if (row > 0.0) next.P.row(a) = trans.row(a) / row;
  }

  const EmissionGroups groups = group_emissions(data, fb, states);
  GslErrorsOff guard;
  for (Eigen::Index s = 0; s < j; ++s) {
    bool improved = false;
    next.psi[static_cast<std::size_t>(s)] =
        maximize_psi(groups, s, params.psi[static_cast<std::size_t>(s)], data.dt, data.tick, improved);
    if (!improved) out.psi_not_improved = true;
  }
  out.params = std::move(next);
  return out;
}

EMParams sort_states_by_mu(const EMParams& params) {
  const std::size_t n = params.states();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return params.psi[a].mu > params.psi[b].mu; });
  EMParams out = params;
  for (std::size_t r = 0; r < n; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    const auto oi = static_cast<Eigen::Index>(order[r]);
    out.psi[r] = params.psi[order[r]];
    out.pi0(ri) = params.pi0(oi);
    for (std::size_t c = 0; c < n; ++c)
      out.P(ri, static_cast<Eigen::Index>(c)) = params.P(oi, static_cast<Eigen::Index>(order[c]));
  }
  return out;
}

Matrix generator_from_transition(const Matrix& P, double dt, bool* clamped) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
  if (P.rows() != P.cols()) throw Error(ErrorKind::InvalidArgument, "P must be square");
  Matrix c = P.log() / dt;
  bool changed = false;
  for (Eigen::Index r = 0; r < c.rows(); ++r) {
    for (Eigen::Index k = 0; k < c.cols(); ++k) {
      if (r == k) continue;
      if (c(r, k) < -1e-10) changed = true;
      if (c(r, k) < 0.0) c(r, k) = 0.0;
    }
    c(r, r) = 0.0;
    c(r, r) = -c.row(r).sum();
  }
  if (clamped) *clamped = changed;
  return c;
}

EMFit fit_em(const Dataset& data, EMParams initial, const EMOptions& options) {
  data.validate();
  initial.validate();
  EMFit fit;
  EMParams params = std::move(initial);
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < options.max_iterations; ++it) {
    EMStepResult step = em_step(data, params);
    fit.loglik_trace.push_back(step.loglik);
    if (it > 0) {
      const double rel = std::abs(step.loglik - previous) / std::max(1.0, std::abs(previous));
      if (rel < options.relative_tolerance) {
        fit.converged = true;
        fit.loglik = step.loglik;
        break;
      }
    }
    if (step.psi_not_improved && fit.warnings.empty())
      fit.warnings.emplace_back("emission optimizer did not improve at least one state");
    previous = step.loglik;
    params = std::move(step.params);
    ++fit.iterations;
  }
  if (!fit.converged) {
    fit.loglik = log_likelihood(data, params);
    fit.loglik_trace.push_back(fit.loglik);
    fit.warnings.emplace_back("EM stopped at the iteration limit");
  }
  fit.params = sort_states_by_mu(params);
  fit.generator = generator_from_transition(fit.params.P, data.dt, &fit.generator_clamped);
  if (fit.generator_clamped) fit.warnings.emplace_back("log(P) had negative off-diagonal entries; clamped");
  return fit;
}

EMParams initial_guess(const Dataset& data, std::size_t states) {
  data.validate();
  if (states < 1) throw Error(ErrorKind::InvalidArgument, "need at least one state");
  std::size_t moves = 0, total = 0;
  double sum = 0.0;
  for (const auto& path : data.paths) {
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      if (classify_move(path[k + 1], path[k], data.tick) != Move::Flat) ++moves;
      ++total;
    }
    sum += std::accumulate(path.begin(), path.end(), 0.0) / static_cast<double>(path.size());
  }
  const double mu0 = std::max(1e-6, static_cast<double>(moves) / (2.0 * static_cast<double>(total) * data.dt));
  EmissionParams single{mu0, mu0, sum / static_cast<double>(data.paths.size())};

  const EmissionGroups groups = group_emissions(data, {}, 1);
  {
    GslErrorsOff guard;
    bool improved = false;
    single = maximize_psi(groups, 0, single, data.dt, data.tick, improved);
  }

  const auto j = static_cast<Eigen::Index>(states);
  EMParams p;
  p.pi0 = Vector::Constant(j, 1.0 / static_cast<double>(states));
  if (states == 1) {
    p.P = Matrix::Ones(1, 1);
  } else {
    p.P = Matrix::Constant(j, j, 0.01 / static_cast<double>(states - 1));
    p.P.diagonal().setConstant(0.99);
  }
  const double mid = 0.5 * static_cast<double>(states - 1);
  for (std::size_t s = 0; s < states; ++s) {
    const double scale = std::pow(2.0, mid - static_cast<double>(s));
    p.psi.push_back({single.mu * scale, single.kappa * scale, single.theta});
  }
  return p;
}

std::vector<int> viterbi(std::span<const double> path, const EMParams& params, double dt, double tick) {
  params.validate();
  const Matrix e = emission_matrix(path, params, dt, tick);
  const auto k = static_cast<Eigen::Index>(path.size());
  const auto j = static_cast<Eigen::Index>(params.states());
  const Matrix logP = params.P.unaryExpr([](double x) { return safe_log(x); });
  const Matrix logE = e.unaryExpr([](double x) { return safe_log(x); });

  Matrix delta(k, j);
  Eigen::MatrixXi back(k, j);
  for (Eigen::Index s = 0; s < j; ++s) delta(0, s) = safe_log(params.pi0(s));
  back.row(0).setZero();
  for (Eigen::Index n = 1; n < k; ++n) {
    for (Eigen::Index s = 0; s < j; ++s) {
      double best = kNegInf;
      int arg = 0;
      for (Eigen::Index i = 0; i < j; ++i) {
        const double v = delta(n - 1, i) + logE(n - 1, i) + logP(i, s);
        if (v > best) {
          best = v;
          arg = static_cast<int>(i);
        }
      }
      delta(n, s) = best;
      back(n, s) = arg;
    }
  }
  std::vector<int> out(static_cast<std::size_t>(k));
  int cur = 0;
  for (Eigen::Index s = 1; s < j; ++s)
    if (delta(k - 1, s) > delta(k - 1, cur)) cur = static_cast<int>(s);
  for (Eigen::Index n = k - 1; n >= 0; --n) {
    out[static_cast<std::size_t>(n)] = cur;
    cur = back(n, cur);
  }
  return out;
}

int free_parameter_count(std::size_t states) {
  const auto j = static_cast<int>(states);
  return (j - 1) + j * (j - 1) + 3 * j;
}

double bic(double loglik, int n_params, std::size_t steps, std::size_t paths) {
  return loglik - 0.5 * n_params * std::log(static_cast<double>(steps) * static_cast<double>(paths));
}

double icl(const Dataset& data, const EMParams& params) {
  double total = 0.0;
  for (const auto& path : data.paths) {
    const std::vector<int> z = viterbi(path, params, data.dt, data.tick);
    for (std::size_t k = 0; k + 1 < path.size(); ++k)
      total += safe_log(emission_prob(path[k + 1], path[k], params.psi[static_cast<std::size_t>(z[k])], data.dt,
                                      data.tick));
  }
  return total - 0.5 * free_parameter_count(params.states()) *
                     std::log(static_cast<double>(data.steps()) * static_cast<double>(data.path_count()));
}

Dataset simulate_censored_dataset(const Vector& pi0, const Matrix& P, const std::vector<EmissionParams>& psi,
                                  std::size_t paths, std::size_t steps, double dt, double tick, double start_price,
                                  std::uint64_t seed) {
  EMParams params{pi0, P, psi};
  params.validate();
  if (paths < 1 || steps < 2) throw Error(ErrorKind::InvalidArgument, "need at least one path of two samples");
  Dataset data;
  data.dt = dt;
  data.tick = tick;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t d = 0; d < paths; ++d) {
    Rng rng = stream_for(seed, d);
    std::discrete_distribution<int> init(pi0.data(), pi0.data() + pi0.size());
    int z = init(rng);
    std::vector<double> path(steps);
    long level = 0;
    path[0] = start_price;
    for (std::size_t k = 0; k + 1 < steps; ++k) {
      double up = 0.0, down = 0.0;
      intensities(path[k], psi[static_cast<std::size_t>(z)], up, down);
      const bool jump_up = unif(rng) < -std::expm1(-dt * up);
      const bool jump_down = unif(rng) < -std::expm1(-dt * down);
      if (jump_up && !jump_down) ++level;
      if (jump_down && !jump_up) --level;
      path[k + 1] = start_price + static_cast<double>(level) * tick;
      const double u = unif(rng);
      double acc = 0.0;
      int next = static_cast<int>(pi0.size()) - 1;
      for (Eigen::Index s = 0; s < P.cols(); ++s) {
        acc += P(z, s);
        if (u < acc) {
          next = static_cast<int>(s);
          break;
        }
      }
      z = next;
    }
    data.paths.push_back(std::move(path));
  }
  return data;
}

}  // namespace latentalpha
