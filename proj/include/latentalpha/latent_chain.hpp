#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "latentalpha/random.hpp"

namespace latentalpha {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Hidden continuous-time Markov chain: state values, generator (rows sum to
/// zero, per unit time) and prior over the initial state.
struct LatentChainSpec {
  Vector theta;
  Matrix generator;
  Vector prior;

  std::size_t states() const { return static_cast<std::size_t>(theta.size()); }

  /// Throws Error{InvalidArgument} when any invariant is broken.
  void validate() const;
};

/// Right-continuous piecewise-constant path of the latent chain on [0, horizon].
/// `states` holds one more entry than `jump_times`; states are 0-based.
struct ChainPath {
  double horizon = 0.0;
  std::vector<double> jump_times;
  std::vector<int> states;

  int initial_state() const { return states.front(); }
  std::size_t jump_count() const { return jump_times.size(); }
};

/// e^{tM} by scaling and squaring with a diagonal Pade core.
Matrix matrix_exponential(const Matrix& m, double t = 1.0);

/// Gillespie simulation of the chain.
ChainPath sample_chain_path(const LatentChainSpec& spec, double horizon, Rng& rng);

/// Path that starts in `initial` and switches at the given times (validated).
ChainPath fixed_chain_path(double horizon, std::vector<double> jump_times, std::vector<int> states);

int state_at(const ChainPath& path, double t);

}  // namespace latentalpha
