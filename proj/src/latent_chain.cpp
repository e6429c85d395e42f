#include "latentalpha/latent_chain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "latentalpha/error.hpp"

namespace latentalpha {

namespace {

double tolerance_for(const Matrix& m) {
  return 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
}

// Pade numerator/denominator pieces U (odd part) and V (even part) of degree m,
// following Higham (2005). exp(A) ~ (V - U)^{-1} (V + U).
template <std::size_t N>
void pade_odd_even(const Matrix& a, const std::array<double, N>& b, Matrix& u, Matrix& v) {
  const Eigen::Index n = a.rows();
  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  Matrix odd = b[1] * ident;
  Matrix even = b[0] * ident;
  Matrix power = ident;
  for (std::size_t k = 2; k < N; k += 2) {
    power = power * a2;
    even += b[k] * power;
    if (k + 1 < N) odd += b[k + 1] * power;
  }
  u = a * odd;
  v = even;
}

void pade13(const Matrix& a, Matrix& u, Matrix& v) {
  static constexpr std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
      129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
      1323241920.0,        40840800.0,          960960.0,           16380.0,
      182.0,               1.0};
  const Eigen::Index n = a.rows();
  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix inner_u = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2);
  u = a * (inner_u + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
  v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
}

}  // namespace

void LatentChainSpec::validate() const {
  const Eigen::Index j = theta.size();
  if (j < 1) throw Error(ErrorKind::InvalidArgument, "latent chain needs at least one state");
  if (generator.rows() != j || generator.cols() != j)
    throw Error(ErrorKind::InvalidArgument, "generator must be J x J");
  if (prior.size() != j) throw Error(ErrorKind::InvalidArgument, "prior must have J entries");
  if (!theta.allFinite() || !generator.allFinite() || !prior.allFinite())
    throw Error(ErrorKind::InvalidArgument, "latent chain parameters must be finite");
  const double tol = tolerance_for(generator);
  for (Eigen::Index r = 0; r < j; ++r) {
    for (Eigen::Index c = 0; c < j; ++c) {
      if (r != c && generator(r, c) < 0.0)
        throw Error(ErrorKind::InvalidArgument, "generator off-diagonal entries must be >= 0");
    }
    if (std::abs(generator.row(r).sum()) > tol)
      throw Error(ErrorKind::InvalidArgument, "generator row " + std::to_string(r) + " does not sum to 0");
  }
  if ((prior.array() < 0.0).any()) throw Error(ErrorKind::InvalidArgument, "prior entries must be >= 0");
  if (std::abs(prior.sum() - 1.0) > 1e-12) throw Error(ErrorKind::InvalidArgument, "prior must sum to 1");
}

Matrix matrix_exponential(const Matrix& m, double t) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::InvalidArgument, "matrix exponential needs a square matrix");
  if (!m.allFinite() || !std::isfinite(t))
    throw Error(ErrorKind::InvalidArgument, "matrix exponential of a non-finite matrix");
  const Eigen::Index n = m.rows();
  if (n == 0) return Matrix(0, 0);

  Matrix a = t * m;
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  if (norm == 0.0) return Matrix::Identity(n, n);

  Matrix u, v;
  int squarings = 0;
  if (norm <= 1.495585217958292e-2) {
    pade_odd_even(a, std::array<double, 4>{120.0, 60.0, 12.0, 1.0}, u, v);
  } else if (norm <= 2.539398330063230e-1) {
    pade_odd_even(a, std::array<double, 6>{30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0}, u, v);
  } else if (norm <= 9.504178996162932e-1) {
    pade_odd_even(a, std::array<double, 8>{17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0},
                  u, v);
  } else if (norm <= 2.097847961257068) {
    pade_odd_even(a,
                  std::array<double, 10>{17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                                         2162160.0, 110880.0, 3960.0, 90.0, 1.0},
                  u, v);
  } else {
    constexpr double theta13 = 5.371920351148152;
    if (norm > theta13) {
      squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta13))));
      a /= std::ldexp(1.0, squarings);
    }
    pade13(a, u, v);
  }

  Matrix result = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) result = result * result;
  return result;
}

ChainPath sample_chain_path(const LatentChainSpec& spec, double horizon, Rng& rng) {
  spec.validate();
  if (!(horizon > 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be positive");

  std::discrete_distribution<int> initial(spec.prior.data(), spec.prior.data() + spec.prior.size());
  ChainPath path;
  path.horizon = horizon;
  path.states.push_back(initial(rng));

  const auto j = static_cast<Eigen::Index>(spec.states());
  std::vector<double> weights(static_cast<std::size_t>(j));
  double t = 0.0;
  while (true) {
    const int current = path.states.back();
    const double exit_rate = -spec.generator(current, current);
    if (exit_rate <= 0.0) break;  // absorbing
    t += std::exponential_distribution<double>(exit_rate)(rng);
    if (t >= horizon) break;
    for (Eigen::Index k = 0; k < j; ++k)
      weights[static_cast<std::size_t>(k)] = (k == current) ? 0.0 : spec.generator(current, k);
    std::discrete_distribution<int> next(weights.begin(), weights.end());
    path.jump_times.push_back(t);
    path.states.push_back(next(rng));
  }
  return path;
}

ChainPath fixed_chain_path(double horizon, std::vector<double> jump_times, std::vector<int> states) {
  if (!(horizon > 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be positive");
  if (states.size() != jump_times.size() + 1)
    throw Error(ErrorKind::InvalidArgument, "a chain path needs one more state than jump times");
  for (std::size_t k = 0; k < jump_times.size(); ++k) {
    if (jump_times[k] < 0.0 || jump_times[k] > horizon || (k > 0 && jump_times[k] <= jump_times[k - 1]))
      throw Error(ErrorKind::InvalidArgument, "jump times must be strictly increasing inside [0, horizon]");
    if (states[k] == states[k + 1]) throw Error(ErrorKind::InvalidArgument, "consecutive states must differ");
  }
  for (int s : states)
    if (s < 0) throw Error(ErrorKind::InvalidArgument, "state indices must be non-negative");
  return ChainPath{horizon, std::move(jump_times), std::move(states)};
}

int state_at(const ChainPath& path, double t) {
  if (path.states.empty()) throw Error(ErrorKind::InvalidArgument, "empty chain path");
  if (t < 0.0 || t > path.horizon) throw Error(ErrorKind::InvalidArgument, "time outside [0, horizon]");
  // Right-continuous: a jump at time s is already in effect at s.
  const auto it = std::upper_bound(path.jump_times.begin(), path.jump_times.end(), t);
  return path.states[static_cast<std::size_t>(it - path.jump_times.begin())];
}

}  // namespace latentalpha
