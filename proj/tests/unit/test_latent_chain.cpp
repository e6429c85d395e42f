#include <gtest/gtest.h>

#include <cmath>

#include "latentalpha/error.hpp"
#include "latentalpha/latent_chain.hpp"
#include "oracles.hpp"

using namespace latentalpha;

namespace {

LatentChainSpec symmetric_chain(double rate) {
  LatentChainSpec s;
  s.theta = Vector::LinSpaced(2, 4.9, 5.1);
  s.generator.resize(2, 2);
  s.generator << -rate, rate, rate, -rate;
  s.prior = Vector::Constant(2, 0.5);
  return s;
}

}  // namespace

TEST(MatrixExponential, ZeroMatrixIsIdentity) {
  EXPECT_TRUE(matrix_exponential(Matrix::Zero(2, 2), 1.0).isApprox(Matrix::Identity(2, 2)));
}

TEST(MatrixExponential, SymmetricTwoStateMatchesEigendecomposition) {
  Matrix c(2, 2);
  c << -10, 10, 10, -10;
  for (double t : {1.0 / 3600.0, 0.05, 1.0}) {
    const Matrix got = matrix_exponential(c, t);
    const double d = std::exp(-20.0 * t);
    EXPECT_NEAR(got(0, 0), 0.5 * (1 + d), 1e-14);
    EXPECT_NEAR(got(0, 1), 0.5 * (1 - d), 1e-14);
    EXPECT_NEAR(got(1, 0), 0.5 * (1 - d), 1e-14);
    EXPECT_NEAR(got(1, 1), 0.5 * (1 + d), 1e-14);
  }
}

TEST(MatrixExponential, MatchesEigendecompositionOfRandomSymmetricMatrices) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix a(4, 4);
    for (Eigen::Index r = 0; r < 4; ++r)
      for (Eigen::Index c = 0; c < 4; ++c) a(r, c) = n(rng);
    const Matrix s = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
    const Matrix want = eig.eigenvectors() * eig.eigenvalues().array().exp().matrix().asDiagonal() *
                        eig.eigenvectors().transpose();
    EXPECT_LT((matrix_exponential(s) - want).cwiseAbs().maxCoeff(), 1e-10 * want.cwiseAbs().maxCoeff());
  }
}

TEST(MatrixExponential, GeneratorRowsSumToOne) {
  std::mt19937_64 rng(11);
  for (std::size_t j = 1; j <= 5; ++j) {
    const Matrix c = oracle::random_generator(j, rng);
    for (double t : {0.0, 0.5, 1.0, 3.7, 10.0}) {
      const Matrix p = matrix_exponential(c, t);
      EXPECT_LT((p.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10) << "J=" << j << " t=" << t;
      EXPECT_GE(p.minCoeff(), -1e-12);
    }
  }
}

TEST(MatrixExponential, SemigroupProperty) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix c = oracle::random_generator(3, rng);
    const double s = 0.1 + 0.2 * rep, t = 1.3 - 0.05 * rep;
    const Matrix lhs = matrix_exponential(c, s + t);
    const Matrix rhs = matrix_exponential(c, s) * matrix_exponential(c, t);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(MatrixExponential, RejectsNonSquare) {
  EXPECT_THROW(matrix_exponential(Matrix::Zero(2, 3)), Error);
}

TEST(ChainSpec, ValidationCatchesBrokenGenerators) {
  LatentChainSpec s = symmetric_chain(10.0);
  EXPECT_NO_THROW(s.validate());
  s.generator(0, 0) = -9.0;
  EXPECT_THROW(s.validate(), Error);
  s = symmetric_chain(10.0);
  s.prior << 0.7, 0.7;
  EXPECT_THROW(s.validate(), Error);
  s = symmetric_chain(-1.0);
  EXPECT_THROW(s.validate(), Error);
}

TEST(SampleChainPath, FrozenChainNeverJumps) {
  LatentChainSpec s = symmetric_chain(0.0);
  Rng rng(1);
  int first = 0;
  for (int i = 0; i < 2000; ++i) {
    const ChainPath p = sample_chain_path(s, 1.0, rng);
    EXPECT_EQ(p.jump_count(), 0u);
    first += p.initial_state() == 0;
  }
  EXPECT_NEAR(first / 2000.0, 0.5, 3 * std::sqrt(0.25 / 2000));
}

TEST(SampleChainPath, DegeneratePriorFixesInitialState) {
  LatentChainSpec s = symmetric_chain(10.0);
  s.prior << 1.0, 0.0;
  Rng rng(2);
  for (int i = 0; i < 500; ++i) EXPECT_EQ(sample_chain_path(s, 1.0, rng).initial_state(), 0);
}

TEST(SampleChainPath, SymmetricRateTenAveragesTenJumpsPerHour) {
  LatentChainSpec s = symmetric_chain(10.0);
  Rng rng(5);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double c = static_cast<double>(sample_chain_path(s, 1.0, rng).jump_count());
    sum += c;
    sq += c * c;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_NEAR(mean, 10.0, 3 * se);
}

TEST(SampleChainPath, OccupancyMatchesTransitionLaw) {
  std::mt19937_64 gen(21);
  LatentChainSpec s;
  s.theta = Vector::LinSpaced(3, 1.0, 3.0);
  s.generator = oracle::random_generator(3, gen, 2.0);
  s.prior = oracle::random_simplex(3, gen);
  const double t = 0.8;
  const Vector law = (s.prior.transpose() * matrix_exponential(s.generator, t)).transpose();
  Rng rng(22);
  const int n = 10000;
  Vector counts = Vector::Zero(3);
  for (int i = 0; i < n; ++i) counts(state_at(sample_chain_path(s, 1.0, rng), t)) += 1.0;
  double chi2 = 0.0;
  for (int k = 0; k < 3; ++k) chi2 += std::pow(counts(k) - n * law(k), 2) / (n * law(k));
  EXPECT_LT(chi2, 13.8);  // chi-square, 2 dof, p = 0.001
}

TEST(SampleChainPath, PathStructureIsConsistent) {
  LatentChainSpec s = symmetric_chain(30.0);
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const ChainPath p = sample_chain_path(s, 2.0, rng);
    ASSERT_EQ(p.states.size(), p.jump_times.size() + 1);
    for (std::size_t k = 0; k < p.jump_times.size(); ++k) {
      EXPECT_GT(p.jump_times[k], k ? p.jump_times[k - 1] : 0.0);
      EXPECT_LE(p.jump_times[k], 2.0);
      EXPECT_NE(p.states[k], p.states[k + 1]);
    }
  }
}

TEST(StateAt, RightContinuousConvention) {
  const ChainPath none = fixed_chain_path(1.0, {}, {1});
  EXPECT_EQ(state_at(none, 0.0), 1);
  EXPECT_EQ(state_at(none, 1.0), 1);
  const ChainPath p = fixed_chain_path(1.0, {0.5}, {0, 1});
  EXPECT_EQ(state_at(p, 0.5), 1);
  EXPECT_EQ(state_at(p, std::nextafter(0.5, 0.0)), 0);
  EXPECT_EQ(state_at(p, 0.0), 0);
  EXPECT_THROW(state_at(p, 1.5), Error);
}

TEST(FixedChainPath, RejectsMalformedPaths) {
  EXPECT_THROW(fixed_chain_path(1.0, {0.5}, {0}), Error);
  EXPECT_THROW(fixed_chain_path(1.0, {0.5, 0.4}, {0, 1, 0}), Error);
  EXPECT_THROW(fixed_chain_path(1.0, {0.5}, {1, 1}), Error);
  EXPECT_THROW(fixed_chain_path(1.0, {1.5}, {0, 1}), Error);
}
