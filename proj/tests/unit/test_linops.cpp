#include "dindip/linops.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace dindip;
using oracle::Mat;
using oracle::Vec;

namespace {

Vec random_vec(Index n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  return gaussian_vector<double>(n, 1.0, rng);
}

void expect_adjoint_consistent(const LinearOperator<double>& op, std::uint64_t seed) {
  const Vec x = random_vec(op.cols(), seed);
  const Vec z = random_vec(op.rows(), seed + 1);
  const double lhs = op.apply(x).dot(z);
  const double rhs = x.dot(op.apply_adjoint(z));
  EXPECT_NEAR(lhs, rhs, 1e-12 * (1 + std::abs(lhs)));
}

}  // namespace

TEST(LinearOperator, IdentityIsExact) {
  const auto op = LinearOperator<double>::identity(7);
  const Vec x = random_vec(7, 1);
  EXPECT_EQ(op.apply(x), x);
  EXPECT_EQ(op.apply_adjoint(x), x);
  EXPECT_EQ(op.densify(), Mat::Identity(7, 7));
  const auto s = spectral_summary(op);
  EXPECT_EQ(s.rank, 7);
  EXPECT_DOUBLE_EQ(s.kappa, 1.0);
}

TEST(LinearOperator, DenseAdjointPairing) {
  SplitMix64 rng(3);
  const auto op = LinearOperator<double>::dense(gaussian_matrix<double>(5, 9, 1.0, rng));
  expect_adjoint_consistent(op, 11);
  EXPECT_EQ(op.rows(), 5);
  EXPECT_EQ(op.cols(), 9);
}

TEST(LinearOperator, DimensionMismatchThrows) {
  const auto op = LinearOperator<double>::identity(4);
  EXPECT_THROW(op.apply(Vec::Zero(5)), DimensionError);
  EXPECT_THROW(op.apply_adjoint(Vec::Zero(3)), DimensionError);
}

TEST(LinearOperator, BlurMatchesExplicitCirculant) {
  for (Index side : {4, 7, 8}) {
    const auto op = make_blur_operator<double>(side, 1.0);
    const Mat ref = oracle::blur_matrix(side, 1.0);
    EXPECT_LE((op.densify() - ref).cwiseAbs().maxCoeff(), 1e-14) << "side " << side;
    expect_adjoint_consistent(op, 5);
  }
}

TEST(LinearOperator, BlurPreservesConstantImages) {
  const auto op = make_blur_operator<double>(8, 1.0);
  const Vec ones = Vec::Ones(64);
  EXPECT_LE((op.apply(ones) - ones).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LinearOperator, BlurSingularValuesFromDft) {
  const Index side = 8;
  const auto op = make_blur_operator<double>(side, 1.0);
  const auto mags = oracle::kernel_dft_magnitudes(side, 1.0);
  std::vector<double> expected;
  for (double a : mags)
    for (double b : mags) expected.push_back(a * b);
  std::sort(expected.rbegin(), expected.rend());
  const Vec got = op.singular_values();
  ASSERT_EQ(got.size(), Index(expected.size()));
  for (Index i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expected[static_cast<std::size_t>(i)], 1e-13);

  Eigen::JacobiSVD<Mat> svd(oracle::blur_matrix(side, 1.0));
  EXPECT_LE((svd.singularValues() - got).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LinearOperator, SvdComposedSpectrum) {
  const auto op = make_wellcond_operator<double>(12, 4);
  expect_adjoint_consistent(op, 9);
  const Vec s = op.singular_values();
  EXPECT_GE(s.minCoeff(), 1.0);
  EXPECT_LE(s.maxCoeff(), 2.0);
  Eigen::JacobiSVD<Mat> svd(op.densify());
  EXPECT_LE((svd.singularValues() - s).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(spectral_summary(op).kappa, 2.0);
}

TEST(LinearOperator, RandomOrthonormalIsOrthonormal) {
  SplitMix64 rng(2);
  const Mat q = random_orthonormal<double>(10, rng);
  EXPECT_LE((q.transpose() * q - Mat::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(SpectralSummary, RankDeficientAndZero) {
  Mat a = Mat::Zero(3, 4);
  a(0, 0) = 2;
  a(1, 1) = 0.5;
  const auto s = spectral_summary(LinearOperator<double>::dense(a));
  EXPECT_EQ(s.rank, 2);
  EXPECT_NEAR(s.sigma_min_nz, 0.5, 1e-15);
  EXPECT_NEAR(s.kappa, 4.0, 1e-14);
  EXPECT_THROW(spectral_summary(LinearOperator<double>::dense(Mat::Zero(2, 2))), NumericalError);
}

TEST(InverseProblem, GaussianOperatorScale) {
  // Entries with standard deviation 1/sqrt(n): |A x| ~ sqrt(m/n) |x| on average.
  double ratio = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const auto p = make_gaussian_problem<double>(50, 20, static_cast<std::uint64_t>(t));
    ratio += p.y_clean.squaredNorm() / p.x_true.squaredNorm();
  }
  EXPECT_NEAR(ratio / trials, 20.0 / 50.0, 0.03);
}

TEST(InverseProblem, SnrIsExact) {
  const auto clean = make_gaussian_problem<double>(10, 5, 3);
  EXPECT_EQ(clean.noise_norm(), 0.0);
  EXPECT_TRUE(std::isinf(clean.snr));
  const auto noisy = with_snr(clean, 2.0, 8);
  EXPECT_NEAR(noisy.y_clean.norm() / noisy.noise_norm(), 2.0, 1e-12);
  EXPECT_NEAR(noisy.snr, 2.0, 1e-12);
  EXPECT_LE((noisy.y - noisy.y_clean - noisy.noise).norm(), 1e-14);
  EXPECT_THROW(with_snr(clean, 0.0, 1), ConfigError);
}

TEST(InverseProblem, SeededConstructionIsDeterministic) {
  const auto a = make_gaussian_problem<double>(10, 5, 42);
  const auto b = make_gaussian_problem<double>(10, 5, 42);
  const auto c = make_gaussian_problem<double>(10, 5, 43);
  EXPECT_EQ(a.y, b.y);
  EXPECT_NE(a.y, c.y);
}
