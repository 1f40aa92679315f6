#include "rqlab/ipm.hpp"
#include "rqlab/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rqlab;

namespace {

Vector random_distribution(int n, Rng& rng, double zero_prob = 0.2) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform() < zero_prob ? 0.0 : rng.uniform();
  if (v.sum() == 0.0) v(0) = 1.0;
  return v / v.sum();
}

double subset_sup(const Vector& mu, const Vector& nu) {
  const int n = static_cast<int>(mu.size());
  double best = 0.0;
  for (long mask = 0; mask < (1L << n); ++mask) {
    double d = 0.0;
    for (int i = 0; i < n; ++i)
      if (mask & (1L << i)) d += mu(i) - nu(i);
    best = std::max(best, std::abs(d));
  }
  return best;
}

}  // namespace

TEST(TotalVariation, EqualsSubsetSupremum) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(12));
    const Vector mu = random_distribution(n, rng), nu = random_distribution(n, rng);
    const double oracle = subset_sup(mu, nu);
    EXPECT_NEAR(total_variation(mu, nu), oracle, 1e-9);
    EXPECT_NEAR(ipm_distance(IpmSpec::total_variation(n), mu, nu), oracle, 1e-9);
  }
}

TEST(Wasserstein, LineMetricMatchesCdfFormula) {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(9));
    const Vector mu = random_distribution(n, rng), nu = random_distribution(n, rng);
    double cdf = 0.0, oracle = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
      cdf += mu(i) - nu(i);
      oracle += std::abs(cdf);
    }
    EXPECT_NEAR(wasserstein(line_metric(n), mu, nu), oracle, 1e-9);
  }
}

TEST(Wasserstein, FourPointExample) {
  const Vector mu = (Vector(4) << 0.1, 0.4, 0.3, 0.2).finished();
  const Vector nu = (Vector(4) << 0.25, 0.25, 0.25, 0.25).finished();
  // |CDF differences| = 0.15, 0.0, 0.05
  EXPECT_NEAR(wasserstein(line_metric(4), mu, nu), 0.2, 1e-12);
}

TEST(Wasserstein, DiscreteMetricIsTotalVariation) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(8));
    const Vector mu = random_distribution(n, rng), nu = random_distribution(n, rng);
    EXPECT_NEAR(wasserstein(discrete_metric(n), mu, nu), total_variation(mu, nu), 1e-9);
  }
}

TEST(Wasserstein, MetricProperties) {
  Rng rng(4);
  const int n = 6;
  Matrix pts(n, 2);
  for (int i = 0; i < n; ++i) pts.row(i) << rng.uniform(), rng.uniform();
  Matrix d(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d(i, j) = (pts.row(i) - pts.row(j)).norm();
  const IpmSpec spec = IpmSpec::wasserstein(d);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector a = random_distribution(n, rng), b = random_distribution(n, rng), c = random_distribution(n, rng);
    const double ab = ipm_distance(spec, a, b);
    EXPECT_NEAR(ab, ipm_distance(spec, b, a), 1e-12);
    EXPECT_LE(ab, ipm_distance(spec, a, c) + ipm_distance(spec, c, b) + 1e-12);
    EXPECT_NEAR(ipm_distance(spec, a, a), 0.0, 1e-15);
    // Kantorovich duality: any 1-Lipschitz test function lower-bounds the cost.
    const Vector f = d.col(trial % n);
    EXPECT_LE(std::abs((a - b).dot(f)), ab + 1e-12);
  }
}

TEST(Lipschitz, MatchesPairwiseEnumeration) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Vector f(5);
    for (int i = 0; i < 5; ++i) f(i) = rng.uniform() * 10.0 - 5.0;
    const Matrix d = line_metric(5);
    double oracle = 0.0;
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j) oracle = std::max(oracle, std::abs(f(i) - f(j)) / d(i, j));
    EXPECT_NEAR(lipschitz(d, f), oracle, 1e-12);
    EXPECT_NEAR(rho(IpmSpec::wasserstein(d), f), oracle, 1e-12);
    EXPECT_NEAR(rho(IpmSpec::total_variation(5), f), f.maxCoeff() - f.minCoeff(), 1e-12);
  }
}

TEST(Mmd, KernelEntries) {
  const Matrix k = distance_kernel(4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      // |e_i| + |e_j| - |e_i - e_j| on one-hot vectors.
      const double want = i == j ? 2.0 : 2.0 - std::sqrt(2.0);
      EXPECT_NEAR(k(i, j), want, 1e-15);
    }
}

TEST(Mmd, SquaredIsQuadraticFormAndNonnegative) {
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(10));
    const Matrix k = distance_kernel(n);
    const Vector mu = random_distribution(n, rng, 0.5), nu = random_distribution(n, rng, 0.5);
    const Vector diff = mu - nu;
    const double sq = mmd_squared(k, mu, nu);
    EXPECT_NEAR(sq, diff.dot(k * diff), 1e-12);
    EXPECT_GE(sq, -1e-9);
    EXPECT_NEAR(ipm_distance(IpmSpec::mmd(n), mu, nu), std::sqrt(std::max(0.0, sq)), 1e-12);
  }
}

TEST(Mmd, RhoIsUnsupported) {
  EXPECT_THROW(rho(IpmSpec::mmd(3), Vector::Ones(3)), Unsupported);
}

TEST(IpmSpec, RejectsInvalidInputs) {
  Matrix notpsd = Matrix::Identity(2, 2);
  notpsd(0, 1) = notpsd(1, 0) = 2.0;
  EXPECT_THROW(IpmSpec::mmd(notpsd), Error);
  Matrix bad = line_metric(3);
  bad(0, 2) = bad(2, 0) = 5.0;
  EXPECT_THROW(IpmSpec::wasserstein(bad), Error);
  EXPECT_THROW(require_metric(bad), Error);
  const Vector mu = (Vector(2) << 0.5, 0.6).finished();
  EXPECT_THROW(ipm_distance(IpmSpec::total_variation(2), mu, mu), Error);
  EXPECT_EQ(parse_ipm_kind("was"), IpmKind::Wasserstein);
  EXPECT_THROW(parse_ipm_kind("kl"), Error);
  EXPECT_DOUBLE_EQ(IpmSpec::total_variation(3).diameter(), 1.0);
  EXPECT_DOUBLE_EQ(IpmSpec::wasserstein(line_metric(4)).diameter(), 3.0);
}
