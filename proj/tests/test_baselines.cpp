// SPDX-License-Identifier: Apache-2.0
#include "fpflow/baselines.hpp"
#include "fpflow/random.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace fpflow;
using namespace fpflow::baselines;

namespace {

Matrix gauss(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  return normal_matrix(n, d, rng);
}

std::vector<std::size_t> ranks(const Vector& v) {
  std::vector<std::size_t> order(std::size_t(v.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v(Eigen::Index(a)) < v(Eigen::Index(b)); });
  std::vector<std::size_t> r(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) r[order[k]] = k;
  return r;
}

}  // namespace

TEST(Baselines, GaussianMeanOfSquare) {
  Matrix x(4, 2);
  x << 0, 0, 2, 0, 0, 2, 2, 2;
  const auto m = fit_gaussian(x, 0.05);
  EXPECT_NEAR(m.mean(0), 1.0, 1e-15);
  EXPECT_NEAR(m.mean(1), 1.0, 1e-15);
  EXPECT_TRUE(m.covariance.isApprox(m.covariance.transpose(), 0.0));
}

TEST(Baselines, PcaAxisAlignedBasis) {
  Matrix x(5, 2);
  x << -2, 0, -1, 0, 0, 0, 1, 0, 3, 0;
  const auto m = fit_pca(x, 1);
  EXPECT_NEAR(std::abs(m.basis(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(m.basis(1, 0), 0.0, 1e-12);
}

TEST(Baselines, PcaFullRankReconstructsExactly) {
  const Matrix x = gauss(30, 3, 5);
  const auto m = fit_pca(x, 3);
  const Vector s = score(m, gauss(10, 3, 6));
  EXPECT_LT(s.maxCoeff(), 1e-20);
}

TEST(Baselines, PcaBasisIsOrthonormal) {
  const Matrix x = gauss(200, 8, 7);
  const auto m = fit_pca(x, 5);
  const Matrix gram = m.basis.transpose() * m.basis;
  EXPECT_LT((gram - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Baselines, MahalanobisByHand) {
  GaussianModel m;
  m.mean = Vector::Zero(2);
  m.covariance = Matrix::Identity(2, 2);
  m.chol.compute(m.covariance);
  Matrix q(1, 2);
  q << 3, 4;
  EXPECT_NEAR(score(m, q)(0), 25.0, 1e-12);
}

TEST(Baselines, KdeSinglePoint) {
  Matrix fit(1, 2);
  fit << 0.3, -0.7;
  const KdeModel m{fit, 1.0};
  EXPECT_NEAR(score(m, fit)(0), 1.8378770664093453, 1e-12);
  // fit_kde needs two points; the single-point model is built directly.
  EXPECT_THROW(fit_kde(fit), ConfigError);
}

TEST(Baselines, KdeMatchesDirectSum) {
  for (const auto [d, bw] : {std::pair<Eigen::Index, double>{2, 0.4}, {5, 1.3}, {16, 2.0}}) {
    const Matrix fit = gauss(100, d, 11 + std::uint64_t(d));
    const Matrix query = 1.5 * gauss(50, d, 12 + std::uint64_t(d));
    const Vector s = score(fit_kde(fit, bw), query);
    for (Eigen::Index i = 0; i < query.rows(); ++i) {
      const double ref = oracle::kde_direct(fit, query.row(i).transpose(), bw);
      EXPECT_NEAR(s(i), ref, 1e-10 * std::max(1.0, std::abs(ref))) << "d=" << d << " i=" << i;
    }
  }
}

TEST(Baselines, ScottBandwidth) {
  Matrix x(4, 1);
  x << 1, 2, 3, 4;
  // sd (n-1) = sqrt(5/3), factor 4^(-1/5)
  EXPECT_NEAR(scott_bandwidth(x), std::pow(4.0, -0.2) * std::sqrt(5.0 / 3.0), 1e-14);
}

TEST(Baselines, TranslationEquivariance) {
  const Matrix fit = gauss(80, 4, 21);
  const Matrix query = gauss(30, 4, 22);
  Eigen::RowVectorXd shift(4);
  shift << 3.0, -7.5, 0.25, 11.0;
  const Matrix fit_s = fit.rowwise() + shift;
  const Matrix query_s = query.rowwise() + shift;
  for (Kind k : {Kind::kde, Kind::pca, Kind::gaussian}) {
    BaselineConfig cfg;
    cfg.kind = k;
    const Vector a = score_baseline(fit_baseline(cfg, fit), query);
    const Vector b = score_baseline(fit_baseline(cfg, fit_s), query_s);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, a.cwiseAbs().maxCoeff())) << to_string(k);
  }
}

TEST(Baselines, GaussianRankInvariantUnderLinearMaps) {
  // Exact invariance holds for the unshrunk Mahalanobis distance; shrinkage
  // toward an isotropic target is deliberately not affine invariant.
  const Matrix fit = gauss(200, 3, 31);
  const Matrix query = 2.0 * gauss(60, 3, 32);
  Matrix a(3, 3);
  a << 2.0, 0.3, -1.0, 0.0, 0.5, 0.7, 1.1, -0.4, 3.0;
  const Vector s0 = score(fit_gaussian(fit, 0.0), query);
  const Vector s1 = score(fit_gaussian(fit * a.transpose(), 0.0), query * a.transpose());
  EXPECT_EQ(ranks(s0), ranks(s1));
  EXPECT_LT((s0 - s1).cwiseAbs().maxCoeff(), 1e-9 * s0.maxCoeff());
}

TEST(Baselines, SingularCovarianceAsksForShrinkage) {
  Matrix x(10, 3);
  for (int i = 0; i < 10; ++i) x.row(i) << i, 2.0 * i, -i;
  try {
    fit_gaussian(x, 0.0);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("raise the shrinkage"), std::string::npos);
  }
  EXPECT_NO_THROW(fit_gaussian(x, 0.5));
}

TEST(Baselines, ArgumentChecks) {
  const Matrix x = gauss(5, 3, 41);
  EXPECT_THROW(fit_pca(x, 0), ConfigError);
  EXPECT_THROW(fit_pca(x, 4), ConfigError);
  EXPECT_THROW(fit_pca(gauss(3, 5, 42), 3), ConfigError);
  EXPECT_NO_THROW(fit_pca(gauss(3, 5, 42), 2));
  EXPECT_THROW(fit_gaussian(x, 1.5), ConfigError);
  EXPECT_THROW(fit_gaussian(x.topRows(1), 0.1), ConfigError);
  EXPECT_THROW(fit_kde(x, 0.0), NumericError);
  EXPECT_THROW(fit_kde(Matrix::Ones(6, 2)), NumericError);
  BaselineConfig cfg;
  EXPECT_THROW(score_baseline(fit_baseline(cfg, x), gauss(2, 4, 43)), std::invalid_argument);
}

TEST(Baselines, FitIsDeterministic) {
  const Matrix x = gauss(60, 6, 51);
  const Matrix q = gauss(20, 6, 52);
  for (Kind k : {Kind::kde, Kind::pca, Kind::gaussian}) {
    BaselineConfig cfg;
    cfg.kind = k;
    const Vector a = score_baseline(fit_baseline(cfg, x), q);
    const Vector b = score_baseline(fit_baseline(cfg, x), q);
    EXPECT_TRUE(a == b) << to_string(k);
  }
}
