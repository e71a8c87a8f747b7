#include <gtest/gtest.h>

#include "spectest/mixing.hpp"

using namespace spectest;

TEST(Mixing, WhiteNoiseAutocorrIsIdentity) {
  EXPECT_TRUE(ar2_autocorr(0.0, 0.0, 3).isApprox(Matrix::Identity(3, 3)));
}

TEST(Mixing, Ar2RecursionByHand) {
  const auto g = ar2_autocorr_sequence(0.3, 0.2, 3);
  EXPECT_DOUBLE_EQ(g[0], 1.0);
  EXPECT_NEAR(g[1], 0.375, 1e-15);
  EXPECT_NEAR(g[2], 0.3 * 0.375 + 0.2, 1e-15);
}

TEST(Mixing, Ar2CollapsesToGeometric) {
  const auto g = ar2_autocorr_sequence(0.5, 0.0, 4);
  for (int l = 0; l < 4; ++l) EXPECT_NEAR(g[l], std::pow(0.5, l), 1e-15);
  EXPECT_TRUE(ar2_autocorr(0.5, 0.0, 6).isApprox(ar1_autocorr(0.5, 6), 1e-14));
}

TEST(Mixing, Ar2YuleWalkerHoldsAtLagOne) {
  // ρ1 = φ1 + φ2 ρ1 is the lag-one Yule-Walker equation.
  const auto g = ar2_autocorr_sequence(-0.4, 0.35, 8);
  EXPECT_NEAR(g[1], -0.4 + 0.35 * g[1], 1e-15);
  for (int l = 2; l < 8; ++l) EXPECT_NEAR(g[l], -0.4 * g[l - 1] + 0.35 * g[l - 2], 1e-15);
}

TEST(Mixing, AdmissibleRegion) {
  EXPECT_TRUE(ar2_admissible(0.3, 0.2));
  EXPECT_TRUE(ar2_admissible(0.18, 0.18));
  EXPECT_FALSE(ar2_admissible(0.6, 0.5));
  EXPECT_FALSE(ar2_admissible(0.0, 1.0));
  // Inside the stationarity triangle but outside the disc.
  EXPECT_FALSE(ar2_admissible(-1.5, -0.6));
  EXPECT_TRUE(ar2_admissible(-1.5, -0.6, Ar2Region::Stationary));
  EXPECT_THROW(ar2_autocorr(0.9, 0.5, 4), Error);
}

TEST(Mixing, MaCoefficients) {
  const auto zero = arma_ma_coeffs(0.0, 0.0, 5).b;
  EXPECT_EQ(zero, (std::vector<double>{1, 0, 0, 0, 0}));
  const auto ar = arma_ma_coeffs(0.5, 0.0, 4).b;
  EXPECT_EQ(ar, (std::vector<double>{1, 0.5, 0.25, 0.125}));
  const auto arma = arma_ma_coeffs(0.2, 0.3, 3).b;
  EXPECT_NEAR(arma[1], 0.5, 1e-15);
  EXPECT_NEAR(arma[2], 0.1, 1e-15);
  EXPECT_THROW(arma_ma_coeffs(1.0, 0.0, 3), Error);
}

TEST(Mixing, TruncationDropsOnlyNegligibleWeights) {
  const int len = default_truncation_len(0.9, 0.0, 100);
  const auto b = arma_ma_coeffs(0.9, 0.0, len + 1).b;
  EXPECT_LT(std::abs(b[len]), 1e-12);
  EXPECT_GE(std::abs(b[len - 1]), 1e-12);
  EXPECT_EQ(default_truncation_len(0.0, 0.0, 10), 1);
}

TEST(Mixing, BandedQ) {
  const std::vector<double> one{1.0};
  EXPECT_TRUE(build_q_banded(one, 3).isApprox(Matrix::Identity(3, 3)));

  const std::vector<double> b2{1.0, 0.5};
  const Matrix q = build_q_banded(b2, 2);
  ASSERT_EQ(q.rows(), 2);
  ASSERT_EQ(q.cols(), 3);
  const Matrix t = q * q.transpose();
  EXPECT_NEAR(t(0, 0), 1.25, 1e-15);
  EXPECT_NEAR(t(1, 1), 1.25, 1e-15);
  EXPECT_NEAR(t(0, 1), 0.5, 1e-15);

  const std::vector<double> b3{1.0, 0.5, 0.25};
  const Matrix t3 = build_q_banded(b3, 3) * build_q_banded(b3, 3).transpose();
  EXPECT_NEAR(t3(0, 0), 1.3125, 1e-15);
  EXPECT_NEAR(t3(0, 1), 0.625, 1e-15);
  EXPECT_NEAR(t3(0, 2), 0.25, 1e-15);
}

TEST(Mixing, Arma11AutocovMatchesMaWeights) {
  // Independent oracle: γ_h = Σ_t b_t b_{t+h} over a long MA(∞) expansion.
  const double phi = 0.6, theta = -0.3;
  const auto b = arma_ma_coeffs(phi, theta, 400).b;
  const auto g = arma11_autocov_sequence(phi, theta, 5);
  for (int h = 0; h < 5; ++h) {
    double s = 0.0;
    for (std::size_t t = 0; t + h < b.size(); ++t) s += b[t] * b[t + h];
    EXPECT_NEAR(g[h], s, 1e-12);
  }
}

TEST(Mixing, SymmetricRoots) {
  auto id = sym_sqrt_and_inv_sqrt(Matrix::Identity(3, 3));
  EXPECT_TRUE(id.sqrt.isApprox(Matrix::Identity(3, 3)));
  EXPECT_TRUE(id.inv_sqrt.isApprox(Matrix::Identity(3, 3)));

  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 4.0, 9.0;
  auto r = sym_sqrt_and_inv_sqrt(d);
  EXPECT_NEAR(r.sqrt(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(r.sqrt(1, 1), 3.0, 1e-14);
  EXPECT_NEAR(r.inv_sqrt(0, 0), 0.5, 1e-14);
  EXPECT_NEAR(r.inv_sqrt(1, 1), 1.0 / 3.0, 1e-14);

  const Matrix t = ar2_autocorr(0.3, 0.2, 5);
  auto s = sym_sqrt_and_inv_sqrt(t);
  EXPECT_LT((s.sqrt * s.sqrt - t).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((s.inv_sqrt * t * s.inv_sqrt - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Mixing, RootsRejectIndefinite) {
  Matrix m(2, 2);
  m << 1, 2, 2, 1;
  EXPECT_THROW(sym_sqrt_and_inv_sqrt(m), Error);
  Matrix a(2, 2);
  a << 1, 0.5, 0.4, 1;
  try {
    symmetrize_checked(a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSymmetric);
  }
}

TEST(Mixing, PopulationEsd) {
  const auto one = population_esd(Matrix::Identity(4, 4));
  for (double a : one.atoms) EXPECT_NEAR(a, 1.0, 1e-14);
  EXPECT_NEAR(one.total_weight(), 1.0, 1e-15);

  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 1, 2, 3;
  const auto three = population_esd(d);
  EXPECT_NEAR(three.atoms[0], 1.0, 1e-14);
  EXPECT_NEAR(three.atoms[2], 3.0, 1e-14);
  EXPECT_NEAR(three.weights[1], 1.0 / 3.0, 1e-15);

  const auto ar = population_esd(ar2_autocorr(0.3, 0.2, 50));
  EXPECT_EQ(ar.size(), 50u);
  EXPECT_NEAR(ar.mean(), 1.0, 1e-12);
}

TEST(Mixing, BandedPrecisionInvertsAutocorr) {
  for (int p : {1, 2, 3, 7, 40}) {
    const Matrix i = Matrix::Identity(p, p);
    EXPECT_LT((ar1_precision(0.7, p).dense() * ar1_autocorr(0.7, p) - i).cwiseAbs().maxCoeff(), 1e-10) << p;
    EXPECT_LT((ar2_precision(0.3, 0.2, p).dense() * ar2_autocorr(0.3, 0.2, p) - i).cwiseAbs().maxCoeff(), 1e-10)
        << p;
    EXPECT_LT((ar2_precision(-0.5, 0.4, p).dense() * ar2_autocorr(-0.5, 0.4, p) - i).cwiseAbs().maxCoeff(), 1e-10)
        << p;
  }
}

TEST(Mixing, BandTimesMatchesDense) {
  const SymmetricBand band = ar2_precision(0.3, 0.2, 9);
  const Matrix b = Matrix::Random(9, 4);
  EXPECT_LT((band.times(b) - band.dense() * b).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Mixing, SpecCovarianceAndQ) {
  const auto ar = MixingSpec::ar1(0.5, 6);
  EXPECT_LT((ar.covariance() - ar1_autocorr(0.5, 6)).cwiseAbs().maxCoeff(), 1e-14);
  const Matrix q = ar.q_matrix();
  // Truncation error of the MA(∞) band is below 1e-12 in each entry.
  EXPECT_LT((q * q.transpose() - ar.covariance()).cwiseAbs().maxCoeff(), 1e-11);

  const auto ar2 = MixingSpec::ar2(0.3, 0.2, 8);
  const Matrix q2 = ar2.q_matrix();
  EXPECT_LT((q2 * q2.transpose() - ar2_autocorr(0.3, 0.2, 8)).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_EQ(q2.cols(), ar2.innovation_dim());

  const auto ma = MixingSpec::ma1(0.8, 5);
  const Matrix tm = ma.covariance();
  EXPECT_NEAR(tm(0, 1), 0.8 / 1.64, 1e-14);
  EXPECT_NEAR(tm(0, 2), 0.0, 1e-14);
  EXPECT_THROW(MixingSpec::ar2(0.7, 0.7, 5), Error);
}
