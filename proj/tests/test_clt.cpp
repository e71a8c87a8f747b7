#include <gtest/gtest.h>

#include <random>

#include "spectest/clt.hpp"

using namespace spectest;

namespace {

ContourSpec contour_for(const SpectrumModel& m) { return ContourSpec::around(support_intervals(m)); }

std::vector<TestFunction> monomials(int L) {
  std::vector<TestFunction> fs;
  for (int l = 1; l <= L; ++l) fs.push_back(as_test_function(Polynomial::monomial(l)));
  return fs;
}

}  // namespace

TEST(Clt, InverseMapDerivative) {
  const auto model = SpectrumModel::identity(0.5);
  const cplx d = dz_dmbar(model, cplx(0, 1));
  EXPECT_NEAR(d.real(), -1.0, 1e-15);
  EXPECT_NEAR(d.imag(), 0.25, 1e-15);

  const SpectrumModel two{0.3, {{0.5, 2.0}, {0.4, 0.6}}};
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const double h = 1e-6;
  for (int k = 0; k < 20; ++k) {
    const cplx m(u(gen), u(gen));
    const cplx fd = (inverse_map(two, m + h) - inverse_map(two, m - h)) / (2.0 * h);
    EXPECT_LT(std::abs(fd - dz_dmbar(two, m)), 1e-6 * std::max(1.0, std::abs(fd))) << m;
  }
  const cplx m(0.3, 0.7);
  EXPECT_LT(std::abs(dz_dmbar(SpectrumModel::identity(1e-12), m) - 1.0 / (m * m)), 1e-10);
  EXPECT_THROW(dz_dmbar(model, cplx(-1.0, 0.0)), Error);
}

TEST(Clt, MeanAnchorsForIdentity) {
  for (double y : {0.3, 0.5, 2.0}) {
    const auto model = SpectrumModel::identity(y);
    for (double beta : {0.0, -2.0, 1.5}) {
      const auto r = clt_mean_vector(model, {1.0, beta}, monomials(2), contour_for(model));
      EXPECT_NEAR(r[0].value, 0.0, 1e-8) << y << " " << beta;
      EXPECT_NEAR(r[1].value, y * (1.0 + beta), 1e-8) << y << " " << beta;
    }
  }
}

TEST(Clt, MeanVanishesWithoutFourthMomentTerms) {
  const SpectrumModel model{0.4, {{1.0, 3.0}, {0.5, 0.5}}};
  const auto r = clt_mean_vector(model, {0.0, 0.0}, monomials(3), contour_for(model));
  for (const auto& v : r) EXPECT_NEAR(v.value, 0.0, 1e-10);
}

TEST(Clt, MeanOfSquareForDiagonalPopulation) {
  // E tr(B²) - p F^(2) = (1 + β) tr(T²)/n exactly for diagonal T.
  const std::vector<double> t{0.5, 2.0}, w{0.4, 0.6};
  const SpectrumModel model{0.4, {t, w}};
  const double t2 = w[0] * t[0] * t[0] + w[1] * t[1] * t[1];
  for (double beta : {0.0, 1.0, -1.2}) {
    const auto r = clt_mean_vector(model, {1.0, beta}, monomials(2), contour_for(model));
    EXPECT_NEAR(r[0].value, 0.0, 1e-8);
    EXPECT_NEAR(r[1].value, 0.4 * (1.0 + beta) * t2, 1e-8) << beta;
  }
}

TEST(Clt, CovarianceOfTraceMatchesExactVariance) {
  // Var(tr B) = (2 tr T² + β Σ T_ii²)/n for diagonal T.
  for (auto [t, w] : {std::pair{std::vector<double>{1.0}, std::vector<double>{1.0}},
                      {std::vector<double>{0.5, 2.0}, std::vector<double>{0.4, 0.6}},
                      {std::vector<double>{1.0, 4.0, 9.0}, std::vector<double>{0.2, 0.5, 0.3}}}) {
    const SpectrumModel model{0.6, {t, w}};
    double t2 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) t2 += w[i] * t[i] * t[i];
    for (double beta : {0.0, -2.0, 1.0}) {
      const auto r = clt_cov_matrix(model, {1.0, beta}, monomials(1), contour_for(model));
      EXPECT_NEAR(r.value(0, 0), 0.6 * (2.0 + beta) * t2, 1e-7 * t2) << t.size() << " " << beta;
    }
  }
}

TEST(Clt, VarianceOfSquareIdentityGaussian) {
  // Gaussian H = δ₁: Var(tr B²) → 4y(2 + 5y + 2y²).
  for (double y : {0.25, 0.5, 0.9, 1.7}) {
    const auto model = SpectrumModel::identity(y);
    const auto r = clt_cov_matrix(model, {}, monomials(2), contour_for(model));
    EXPECT_NEAR(r.value(1, 1), 4 * y * (2 + 5 * y + 2 * y * y), 1e-7) << y;
    EXPECT_NEAR(r.value(0, 1), 4 * y * (1 + y), 1e-7) << y;
  }
}

TEST(Clt, ScalingOfPopulation) {
  // H = δ_s: B scales by s, so μ(x^k) and σ(x^k, x^l) scale by s^k and s^{k+l}.
  const double s = 2.5, y = 0.5;
  const SpectrumModel scaled{y, DiscreteDistribution::point_mass(s)};
  const auto base = SpectrumModel::identity(y);
  const PopulationMoments pop{1.0, 0.7};
  const auto m1 = clt_mean_vector(base, pop, monomials(3), contour_for(base));
  const auto m2 = clt_mean_vector(scaled, pop, monomials(3), contour_for(scaled));
  const auto c1 = clt_cov_matrix(base, pop, monomials(3), contour_for(base));
  const auto c2 = clt_cov_matrix(scaled, pop, monomials(3), contour_for(scaled));
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(m2[k].value, std::pow(s, k + 1) * m1[k].value, 1e-7 * std::pow(s, k + 1));
    for (int l = 0; l < 3; ++l)
      EXPECT_NEAR(c2.value(k, l), std::pow(s, k + l + 2) * c1.value(k, l), 1e-6 * std::pow(s, k + l + 2));
  }
}

TEST(Clt, ConstantFunctionHasNoFluctuation) {
  const auto model = SpectrumModel::identity(0.5);
  const double c = clt_cov(model, {}, Polynomial::monomial(1), Polynomial::constant(1.0), contour_for(model));
  EXPECT_NEAR(c, 0.0, 1e-10);
}

TEST(Clt, RealReductionMatchesLogKernel) {
  const SpectrumModel model{0.7, {{0.5, 1.5, 4.0}, {0.3, 0.4, 0.3}}};
  for (double beta : {0.0, 1.3}) {
    const auto a = clt_cov_matrix(model, {1.0, beta}, monomials(3), contour_for(model), true);
    const auto b = clt_cov_matrix(model, {1.0, beta}, monomials(3), contour_for(model), false);
    EXPECT_TRUE(a.real_reduction);
    EXPECT_FALSE(b.real_reduction);
    EXPECT_LT((a.value - b.value).cwiseAbs().maxCoeff(), 1e-7 * a.value.cwiseAbs().maxCoeff());
  }
}

TEST(Clt, ComplexPopulationHalvesGaussianPart) {
  // α_x = 0 drops the log term: the Gaussian covariance is half the real one.
  const auto model = SpectrumModel::identity(0.5);
  const auto real = clt_cov_matrix(model, {1.0, 0.0}, monomials(2), contour_for(model));
  const auto cplx_pop = clt_cov_matrix(model, {0.0, 0.0}, monomials(2), contour_for(model));
  EXPECT_LT((real.value - 2.0 * cplx_pop.value).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Clt, ContourAgreesWithClosedMoments) {
  for (double y : {0.25, 0.5, 0.9}) {
    for (double beta : {0.0, -2.0, 1.0}) {
      const auto model = SpectrumModel::identity(y);
      const auto ms = closed_moments(y, beta, 4);
      const auto mean = clt_mean_vector(model, {1.0, beta}, monomials(4), contour_for(model));
      const auto cov = clt_cov_matrix(model, {1.0, beta}, monomials(4), contour_for(model));
      for (int l = 0; l < 4; ++l) {
        EXPECT_NEAR(mean[l].value, ms.mu[l], 1e-6) << y << " " << beta << " " << l;
        for (int k = 0; k < 4; ++k) EXPECT_NEAR(cov.value(l, k), ms.sigma(l, k), 1e-6);
      }
    }
  }
}

TEST(Clt, ContourValidation) {
  const auto model = SpectrumModel::identity(0.5);
  ContourSpec c = contour_for(model);
  c.x_r = 1.0;
  try {
    clt_mean(model, {}, Polynomial::monomial(1), c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularPairing);
  }
  ContourSpec d = contour_for(model);
  d.nodes_per_side = 7;
  EXPECT_THROW(clt_mean(model, {}, Polynomial::monomial(1), d), Error);
  EXPECT_THROW(clt_mean(model, {2.0, 0.0}, Polynomial::monomial(1), contour_for(model)), Error);
}

TEST(Clt, CoarseContourIsReported) {
  const auto model = SpectrumModel::identity(0.5);
  ContourSpec c = contour_for(model);
  c.nodes_per_side = 8;
  try {
    clt_cov_matrix(model, {}, monomials(4), c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ContourTooClose);
  }
}

TEST(Clt, ClosedMomentsSmallCases) {
  const auto one = closed_moments(0.5, 0.0, 1);
  EXPECT_DOUBLE_EQ(one.F[0], 1.0);
  EXPECT_NEAR(one.mu[0], 0.0, 1e-15);
  EXPECT_NEAR(one.sigma(0, 0), 1.0, 1e-14);

  const auto rad = closed_moments(0.3, -2.0, 1);
  EXPECT_NEAR(rad.sigma(0, 0), 0.0, 1e-14);

  const auto two = closed_moments(0.5, 0.0, 2);
  EXPECT_NEAR(two.F[1], 1.5, 1e-12);
  EXPECT_NEAR(two.mu[1], 0.5, 1e-12);
  const auto model = SpectrumModel::identity(0.5);
  EXPECT_NEAR(two.sigma(1, 1), clt_cov(model, {}, Polynomial::monomial(2), Polynomial::monomial(2), contour_for(model)),
              1e-6);

  // F^(ℓ) are the Narayana polynomials Σ_k N(ℓ, k) y^{k-1}.
  const auto f = closed_moments(0.7, 0.0, 4).F;
  EXPECT_NEAR(f[2], 1 + 3 * 0.7 + 0.49, 1e-12);
  EXPECT_NEAR(f[3], 1 + 6 * 0.7 + 6 * 0.49 + 0.343, 1e-12);

  const auto small = closed_moments(1e-4, 1.0, 4);
  EXPECT_LT(small.sigma.cwiseAbs().maxCoeff(), 0.01);
}

TEST(Clt, ConstantPowerReadingIsBiased) {
  const auto ms = closed_moments(0.4, 0.0, 1, SigmaExponent::L1PlusL2, true);
  EXPECT_NEAR(ms.mu[0], 0.3, 1e-14);
  const auto alt = closed_moments(0.4, 0.0, 2, SigmaExponent::LPlusLPrime);
  const auto ref = closed_moments(0.4, 0.0, 2);
  EXPECT_GT(std::abs(alt.sigma(1, 1) - ref.sigma(1, 1)), 1e-3);
}

TEST(Clt, LssCenter) {
  const auto half = SpectrumModel::identity(0.5);
  EXPECT_NEAR(lss_center(half, Polynomial::monomial(1)), 1.0, 1e-6);
  EXPECT_NEAR(lss_center(half, Polynomial::monomial(2)), 1.5, 1e-6);
  EXPECT_NEAR(lss_center(SpectrumModel::identity(2.0), Polynomial::constant(1.0)), 1.0, 1e-6);
  EXPECT_NEAR(lss_center(SpectrumModel::identity(2.0), Polynomial::monomial(1)), 1.0, 1e-6);
}

TEST(Clt, Standardize) {
  EXPECT_DOUBLE_EQ(standardize_lss(5, 5, 0, 1), 0.0);
  EXPECT_DOUBLE_EQ(standardize_lss(7, 5, 1, 2), 0.5);
  EXPECT_THROW(standardize_lss(1, 0, 0, 0.0), Error);
}
