#pragma once

// Closed forms and brute-force references shared by the test binaries.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

#include "spectest/types.hpp"

namespace oracle {

using spectest::cplx;

/// m̲ for H = δ₁ from the quadratic, choosing the root in the upper half plane.
inline cplx mp_mbar(double y, cplx z) {
  const cplx s = std::sqrt((z - 1.0 - y) * (z - 1.0 - y) - 4.0 * y);
  const cplx a = (-(z + 1.0 - y) + s) / (2.0 * z);
  const cplx b = (-(z + 1.0 - y) - s) / (2.0 * z);
  return a.imag() > 0.0 ? a : b;
}

inline double mp_density(double y, double x) {
  const double a = (1 - std::sqrt(y)) * (1 - std::sqrt(y)), b = (1 + std::sqrt(y)) * (1 + std::sqrt(y));
  if (x <= a || x >= b) return 0.0;
  return std::sqrt((b - x) * (x - a)) / (2.0 * std::numbers::pi * y * x);
}

/// All roots of Σ c_k x^k (c.back() != 0) from the companion matrix.
inline std::vector<cplx> poly_roots(const std::vector<cplx>& c) {
  const int d = static_cast<int>(c.size()) - 1;
  Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(d, d);
  for (int i = 1; i < d; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < d; ++i) comp(i, d - 1) = -c[i] / c[d];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(comp);
  return {es.eigenvalues().data(), es.eigenvalues().data() + d};
}

inline std::vector<cplx> poly_mul(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  std::vector<cplx> r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

/// m̲(z) for a discrete H by clearing denominators in
/// z = -1/m̲ + y Σ w t/(1 + t m̲) and taking the unique root in C+.
inline cplx mbar_by_roots(double y, const std::vector<double>& t, const std::vector<double>& w, cplx z) {
  // z m̲ Π(1 + t m̲) + Π(1 + t m̲) - y m̲ Σ_i w_i t_i Π_{j≠i}(1 + t_j m̲) = 0
  std::vector<cplx> prod{1.0};
  for (double ti : t) prod = poly_mul(prod, {1.0, ti});
  std::vector<cplx> poly = poly_mul(prod, {0.0, z});
  for (std::size_t k = 0; k < prod.size(); ++k) poly[k] += prod[k];
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::vector<cplx> q{0.0, -y * w[i] * t[i]};
    for (std::size_t j = 0; j < t.size(); ++j)
      if (j != i) q = poly_mul(q, {1.0, t[j]});
    for (std::size_t k = 0; k < q.size(); ++k) poly[k] += q[k];
  }
  cplx best(0.0, -1.0);
  for (const cplx& r : poly_roots(poly))
    if (r.imag() > best.imag()) best = r;
  return best;
}

/// Equally spaced samples of the ARMA(1,1) spectral density on (0, 2π). The
/// uniform law on these atoms integrates trigonometric polynomials exactly,
/// so it stands in for the continuous limit of the Toeplitz spectrum.
inline spectest::DiscreteDistribution arma_symbol_atoms(double phi, double theta, int count) {
  std::vector<double> a(count);
  for (int k = 0; k < count; ++k) {
    const double w = 2.0 * std::numbers::pi * (k + 0.5) / count;
    a[k] = (1 + 2 * theta * std::cos(w) + theta * theta) / (1 - 2 * phi * std::cos(w) + phi * phi);
  }
  return spectest::DiscreteDistribution::uniform(std::move(a));
}

}  // namespace oracle
