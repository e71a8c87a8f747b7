#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>

#include "spectest/error.hpp"
#include "spectest/types.hpp"

namespace spectest {

/// Admissible (φ1, φ2) region for AR(2) models. `Strict` is the smaller
/// region φ1² + φ2² < 1, φ2 + |φ1| < 1 used by the structure tests;
/// `Stationary` is the classical stationarity triangle.
enum class Ar2Region { Strict, Stationary };

inline bool ar2_admissible(double phi1, double phi2, Ar2Region region = Ar2Region::Strict) {
  if (!std::isfinite(phi1) || !std::isfinite(phi2)) return false;
  if (region == Ar2Region::Strict) return phi1 * phi1 + phi2 * phi2 < 1.0 && phi2 + std::abs(phi1) < 1.0;
  return phi2 + phi1 < 1.0 && phi2 - phi1 < 1.0 && std::abs(phi2) < 1.0;
}

inline void check_arma_region(double phi, double theta) {
  require(std::isfinite(phi) && std::isfinite(theta) && std::abs(phi) < 1.0 && std::abs(theta) < 1.0,
          ErrorCode::ParameterOutOfRegion, "ARMA(1,1) needs |phi| < 1 and |theta| < 1");
}

/// Toeplitz matrix with first column `gamma` (gamma.size() >= p).
inline Matrix toeplitz(std::span<const double> gamma, int p) {
  Matrix t(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) t(i, j) = gamma[std::abs(i - j)];
  return t;
}

/// AR(2) autocorrelations γ_0..γ_{p-1} with γ_0 = 1.
inline std::vector<double> ar2_autocorr_sequence(double phi1, double phi2, int p,
                                                 Ar2Region region = Ar2Region::Strict) {
  require(p >= 1, ErrorCode::DegenerateDimension, "dimension must be positive");
  require(ar2_admissible(phi1, phi2, region), ErrorCode::ParameterOutOfRegion,
          "AR(2) coefficients (" + std::to_string(phi1) + ", " + std::to_string(phi2) + ") outside the admissible region");
  std::vector<double> g(p);
  g[0] = 1.0;
  if (p > 1) g[1] = phi1 / (1.0 - phi2);
  for (int l = 2; l < p; ++l) g[l] = phi1 * g[l - 1] + phi2 * g[l - 2];
  return g;
}

inline Matrix ar2_autocorr(double phi1, double phi2, int p, Ar2Region region = Ar2Region::Strict) {
  const auto g = ar2_autocorr_sequence(phi1, phi2, p, region);
  return toeplitz(g, p);
}

/// AR(1) correlation matrix (φ^{|i-j|}).
inline Matrix ar1_autocorr(double phi, int p) {
  require(p >= 1, ErrorCode::DegenerateDimension, "dimension must be positive");
  require(std::isfinite(phi) && std::abs(phi) < 1.0, ErrorCode::ParameterOutOfRegion, "AR(1) needs |phi| < 1");
  std::vector<double> g(p);
  g[0] = 1.0;
  for (int l = 1; l < p; ++l) g[l] = g[l - 1] * phi;
  return toeplitz(g, p);
}

/// Autocovariances of the unit-innovation ARMA(1,1) process
/// y_t = φ y_{t-1} + θ e_{t-1} + e_t.
inline std::vector<double> arma11_autocov_sequence(double phi, double theta, int p) {
  check_arma_region(phi, theta);
  require(p >= 1, ErrorCode::DegenerateDimension, "dimension must be positive");
  std::vector<double> g(p);
  const double denom = 1.0 - phi * phi;
  g[0] = (1.0 + 2.0 * phi * theta + theta * theta) / denom;
  if (p > 1) g[1] = (phi + theta) * (1.0 + phi * theta) / denom;
  for (int l = 2; l < p; ++l) g[l] = phi * g[l - 1];
  return g;
}

struct MaCoefficients {
  std::vector<double> b;
  /// |b_{L-1}|, the smallest retained coefficient.
  double last_magnitude = 0.0;
};

/// MA(∞) weights of ARMA(1,1): b_0 = 1, b_1 = φ + θ, b_t = φ b_{t-1}.
inline MaCoefficients arma_ma_coeffs(double phi, double theta, int length) {
  check_arma_region(phi, theta);
  require(length >= 1, ErrorCode::DegenerateDimension, "coefficient count must be positive");
  MaCoefficients out;
  out.b.resize(length);
  out.b[0] = 1.0;
  if (length > 1) out.b[1] = phi + theta;
  for (int t = 2; t < length; ++t) out.b[t] = phi * out.b[t - 1];
  out.last_magnitude = std::abs(out.b.back());
  return out;
}

/// Smallest L whose first dropped ARMA(1,1) weight |b_L| is below `cutoff`,
/// capped at 10 p.
inline int default_truncation_len(double phi, double theta, int p, double cutoff = 1e-12) {
  check_arma_region(phi, theta);
  const int cap = std::max(1, 10 * p);
  double dropped = std::abs(phi + theta);  // |b_1|
  int len = 1;
  while (dropped >= cutoff && len < cap) {
    ++len;
    dropped *= std::abs(phi);
  }
  return len;
}

/// Banded p × (p + L - 1) mixing matrix with (Qx)_i = Σ_t b_t x_{i-t}. Column
/// c carries innovation index c - (L - 1).
inline Matrix build_q_banded(std::span<const double> b, int p) {
  require(!b.empty(), ErrorCode::DegenerateDimension, "coefficient vector is empty");
  require(p >= 1, ErrorCode::DegenerateDimension, "dimension must be positive");
  const int len = static_cast<int>(b.size());
  Matrix q = Matrix::Zero(p, p + len - 1);
  for (int i = 0; i < p; ++i)
    for (int t = 0; t < len; ++t) q(i, i - t + len - 1) = b[t];
  return q;
}

struct SymmetricRoots {
  Matrix sqrt;
  Matrix inv_sqrt;
  /// Smallest eigenvalue of the input.
  double min_eigenvalue = 0.0;
};

/// Σ^{1/2} and Σ^{-1/2} from one symmetric eigendecomposition.
inline SymmetricRoots sym_sqrt_and_inv_sqrt(const Matrix& sigma, double rel_tol = 1e-13) {
  require(sigma.rows() == sigma.cols() && sigma.rows() > 0, ErrorCode::DimensionMismatch, "matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  require(es.info() == Eigen::Success, ErrorCode::ConvergenceFailure, "symmetric eigensolver failed");
  const Vector& ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = std::max(std::abs(ev.maxCoeff()), std::abs(lo));
  require(lo > rel_tol * hi && lo > 0.0, ErrorCode::NotPositiveDefinite,
          "smallest eigenvalue " + std::to_string(lo) + " is not positive");
  const Matrix& v = es.eigenvectors();
  SymmetricRoots r;
  r.min_eigenvalue = lo;
  r.sqrt = v * ev.cwiseSqrt().asDiagonal() * v.transpose();
  r.inv_sqrt = v * ev.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  // Remove the rounding asymmetry of the triple product.
  r.sqrt = 0.5 * (r.sqrt + r.sqrt.transpose()).eval();
  r.inv_sqrt = 0.5 * (r.inv_sqrt + r.inv_sqrt.transpose()).eval();
  return r;
}

/// Symmetrizes an I/O-supplied covariance. Relative asymmetry above `tol` is
/// rejected; below it the input is replaced by (Σ + Σᵀ)/2.
inline Matrix symmetrize_checked(const Matrix& sigma, double tol = 1e-8) {
  require(sigma.rows() == sigma.cols() && sigma.rows() > 0, ErrorCode::DimensionMismatch,
          "covariance must be square, got " + std::to_string(sigma.rows()) + "x" + std::to_string(sigma.cols()));
  const double scale = sigma.cwiseAbs().maxCoeff();
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  require(asym <= tol * std::max(scale, 1e-300), ErrorCode::NotSymmetric, "covariance is not symmetric");
  return 0.5 * (sigma + sigma.transpose());
}

/// Empirical spectral distribution of a symmetric matrix: eigenvalues with
/// weight 1/p each.
inline DiscreteDistribution population_esd(const Matrix& t) {
  require(t.rows() == t.cols() && t.rows() > 0, ErrorCode::DimensionMismatch, "matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(t, Eigen::EigenvaluesOnly);
  require(es.info() == Eigen::Success, ErrorCode::ConvergenceFailure, "symmetric eigensolver failed");
  const Vector& ev = es.eigenvalues();
  return DiscreteDistribution::uniform(std::vector<double>(ev.data(), ev.data() + ev.size()));
}

/// Symmetric banded matrix stored by diagonals: diag(d, i) = A(i, i + d).
struct SymmetricBand {
  int p = 0;
  int bandwidth = 0;
  Matrix diags;  // (bandwidth + 1) × p, tail entries of each row unused

  double operator()(int i, int j) const {
    if (i > j) std::swap(i, j);
    const int d = j - i;
    return d > bandwidth ? 0.0 : diags(d, i);
  }

  Matrix dense() const {
    Matrix a = Matrix::Zero(p, p);
    for (int d = 0; d <= bandwidth; ++d)
      for (int i = 0; i + d < p; ++i) a(i, i + d) = a(i + d, i) = diags(d, i);
    return a;
  }

  /// A * B in O(bandwidth p^2).
  Matrix times(const Matrix& b) const {
    Matrix out = Matrix::Zero(p, b.cols());
    for (int d = 0; d <= bandwidth; ++d) {
      for (int i = 0; i + d < p; ++i) {
        const double a = diags(d, i);
        if (a == 0.0) continue;
        out.row(i) += a * b.row(i + d);
        if (d > 0) out.row(i + d) += a * b.row(i);
      }
    }
    return out;
  }
};

/// Inverse of the AR(1) correlation matrix (φ^{|i-j|}); tridiagonal.
inline SymmetricBand ar1_precision(double phi, int p) {
  require(p >= 1, ErrorCode::DegenerateDimension, "dimension must be positive");
  require(std::isfinite(phi) && std::abs(phi) < 1.0, ErrorCode::ParameterOutOfRegion, "AR(1) needs |phi| < 1");
  SymmetricBand band{p, 1, Matrix::Zero(2, p)};
  const double s = 1.0 / (1.0 - phi * phi);
  for (int i = 0; i < p; ++i) band.diags(0, i) = (i == 0 || i == p - 1) ? s : s * (1.0 + phi * phi);
  if (p == 1) band.diags(0, 0) = 1.0;
  for (int i = 0; i + 1 < p; ++i) band.diags(1, i) = -phi * s;
  return band;
}

/// Inverse of the AR(2) correlation matrix. The stationary AR(2) precision is
/// pentadiagonal: the exact density factors into the stationary law of the
/// first two coordinates times the innovations e_t = y_t - φ1 y_{t-1} - φ2 y_{t-2}.
inline SymmetricBand ar2_precision(double phi1, double phi2, int p, Ar2Region region = Ar2Region::Strict) {
  const auto g = ar2_autocorr_sequence(phi1, phi2, std::max(p, 2), region);
  const double gamma0 = (1.0 - phi2) / ((1.0 + phi2) * ((1.0 - phi2) * (1.0 - phi2) - phi1 * phi1));
  SymmetricBand band{p, 2, Matrix::Zero(3, p)};
  if (p == 1) {
    band.diags(0, 0) = 1.0;
    return band;
  }
  // Inverse of the unit-innovation covariance, scaled by γ0 at the end.
  const double c0 = gamma0, c1 = gamma0 * g[1];
  const double det = c0 * c0 - c1 * c1;
  band.diags(0, 0) += c0 / det;
  band.diags(0, 1) += c0 / det;
  band.diags(1, 0) += -c1 / det;
  const double a[3] = {1.0, -phi1, -phi2};  // coefficients on y_t, y_{t-1}, y_{t-2}
  for (int t = 2; t < p; ++t) {
    // indices t, t-1, t-2 with weights a[0], a[1], a[2]
    for (int u = 0; u < 3; ++u) {
      for (int v = u; v < 3; ++v) {
        const int i = t - v, j = t - u;  // i <= j
        band.diags(j - i, i) += a[u] * a[v];
      }
    }
  }
  band.diags *= gamma0;
  return band;
}

struct ExplicitQ {
  Matrix q;
};
struct ExplicitSigma {
  Matrix sigma;
};
struct Ar1 {
  double phi;
};
struct Ar2 {
  double phi1;
  double phi2;
};
struct Ma1 {
  double theta;
};
struct Arma11 {
  double phi;
  double theta;
};

/// Mixing structure y = Q x of the observations. Time-series kinds are
/// normalized to unit marginal variance, so their population covariance is
/// the autocorrelation Toeplitz matrix (γ_0 = 1) and Q is the truncated
/// MA(∞) band scaled by 1/sqrt(γ_0).
class MixingSpec {
 public:
  using Kind = std::variant<ExplicitQ, ExplicitSigma, Ar1, Ar2, Ma1, Arma11>;

  static MixingSpec explicit_q(Matrix q) {
    require(q.rows() >= 1 && q.cols() >= 1, ErrorCode::DegenerateDimension, "Q must be non-empty");
    const int p = static_cast<int>(q.rows());
    const int k = static_cast<int>(q.cols());
    return MixingSpec(ExplicitQ{std::move(q)}, p, k);
  }

  static MixingSpec explicit_sigma(const Matrix& sigma) {
    Matrix s = symmetrize_checked(sigma);
    sym_sqrt_and_inv_sqrt(s);  // throws NotPositiveDefinite
    const int p = static_cast<int>(s.rows());
    return MixingSpec(ExplicitSigma{std::move(s)}, p, p);
  }

  static MixingSpec ar1(double phi, int p) { return arma11(phi, 0.0, p, Ar1{phi}); }
  static MixingSpec ma1(double theta, int p) { return arma11(0.0, theta, p, Ma1{theta}); }
  static MixingSpec arma11(double phi, double theta, int p) { return arma11(phi, theta, p, Arma11{phi, theta}); }

  static MixingSpec ar2(double phi1, double phi2, int p, Ar2Region region = Ar2Region::Strict) {
    require(p >= 1, ErrorCode::DegenerateDimension, "dimension must be positive");
    require(ar2_admissible(phi1, phi2, region), ErrorCode::ParameterOutOfRegion,
            "AR(2) coefficients outside the admissible region");
    // ψ_0 = 1, ψ_1 = φ1, ψ_k = φ1 ψ_{k-1} + φ2 ψ_{k-2}; stop once two
    // consecutive weights are negligible.
    const int cap = std::max(2, 10 * p);
    std::vector<double> psi{1.0, phi1};
    while (static_cast<int>(psi.size()) < cap) {
      const std::size_t k = psi.size();
      if (std::abs(psi[k - 1]) < 1e-12 && std::abs(psi[k - 2]) < 1e-12) break;
      psi.push_back(phi1 * psi[k - 1] + phi2 * psi[k - 2]);
    }
    while (psi.size() > 1 && std::abs(psi.back()) < 1e-12) psi.pop_back();
    MixingSpec m(Ar2{phi1, phi2}, p, p + static_cast<int>(psi.size()) - 1);
    m.region_ = region;
    m.ma_ = std::move(psi);
    return m;
  }

  const Kind& kind() const noexcept { return kind_; }
  int dim() const noexcept { return p_; }
  /// Number of innovation coordinates k (columns of Q).
  int innovation_dim() const noexcept { return k_; }
  bool is_time_series() const noexcept {
    return !std::holds_alternative<ExplicitQ>(kind_) && !std::holds_alternative<ExplicitSigma>(kind_);
  }
  /// MA(∞) truncation length (number of retained weights); 0 for explicit kinds.
  int truncation_len() const noexcept { return static_cast<int>(ma_.size()); }
  const std::vector<double>& ma_weights() const noexcept { return ma_; }

  /// Exact autocovariance sequence of the underlying unit-innovation process.
  std::vector<double> autocov_sequence() const {
    return std::visit(
        [&](const auto& k) -> std::vector<double> {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Ar1>) {
            return arma11_autocov_sequence(k.phi, 0.0, p_);
          } else if constexpr (std::is_same_v<K, Ma1>) {
            return arma11_autocov_sequence(0.0, k.theta, p_);
          } else if constexpr (std::is_same_v<K, Arma11>) {
            return arma11_autocov_sequence(k.phi, k.theta, p_);
          } else if constexpr (std::is_same_v<K, Ar2>) {
            auto g = ar2_autocorr_sequence(k.phi1, k.phi2, p_, region_);
            const double gamma0 = (1.0 - k.phi2) / ((1.0 + k.phi2) * ((1.0 - k.phi2) * (1.0 - k.phi2) - k.phi1 * k.phi1));
            for (auto& v : g) v *= gamma0;
            return g;
          } else {
            throw Error(ErrorCode::InvalidModel, "explicit mixing has no autocovariance sequence");
          }
        },
        kind_);
  }

  /// Population covariance T = QQ* (autocorrelation matrix for time-series kinds).
  Matrix covariance() const {
    if (const auto* q = std::get_if<ExplicitQ>(&kind_)) return q->q * q->q.transpose();
    if (const auto* s = std::get_if<ExplicitSigma>(&kind_)) return s->sigma;
    auto g = autocov_sequence();
    const double g0 = g[0];
    for (auto& v : g) v /= g0;
    return toeplitz(g, p_);
  }

  /// Mixing matrix Q (p × k). For ExplicitSigma this is Σ^{1/2}.
  Matrix q_matrix() const {
    if (const auto* q = std::get_if<ExplicitQ>(&kind_)) return q->q;
    if (const auto* s = std::get_if<ExplicitSigma>(&kind_)) return sym_sqrt_and_inv_sqrt(s->sigma).sqrt;
    const double g0 = autocov_sequence()[0];
    return build_q_banded(ma_, p_) / std::sqrt(g0);
  }

  std::string describe() const {
    return std::visit(
        [&](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Ar1>) return "AR(1) phi=" + std::to_string(k.phi);
          else if constexpr (std::is_same_v<K, Ar2>) return "AR(2) phi1=" + std::to_string(k.phi1) + " phi2=" + std::to_string(k.phi2);
          else if constexpr (std::is_same_v<K, Ma1>) return "MA(1) theta=" + std::to_string(k.theta);
          else if constexpr (std::is_same_v<K, Arma11>) return "ARMA(1,1) phi=" + std::to_string(k.phi) + " theta=" + std::to_string(k.theta);
          else if constexpr (std::is_same_v<K, ExplicitQ>) return "explicit Q";
          else return "explicit Sigma";
        },
        kind_);
  }

 private:
  MixingSpec(Kind kind, int p, int k) : kind_(std::move(kind)), p_(p), k_(k) {}

  static MixingSpec arma11(double phi, double theta, int p, Kind kind) {
    require(p >= 1, ErrorCode::DegenerateDimension, "dimension must be positive");
    check_arma_region(phi, theta);
    const int len = default_truncation_len(phi, theta, p);
    MixingSpec m(std::move(kind), p, p + len - 1);
    m.ma_ = arma_ma_coeffs(phi, theta, len).b;
    return m;
  }

  Kind kind_;
  int p_;
  int k_;
  Ar2Region region_ = Ar2Region::Strict;
  std::vector<double> ma_;
};

}  // namespace spectest
