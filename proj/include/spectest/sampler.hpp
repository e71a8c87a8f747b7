#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>

#include <Eigen/Eigenvalues>

#include "spectest/error.hpp"
#include "spectest/mixing.hpp"
#include "spectest/rng.hpp"
#include "spectest/types.hpp"

namespace spectest {

/// Law of the standardized innovations x_ij (mean 0, variance 1).
struct InnovationLaw {
  enum class Kind { GaussianReal, Rademacher, ScaledUniform, TwoPointAsym };

  Kind kind = Kind::GaussianReal;
  /// Upper atom of TwoPointAsym: x = a w.p. 1/(1+a²), x = -1/a otherwise.
  double a = 1.0;

  static InnovationLaw gaussian() { return {Kind::GaussianReal, 1.0}; }
  static InnovationLaw rademacher() { return {Kind::Rademacher, 1.0}; }
  static InnovationLaw scaled_uniform() { return {Kind::ScaledUniform, 1.0}; }
  static InnovationLaw two_point(double a) {
    require(std::isfinite(a) && a > 0.0, ErrorCode::InvalidModel, "two-point atom must be positive");
    return {Kind::TwoPointAsym, a};
  }

  /// |E x²|², which is 1 for every real law.
  double alpha_x() const noexcept { return 1.0; }

  /// E x⁴ - α_x - 2.
  double beta_x() const noexcept {
    switch (kind) {
      case Kind::GaussianReal: return 0.0;
      case Kind::Rademacher: return -2.0;
      case Kind::ScaledUniform: return 9.0 / 5.0 - 3.0;
      case Kind::TwoPointAsym: return a * a + 1.0 / (a * a) - 4.0;
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind) {
      case Kind::GaussianReal: return "gaussian";
      case Kind::Rademacher: return "rademacher";
      case Kind::ScaledUniform: return "uniform";
      case Kind::TwoPointAsym: return "twopoint:" + std::to_string(a);
    }
    return "?";
  }

  static InnovationLaw parse(const std::string& s) {
    if (s == "gaussian" || s == "normal") return gaussian();
    if (s == "rademacher") return rademacher();
    if (s == "uniform") return scaled_uniform();
    if (s.rfind("twopoint:", 0) == 0) {
      try {
        return two_point(std::stod(s.substr(9)));
      } catch (const std::logic_error&) {
      }
    }
    throw Error(ErrorCode::ParseError, "unknown innovation law '" + s + "'");
  }

  /// Fills `out` with i.i.d. draws from one generator stream.
  void fill(CounterRng& rng, std::span<double> out) const {
    switch (kind) {
      case Kind::GaussianReal: {
        std::normal_distribution<double> normal;
        for (auto& v : out) v = normal(rng);
        return;
      }
      case Kind::Rademacher:
        for (auto& v : out) v = (rng() >> 63) ? 1.0 : -1.0;
        return;
      case Kind::ScaledUniform: {
        const double r3 = std::sqrt(3.0);
        for (auto& v : out) v = r3 * (2.0 * rng.uniform() - 1.0);
        return;
      }
      case Kind::TwoPointAsym: {
        const double q = 1.0 / (1.0 + a * a);
        for (auto& v : out) v = rng.uniform() < q ? a : -1.0 / a;
        return;
      }
    }
  }
};

/// p × n data panel; columns are the observations y_j.
struct SamplePanel {
  Matrix data;
  std::uint64_t seed = 0;
  InnovationLaw law;

  int p() const noexcept { return static_cast<int>(data.rows()); }
  int n() const noexcept { return static_cast<int>(data.cols()); }
};

/// Reusable generator for one (mixing, law) pair. Gaussian time-series and
/// explicit-Σ panels are drawn as Σ^{1/2} z (exact stationary law); all other
/// combinations apply Q to i.i.d. innovations.
class PanelGenerator {
 public:
  PanelGenerator(const MixingSpec& mixing, InnovationLaw law) : law_(law) {
    const bool gaussian = law.kind == InnovationLaw::Kind::GaussianReal;
    if ((gaussian && mixing.is_time_series()) || std::holds_alternative<ExplicitSigma>(mixing.kind()))
      map_ = sym_sqrt_and_inv_sqrt(mixing.covariance()).sqrt;
    else
      map_ = mixing.q_matrix();
  }

  int p() const noexcept { return static_cast<int>(map_.rows()); }
  int k() const noexcept { return static_cast<int>(map_.cols()); }
  const InnovationLaw& law() const noexcept { return law_; }

  /// Column j uses the generator keyed by (seed, stream, j), so panels are
  /// reproducible regardless of which thread draws them.
  Matrix innovations(int n, std::uint64_t seed, std::uint64_t stream = 0) const {
    Matrix x(k(), n);
    for (int j = 0; j < n; ++j) {
      CounterRng rng(hash_seed(seed, stream, static_cast<std::uint64_t>(j)));
      law_.fill(rng, std::span<double>(x.col(j).data(), static_cast<std::size_t>(k())));
    }
    return x;
  }

  SamplePanel generate(int n, std::uint64_t seed, std::uint64_t stream = 0) const {
    require(n >= 2, ErrorCode::DegenerateDimension, "need at least two observations");
    SamplePanel panel;
    panel.data.noalias() = map_ * innovations(n, seed, stream);
    panel.seed = seed;
    panel.law = law_;
    return panel;
  }

 private:
  InnovationLaw law_;
  Matrix map_;
};

inline SamplePanel gen_panel(const MixingSpec& mixing, const InnovationLaw& law, int n, std::uint64_t seed) {
  return PanelGenerator(mixing, law).generate(n, seed);
}

/// Sample covariance of a p × n panel: n^{-1} Σ y_j y_jᵀ, or with `centered`
/// (n-1)^{-1} Σ (y_j - ȳ)(y_j - ȳ)ᵀ.
inline Matrix sample_cov(const Matrix& data, bool centered) {
  const Eigen::Index p = data.rows(), n = data.cols();
  require(p >= 1 && n >= 1, ErrorCode::DegenerateDimension, "empty panel");
  require(!centered || n >= 2, ErrorCode::DegenerateDimension, "centered covariance needs n >= 2");
  Matrix b = Matrix::Zero(p, p);
  if (centered) {
    const Matrix c = data.colwise() - data.rowwise().mean();
    b.selfadjointView<Eigen::Lower>().rankUpdate(c, 1.0 / static_cast<double>(n - 1));
  } else {
    b.selfadjointView<Eigen::Lower>().rankUpdate(data, 1.0 / static_cast<double>(n));
  }
  b.triangularView<Eigen::StrictlyUpper>() = b.transpose();
  return b;
}

inline Matrix sample_cov(const SamplePanel& panel, bool centered) { return sample_cov(panel.data, centered); }

/// Ascending eigenvalues of a symmetric matrix (Householder tridiagonalization
/// followed by implicit symmetric QR).
inline Vector eigenvalues_sym(const Matrix& m) {
  require(m.rows() == m.cols() && m.rows() > 0, ErrorCode::DimensionMismatch, "matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  require(es.info() == Eigen::Success, ErrorCode::ConvergenceFailure, "symmetric eigensolver did not converge");
  return es.eigenvalues();
}

/// Σ f(λ_j) - center.
template <typename F>
double lss_statistic(std::span<const double> eigs, F&& f, double center) {
  double s = 0.0;
  for (double v : eigs) s += f(v);
  return s - center;
}

inline double lss_statistic(const Vector& eigs, const std::function<double(double)>& f, double center) {
  return lss_statistic(std::span<const double>(eigs.data(), static_cast<std::size_t>(eigs.size())), f, center);
}

/// Pooled excess-kurtosis estimate of β_x from whitened entries (mean
/// removed per coordinate). Experimental.
inline double estimate_beta_x(const Matrix& whitened) {
  const Matrix c = whitened.colwise() - whitened.rowwise().mean();
  const double m2 = c.array().square().mean();
  const double m4 = c.array().square().square().mean();
  return m4 / (m2 * m2) - 3.0;
}

}  // namespace spectest
