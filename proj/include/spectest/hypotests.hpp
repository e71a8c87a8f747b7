#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "spectest/error.hpp"
#include "spectest/mixing.hpp"
#include "spectest/parallel.hpp"
#include "spectest/sampler.hpp"
#include "spectest/types.hpp"

namespace spectest {

enum class Side { UpperTail, TwoSided };

inline const char* to_string(Side s) { return s == Side::UpperTail ? "upper" : "two"; }

inline Side parse_side(const std::string& s) {
  if (s == "upper") return Side::UpperTail;
  if (s == "two" || s == "two-sided") return Side::TwoSided;
  throw Error(ErrorCode::ParseError, "side must be 'upper' or 'two'");
}

enum class TestKind { H01, H02 };

struct TestResult {
  TestKind kind = TestKind::H02;
  double statistic_raw = 0.0;
  double z_score = 0.0;
  double p_value = 1.0;
  Side side = Side::TwoSided;
  double y_used = 0.0;
  double beta_x_used = 0.0;
  int n = 0;
  int p = 0;
  /// tr(Σ₀⁻¹B) and tr((Σ₀⁻¹B)²), from which both statistics follow.
  double trace_a = 0.0;
  double trace_a2 = 0.0;
};

/// Standard normal p-value for z.
inline double normal_p_value(double z, Side side) {
  return side == Side::UpperTail ? 0.5 * std::erfc(z / std::sqrt(2.0)) : std::erfc(std::abs(z) / std::sqrt(2.0));
}

/// Assembles a result from the two traces of A = Σ₀⁻¹B, with B the centred
/// covariance of n observations and y = p/(n-1).
///
/// H01: z = ½{tr(A - I)² - p y - (β+1) y} / √(y² + (β+2) y³)
/// H02: z = ½{tr(A/a - I)² - p y - (β+1) y} / y,  a = tr(A)/p
inline TestResult trace_test(TestKind kind, double tr_a, double tr_a2, int p, int n, double beta_x, Side side) {
  require(n >= 2, ErrorCode::DegenerateDimension, "need n >= 2");
  TestResult r;
  r.kind = kind;
  r.side = side;
  r.n = n;
  r.p = p;
  r.beta_x_used = beta_x;
  r.trace_a = tr_a;
  r.trace_a2 = tr_a2;
  const double y = static_cast<double>(p) / (n - 1);
  r.y_used = y;
  const double shift = p * y + (beta_x + 1.0) * y;
  if (kind == TestKind::H01) {
    r.statistic_raw = tr_a2 - 2.0 * tr_a + p;
    const double var = y * y + (beta_x + 2.0) * y * y * y;
    if (!(var > 0.0)) throw Error(ErrorCode::DegenerateVariance, "H01 variance is not positive for this beta_x");
    r.z_score = 0.5 * (r.statistic_raw - shift) / std::sqrt(var);
  } else {
    if (!(tr_a > 0.0)) throw Error(ErrorCode::DegenerateTrace, "tr(Sigma0^-1 B) must be positive");
    const double a = tr_a / p;
    // tr(A/a - I)² = tr(A²)/a² - 2 tr(A)/a + p, and tr(A)/a = p.
    r.statistic_raw = tr_a2 / (a * a) - p;
    r.z_score = 0.5 * (r.statistic_raw - shift) / y;
  }
  r.p_value = normal_p_value(r.z_score, side);
  return r;
}

namespace detail {

inline void check_panel(const Matrix& data, const Matrix& sigma0) {
  require(data.rows() >= 1 && data.cols() >= 2, ErrorCode::DegenerateDimension, "panel needs p >= 1 and n >= 2");
  if (sigma0.rows() != sigma0.cols() || sigma0.rows() != data.rows())
    throw Error(ErrorCode::DimensionMismatch, "sigma0 is " + std::to_string(sigma0.rows()) + "x" +
                                                  std::to_string(sigma0.cols()) + " but the panel has p = " +
                                                  std::to_string(data.rows()));
}

/// tr(A) and tr(A²) for A = Σ₀⁻¹B via C = L⁻¹ B L⁻ᵀ (similar to A, symmetric).
inline std::pair<double, double> whitened_traces(const Matrix& b, const Matrix& sigma0) {
  const Matrix s = symmetrize_checked(sigma0);
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPositiveDefinite, "sigma0 is not positive definite");
  Matrix c = llt.matrixL().solve(b);
  c = llt.matrixL().solve(c.transpose()).eval();
  return {c.trace(), c.squaredNorm()};
}

inline std::pair<double, double> band_traces(const SymmetricBand& precision, const Matrix& b) {
  const Matrix m = precision.times(b);
  // tr(M²) = Σ_ij M_ij M_ji
  return {m.trace(), m.cwiseProduct(m.transpose()).sum()};
}

}  // namespace detail

/// H01: covariance equals Σ₀. `data` is p × n with observations in columns.
inline TestResult h01_test(const Matrix& data, const Matrix& sigma0, double beta_x = 0.0,
                           Side side = Side::TwoSided) {
  detail::check_panel(data, sigma0);
  const auto [t1, t2] = detail::whitened_traces(sample_cov(data, true), sigma0);
  return trace_test(TestKind::H01, t1, t2, static_cast<int>(data.rows()), static_cast<int>(data.cols()), beta_x, side);
}

/// H02: covariance equals σ²Σ₀ for some σ² > 0.
inline TestResult h02_test(const Matrix& data, const Matrix& sigma0, double beta_x = 0.0,
                           Side side = Side::TwoSided) {
  detail::check_panel(data, sigma0);
  const auto [t1, t2] = detail::whitened_traces(sample_cov(data, true), sigma0);
  return trace_test(TestKind::H02, t1, t2, static_cast<int>(data.rows()), static_cast<int>(data.cols()), beta_x, side);
}

inline TestResult h01_test(const SamplePanel& panel, const Matrix& sigma0, double beta_x = 0.0,
                           Side side = Side::TwoSided) {
  return h01_test(panel.data, sigma0, beta_x, side);
}

inline TestResult h02_test(const SamplePanel& panel, const Matrix& sigma0, double beta_x = 0.0,
                           Side side = Side::TwoSided) {
  return h02_test(panel.data, sigma0, beta_x, side);
}

/// H02 with Σ₀ given through its banded inverse; O(p²) per call once B is known.
inline TestResult h02_banded(const Matrix& b_centered, int n, const SymmetricBand& precision, double beta_x,
                             Side side) {
  require(precision.p == b_centered.rows(), ErrorCode::DimensionMismatch, "precision and covariance sizes differ");
  const auto [t1, t2] = detail::band_traces(precision, b_centered);
  return trace_test(TestKind::H02, t1, t2, precision.p, n, beta_x, side);
}

struct ScanResult {
  std::vector<std::vector<double>> grid;
  std::vector<double> p_values;  // NaN where the grid point failed
  std::vector<std::string> errors;  // empty string where the point succeeded
  double max_p = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> argmax;
  double alpha = 0.05;
  /// True when the structure is rejected, i.e. max_p < alpha.
  bool decision_at_alpha = false;
};

struct ScanOptions {
  double grid_step = 0.01;
  double alpha = 0.05;
  double beta_x = 0.0;
  Side side = Side::TwoSided;
  unsigned threads = 1;
};

namespace detail {

inline std::vector<double> symmetric_grid(double step) {
  require(step > 0.0 && std::isfinite(step), ErrorCode::InvalidConfig, "grid step must be positive");
  std::vector<double> g;
  for (long k = 1;; ++k) {
    const double v = -1.0 + static_cast<double>(k) * step;
    if (v >= 1.0 - 1e-12) break;
    g.push_back(v);
  }
  return g;
}

template <typename MakePrecision>
ScanResult run_scan(const Matrix& data, std::vector<std::vector<double>> grid, const ScanOptions& opt,
                    MakePrecision&& make_precision) {
  if (grid.empty()) throw Error(ErrorCode::GridEmpty, "no admissible grid points for this step");
  require(opt.alpha > 0.0 && opt.alpha < 1.0, ErrorCode::InvalidConfig, "alpha must lie in (0, 1)");
  require(data.rows() >= 1 && data.cols() >= 2, ErrorCode::DegenerateDimension, "panel needs p >= 1 and n >= 2");
  const Matrix b = sample_cov(data, true);
  const int p = static_cast<int>(data.rows()), n = static_cast<int>(data.cols());
  ScanResult r;
  r.alpha = opt.alpha;
  r.grid = std::move(grid);
  r.p_values.assign(r.grid.size(), std::numeric_limits<double>::quiet_NaN());
  r.errors.assign(r.grid.size(), std::string());
  parallel_for(r.grid.size(), opt.threads, [&](std::size_t i) {
    try {
      r.p_values[i] = h02_banded(b, n, make_precision(r.grid[i], p), opt.beta_x, opt.side).p_value;
    } catch (const Error& e) {
      r.errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    if (std::isnan(r.p_values[i])) continue;
    if (std::isnan(r.max_p) || r.p_values[i] > r.max_p) {
      r.max_p = r.p_values[i];
      r.argmax = r.grid[i];
    }
  }
  if (std::isnan(r.max_p)) throw Error(ErrorCode::GridEmpty, "every grid point failed");
  r.decision_at_alpha = r.max_p < opt.alpha;
  return r;
}

}  // namespace detail

/// H02 p-values of Σ_φ = (φ^{|i-j|}) over φ = -1 + step, ..., 1 - step.
inline ScanResult scan_ar1(const Matrix& data, const ScanOptions& opt = {}) {
  require(opt.grid_step > 0.0 && opt.grid_step < 1.0, ErrorCode::InvalidConfig, "grid step must lie in (0, 1)");
  std::vector<std::vector<double>> grid;
  for (double phi : detail::symmetric_grid(opt.grid_step)) grid.push_back({phi});
  return detail::run_scan(data, std::move(grid), opt,
                          [](const std::vector<double>& g, int p) { return ar1_precision(g[0], p); });
}

/// H02 p-values of the AR(2) correlation over the admissible (φ1, φ2) grid.
inline ScanResult scan_ar2(const Matrix& data, const ScanOptions& opt = {},
                           Ar2Region region = Ar2Region::Strict) {
  std::vector<std::vector<double>> grid;
  if (opt.grid_step > 0.0 && opt.grid_step < 1.0) {
    const auto axis = detail::symmetric_grid(opt.grid_step);
    for (double p1 : axis)
      for (double p2 : axis)
        if (ar2_admissible(p1, p2, region)) grid.push_back({p1, p2});
  }
  return detail::run_scan(data, std::move(grid), opt, [region](const std::vector<double>& g, int p) {
    return ar2_precision(g[0], g[1], p, region);
  });
}

}  // namespace spectest
