#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "spectest/error.hpp"
#include "spectest/mp_law.hpp"
#include "spectest/parallel.hpp"
#include "spectest/polynomial.hpp"
#include "spectest/quadrature.hpp"
#include "spectest/types.hpp"

namespace spectest {

/// Moment parameters of the innovations: α_x = |E x²|², β_x = E|x|⁴ - α_x - 2.
struct PopulationMoments {
  double alpha_x = 1.0;
  double beta_x = 0.0;

  void validate() const {
    require(alpha_x >= 0.0 && alpha_x <= 1.0, ErrorCode::InvalidModel, "alpha_x must lie in [0, 1]");
    require(std::isfinite(beta_x) && beta_x >= -2.0, ErrorCode::InvalidModel, "beta_x must be >= -2");
  }
};

/// z'(m̲) = 1/m̲² - y Σ w t²/(1 + t m̲)². Its reciprocal is dm̲/dz.
inline cplx dz_dmbar(const SpectrumModel& model, cplx m_bar) {
  for (double t : model.H.atoms)
    if (std::abs(1.0 + t * m_bar) < 1e-12)
      throw Error(ErrorCode::PoleProximity, "m_bar is within 1e-12 of a pole -1/t");
  require(std::abs(m_bar) > 0.0, ErrorCode::PoleProximity, "m_bar = 0");
  return detail::inverse_map_and_derivative(model, m_bar).dz;
}

/// Rectangle with corners x_l ± i v0, x_r ± i v0, traversed counterclockwise.
/// The covariance uses a second rectangle scaled about the centre by c2_scale.
struct ContourSpec {
  double x_l = 0.0;
  double x_r = 0.0;
  double v0 = 1.0;
  int nodes_per_side = 256;
  double c2_scale = 1.15;

  /// Default contour for a support. The integrands are regular at z = 0
  /// (they are rational in m̲ and bounded as m̲ → ∞), so the rectangle
  /// always encloses the origin; this keeps the left side away from the
  /// pole of m̲ at 0 when y < 1.
  static ContourSpec around(const Support& s) {
    const double lo = std::min(0.0, s.lower());
    const double hi = s.upper();
    const double w = hi - lo;
    ContourSpec c;
    c.x_l = lo - 0.3 * w;
    c.x_r = hi + 0.3 * w;
    c.v0 = 0.5 * w;
    return c;
  }

  ContourSpec scaled(double s) const {
    const double centre = 0.5 * (x_l + x_r), half = 0.5 * (x_r - x_l);
    ContourSpec c = *this;
    c.x_l = centre - s * half;
    c.x_r = centre + s * half;
    c.v0 = s * v0;
    return c;
  }

  void validate(const Support& s) const {
    const double gap = 1e-3 * s.width();
    require(nodes_per_side >= 8 && nodes_per_side % 2 == 0, ErrorCode::InvalidConfig,
            "nodes_per_side must be even and >= 8");
    require(v0 > 0.0 && c2_scale > 1.0, ErrorCode::InvalidConfig, "need v0 > 0 and c2_scale > 1");
    if (!(x_l < s.lower() - gap && x_r > s.upper() + gap))
      throw Error(ErrorCode::SingularPairing, "contour does not enclose the support with margin");
    const double sep = std::min((c2_scale - 1.0) * 0.5 * (x_r - x_l), (c2_scale - 1.0) * v0);
    if (sep <= gap) throw Error(ErrorCode::SingularPairing, "covariance contours are too close");
  }
};

namespace detail {

/// Quadrature nodes on a closed contour with m̲, dm̲/dz and the weights dz.
struct ContourNodes {
  std::vector<cplx> z, dz, m, mprime;
  std::size_t size() const { return z.size(); }
};

inline ContourNodes contour_nodes(const SpectrumModel& model, const ContourSpec& c, int n) {
  const cplx corners[4] = {{c.x_l, -c.v0}, {c.x_r, -c.v0}, {c.x_r, c.v0}, {c.x_l, c.v0}};
  const int panel = n >= 64 ? 32 : n;
  const int panels = n / panel;
  const auto& rule = gauss_legendre(panel);
  ContourNodes out;
  out.z.reserve(4 * n);
  std::optional<cplx> seed;
  for (int side = 0; side < 4; ++side) {
    const cplx a = corners[side], b = corners[(side + 1) % 4];
    const cplx step = (b - a) / static_cast<double>(panels);
    for (int q = 0; q < panels; ++q) {
      const cplx pa = a + static_cast<double>(q) * step;
      for (int k = 0; k < panel; ++k) {
        const double s = 0.5 * (rule.nodes[k] + 1.0);
        const cplx z = pa + s * step;
        const double tol = 1e-12 * std::max(1.0, std::abs(z));
        const auto v = solve_mbar(model, z, tol, seed);
        seed = v.m_bar;
        out.z.push_back(z);
        out.dz.push_back(0.5 * rule.weights[k] * step);
        out.m.push_back(v.m_bar);
        out.mprime.push_back(1.0 / dz_dmbar(model, v.m_bar));
      }
    }
  }
  return out;
}

/// S_k = ∫ m̲^k t²/(1 + t m̲)^k dH for k = 2, 3.
inline std::pair<cplx, cplx> s2_s3(const SpectrumModel& model, cplx m) {
  cplx s2 = 0.0, s3 = 0.0;
  for (std::size_t i = 0; i < model.H.size(); ++i) {
    const double t = model.H.atoms[i], w = model.H.weights[i];
    const cplx r = m * t / (1.0 + t * m);
    s2 += w * r * r;
    s3 += w * r * r * m / (1.0 + t * m);
  }
  // s3 carries m̲³ t² / (1 + t m̲)³.
  return {s2, s3};
}

}  // namespace detail

using TestFunction = std::function<cplx(cplx)>;

inline TestFunction as_test_function(const Polynomial& p) {
  return [p](cplx z) { return p(z); };
}

struct CltMeanResult {
  double value = 0.0;
  double alpha_term = 0.0;
  double beta_term = 0.0;
  double error_estimate = 0.0;
  double imag_part = 0.0;
};

struct CltCovResult {
  Matrix value;
  Matrix first_term;
  Matrix beta_term;
  Matrix log_term;
  double error_estimate = 0.0;
  bool real_reduction = false;
};

namespace detail {

struct MeanTerms {
  std::vector<cplx> alpha, beta;
};

inline MeanTerms mean_terms(const SpectrumModel& model, const PopulationMoments& pop,
                            const std::vector<TestFunction>& fs, const ContourNodes& nodes) {
  MeanTerms out{std::vector<cplx>(fs.size(), 0.0), std::vector<cplx>(fs.size(), 0.0)};
  const double y = model.y;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto [s2, s3] = s2_s3(model, nodes.m[k]);
    const cplx base = y * s3 / (1.0 - y * s2);
    const cplx ga = pop.alpha_x == 0.0 ? cplx(0.0) : pop.alpha_x * base / (1.0 - pop.alpha_x * y * s2);
    for (std::size_t l = 0; l < fs.size(); ++l) {
      const cplx fd = fs[l](nodes.z[k]) * nodes.dz[k];
      out.alpha[l] += fd * ga;
      out.beta[l] += fd * base;
    }
  }
  // -1/(2πi) ∮ ...
  const cplx c = -1.0 / (2.0 * std::numbers::pi * cplx(0.0, 1.0));
  for (std::size_t l = 0; l < fs.size(); ++l) {
    out.alpha[l] *= c;
    out.beta[l] *= c * pop.beta_x;
  }
  return out;
}

struct CovTerms {
  Eigen::MatrixXcd first, beta, log;
};

inline CovTerms cov_terms(const SpectrumModel& model, const PopulationMoments& pop,
                          const std::vector<TestFunction>& fs, const ContourNodes& c1, const ContourNodes& c2,
                          bool need_log, int threads) {
  const auto L = static_cast<Eigen::Index>(fs.size());
  const auto n1 = static_cast<Eigen::Index>(c1.size()), n2 = static_cast<Eigen::Index>(c2.size());
  // G(k, l) = f_l(z_k) dm̲_k.
  auto weights = [&](const ContourNodes& c) {
    Eigen::MatrixXcd g(static_cast<Eigen::Index>(c.size()), L);
    for (std::size_t k = 0; k < c.size(); ++k)
      for (Eigen::Index l = 0; l < L; ++l) g(k, l) = fs[l](c.z[k]) * c.mprime[k] * c.dz[k];
    return g;
  };
  const Eigen::MatrixXcd g1 = weights(c1), g2 = weights(c2);

  Eigen::MatrixXcd k_first(n1, n2), k_log;
  if (need_log) k_log.resize(n1, n2);
  const double ay = pop.alpha_x * model.y;
  parallel_for(static_cast<std::size_t>(n1), threads, [&](std::size_t i) {
    const cplx m1 = c1.m[i];
    for (Eigen::Index j = 0; j < n2; ++j) {
      const cplx m2 = c2.m[j];
      const cplx d = m1 - m2;
      k_first(i, j) = 1.0 / (d * d);
      if (!need_log) continue;
      cplx p11 = 0.0, p21 = 0.0, p12 = 0.0, p22 = 0.0;
      for (std::size_t q = 0; q < model.H.size(); ++q) {
        const double t = model.H.atoms[q], w = model.H.weights[q];
        const cplx r1 = 1.0 / (1.0 + t * m1), r2 = 1.0 / (1.0 + t * m2);
        const cplx b = w * t * t * r1 * r2;
        p11 += b;
        p21 += b * r1;
        p12 += b * r2;
        p22 += b * r1 * r2;
      }
      const cplx a = ay * m1 * m2 * p11;
      const cplx a1 = ay * m2 * p21, a2 = ay * m1 * p12, a12 = ay * p22;
      const cplx one_minus = 1.0 - a;
      k_log(i, j) = -a12 / one_minus - a1 * a2 / (one_minus * one_minus);
    }
  });

  const double inv4pi2 = 1.0 / (4.0 * std::numbers::pi * std::numbers::pi);
  CovTerms out;
  out.first = -inv4pi2 * (g1.transpose() * k_first * g2);
  if (need_log) out.log = inv4pi2 * (g1.transpose() * k_log * g2);
  else out.log = Eigen::MatrixXcd::Zero(L, L);

  // β term factorizes over atoms: A_i(f) = ∮ f t_i/(1 + t_i m̲)² dm̲.
  out.beta = Eigen::MatrixXcd::Zero(L, L);
  if (pop.beta_x != 0.0) {
    for (std::size_t q = 0; q < model.H.size(); ++q) {
      const double t = model.H.atoms[q], w = model.H.weights[q];
      Eigen::VectorXcd a = Eigen::VectorXcd::Zero(L);
      for (std::size_t k = 0; k < c1.size(); ++k) {
        const cplx r = 1.0 / (1.0 + t * c1.m[k]);
        a += g1.row(static_cast<Eigen::Index>(k)).transpose() * (t * r * r);
      }
      out.beta += w * (a * a.transpose());
    }
    out.beta *= -model.y * pop.beta_x * inv4pi2;
  }
  return out;
}

inline void check_imag(const Eigen::MatrixXcd& m, const std::string& what) {
  const double scale = std::max(1.0, m.real().cwiseAbs().maxCoeff());
  const double im = m.imag().cwiseAbs().maxCoeff();
  if (im > 1e-8 * scale)
    throw Error(ErrorCode::ContourTooClose, what + ": imaginary residue " + std::to_string(im) + " exceeds 1e-8");
}

inline Support checked_support(const SpectrumModel& model, const ContourSpec& contour) {
  const Support s = support_intervals(model);
  contour.validate(s);
  return s;
}

}  // namespace detail

/// Limiting means of the LSS for each f, by quadrature of both mean terms on
/// the contour; the error estimate compares against half the nodes.
inline std::vector<CltMeanResult> clt_mean_vector(const SpectrumModel& model, const PopulationMoments& pop,
                                                  const std::vector<TestFunction>& fs, const ContourSpec& contour) {
  model.validate();
  pop.validate();
  detail::checked_support(model, contour);
  const auto fine = detail::contour_nodes(model, contour, contour.nodes_per_side);
  const auto coarse = detail::contour_nodes(model, contour, contour.nodes_per_side / 2);
  const auto tf = detail::mean_terms(model, pop, fs, fine);
  const auto tc = detail::mean_terms(model, pop, fs, coarse);
  std::vector<CltMeanResult> out(fs.size());
  for (std::size_t l = 0; l < fs.size(); ++l) {
    const cplx total = tf.alpha[l] + tf.beta[l];
    auto& r = out[l];
    r.alpha_term = tf.alpha[l].real();
    r.beta_term = tf.beta[l].real();
    r.value = total.real();
    r.imag_part = total.imag();
    r.error_estimate = std::abs(total - (tc.alpha[l] + tc.beta[l]));
    if (std::abs(r.imag_part) > 1e-8 * std::max(1.0, std::abs(r.value)))
      throw Error(ErrorCode::ContourTooClose, "mean: imaginary residue exceeds 1e-8");
    if (r.error_estimate > 1e-6 * std::max(1.0, std::abs(r.value)))
      throw Error(ErrorCode::ContourTooClose, "mean: quadrature error estimate exceeds 1e-6");
  }
  return out;
}

inline CltMeanResult clt_mean_detail(const SpectrumModel& model, const PopulationMoments& pop, const TestFunction& f,
                                     const ContourSpec& contour) {
  return clt_mean_vector(model, pop, {f}, contour).front();
}

inline double clt_mean(const SpectrumModel& model, const PopulationMoments& pop, const Polynomial& f,
                       const ContourSpec& contour) {
  return clt_mean_detail(model, pop, as_test_function(f), contour).value;
}

/// Limiting covariance matrix of the LSS for all pairs of f. With α_x = 1
/// and `real_reduction` the log term is folded into the first term
/// (doubling it); otherwise the ∂²log(1 - a) kernel is integrated directly.
inline CltCovResult clt_cov_matrix(const SpectrumModel& model, const PopulationMoments& pop,
                                   const std::vector<TestFunction>& fs, const ContourSpec& contour,
                                   bool real_reduction = true, int threads = 1) {
  model.validate();
  pop.validate();
  detail::checked_support(model, contour);
  const bool reduce = real_reduction && pop.alpha_x == 1.0;
  const bool need_log = !reduce && pop.alpha_x != 0.0;
  auto evaluate = [&](int n) {
    const auto c1 = detail::contour_nodes(model, contour, n);
    const auto c2 = detail::contour_nodes(model, contour.scaled(contour.c2_scale), n);
    auto t = detail::cov_terms(model, pop, fs, c1, c2, need_log, threads);
    if (reduce) t.first *= 2.0;
    return t;
  };
  const auto fine = evaluate(contour.nodes_per_side);
  const auto coarse = evaluate(contour.nodes_per_side / 2);
  const Eigen::MatrixXcd total = fine.first + fine.beta + fine.log;
  const Eigen::MatrixXcd total_coarse = coarse.first + coarse.beta + coarse.log;
  detail::check_imag(total, "covariance");

  CltCovResult r;
  r.value = total.real();
  r.first_term = fine.first.real();
  r.beta_term = fine.beta.real();
  r.log_term = fine.log.real();
  r.real_reduction = reduce;
  r.error_estimate = (total - total_coarse).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, r.value.cwiseAbs().maxCoeff());
  if (r.error_estimate > 1e-6 * scale)
    throw Error(ErrorCode::ContourTooClose, "covariance: quadrature error estimate exceeds 1e-6");
  return r;
}

inline double clt_cov(const SpectrumModel& model, const PopulationMoments& pop, const Polynomial& f1,
                      const Polynomial& f2, const ContourSpec& contour, bool real_reduction = true) {
  const auto r = clt_cov_matrix(model, pop, {as_test_function(f1), as_test_function(f2)}, contour, real_reduction);
  return r.value(0, 1);
}

/// Closed-form moment parameters for H = δ₁ (real population).
struct MomentSet {
  int L = 0;
  double y = 0.0;
  double beta_x = 0.0;
  std::vector<double> F;
  std::vector<double> mu;
  Matrix sigma;
};

/// How the exponent of (1-y)/y in σ_ℓℓ' is read.
enum class SigmaExponent { L1PlusL2, LPlusLPrime };

namespace detail {

inline double binom(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

/// ℓ-th moment of the Marčenko–Pastur law (continuous part), by quadrature.
inline double mp_moment(double y, int l) {
  const double a = (1.0 - std::sqrt(y)) * (1.0 - std::sqrt(y));
  const double b = (1.0 + std::sqrt(y)) * (1.0 + std::sqrt(y));
  const double c = 0.5 * (a + b), r = 0.5 * (b - a);
  auto g = [&](double th) {
    const double x = c - r * std::cos(th);
    const double s = std::sin(th);
    return std::pow(x, l - 1) * r * r * s * s / (2.0 * std::numbers::pi * y);
  };
  return integrate_adaptive(g, 0.0, std::numbers::pi, 1e-14).value;
}

inline double beta_coeff(double y, int l) {
  double s = 0.0;
  for (int k = 1; k <= l; ++k) s += binom(l, k - 1) * binom(l, k) * std::pow(y, l - k);
  return s;
}

}  // namespace detail

/// F^(ℓ), μ_ℓ and σ_ℓℓ' for ℓ, ℓ' = 1..L.
///
/// The centring sum of μ_ℓ uses y^{ℓ₁} inside the sum over ℓ₁; a constant
/// y^ℓ gives μ₁ = (1 - y)/2 instead of the exact value 0. The printed
/// constant-power reading is available through `mu_constant_power` for
/// comparison only.
inline MomentSet closed_moments(double y, double beta_x, int L, SigmaExponent exponent = SigmaExponent::L1PlusL2,
                                bool mu_constant_power = false) {
  require(y > 0.0 && std::isfinite(y), ErrorCode::InvalidModel, "y must be positive");
  require(L >= 1, ErrorCode::InvalidModel, "L must be >= 1");
  MomentSet ms;
  ms.L = L;
  ms.y = y;
  ms.beta_x = beta_x;
  ms.F.resize(L);
  ms.mu.resize(L);
  ms.sigma = Matrix::Zero(L, L);
  const double sy = std::sqrt(y);
  for (int l = 1; l <= L; ++l) {
    ms.F[l - 1] = l == 1 ? 1.0 : detail::mp_moment(y, l);
    double mu = 0.25 * (std::pow(1.0 - sy, 2 * l) + std::pow(1.0 + sy, 2 * l));
    double centring = 0.0;
    for (int l1 = 0; l1 <= l; ++l1)
      centring += detail::binom(l, l1) * detail::binom(l, l1) * std::pow(y, mu_constant_power ? l : l1);
    mu -= 0.5 * centring;
    if (l >= 2) {
      double b = 0.0;
      for (int l2 = 2; l2 <= l; ++l2) b += detail::binom(l, l2 - 2) * detail::binom(l, l2) * std::pow(y, l + 1 - l2);
      mu += beta_x * b;
    }
    ms.mu[l - 1] = mu;
  }
  const double ratio = (1.0 - y) / y;
  for (int l = 1; l <= L; ++l) {
    for (int lp = 1; lp <= L; ++lp) {
      double s = 0.0;
      for (int l1 = 0; l1 <= l - 1; ++l1) {
        for (int l2 = 0; l2 <= lp; ++l2) {
          double inner = 0.0;
          for (int l3 = 0; l3 <= l - l1; ++l3)
            inner += l3 * detail::binom(2 * l - 1 - l1 - l3, l - 1) * detail::binom(2 * lp - 1 - l2 + l3, lp - 1);
          const int e = exponent == SigmaExponent::L1PlusL2 ? l1 + l2 : l + lp;
          s += detail::binom(l, l1) * detail::binom(lp, l2) * std::pow(ratio, e) * inner;
        }
      }
      ms.sigma(l - 1, lp - 1) =
          2.0 * std::pow(y, l + lp) * s + y * beta_x * detail::beta_coeff(y, l) * detail::beta_coeff(y, lp);
    }
  }
  return ms;
}

/// ∫ f dF^{y,H} at finite-n parameters: quadrature against the density plus
/// f(0) times the atom at the origin.
inline double lss_center(const SpectrumModel& model, const std::function<double(double)>& f) {
  const Support s = support_intervals(model);
  return lsd_integral(model, f, s, default_density_eps(s));
}

inline double lss_center(const SpectrumModel& model, const Polynomial& f) {
  return lss_center(model, [&f](double x) { return f(x); });
}

/// (raw - center - mean)/sd.
inline double standardize_lss(double raw, double center, double mean, double sd) {
  if (!(sd > 1e-12)) throw Error(ErrorCode::DegenerateVariance, "standard deviation must exceed 1e-12");
  return (raw - center - mean) / sd;
}

}  // namespace spectest
