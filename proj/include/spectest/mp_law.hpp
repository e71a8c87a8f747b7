#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spectest/error.hpp"
#include "spectest/quadrature.hpp"
#include "spectest/types.hpp"

namespace spectest {

/// (y, H): aspect ratio and discrete population spectral distribution that
/// parametrize the generalized Marčenko–Pastur law F^{y,H}.
struct SpectrumModel {
  double y = 1.0;
  DiscreteDistribution H;

  static SpectrumModel identity(double y) { return {y, DiscreteDistribution::point_mass(1.0)}; }

  void validate() const {
    require(std::isfinite(y) && y > 0.0, ErrorCode::InvalidModel, "aspect ratio y must be positive");
    require(!H.atoms.empty() && H.atoms.size() == H.weights.size(), ErrorCode::InvalidModel,
            "H needs matching atoms and weights");
    bool positive = false;
    for (std::size_t i = 0; i < H.size(); ++i) {
      require(std::isfinite(H.atoms[i]) && H.atoms[i] >= 0.0, ErrorCode::InvalidModel, "H atoms must be >= 0");
      require(std::isfinite(H.weights[i]) && H.weights[i] >= 0.0, ErrorCode::InvalidModel, "H weights must be >= 0");
      positive = positive || (H.atoms[i] > 0.0 && H.weights[i] > 0.0);
    }
    require(positive, ErrorCode::InvalidModel, "H needs at least one positive atom");
    require(std::abs(H.total_weight() - 1.0) < 1e-9, ErrorCode::InvalidModel, "H weights must sum to 1");
  }

  /// Mean of H, used as the natural length scale of the spectrum.
  double scale() const { return std::max(H.mean(), 1e-300); }
};

/// Companion Stieltjes transform m̲(z) and m(z) at one point.
struct StieltjesValue {
  cplx z;
  cplx m_bar;
  cplx m;
  int iterations = 0;
  double residual = 0.0;
};

/// Inverse map z(m̲) = -1/m̲ + y Σ w_i t_i / (1 + t_i m̲).
inline cplx inverse_map(const SpectrumModel& model, cplx m_bar) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < model.H.size(); ++i) {
    const double t = model.H.atoms[i];
    s += model.H.weights[i] * t / (1.0 + t * m_bar);
  }
  return -1.0 / m_bar + model.y * s;
}

namespace detail {

struct MapValue {
  cplx z;
  cplx dz;
};

/// z(m̲) and z'(m̲) in one pass.
inline MapValue inverse_map_and_derivative(const SpectrumModel& model, cplx m) {
  cplx s = 0.0, ds = 0.0;
  for (std::size_t i = 0; i < model.H.size(); ++i) {
    const double t = model.H.atoms[i];
    const double w = model.H.weights[i];
    const cplx r = 1.0 / (1.0 + t * m);
    s += w * t * r;
    ds += w * t * t * r * r;
  }
  const cplx inv = 1.0 / m;
  return {-inv + model.y * s, inv * inv - model.y * ds};
}

inline cplx companion_to_m(const SpectrumModel& model, cplx z, cplx m_bar) {
  return (m_bar + (1.0 - model.y) / z) / model.y;
}

struct LocalSolve {
  cplx m;
  double residual;
  int iterations;
  bool converged;
};

/// Newton on z(m̲) = z. Rejects iterates that leave the closed upper half
/// plane when Im z > 0.
inline LocalSolve newton_polish(const SpectrumModel& model, cplx z, cplx m, double tol, int max_steps) {
  const bool upper = z.imag() > 0.0;
  auto f = inverse_map_and_derivative(model, m);
  double res = std::abs(f.z - z);
  int it = 0;
  for (; it < max_steps && res >= tol; ++it) {
    if (f.dz == 0.0 || !std::isfinite(std::abs(f.dz))) break;
    cplx step = (f.z - z) / f.dz;
    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving) {
      const cplx cand = m - step;
      if (upper && cand.imag() <= 0.0) {
        step *= 0.5;
        continue;
      }
      const auto fc = inverse_map_and_derivative(model, cand);
      const double rc = std::abs(fc.z - z);
      if (std::isfinite(rc) && rc < res) {
        m = cand;
        f = fc;
        res = rc;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return {m, res, it, res < tol && (!upper || m.imag() > 0.0)};
}

/// Damped fixed-point iteration m̲ ← 1/(-z + y Σ w t/(1 + t m̲)), with a
/// Newton polish attempted periodically once the iterate settles.
inline LocalSolve fixed_point(const SpectrumModel& model, cplx z, cplx m, double tol, int budget) {
  const bool upper = z.imag() > 0.0;
  int used = 0;
  auto attempt_newton = [&](cplx start) -> std::optional<LocalSolve> {
    auto r = newton_polish(model, z, start, tol, 60);
    used += r.iterations;
    if (r.converged) {
      r.iterations = used;
      return r;
    }
    return std::nullopt;
  };
  if (auto r = attempt_newton(m)) return *r;
  double res = std::numeric_limits<double>::infinity();
  while (used < budget) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < model.H.size(); ++i) {
      const double t = model.H.atoms[i];
      s += model.H.weights[i] * t / (1.0 + t * m);
    }
    res = std::abs(z + 1.0 / m - model.y * s);
    if (res < tol && (!upper || m.imag() > 0.0)) return {m, res, used, true};
    cplx next = 1.0 / (-z + model.y * s);
    if (upper && next.imag() < 0.0) next = 0.5 * (m + next);
    m = next;
    ++used;
    if (used % 25 == 0) {
      if (auto r = attempt_newton(m)) return *r;
    }
  }
  return {m, res, used, false};
}

}  // namespace detail

/// Solves the Silverstein equation for the companion transform m̲(z).
///
/// For Im z >= 0.05 (relative to the spectrum scale) the iteration starts at
/// -1/z. Closer to the real axis the solution is continued down from
/// Im z = 0.5 in geometric steps, each solve seeded with the previous one, so
/// the iterate stays on the physical branch. Real z must lie outside the
/// support (analytic continuation); Im z < 0 is handled by reflection.
inline StieltjesValue solve_mbar(const SpectrumModel& model, cplx z, double tol = 1e-10,
                                 std::optional<cplx> start = std::nullopt, int max_iter = 10000) {
  require(tol > 0.0, ErrorCode::InvalidModel, "tolerance must be positive");
  require(std::isfinite(z.real()) && std::isfinite(z.imag()), ErrorCode::InvalidRegion, "z must be finite");
  if (z.imag() < 0.0) {
    auto r = solve_mbar(model, std::conj(z), tol, start ? std::optional<cplx>(std::conj(*start)) : std::nullopt,
                        max_iter);
    r.z = z;
    r.m_bar = std::conj(r.m_bar);
    r.m = std::conj(r.m);
    return r;
  }
  const double scale = model.scale();
  const double x = z.real();
  int used = 0;

  auto finish = [&](cplx m_bar, double residual) {
    StieltjesValue v;
    v.z = z;
    v.m_bar = m_bar;
    v.m = detail::companion_to_m(model, z, m_bar);
    v.iterations = used;
    v.residual = residual;
    return v;
  };

  if (z.imag() > 0.0 && start) {
    // A seed from the lower half plane (previous node across the axis) is reflected.
    const cplx seed = start->imag() > 0.0 ? *start : cplx(start->real(), std::abs(start->imag()) + 1e-300);
    auto r = detail::newton_polish(model, z, seed, tol, 60);
    used += r.iterations;
    if (r.converged) return finish(r.m, r.residual);
  }

  const double floor_height = z.imag() > 0.0 ? z.imag() : 1e-10 * scale;
  const double high = 0.5 * scale;
  cplx m;
  if (floor_height >= 0.05 * scale) {
    auto r = detail::fixed_point(model, z, -1.0 / z, tol, max_iter);
    used += r.iterations;
    if (!r.converged)
      throw Error(ErrorCode::NoConvergence, "Silverstein iteration did not converge at z = (" + std::to_string(z.real()) +
                                                ", " + std::to_string(z.imag()) + ")");
    return finish(r.m, r.residual);
  }
  // Continuation from Im z = 0.5 down to the target height.
  double h = high;
  cplx zh(x, h);
  m = -1.0 / zh;
  for (;;) {
    zh = cplx(x, h);
    auto r = detail::fixed_point(model, zh, m, tol, std::max(1, max_iter - used));
    used += r.iterations;
    if (!r.converged)
      throw Error(ErrorCode::NoConvergence, "Silverstein continuation stalled at height " + std::to_string(h) +
                                                " for x = " + std::to_string(x));
    m = r.m;
    if (h <= floor_height) break;
    h = std::max(floor_height, 0.5 * h);
  }
  if (z.imag() > 0.0) return finish(m, std::abs(inverse_map(model, m) - z));

  // Real z: polish onto the real axis and confirm the point is outside the
  // support, i.e. the limit is real with z'(m̲) > 0.
  require(!(x == 0.0), ErrorCode::InvalidRegion, "z = 0 is not a regular point");
  if (std::abs(m.imag()) > 1e-6 * std::abs(m))
    throw Error(ErrorCode::InvalidRegion, "z = " + std::to_string(x) + " lies inside the support");
  auto r = detail::newton_polish(model, z, cplx(m.real(), 0.0), tol, 60);
  used += r.iterations;
  const auto f = detail::inverse_map_and_derivative(model, r.m);
  if (r.residual >= tol || f.dz.real() <= 0.0)
    throw Error(ErrorCode::InvalidRegion, "z = " + std::to_string(x) + " is on or inside the support");
  return finish(cplx(r.m.real(), 0.0), r.residual);
}

/// Support of F^{y,H}: disjoint intervals plus the atom at the origin.
struct Support {
  std::vector<std::pair<double, double>> intervals;
  double point_mass_at_zero = 0.0;

  double lower() const { return intervals.front().first; }
  double upper() const { return intervals.back().second; }
  double width() const { return upper() - lower(); }
  bool contains(double x) const {
    for (const auto& [a, b] : intervals)
      if (x >= a && x <= b) return true;
    return false;
  }
};

namespace detail {

inline double dz_real(const SpectrumModel& model, double m) {
  return inverse_map_and_derivative(model, cplx(m, 0.0)).dz.real();
}

inline double z_real(const SpectrumModel& model, double m) { return inverse_map(model, cplx(m, 0.0)).real(); }

/// Merges equal atoms and drops zero atoms and weights.
inline DiscreteDistribution compress_positive(const DiscreteDistribution& h) {
  std::vector<std::pair<double, double>> aw;
  for (std::size_t i = 0; i < h.size(); ++i)
    if (h.atoms[i] > 0.0 && h.weights[i] > 0.0) aw.emplace_back(h.atoms[i], h.weights[i]);
  std::sort(aw.begin(), aw.end());
  DiscreteDistribution out;
  for (const auto& [a, w] : aw) {
    if (!out.atoms.empty() && std::abs(a - out.atoms.back()) <= 1e-14 * a) {
      out.weights.back() += w;
    } else {
      out.atoms.push_back(a);
      out.weights.push_back(w);
    }
  }
  return out;
}

}  // namespace detail

/// Locates the support edges as the values z(m̲) at the real critical points
/// of the inverse map. On each interval of the real m̲-axis between the poles
/// {-1/t_i} and 0, z'(m̲) is sampled, sign changes are bracketed and bisected
/// to 1e-12; the complement of the support is the image of the set where
/// z'(m̲) > 0.
inline Support support_intervals(const SpectrumModel& model) {
  model.validate();
  const DiscreteDistribution pos = detail::compress_positive(model.H);
  // Zero atoms only shrink the effective ratio.
  const double pos_mass = pos.total_weight();
  const SpectrumModel eff{model.y * pos_mass,
                          {pos.atoms, [&] {
                             auto w = pos.weights;
                             for (auto& v : w) v /= pos_mass;
                             return w;
                           }()}};
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t k = eff.H.size();
  std::vector<double> poles(k);
  for (std::size_t i = 0; i < k; ++i) poles[i] = -1.0 / eff.H.atoms[i];  // ascending since atoms ascend
  std::reverse(poles.begin(), poles.end());
  std::sort(poles.begin(), poles.end());

  // Each segment is parametrized by u in (0, 1).
  struct Segment {
    std::function<double(double)> at;
    double left_z_limit;   // z as u -> 0
    double right_z_limit;  // z as u -> 1
  };
  std::vector<Segment> segments;
  const double s_left = std::abs(poles.front());
  const double p1 = poles.front();
  segments.push_back({[=](double u) { return p1 - s_left * (1.0 - u) / u; }, 0.0, -inf});
  for (std::size_t i = 0; i + 1 < k; ++i) {
    const double a = poles[i], b = poles[i + 1];
    segments.push_back({[=](double u) { return a + (b - a) * 0.5 * (1.0 - std::cos(std::numbers::pi * u)); }, inf, -inf});
  }
  const double pk = poles.back();
  segments.push_back({[=](double u) { return pk * 0.5 * (1.0 + std::cos(std::numbers::pi * u)); }, inf, inf});
  const double s_right = std::abs(pk);
  segments.push_back({[=](double u) { return s_right * u / (1.0 - u); }, -inf, 0.0});

  // Open z-intervals outside the support.
  std::vector<std::pair<double, double>> outside;
  constexpr int kSamples = 96;
  for (const auto& seg : segments) {
    // Uniform samples plus geometric ones towards both ends, where a small
    // ratio squeezes the decreasing piece next to a pole.
    std::vector<double> us;
    for (int j = 0; j < kSamples; ++j) us.push_back((j + 0.5) / kSamples);
    for (double e = 2.5; e <= 15.0; e += 0.25) {
      const double d = std::pow(10.0, -e);
      us.push_back(d);
      if (1.0 - d < 1.0) us.push_back(1.0 - d);
    }
    std::sort(us.begin(), us.end());
    us.erase(std::unique(us.begin(), us.end()), us.end());
    const int samples = static_cast<int>(us.size());
    std::vector<double> dz(samples);
    for (int j = 0; j < samples; ++j) dz[j] = detail::dz_real(eff, seg.at(us[j]));
    // Extra root pair hidden between samples: refine the largest sample.
    std::vector<double> roots;
    auto bisect = [&](double ua, double ub) {
      double fa = detail::dz_real(eff, seg.at(ua));
      for (int it = 0; it < 200; ++it) {
        const double um = 0.5 * (ua + ub);
        const double fm = detail::dz_real(eff, seg.at(um));
        if ((fm > 0.0) == (fa > 0.0)) {
          ua = um;
          fa = fm;
        } else {
          ub = um;
        }
        const double ma = seg.at(ua), mb = seg.at(ub);
        if (std::abs(ma - mb) <= 1e-12 * std::max(1.0, std::abs(ma))) break;
      }
      return 0.5 * (ua + ub);
    };
    bool any_positive = false;
    for (double v : dz) any_positive = any_positive || v > 0.0;
    std::vector<double> u_grid = us, dz_grid = dz;
    if (!any_positive) {
      const auto imax = static_cast<int>(std::max_element(dz.begin(), dz.end()) - dz.begin());
      double lo = imax > 0 ? us[imax - 1] : us[imax] * 0.5;
      double hi = imax + 1 < samples ? us[imax + 1] : 0.5 * (1.0 + us[imax]);
      // Golden-section search for the maximum of z'.
      const double g = 0.5 * (std::sqrt(5.0) - 1.0);
      double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
      double fc = detail::dz_real(eff, seg.at(c)), fd = detail::dz_real(eff, seg.at(d));
      for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
        if (fc > fd) {
          hi = d;
          d = c;
          fd = fc;
          c = hi - g * (hi - lo);
          fc = detail::dz_real(eff, seg.at(c));
        } else {
          lo = c;
          c = d;
          fc = fd;
          d = lo + g * (hi - lo);
          fd = detail::dz_real(eff, seg.at(d));
        }
      }
      const double umax = 0.5 * (lo + hi);
      const double fmax = detail::dz_real(eff, seg.at(umax));
      if (fmax > 0.0) {
        u_grid.insert(u_grid.begin() + imax + (umax > us[imax] ? 1 : 0), umax);
        dz_grid.assign(u_grid.size(), 0.0);
        for (std::size_t j = 0; j < u_grid.size(); ++j) dz_grid[j] = detail::dz_real(eff, seg.at(u_grid[j]));
      }
    }
    for (std::size_t j = 0; j + 1 < u_grid.size(); ++j)
      if ((dz_grid[j] > 0.0) != (dz_grid[j + 1] > 0.0)) roots.push_back(bisect(u_grid[j], u_grid[j + 1]));
    // Walk the pieces [0, r1], [r1, r2], ..., [rk, 1] and keep the increasing ones.
    std::vector<double> cuts{0.0};
    cuts.insert(cuts.end(), roots.begin(), roots.end());
    cuts.push_back(1.0);
    for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
      const double mid = 0.5 * (cuts[j] + cuts[j + 1]);
      // Sign at the piece: use the nearest grid sample inside it when possible.
      double sign_val = detail::dz_real(eff, seg.at(mid));
      for (std::size_t q = 0; q < u_grid.size(); ++q)
        if (u_grid[q] > cuts[j] && u_grid[q] < cuts[j + 1]) {
          sign_val = dz_grid[q];
          break;
        }
      if (sign_val <= 0.0) continue;
      const double za = j == 0 ? seg.left_z_limit : detail::z_real(eff, seg.at(cuts[j]));
      const double zb = j + 2 == cuts.size() ? seg.right_z_limit : detail::z_real(eff, seg.at(cuts[j + 1]));
      outside.emplace_back(std::min(za, zb), std::max(za, zb));
    }
  }
  if (outside.empty()) throw Error(ErrorCode::RootFindingFailure, "no increasing branch of the inverse map found");
  std::sort(outside.begin(), outside.end());

  Support sup;
  const double tiny = 1e-12 * eff.scale();
  double covered = -inf;
  for (const auto& [a, b] : outside) {
    if (a > covered && covered > -inf && a - covered > tiny) sup.intervals.emplace_back(std::max(covered, 0.0), a);
    covered = std::max(covered, b);
  }
  if (sup.intervals.empty()) throw Error(ErrorCode::RootFindingFailure, "support edges not bracketed");
  const double y_eff = eff.y;
  sup.point_mass_at_zero = (std::max(0.0, 1.0 - y_eff) - (1.0 - model.y)) / model.y;
  if (sup.point_mass_at_zero < 1e-15) sup.point_mass_at_zero = 0.0;
  return sup;
}

/// Default imaginary offset for density evaluation: 1e-6 of the support width.
/// At 1e-4 the square-root edges leave a mass defect of order 1e-6.
inline double default_density_eps(const Support& support) { return 1e-6 * support.width(); }

namespace detail {

inline double im_m_over_pi(const SpectrumModel& model, double x, double eps, double tol) {
  const cplx z(x, eps);
  const auto v = solve_mbar(model, z, tol);
  return v.m.imag() / std::numbers::pi;
}

}  // namespace detail

/// Density of F^{y,H} at x from Im m(x + i eps)/π, with first-order
/// Richardson extrapolation 2 f(eps/2) - f(eps). Clamped at zero.
inline double lsd_density(const SpectrumModel& model, double x, double eps, double tol = 1e-12) {
  require(eps > 0.0, ErrorCode::InvalidModel, "eps must be positive");
  const double f1 = detail::im_m_over_pi(model, x, eps, tol);
  const double f2 = detail::im_m_over_pi(model, x, 0.5 * eps, tol);
  return std::max(0.0, 2.0 * f2 - f1);
}

inline double lsd_density(const SpectrumModel& model, double x) {
  return lsd_density(model, x, default_density_eps(support_intervals(model)));
}

/// ∫ f(x) dF^{y,H}(x): adaptive quadrature of f times the density over each
/// support interval plus f(0) times the atom at the origin.
inline double lsd_integral(const SpectrumModel& model, const std::function<double(double)>& f,
                           const Support& support, double eps, double tol = 1e-10) {
  double total = support.point_mass_at_zero * f(0.0);
  for (const auto& [a, b] : support.intervals) {
    // x = c - r cos θ removes the square-root behaviour at both edges.
    const double c = 0.5 * (a + b), r = 0.5 * (b - a);
    auto integrand = [&](double theta) {
      const double x = c - r * std::cos(theta);
      return f(x) * lsd_density(model, x, eps) * r * std::sin(theta);
    };
    total += integrate_adaptive(integrand, 0.0, std::numbers::pi, tol, 15, 1e-6).value;
  }
  return total;
}

/// Stieltjes transform at z of the LSD of n^{-1} X T X* (p × p), where the
/// population T is n × n and acts along the sample index. Obtained from the
/// standard solver with ratio 1/y and rescaled; `model.H` is the ESD of T.
inline cplx stieltjes_transposed(const SpectrumModel& model, cplx z, double tol = 1e-12) {
  const double y = model.y;
  const SpectrumModel swapped{1.0 / y, model.H};
  const auto v = solve_mbar(swapped, z / y, tol);
  // The n × n companion is y times a standard matrix with ratio 1/y.
  const cplx m_companion = v.m / y;
  return (m_companion + (1.0 - y) / z) / y;
}

/// Residual z - RHS of the closed-form ARMA(1,1) equation for the Stieltjes
/// transform m(z) of F^{y,H} when H is the spectral law of a unit-innovation
/// ARMA(1,1) process. θ = 0 and φ = 0 use the AR(1) and MA(1) forms. The
/// equation holds for m in the upper half plane; lower-half arguments are
/// evaluated by reflection.
///
/// Numerically these equations are satisfied by stieltjes_transposed (the
/// process running along the sample index), not by m(z) of B_n with the
/// process along the coordinates; see the README.
///
/// `AsWritten` takes principal square roots and ε(α) = sgn(Im α). `Analytic`
/// uses the branch continued from |z| → ∞, w√(1 - c/w²) with the cut on a
/// segment, which is what the underlying integrals produce everywhere in C+.
enum class ArmaBranch { AsWritten, Analytic };

inline cplx arma11_residual(double y, double phi, double theta, cplx z, cplx m,
                            ArmaBranch branch = ArmaBranch::AsWritten) {
  require(std::abs(phi) < 1.0 && std::abs(theta) < 1.0, ErrorCode::ParameterOutOfRegion,
          "ARMA(1,1) needs |phi| < 1 and |theta| < 1");
  if (m.imag() < 0.0) return std::conj(arma11_residual(y, phi, theta, std::conj(z), std::conj(m), branch));
  const bool analytic = branch == ArmaBranch::Analytic;
  const cplx ym = y * m;
  cplx rhs;
  if (theta == 0.0) {
    const cplx u = ym + 1.0 + phi * phi;
    const cplx root = analytic ? u * std::sqrt(1.0 - 4.0 * phi * phi / (u * u)) : std::sqrt(u * u - 4.0 * phi * phi);
    rhs = -1.0 / m + 1.0 / root;
  } else if (phi == 0.0) {
    const cplx u = 1.0 / ym + 1.0 + theta * theta;
    const cplx root = analytic ? -u * std::sqrt(1.0 - 4.0 * theta * theta / (u * u)) : std::sqrt(u * u - 4.0 * theta * theta);
    rhs = -1.0 / m + 1.0 / ym + 1.0 / (ym * ym) / root;
  } else {
    const cplx d = y * theta * m - phi;
    const cplx alpha = (ym * (1.0 + theta * theta) + 1.0 + phi * phi) / d;
    cplx root;
    if (analytic) {
      root = alpha * std::sqrt(1.0 - 4.0 / (alpha * alpha));
    } else {
      if (alpha.imag() == 0.0)
        throw Error(ErrorCode::BranchAmbiguity, "Im(alpha) = 0; perturb z off the real axis");
      root = (alpha.imag() > 0.0 ? 1.0 : -1.0) * std::sqrt(alpha * alpha - 4.0);
    }
    rhs = -1.0 / m + theta / d - (phi + theta) * (1.0 + phi * theta) / (d * d) / root;
  }
  return z - rhs;
}

/// Right-continuous empirical CDF with jumps 1/p at each sorted value.
class StepCdf {
 public:
  explicit StepCdf(std::vector<double> sorted) : x_(std::move(sorted)) {
    require(!x_.empty(), ErrorCode::DegenerateDimension, "empty eigenvalue list");
    require(std::is_sorted(x_.begin(), x_.end()), ErrorCode::InvalidModel, "eigenvalues must be sorted");
  }

  double operator()(double x) const {
    return static_cast<double>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) / x_.size();
  }
  double left_limit(double x) const {
    return static_cast<double>(std::lower_bound(x_.begin(), x_.end(), x) - x_.begin()) / x_.size();
  }
  const std::vector<double>& points() const noexcept { return x_; }

 private:
  std::vector<double> x_;
};

inline StepCdf esd_cdf(std::span<const double> sorted_eigs) {
  return StepCdf(std::vector<double>(sorted_eigs.begin(), sorted_eigs.end()));
}

/// sup |F - G| for a step function F, evaluated on both sides of each jump.
inline double ks_distance(const StepCdf& f, const std::function<double(double)>& g) {
  double d = 0.0;
  const auto& pts = f.points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0 && pts[i] == pts[i - 1]) continue;
    const double x = pts[i];
    const double left = std::nextafter(x, -std::numeric_limits<double>::infinity());
    d = std::max(d, std::abs(f(x) - g(x)));
    d = std::max(d, std::abs(f.left_limit(x) - g(left)));
  }
  return d;
}

/// Tabulated CDF of F^{y,H}, built from the density on a cosine grid over each
/// support interval and integrated cumulatively in the angle variable.
class LsdCdf {
 public:
  LsdCdf(const SpectrumModel& model, int nodes_per_interval = 2000, double eps = -1.0)
      : support_(support_intervals(model)) {
    if (eps <= 0.0) eps = default_density_eps(support_);
    for (const auto& [a, b] : support_.intervals) {
      Piece piece{a, b, {}, {}};
      const double c = 0.5 * (a + b), r = 0.5 * (b - a);
      const int n = nodes_per_interval;
      piece.theta.resize(n + 1);
      piece.cum.resize(n + 1);
      std::vector<double> g(n + 1);
      for (int k = 0; k <= n; ++k) {
        const double th = std::numbers::pi * k / n;
        piece.theta[k] = th;
        const double x = c - r * std::cos(th);
        g[k] = (k == 0 || k == n) ? 0.0 : lsd_density(model, x, eps) * r * std::sin(th);
      }
      piece.cum[0] = 0.0;
      const double h = std::numbers::pi / n;
      for (int k = 1; k <= n; ++k) piece.cum[k] = piece.cum[k - 1] + 0.5 * h * (g[k - 1] + g[k]);
      pieces_.push_back(std::move(piece));
    }
  }

  const Support& support() const noexcept { return support_; }

  double operator()(double x) const {
    double total = x >= 0.0 ? support_.point_mass_at_zero : 0.0;
    for (const auto& pc : pieces_) {
      if (x >= pc.b) {
        total += pc.cum.back();
      } else if (x > pc.a) {
        const double c = 0.5 * (pc.a + pc.b), r = 0.5 * (pc.b - pc.a);
        const double th = std::acos(std::clamp((c - x) / r, -1.0, 1.0));
        const double pos = th / std::numbers::pi * (pc.theta.size() - 1);
        const auto k = std::min(static_cast<std::size_t>(pos), pc.theta.size() - 2);
        const double frac = pos - k;
        total += pc.cum[k] + frac * (pc.cum[k + 1] - pc.cum[k]);
      }
    }
    return total;
  }

 private:
  struct Piece {
    double a, b;
    std::vector<double> theta;
    std::vector<double> cum;
  };
  Support support_;
  std::vector<Piece> pieces_;
};

}  // namespace spectest
