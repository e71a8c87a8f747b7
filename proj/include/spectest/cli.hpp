#pragma once

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spectest/clt.hpp"
#include "spectest/csv.hpp"
#include "spectest/error.hpp"
#include "spectest/hypotests.hpp"
#include "spectest/mixing.hpp"
#include "spectest/mp_law.hpp"
#include "spectest/parallel.hpp"
#include "spectest/polynomial.hpp"
#include "spectest/rng.hpp"
#include "spectest/sampler.hpp"
#include "spectest/simharness.hpp"

#ifndef SPECTEST_VERSION
#define SPECTEST_VERSION "1.0.0"
#endif

namespace spectest::cli {

using json = nlohmann::json;

/// Version of the JSON output layout; bumped on incompatible changes.
inline constexpr int kSchemaVersion = 1;

inline std::string version_string() {
  return std::string("spectest ") + SPECTEST_VERSION + " (interface revision " + std::to_string(kSchemaVersion) + ")";
}

namespace detail {

struct Context {
  std::ostream& out;
  std::ostream& err;
  bool quiet = false;
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;

  std::ostream& log() {
    static std::ostream null_stream(nullptr);
    return quiet ? null_stream : err;
  }
};

/// Discrete H from a CSV of (atom, weight) rows, or one column of atoms with
/// equal weights. Weights are renormalized if they do not sum to one.
inline DiscreteDistribution read_spectrum(const std::string& path, Context& ctx) {
  if (path.empty()) return DiscreteDistribution::point_mass(1.0);
  const Matrix m = csv::read(path);
  require(m.cols() == 1 || m.cols() == 2, ErrorCode::ParseError, "H file needs 1 or 2 columns");
  DiscreteDistribution h;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    h.atoms.push_back(m(i, 0));
    h.weights.push_back(m.cols() == 2 ? m(i, 1) : 1.0 / m.rows());
  }
  const double total = h.total_weight();
  if (std::abs(total - 1.0) > 1e-9 && total > 0.0) {
    ctx.log() << "warning: H weights sum to " << total << "; renormalizing\n";
    for (auto& w : h.weights) w /= total;
  }
  return h;
}

/// Panel as p × n. Rows of the file are observations unless layout is "cols".
inline Matrix read_panel(const std::string& path, const std::string& layout) {
  const Matrix m = csv::read(path);
  if (layout == "rows") return m.transpose();
  if (layout == "cols") return m;
  throw Error(ErrorCode::UsageError, "layout must be 'rows' or 'cols'");
}

inline json to_json(const TestResult& r) {
  return {{"test", r.kind == TestKind::H01 ? "h01" : "h02"},
          {"statistic_raw", r.statistic_raw},
          {"z_score", r.z_score},
          {"p_value", r.p_value},
          {"side", to_string(r.side)},
          {"y_used", r.y_used},
          {"beta_x_used", r.beta_x_used},
          {"n", r.n},
          {"p", r.p},
          {"schema_version", kSchemaVersion}};
}

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

struct Grid {
  double a, b;
  int n;
};

inline Grid parse_grid(const std::string& s) {
  Grid g{};
  char c1 = 0, c2 = 0;
  std::istringstream is(s);
  is.imbue(std::locale::classic());
  if (!(is >> g.a >> c1 >> g.b >> c2 >> g.n) || c1 != ':' || c2 != ':' || !is.eof() || g.n < 2 || !(g.b > g.a))
    throw Error(ErrorCode::UsageError, "grid must be a:b:N with a < b and N >= 2");
  return g;
}

inline void write_file_or(std::ostream& fallback, const std::string& path, const std::string& text) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  f << text;
}

inline void run_density(Context& ctx, double y, const std::string& h_path, const std::string& grid_text, double eps) {
  const SpectrumModel model{y, read_spectrum(h_path, ctx)};
  model.validate();
  const Support sup = support_intervals(model);
  const Grid g = grid_text.empty() ? Grid{std::min(0.0, sup.lower()), sup.upper(), 201} : parse_grid(grid_text);
  const double e = eps > 0.0 ? eps : default_density_eps(sup);
  std::vector<double> xs(g.n), fs(g.n);
  for (int i = 0; i < g.n; ++i) xs[i] = g.a + (g.b - g.a) * i / (g.n - 1);
  parallel_for(xs.size(), ctx.threads, [&](std::size_t i) {
    // Points on the real axis outside the support have zero density; the
    // solver is never asked for x = 0 exactly.
    const double x = xs[i] == 0.0 ? 1e-300 : xs[i];
    fs[i] = lsd_density(model, x, e);
  });
  Matrix m(g.n, 2);
  for (int i = 0; i < g.n; ++i) {
    m(i, 0) = xs[i];
    m(i, 1) = fs[i];
  }
  csv::write(ctx.out, m, {"x", "density"});
}

inline void run_support(Context& ctx, double y, const std::string& h_path) {
  const SpectrumModel model{y, read_spectrum(h_path, ctx)};
  const Support s = support_intervals(model);
  json iv = json::array();
  for (const auto& [a, b] : s.intervals) iv.push_back({a, b});
  ctx.out << json{{"intervals", iv}, {"point_mass_at_zero", s.point_mass_at_zero}, {"schema_version", kSchemaVersion}}
                 .dump(2)
          << '\n';
}

inline void run_moments(Context& ctx, double y, double beta, int L, const std::string& format,
                        const std::string& exponent) {
  const SigmaExponent e = exponent == "l1+l2" ? SigmaExponent::L1PlusL2 : SigmaExponent::LPlusLPrime;
  if (exponent != "l1+l2" && exponent != "l+l'")
    throw Error(ErrorCode::UsageError, "sigma exponent must be 'l1+l2' or \"l+l'\"");
  const MomentSet ms = closed_moments(y, beta, L, e);
  if (format == "csv") {
    Matrix m(L, 3 + L);
    std::vector<std::string> header{"l", "F", "mu"};
    for (int j = 1; j <= L; ++j) header.push_back("sigma_" + std::to_string(j));
    for (int i = 0; i < L; ++i) {
      m(i, 0) = i + 1;
      m(i, 1) = ms.F[i];
      m(i, 2) = ms.mu[i];
      for (int j = 0; j < L; ++j) m(i, 3 + j) = ms.sigma(i, j);
    }
    csv::write(ctx.out, m, header);
    return;
  }
  if (format != "json") throw Error(ErrorCode::UsageError, "format must be json or csv");
  ctx.out << json{{"L", L},          {"y", y},
                  {"beta_x", beta},  {"F", ms.F},
                  {"mu", ms.mu},     {"sigma", to_json(ms.sigma)},
                  {"schema_version", kSchemaVersion}}
                 .dump(2)
          << '\n';
}

struct CltArgs {
  double y = 0.5;
  std::string h_path;
  double alpha = 1.0;
  double beta = 0.0;
  std::vector<std::string> functions{"x", "x^2"};
  std::string method = "contour";
  int nodes = 256;
  double c2_scale = 1.15;
  bool general = false;
};

inline void run_clt(Context& ctx, const CltArgs& a) {
  std::vector<Polynomial> polys;
  for (const auto& f : a.functions) polys.push_back(Polynomial::parse(f));
  const auto L = static_cast<Eigen::Index>(polys.size());
  json result;
  result["functions"] = a.functions;
  result["schema_version"] = kSchemaVersion;
  if (a.method == "closed") {
    require(a.h_path.empty() && a.alpha == 1.0, ErrorCode::UsageError,
            "closed method needs H = delta_1 and alpha = 1");
    std::vector<int> degree;
    int max_deg = 1;
    for (const auto& p : polys) {
      int d = -1;
      for (int k = 0; k <= p.degree(); ++k)
        if (p.coefficients()[k] != 0.0) d = (d == -1 && p.coefficients()[k] == 1.0) ? k : -2;
      require(d >= 1, ErrorCode::UsageError, "closed method supports the monomials x^k, k >= 1");
      degree.push_back(d);
      max_deg = std::max(max_deg, d);
    }
    const MomentSet ms = closed_moments(a.y, a.beta, max_deg);
    std::vector<double> mean;
    Matrix cov(L, L);
    for (Eigen::Index i = 0; i < L; ++i) {
      mean.push_back(ms.mu[degree[i] - 1]);
      for (Eigen::Index j = 0; j < L; ++j) cov(i, j) = ms.sigma(degree[i] - 1, degree[j] - 1);
    }
    result["mean"] = mean;
    result["cov"] = to_json(cov);
    result["method"] = "closed";
  } else if (a.method == "contour") {
    const SpectrumModel model{a.y, read_spectrum(a.h_path, ctx)};
    model.validate();
    const PopulationMoments pop{a.alpha, a.beta};
    ContourSpec c = ContourSpec::around(support_intervals(model));
    c.nodes_per_side = a.nodes;
    c.c2_scale = a.c2_scale;
    std::vector<TestFunction> fs;
    for (const auto& p : polys) fs.push_back(as_test_function(p));
    const auto means = clt_mean_vector(model, pop, fs, c);
    const auto cov = clt_cov_matrix(model, pop, fs, c, !a.general, ctx.threads);
    std::vector<double> mv;
    for (const auto& m : means) mv.push_back(m.value);
    result["mean"] = mv;
    result["cov"] = to_json(cov.value);
    result["method"] = "contour";
    result["real_reduction"] = cov.real_reduction;
    result["error_estimate"] = cov.error_estimate;
    result["contour"] = {{"x_l", c.x_l},
                         {"x_r", c.x_r},
                         {"v0", c.v0},
                         {"nodes_per_side", c.nodes_per_side},
                         {"c2_scale", c.c2_scale}};
  } else {
    throw Error(ErrorCode::UsageError, "method must be contour or closed");
  }
  ctx.out << result.dump(2) << '\n';
}

struct TestArgs {
  std::string data, sigma0, layout = "rows", side = "two";
  double beta = 0.0;
  bool estimate_beta = false;
};

inline void run_test(Context& ctx, TestKind kind, const TestArgs& a) {
  const Matrix data = read_panel(a.data, a.layout);
  const Matrix sigma0 = a.sigma0.empty() ? Matrix::Identity(data.rows(), data.rows()) : csv::read(a.sigma0);
  double beta = a.beta;
  if (a.estimate_beta) {
    require(sigma0.rows() == data.rows() && sigma0.cols() == data.rows(), ErrorCode::DimensionMismatch,
            "sigma0 does not match the panel dimension");
    const auto roots = sym_sqrt_and_inv_sqrt(symmetrize_checked(sigma0));
    beta = estimate_beta_x(roots.inv_sqrt * data);
    ctx.log() << "warning: beta_x estimated from whitened data (experimental): " << beta << '\n';
  }
  if (beta != 0.0 && !sigma0.isDiagonal(1e-14))
    ctx.log() << "warning: non-Gaussian beta_x with a non-diagonal sigma0; the standardization assumes a diagonal "
                 "Q*Q\n";
  const Side side = parse_side(a.side);
  const TestResult r = kind == TestKind::H01 ? h01_test(data, sigma0, beta, side) : h02_test(data, sigma0, beta, side);
  ctx.out << to_json(r).dump(2) << '\n';
}

struct ScanArgs {
  std::string data, layout = "rows", side = "two", out, region = "strict";
  double step = 0.01, alpha = 0.05, beta = 0.0;
};

inline void run_scan(Context& ctx, bool ar2, const ScanArgs& a) {
  const Matrix data = read_panel(a.data, a.layout);
  ScanOptions opt;
  opt.grid_step = a.step;
  opt.alpha = a.alpha;
  opt.beta_x = a.beta;
  opt.side = parse_side(a.side);
  opt.threads = ctx.threads;
  if (a.region != "strict" && a.region != "stationary") throw Error(ErrorCode::UsageError, "region: strict|stationary");
  const Ar2Region region = a.region == "strict" ? Ar2Region::Strict : Ar2Region::Stationary;
  const ScanResult r = ar2 ? scan_ar2(data, opt, region) : scan_ar1(data, opt);
  if (!a.out.empty()) {
    std::ostringstream os;
    os << (ar2 ? "phi1,phi2,p_value\n" : "phi,p_value\n");
    for (std::size_t i = 0; i < r.grid.size(); ++i) {
      for (double v : r.grid[i]) os << csv::format(v) << ',';
      os << (std::isnan(r.p_values[i]) ? std::string("NA") : csv::format(r.p_values[i])) << '\n';
    }
    write_file_or(ctx.out, a.out, os.str());
  }
  std::size_t failed = 0;
  for (const auto& e : r.errors) failed += !e.empty();
  ctx.out << json{{"model", ar2 ? "ar2" : "ar1"},
                  {"grid_points", r.grid.size()},
                  {"failed_points", failed},
                  {"max_p", r.max_p},
                  {"argmax", r.argmax},
                  {"alpha", r.alpha},
                  {"step", a.step},
                  {"decision", r.decision_at_alpha ? "rejected" : "not rejected"},
                  {"schema_version", kSchemaVersion}}
                 .dump(2)
          << '\n';
}

struct SimArgs {
  std::string config, out, sidecar;
  bool full = false;
};

inline void run_simulate(Context& ctx, Scenario scenario, const SimArgs& a) {
  json j = json::object();
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + a.config + "'");
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("config is not valid JSON: ") + e.what());
    }
  }
  SimConfig cfg = sim_config_from_json(j, scenario);
  if (ctx.seed) cfg.base_seed = *ctx.seed;
  if (a.full) {
    cfg.make_full();
    ctx.log() << "warning: --full runs the complete table grid at 5000 replications; expect hours\n";
  }
  const SimTable t = run_simulation(cfg, ctx.threads, &ctx.log());
  std::ostringstream table;
  write_table_csv(table, t);
  write_file_or(ctx.out, a.out, table.str());
  std::string side_path = a.sidecar;
  if (side_path.empty() && !a.out.empty()) side_path = a.out + ".json";
  if (!side_path.empty()) write_file_or(ctx.out, side_path, table_sidecar(t).dump(2) + "\n");
}

inline int report(std::ostream& out, std::string_view name, const std::string& message, int code) {
  out << json{{"error", name}, {"message", message}, {"schema_version", kSchemaVersion}}.dump(2) << '\n';
  return code;
}

}  // namespace detail

/// Parses argv and runs one subcommand. Results go to `out`, progress and
/// warnings to `err`. Returns 0 on success, 1 on a module error and 2 on a
/// usage error; errors are also reported as a JSON block on `out`.
inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral statistics of dependent-data sample covariance matrices", "spectest"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  // Global options are also accepted after the subcommand.
  app.fallthrough();
  detail::Context ctx{out, err};
  std::string seed_text;
  app.add_flag("--quiet", ctx.quiet, "Silence progress and warnings on stderr");
  app.add_option("--threads", ctx.threads, "Worker threads (default: logical cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed_text, "Base seed, decimal or 0x-hex (SPECTEST_SEED overrides)");

  // density
  double y = 0.5, eps = -1.0, beta = 0.0;
  std::string h_path, grid;
  auto* density = app.add_subcommand("density", "LSD density on a grid (CSV x,density)");
  density->add_option("--y", y, "Aspect ratio p/n")->required();
  density->add_option("--H", h_path, "CSV of (atom, weight); default delta_1");
  density->add_option("--grid", grid, "a:b:N (default: the support, 201 points)");
  density->add_option("--eps", eps, "Imaginary offset (default 1e-6 of the support width)");

  auto* support = app.add_subcommand("support", "Support intervals and atom at zero (JSON)");
  support->add_option("--y", y, "Aspect ratio p/n")->required();
  support->add_option("--H", h_path, "CSV of (atom, weight); default delta_1");

  int L = 4;
  std::string format = "json", exponent = "l1+l2";
  auto* moments = app.add_subcommand("moments", "Closed-form F, mu, sigma for H = delta_1");
  moments->add_option("--y", y, "Aspect ratio")->required();
  moments->add_option("--beta", beta, "beta_x (default 0)");
  moments->add_option("--L", L, "Number of moments")->check(CLI::PositiveNumber);
  moments->add_option("--format", format, "json or csv");
  moments->add_option("--sigma-exponent", exponent, "l1+l2 (default) or l+l' (comparison only)");

  detail::CltArgs clt_args;
  auto* clt = app.add_subcommand("clt", "Limiting mean and covariance of linear spectral statistics (JSON)");
  clt->add_option("--y", clt_args.y, "Aspect ratio")->required();
  clt->add_option("--H", clt_args.h_path, "CSV of (atom, weight); default delta_1");
  clt->add_option("--alpha", clt_args.alpha, "alpha_x in [0, 1]");
  clt->add_option("--beta", clt_args.beta, "beta_x");
  clt->add_option("--f", clt_args.functions, "Test functions: x, x^k or a constant (repeatable)");
  clt->add_option("--method", clt_args.method, "contour or closed");
  clt->add_option("--nodes", clt_args.nodes, "Quadrature nodes per contour side");
  clt->add_option("--c2-scale", clt_args.c2_scale, "Scale of the outer covariance contour");
  clt->add_flag("--general", clt_args.general, "Integrate the log term even when alpha_x = 1");

  detail::TestArgs test_args;
  auto* test = app.add_subcommand("test", "H01 / H02 covariance structure tests (JSON)");
  test->require_subcommand(1);
  auto add_test_opts = [&](CLI::App* sub) {
    sub->add_option("--data", test_args.data, "Panel CSV")->required();
    sub->add_option("--sigma0", test_args.sigma0, "Sigma0 CSV (default identity)");
    sub->add_option("--beta", test_args.beta, "beta_x (default 0)");
    sub->add_option("--side", test_args.side, "two (default) or upper");
    sub->add_option("--layout", test_args.layout, "rows: n x p (default); cols: p x n");
    sub->add_flag("--estimate-beta", test_args.estimate_beta, "Estimate beta_x from whitened data (experimental)");
  };
  auto* h01 = test->add_subcommand("h01", "Covariance equals sigma0");
  auto* h02 = test->add_subcommand("h02", "Covariance proportional to sigma0");
  add_test_opts(h01);
  add_test_opts(h02);

  detail::ScanArgs scan_args;
  auto* scan = app.add_subcommand("scan", "AR(1) / AR(2) structure scans");
  scan->require_subcommand(1);
  auto add_scan_opts = [&](CLI::App* sub) {
    sub->add_option("--data", scan_args.data, "Panel CSV")->required();
    sub->add_option("--step", scan_args.step, "Grid step (default 0.01)");
    sub->add_option("--alpha", scan_args.alpha, "Level (default 0.05)");
    sub->add_option("--beta", scan_args.beta, "beta_x (default 0)");
    sub->add_option("--side", scan_args.side, "two (default) or upper");
    sub->add_option("--layout", scan_args.layout, "rows: n x p (default); cols: p x n");
    sub->add_option("--out", scan_args.out, "Write the grid of p-values to this CSV");
  };
  auto* ar1 = scan->add_subcommand("ar1", "Scan phi over (-1, 1)");
  auto* ar2 = scan->add_subcommand("ar2", "Scan (phi1, phi2) over the admissible region");
  add_scan_opts(ar1);
  add_scan_opts(ar2);
  ar2->add_option("--region", scan_args.region, "strict (default) or stationary");

  detail::SimArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo size / power tables");
  simulate->require_subcommand(1);
  auto add_sim_opts = [&](CLI::App* sub) {
    sub->add_option("--config", sim_args.config, "Config JSON (defaults: phi=(0.3,0.2), n=100, p=50, R=1000)");
    sub->add_flag("--full", sim_args.full, "Full table grid at 5000 replications");
    sub->add_option("--out", sim_args.out, "CSV table path (default stdout)");
    sub->add_option("--sidecar", sim_args.sidecar, "JSON sidecar path (default <out>.json)");
  };
  auto* size = simulate->add_subcommand("size", "Empirical sizes of H02");
  auto* power = simulate->add_subcommand("power", "Empirical powers of H02");
  add_sim_opts(size);
  add_sim_opts(power);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion&) {
    out << version_string() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    return detail::report(out, to_string(ErrorCode::UsageError), e.what(), 2);
  }

  try {
    if (const char* env = std::getenv("SPECTEST_SEED"); env && *env) seed_text = env;
    if (!seed_text.empty()) ctx.seed = parse_seed(seed_text);
    if (*density) detail::run_density(ctx, y, h_path, grid, eps);
    else if (*support) detail::run_support(ctx, y, h_path);
    else if (*moments) detail::run_moments(ctx, y, beta, L, format, exponent);
    else if (*clt) detail::run_clt(ctx, clt_args);
    else if (*h01) detail::run_test(ctx, TestKind::H01, test_args);
    else if (*h02) detail::run_test(ctx, TestKind::H02, test_args);
    else if (*ar1) detail::run_scan(ctx, false, scan_args);
    else if (*ar2) detail::run_scan(ctx, true, scan_args);
    else if (*size) detail::run_simulate(ctx, Scenario::Size, sim_args);
    else if (*power) detail::run_simulate(ctx, Scenario::Power, sim_args);
  } catch (const Error& e) {
    const int code = e.code() == ErrorCode::UsageError ? 2 : 1;
    return detail::report(out, e.name(), e.what(), code);
  } catch (const std::exception& e) {
    return detail::report(out, "InternalError", e.what(), 1);
  }
  return 0;
}

inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"spectest"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace spectest::cli
