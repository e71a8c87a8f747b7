#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <locale>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <json.hpp>

#include "spectest/csv.hpp"
#include "spectest/error.hpp"
#include "spectest/hypotests.hpp"
#include "spectest/mixing.hpp"
#include "spectest/parallel.hpp"
#include "spectest/rng.hpp"
#include "spectest/sampler.hpp"

namespace spectest {

enum class Scenario { Size, Power };

struct SimConfig {
  Scenario scenario = Scenario::Size;
  std::vector<double> phi1{0.3};
  std::vector<double> phi2{0.2};
  double null_phi1 = 0.18;
  double null_phi2 = 0.18;
  std::vector<int> n_list{100};
  std::vector<int> p_list{50};
  int replications = 1000;
  double alpha = 0.05;
  InnovationLaw law = InnovationLaw::gaussian();
  /// Unset means the law's own β_x.
  std::optional<double> beta_x;
  Side side = Side::TwoSided;
  std::uint64_t base_seed = 20240601;

  double beta_used() const { return beta_x.value_or(law.beta_x()); }

  /// True for a Power run whose null equals the data parameters everywhere.
  bool degenerate_power() const {
    if (scenario != Scenario::Power) return false;
    for (double a : phi1)
      for (double b : phi2)
        if (a != null_phi1 || b != null_phi2) return false;
    return true;
  }

  void validate() const {
    require(replications >= 100, ErrorCode::InvalidConfig, "replications must be >= 100");
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidConfig, "alpha must lie in (0, 1)");
    require(!phi1.empty() && !phi2.empty() && !n_list.empty() && !p_list.empty(), ErrorCode::InvalidConfig,
            "parameter lists must be nonempty");
    for (double a : phi1)
      for (double b : phi2)
        if (!ar2_admissible(a, b))
          throw Error(ErrorCode::ParameterOutOfRegion, "data AR(2) parameters outside the admissible region");
    if (scenario == Scenario::Power && !ar2_admissible(null_phi1, null_phi2))
      throw Error(ErrorCode::ParameterOutOfRegion, "null AR(2) parameters outside the admissible region");
    for (int n : n_list) require(n >= 3, ErrorCode::InvalidConfig, "n must be >= 3");
    for (int p : p_list) require(p >= 1, ErrorCode::InvalidConfig, "p must be >= 1");
  }

  /// Full size and power grids at 5000 replications.
  void make_full() {
    n_list = {100, 200, 300};
    replications = 5000;
    if (scenario == Scenario::Size) {
      phi1 = {0.3, 0.6};
      phi2 = {0.2, 0.3};
      p_list = {50, 100, 200, 500, 1000};
    } else {
      phi1 = {0.3, 0.35};
      phi2 = {0.2, 0.25};
      p_list = {50, 100, 200, 500};
      null_phi1 = null_phi2 = 0.18;
    }
  }
};

inline const char* to_string(Scenario s) { return s == Scenario::Size ? "size" : "power"; }

namespace detail {

template <typename T>
std::vector<T> scalar_or_list(const nlohmann::json& j) {
  if (j.is_array()) return j.get<std::vector<T>>();
  return {j.get<T>()};
}

}  // namespace detail

/// Reads a config from JSON. Missing keys keep their defaults (size run at
/// phi = (0.3, 0.2), n = 100, p = 50, R = 1000).
inline SimConfig sim_config_from_json(const nlohmann::json& j, std::optional<Scenario> scenario = std::nullopt) {
  SimConfig c;
  try {
    if (j.contains("scenario")) {
      const auto s = j.at("scenario").get<std::string>();
      if (s == "size") c.scenario = Scenario::Size;
      else if (s == "power") c.scenario = Scenario::Power;
      else throw Error(ErrorCode::InvalidConfig, "scenario must be 'size' or 'power'");
    }
    if (scenario) c.scenario = *scenario;
    if (j.contains("phi1")) c.phi1 = detail::scalar_or_list<double>(j.at("phi1"));
    if (j.contains("phi2")) c.phi2 = detail::scalar_or_list<double>(j.at("phi2"));
    if (j.contains("null_phi1")) c.null_phi1 = j.at("null_phi1").get<double>();
    if (j.contains("null_phi2")) c.null_phi2 = j.at("null_phi2").get<double>();
    if (j.contains("n_list")) c.n_list = detail::scalar_or_list<int>(j.at("n_list"));
    if (j.contains("p_list")) c.p_list = detail::scalar_or_list<int>(j.at("p_list"));
    if (j.contains("replications")) c.replications = j.at("replications").get<int>();
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("law")) c.law = InnovationLaw::parse(j.at("law").get<std::string>());
    if (j.contains("beta_x") && !j.at("beta_x").is_null()) c.beta_x = j.at("beta_x").get<double>();
    if (j.contains("side")) c.side = parse_side(j.at("side").get<std::string>());
    if (j.contains("base_seed")) {
      const auto& s = j.at("base_seed");
      c.base_seed = s.is_string() ? parse_seed(s.get<std::string>()) : s.get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad config: ") + e.what());
  }
  return c;
}

inline nlohmann::json sim_config_to_json(const SimConfig& c) {
  nlohmann::json j;
  j["scenario"] = to_string(c.scenario);
  j["phi1"] = c.phi1;
  j["phi2"] = c.phi2;
  j["null_phi1"] = c.null_phi1;
  j["null_phi2"] = c.null_phi2;
  j["n_list"] = c.n_list;
  j["p_list"] = c.p_list;
  j["replications"] = c.replications;
  j["alpha"] = c.alpha;
  j["law"] = c.law.name();
  j["beta_x"] = c.beta_used();
  j["side"] = to_string(c.side);
  j["base_seed"] = c.base_seed;
  return j;
}

struct SimCell {
  double phi1 = 0.0, phi2 = 0.0, null_phi1 = 0.0, null_phi2 = 0.0;
  int n = 0, p = 0;
  int replications = 0;
  int effective_r = 0;
  int failures = 0;
  int rejections = 0;
  bool failed = false;
  double percent = 0.0;
  double se = 0.0;  // percentage points
  double ci_low = 0.0, ci_high = 0.0;
  std::uint64_t first_seed = 0;
};

struct SimTable {
  SimConfig config;
  std::vector<SimCell> cells;
  bool degenerate_power = false;
};

/// Seed of replication r in a cell.
inline std::uint64_t replication_seed(const SimConfig& c, Scenario scenario, double phi1, double phi2, int n, int p,
                                      int r) {
  return hash_seed(c.base_seed, static_cast<std::uint64_t>(scenario), bits_of(phi1), bits_of(phi2),
                   static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(r));
}

/// Exact (Clopper-Pearson) 95% interval for k successes out of n, in percent.
inline std::pair<double, double> clopper_pearson(int k, int n) {
  if (n <= 0) return {0.0, 100.0};
  const double a = 0.025;
  const double lo = k == 0 ? 0.0 : boost::math::ibeta_inv(k, n - k + 1, a);
  const double hi = k == n ? 1.0 : boost::math::ibeta_inv(k + 1, n - k, 1.0 - a);
  return {100.0 * lo, 100.0 * hi};
}

namespace detail {

inline SimCell run_cell(const SimConfig& c, Scenario seed_scenario, double phi1, double phi2, int n, int p,
                        unsigned threads) {
  SimCell cell;
  cell.phi1 = phi1;
  cell.phi2 = phi2;
  cell.n = n;
  cell.p = p;
  const bool power = c.scenario == Scenario::Power;
  cell.null_phi1 = power ? c.null_phi1 : phi1;
  cell.null_phi2 = power ? c.null_phi2 : phi2;
  cell.replications = c.replications;
  cell.first_seed = replication_seed(c, seed_scenario, phi1, phi2, n, p, 0);

  const PanelGenerator gen(MixingSpec::ar2(phi1, phi2, p), c.law);
  const SymmetricBand precision = ar2_precision(cell.null_phi1, cell.null_phi2, p);
  const double beta = c.beta_used();
  // 1 = reject, 0 = accept, -1 = failed replication.
  std::vector<signed char> outcome(static_cast<std::size_t>(c.replications), -1);
  parallel_for(outcome.size(), threads, [&](std::size_t r) {
    try {
      const auto seed = replication_seed(c, seed_scenario, phi1, phi2, n, p, static_cast<int>(r));
      const auto panel = gen.generate(n, seed);
      const auto res = h02_banded(sample_cov(panel.data, true), n, precision, beta, c.side);
      outcome[r] = res.p_value < c.alpha ? 1 : 0;
    } catch (const Error&) {
      outcome[r] = -1;
    }
  });
  for (signed char o : outcome) {
    if (o < 0) ++cell.failures;
    else cell.rejections += o;
  }
  cell.effective_r = c.replications - cell.failures;
  cell.failed = cell.failures > 0.01 * c.replications || cell.effective_r == 0;
  if (cell.effective_r > 0) {
    const double rate = static_cast<double>(cell.rejections) / cell.effective_r;
    cell.percent = 100.0 * rate;
    const double q = power ? rate : c.alpha;
    cell.se = 100.0 * std::sqrt(q * (1.0 - q) / cell.effective_r);
    std::tie(cell.ci_low, cell.ci_high) = clopper_pearson(cell.rejections, cell.effective_r);
  }
  return cell;
}

inline SimTable run_table(SimConfig c, Scenario expected, unsigned threads, std::ostream* progress) {
  require(c.scenario == expected, ErrorCode::InvalidConfig,
          std::string("config scenario must be '") + to_string(expected) + "'");
  c.validate();
  SimTable t;
  t.degenerate_power = c.degenerate_power();
  // A degenerate power run is a size run, seeds included.
  const Scenario seed_scenario = t.degenerate_power ? Scenario::Size : c.scenario;
  if (t.degenerate_power && progress) *progress << "warning: null equals data parameters; this is a size run\n";
  for (double a : c.phi1)
    for (double b : c.phi2)
      for (int n : c.n_list)
        for (int p : c.p_list) {
          if (progress)
            *progress << to_string(c.scenario) << " cell phi=(" << a << ", " << b << ") n=" << n << " p=" << p
                      << " R=" << c.replications << '\n';
          t.cells.push_back(run_cell(c, seed_scenario, a, b, n, p, threads));
        }
  t.config = std::move(c);
  return t;
}

}  // namespace detail

/// Empirical sizes (%) of H02 with Σ₀ equal to the data-generating AR(2)
/// correlation, one cell per (φ1, φ2, n, p).
inline SimTable run_size_table(const SimConfig& cfg, unsigned threads = 1, std::ostream* progress = nullptr) {
  return detail::run_table(cfg, Scenario::Size, threads, progress);
}

/// Empirical powers (%) of H02 with Σ₀ built from the null parameters.
inline SimTable run_power_table(const SimConfig& cfg, unsigned threads = 1, std::ostream* progress = nullptr) {
  return detail::run_table(cfg, Scenario::Power, threads, progress);
}

inline SimTable run_simulation(const SimConfig& cfg, unsigned threads = 1, std::ostream* progress = nullptr) {
  return cfg.scenario == Scenario::Size ? run_size_table(cfg, threads, progress)
                                        : run_power_table(cfg, threads, progress);
}

namespace detail {

/// Shortest round-trip text of a grid parameter, for row and column labels.
inline std::string label(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

/// Wide table: one row per (φ2, n), one column per (φ1, p). Failed cells are
/// written as NA.
inline void write_table_csv(std::ostream& out, const SimTable& t) {
  const auto& c = t.config;
  out << "phi2,n";
  for (double a : c.phi1)
    for (int p : c.p_list) out << ",phi1=" << detail::label(a) << "/p=" << p;
  out << '\n';
  std::map<std::tuple<double, double, int, int>, const SimCell*> index;
  for (const auto& cell : t.cells) index[{cell.phi1, cell.phi2, cell.n, cell.p}] = &cell;
  for (double b : c.phi2) {
    for (int n : c.n_list) {
      out << detail::label(b) << ',' << n;
      for (double a : c.phi1) {
        for (int p : c.p_list) {
          const SimCell* cell = index.at({a, b, n, p});
          out << ',';
          if (cell->failed) {
            out << "NA";
          } else {
            std::ostringstream os;
            os.imbue(std::locale::classic());
            os << std::fixed << std::setprecision(2) << cell->percent;
            out << os.str();
          }
        }
      }
      out << '\n';
    }
  }
}

inline nlohmann::json table_sidecar(const SimTable& t) {
  nlohmann::json j;
  j["config"] = sim_config_to_json(t.config);
  j["degenerate_power"] = t.degenerate_power;
  j["seed_rule"] = "hash(base_seed, scenario, phi1, phi2, n, p, r)";
  auto& cells = j["cells"] = nlohmann::json::array();
  for (const auto& c : t.cells) {
    cells.push_back({{"phi1", c.phi1},
                     {"phi2", c.phi2},
                     {"null_phi1", c.null_phi1},
                     {"null_phi2", c.null_phi2},
                     {"n", c.n},
                     {"p", c.p},
                     {"replications", c.replications},
                     {"effective_r", c.effective_r},
                     {"failures", c.failures},
                     {"rejections", c.rejections},
                     {"failed", c.failed},
                     {"percent", c.percent},
                     {"mc_se", c.se},
                     {"ci95", {c.ci_low, c.ci_high}},
                     {"first_seed", c.first_seed}});
  }
  return j;
}

}  // namespace spectest
