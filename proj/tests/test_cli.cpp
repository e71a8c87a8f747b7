#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "spectest/cli.hpp"

using namespace spectest;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("spectest_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write_matrix(const std::string& name, const Matrix& m) const {
    csv::write(path(name), m);
    return path(name);
  }

  fs::path dir_;
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Matrix read_csv_text(const std::string& text) {
  std::istringstream in(text);
  return csv::parse(in);
}

}  // namespace

TEST_F(CliTest, Version) {
  const auto r = run({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, cli::version_string() + "\n");
  EXPECT_NE(r.out.find("interface revision 1"), std::string::npos);
}

TEST_F(CliTest, Moments) {
  const auto r = run({"moments", "--y", "0.5", "--beta", "0", "--L", "3"});
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j["F"][0].get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(j["F"][1].get<double>(), 1.5, 1e-12);
  EXPECT_NEAR(j["mu"][0].get<double>(), 0.0, 1e-12);
  EXPECT_NEAR(j["mu"][1].get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(j["sigma"][0][0].get<double>(), 1.0, 1e-12);

  const auto c = run({"moments", "--y", "0.5", "--L", "2", "--format", "csv"});
  ASSERT_EQ(c.code, 0);
  EXPECT_EQ(c.out.substr(0, c.out.find('\n')), "l,F,mu,sigma_1,sigma_2");
  const Matrix m = read_csv_text(c.out);
  EXPECT_NEAR(m(1, 1), 1.5, 1e-12);
}

TEST_F(CliTest, DensityMassAndMean) {
  const auto r = run({"density", "--y", "0.25", "--grid", "0.25:2.25:100"});
  ASSERT_EQ(r.code, 0) << r.out;
  const Matrix m = read_csv_text(r.out);
  ASSERT_EQ(m.rows(), 100);
  double mass = 0.0;
  for (int i = 0; i < 100; ++i) {
    EXPECT_GE(m(i, 1), 0.0);
    if (i > 0) mass += 0.5 * (m(i, 0) - m(i - 1, 0)) * (m(i, 1) + m(i - 1, 1));
  }
  EXPECT_NEAR(mass, 1.0, 0.01);

  const auto fine = run({"density", "--y", "0.25", "--grid", "0.25:2.25:4001", "--threads", "2"});
  const Matrix g = read_csv_text(fine.out);
  double first = 0.0;
  for (int i = 1; i < g.rows(); ++i)
    first += 0.5 * (g(i, 0) - g(i - 1, 0)) * (g(i, 0) * g(i, 1) + g(i - 1, 0) * g(i - 1, 1));
  const auto mom = json::parse(run({"moments", "--y", "0.25", "--L", "1"}).out);
  EXPECT_NEAR(first, mom["F"][0].get<double>(), 1e-3);
}

TEST_F(CliTest, DensityWithSpectrumFile) {
  Matrix h(2, 2);
  h << 1.0, 1.0, 3.0, 1.0;  // weights sum to 2
  const auto r = run({"density", "--y", "0.25", "--H", write_matrix("h.csv", h), "--grid", "0.5:4:5"});
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.err.find("renormalizing"), std::string::npos);
  const auto quiet = run({"--quiet", "density", "--y", "0.25", "--H", path("h.csv"), "--grid", "0.5:4:5"});
  EXPECT_TRUE(quiet.err.empty());
  EXPECT_EQ(quiet.out, r.out);
}

TEST_F(CliTest, Support) {
  const auto r = run({"support", "--y", "4"});
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j["intervals"][0][0].get<double>(), 1.0, 1e-9);
  EXPECT_NEAR(j["intervals"][0][1].get<double>(), 9.0, 1e-9);
  EXPECT_NEAR(j["point_mass_at_zero"].get<double>(), 0.75, 1e-12);
}

TEST_F(CliTest, CltMethodsAgree) {
  const auto a = json::parse(run({"clt", "--y", "0.5", "--beta", "1", "--f", "x", "--f", "x^2"}).out);
  const auto b = json::parse(run({"clt", "--y", "0.5", "--beta", "1", "--method", "closed", "--f", "x", "--f", "x^2"}).out);
  EXPECT_EQ(a["method"], "contour");
  EXPECT_EQ(b["method"], "closed");
  EXPECT_TRUE(a.contains("contour"));
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(a["mean"][i].get<double>(), b["mean"][i].get<double>(), 1e-6);
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(a["cov"][i][k].get<double>(), b["cov"][i][k].get<double>(), 1e-6);
  }
  const auto bad = run({"clt", "--y", "0.5", "--method", "closed", "--f", "2"});
  EXPECT_EQ(bad.code, 2);
}

TEST_F(CliTest, TestSubcommand) {
  const int p = 6, n = 40;
  const Matrix panel = PanelGenerator(MixingSpec::ar1(0.4, p), InnovationLaw::gaussian()).generate(n, 5).data;
  const std::string rows = write_matrix("rows.csv", panel.transpose());
  const std::string cols = write_matrix("cols.csv", panel);
  const std::string sig = write_matrix("sigma.csv", ar1_autocorr(0.4, p));
  const auto a = run({"test", "h02", "--data", rows, "--sigma0", sig});
  ASSERT_EQ(a.code, 0) << a.out;
  const auto b = run({"test", "h02", "--data", cols, "--sigma0", sig, "--layout", "cols"});
  EXPECT_EQ(a.out, b.out);
  const auto j = json::parse(a.out);
  EXPECT_EQ(j["test"], "h02");
  EXPECT_EQ(j["n"], n);
  EXPECT_EQ(j["p"], p);
  EXPECT_NEAR(j["statistic_raw"].get<double>(), h02_test(panel, ar1_autocorr(0.4, p)).statistic_raw, 1e-12);

  const auto warn = run({"test", "h01", "--data", rows, "--sigma0", sig, "--beta", "1", "--side", "two"});
  EXPECT_EQ(warn.code, 0);
  EXPECT_NE(warn.err.find("non-diagonal"), std::string::npos);
  EXPECT_EQ(json::parse(warn.out)["side"], "two");

  const auto est = run({"test", "h02", "--data", rows, "--estimate-beta"});
  EXPECT_EQ(est.code, 0);
  EXPECT_NE(est.err.find("experimental"), std::string::npos);
}

TEST_F(CliTest, DimensionMismatchIsModuleError) {
  const std::string d = write_matrix("d.csv", Matrix::Random(20, 5));
  const std::string s = write_matrix("s.csv", Matrix::Identity(4, 4));
  const auto r = run({"test", "h02", "--data", d, "--sigma0", s});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.out)["error"], "DimensionMismatch");
}

TEST_F(CliTest, MissingFileIsModuleError) {
  const auto r = run({"test", "h01", "--data", path("nope.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.out)["error"], "IoError");
}

TEST_F(CliTest, UsageErrors) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {}, {"frobnicate"}, {"density"}, {"density", "--y", "x"}, {"density", "--y", "0.5", "--grid", "1:0:3"},
           {"test"}, {"moments", "--y", "0.5", "--format", "xml"}}) {
    const auto r = run(args);
    EXPECT_EQ(r.code, 2) << (args.empty() ? "" : args[0]);
    EXPECT_EQ(json::parse(r.out)["error"], "UsageError");
  }
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"scan", "ar2", "--help"}).code, 0);
}

TEST_F(CliTest, Scan) {
  const Matrix panel = PanelGenerator(MixingSpec::ar1(0.5, 30), InnovationLaw::gaussian()).generate(80, 2).data;
  const std::string d = write_matrix("d.csv", panel.transpose());
  const auto r = run({"scan", "ar1", "--data", d, "--step", "0.1", "--out", path("grid.csv")});
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["grid_points"], 19);
  EXPECT_EQ(j["failed_points"], 0);
  const std::string grid = slurp(path("grid.csv"));
  EXPECT_EQ(grid.substr(0, grid.find('\n')), "phi,p_value");
  const auto direct = scan_ar1(panel, {0.1});
  EXPECT_NEAR(j["max_p"].get<double>(), direct.max_p, 1e-14);

  const auto empty = run({"scan", "ar2", "--data", d, "--step", "1.5"});
  EXPECT_EQ(empty.code, 1);
  EXPECT_EQ(json::parse(empty.out)["error"], "GridEmpty");
}

TEST_F(CliTest, SimulateIsThreadIndependent) {
  {
    std::ofstream cfg(path("cfg.json"));
    cfg << R"({"replications": 150, "p_list": [8, 12], "n_list": [20]})";
  }
  const auto a = run({"--threads", "1", "--quiet", "simulate", "size", "--config", path("cfg.json"), "--out", path("a.csv")});
  const auto b = run({"--threads", "3", "simulate", "size", "--config", path("cfg.json"), "--out", path("b.csv")});
  ASSERT_EQ(a.code, 0) << a.out;
  ASSERT_EQ(b.code, 0) << b.out;
  EXPECT_FALSE(b.err.empty());
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  const auto side = json::parse(slurp(path("a.csv.json")));
  EXPECT_EQ(side["cells"].size(), 2u);
  EXPECT_EQ(side["config"]["replications"], 150);
}

TEST_F(CliTest, SeedFlagAndEnvironment) {
  {
    std::ofstream cfg(path("cfg.json"));
    cfg << R"({"replications": 100, "p_list": [5], "n_list": [15]})";
  }
  const auto a = run({"--seed", "77", "--quiet", "simulate", "size", "--config", path("cfg.json"), "--out", path("a.csv")});
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(json::parse(slurp(path("a.csv.json")))["config"]["base_seed"], 77u);
  ::setenv("SPECTEST_SEED", "0x20", 1);
  const auto b = run({"--seed", "77", "--quiet", "simulate", "size", "--config", path("cfg.json"), "--out", path("b.csv")});
  ::unsetenv("SPECTEST_SEED");
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(json::parse(slurp(path("b.csv.json")))["config"]["base_seed"], 32u);
}

TEST_F(CliTest, BadConfig) {
  {
    std::ofstream cfg(path("cfg.json"));
    cfg << "{ not json";
  }
  const auto r = run({"simulate", "power", "--config", path("cfg.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.out)["error"], "ParseError");
}
