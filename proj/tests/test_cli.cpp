#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "cli_app.hpp"

namespace fs = std::filesystem;
using ness::io::Json;

namespace {

const fs::path kConfigs = NESS_CONFIG_DIR;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome ness_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ness");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = ness::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ness_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out(const std::string& sub) const { return (dir_ / sub).string(); }
  std::string write_config(const std::string& name, const std::string& text) const {
    ness::io::write_file(dir_ / name, text);
    return (dir_ / name).string();
  }
  static Json read_json(const fs::path& p) { return Json::parse(ness::io::read_file(p)); }

  fs::path dir_;
};

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) v.push_back(l);
  return v;
}

}  // namespace

TEST_F(Cli, CheckQuarticChainPasses) {
  const auto r = ness_cli({"check", (kConfigs / "quartic_chain.json").string(), "--out", out("q")});
  EXPECT_EQ(r.code, 0) << r.err;
  const Json rep = read_json(out("q") + "/check.json");
  EXPECT_TRUE(rep["result"]["H1"]["holds"].get<bool>());
  EXPECT_TRUE(rep["result"]["H2"]["holds"].get<bool>());
  EXPECT_TRUE(rep["result"]["linear"].is_null());
}

TEST_F(Cli, CheckLinearPairFailsH2) {
  const auto r = ness_cli({"check", (kConfigs / "linear_pair.json").string(), "--out", out("l")});
  EXPECT_EQ(r.code, 1);
  const Json rep = read_json(out("l") + "/check.json");
  EXPECT_FALSE(rep["result"]["H2"]["holds"].get<bool>());
  EXPECT_FALSE(rep["pass"].get<bool>());
}

TEST_F(Cli, CheckDiamondWarnsAndFailsUnderStrict) {
  const auto cfg = (kConfigs / "diamond_harmonic.json").string();
  const auto lax = ness_cli({"check", cfg, "--out", out("d")});
  EXPECT_EQ(lax.code, 0);
  EXPECT_NE(lax.err.find("rank deficient"), std::string::npos);
  const Json rep = read_json(out("d") + "/check.json");
  EXPECT_EQ(rep["result"]["linear"]["mode_deficiency"], 1);
  EXPECT_EQ(ness_cli({"check", cfg, "--out", out("d"), "--strict"}).code, 1);
}

TEST_F(Cli, SimulateZeroHorizonIsHeaderOnly) {
  const auto r = ness_cli({"simulate", (kConfigs / "quartic_chain.json").string(), "--out", out("s"), "--horizon", "0",
                           "--observers", "Phi_1,sigma_1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto l = lines(ness::io::read_file(out("s") + "/trajectory_0.csv"));
  ASSERT_EQ(l.size(), 2u);
  EXPECT_EQ(l[0].rfind("# config_digest=", 0), 0u);
  EXPECT_EQ(l[1], "t,Phi_1,sigma_1");
  const Json h = read_json(out("s") + "/simulate.json");
  EXPECT_EQ(h["result"]["columns"], Json::parse(R"(["t", "Phi_1", "sigma_1"])"));
  EXPECT_EQ(h["config"]["run"]["horizon"], 0.0);
}

TEST_F(Cli, SimulateIsReproducibleAndVerifiable) {
  const auto cfg = write_config("sim.json", R"({
    "model": {"topology": {"kind": "chain", "n": 3}, "onsite": [0, 0, 0.5, 0, 0.25], "pair": [0, 0, 0.5, 0, 0.25],
              "reservoirs": [{"temperature": 2}, {"temperature": 1}]},
    "integrator": {"dt": 0.01},
    "run": {"horizon": 5, "n_traj": 3, "seed": 1, "stride": 5, "observers": ["Phi_1", "sigma_1"]}})");
  ASSERT_EQ(ness_cli({"simulate", cfg, "--out", out("a"), "--seed", "42", "--raw"}).code, 0);
  ASSERT_EQ(ness_cli({"simulate", cfg, "--out", out("b"), "--seed", "42", "--raw", "--workers", "3"}).code, 0);
  for (const char* f : {"simulate.json", "simulate.raw.json", "trajectory_0.csv", "trajectory_2.csv"}) {
    EXPECT_EQ(ness::io::read_file(out("a") + "/" + f), ness::io::read_file(out("b") + "/" + f)) << f;
  }
  const auto l = lines(ness::io::read_file(out("a") + "/trajectory_1.csv"));
  EXPECT_EQ(l[0].find("seed=42"), l[0].size() - 7);
  EXPECT_EQ(l[1], "t,Phi_1,sigma_1");
  EXPECT_EQ(l.size(), 2u + 101u);

  const auto v = ness_cli({"verify", out("a") + "/simulate.json"});
  EXPECT_EQ(v.code, 0) << v.out << v.err;
  EXPECT_TRUE(Json::parse(v.out)["verified"].get<bool>());

  ness::io::write_file(out("a") + "/trajectory_1.csv", "tampered\n");
  EXPECT_EQ(ness_cli({"verify", out("a") + "/simulate.json"}).code, 1);
}

TEST_F(Cli, OracleOnHarmonicChainGivesFluxTable) {
  const auto r = ness_cli({"oracle", (kConfigs / "harmonic_chain.json").string(), "--out", out("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json rep = read_json(out("o") + "/oracle.json");
  const auto fluxes = rep["result"]["fluxes"];
  ASSERT_EQ(fluxes.size(), 5u);
  for (const auto& f : fluxes) EXPECT_NEAR(f.get<double>(), fluxes[0].get<double>(), 1e-6);
  EXPECT_GT(fluxes[0].get<double>(), 0.0);
  EXPECT_EQ(lines(ness::io::read_file(out("o") + "/fluxes.csv")).size(), 2u + 5u);
}

TEST_F(Cli, LdpAtEquilibriumIsIdenticallyZero) {
  const auto r = ness_cli({"ldp", (kConfigs / "ldp_equilibrium.json").string(), "--out", out("e")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json rep = read_json(out("e") + "/ldp.json");
  for (const auto& p : rep["result"]["cumulant"]) {
    EXPECT_EQ(p["e"].get<double>(), 0.0);
    EXPECT_EQ(p["se"].get<double>(), 0.0);
  }
  EXPECT_TRUE(rep["result"]["symmetry"]["pass"].get<bool>());
}

TEST_F(Cli, GleCompareReportsMomentTable) {
  const auto r = ness_cli({"gle-compare", (kConfigs / "gle_single.json").string(), "--out", out("g")});
  EXPECT_EQ(r.code, 0) << r.err;
  const Json rep = read_json(out("g") + "/gle-compare.json");
  EXPECT_EQ(rep["result"]["rows"].size(), 5u);
  EXPECT_TRUE(rep["pass"].get<bool>());
  EXPECT_FALSE(rep.contains("model_digest"));
}

TEST_F(Cli, ConfigErrorsExitTwoWithMachineReadableMessage) {
  const auto bad = write_config("bad.json", "{\"model\": {\"topology\": {\"kind\": \"chain\", \"n\": 2},\n \"x\": }}");
  const auto r = ness_cli({"check", bad});
  EXPECT_EQ(r.code, 2);
  const Json e = Json::parse(r.err);
  EXPECT_EQ(e["error"]["code"], "config_error");
  EXPECT_NE(e["error"]["message"].get<std::string>().find("bad.json:2:"), std::string::npos);
  EXPECT_EQ(ness_cli({"check", out("missing.json")}).code, 2);
  EXPECT_EQ(ness_cli({"frobnicate"}).code, 2);
}

TEST_F(Cli, IntegratorFaultExitsThree) {
  const auto cfg = write_config("cap.json", R"({
    "model": {"topology": {"kind": "chain", "n": 2}, "onsite": [0, 0, 0.5], "pair": [0, 0, 0.5],
              "reservoirs": [{"temperature": 5}, {"temperature": 5}]},
    "integrator": {"dt": 0.01, "cap": 0.01},
    "run": {"horizon": 10, "observers": ["H"]}})");
  const auto r = ness_cli({"simulate", cfg, "--out", out("f")});
  EXPECT_EQ(r.code, 3);
  const Json e = Json::parse(r.err);
  EXPECT_EQ(e["error"]["code"], "integrator_fault");
  EXPECT_TRUE(e["error"].contains("time"));
  EXPECT_TRUE(e["error"].contains("state_digest"));
}

TEST_F(Cli, OutputDirectoryPrecedence) {
  const auto cfg = ness::io::parse_experiment_text(ness::io::read_file(kConfigs / "harmonic_chain.json"));
  EXPECT_EQ(ness::cli::output_directory(std::string("x"), cfg), fs::path("x"));
  auto with_dir = cfg;
  with_dir.output.directory = "y";
  EXPECT_EQ(ness::cli::output_directory(std::nullopt, with_dir), fs::path("y"));
}
