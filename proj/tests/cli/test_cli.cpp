#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fracmag/io.hpp"
#include "fracmag/nonlocal_form.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = FRACMAG_SCENARIO_DIR;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fracmag_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args, const std::string& log = "log.txt") const {
    const std::string cmd = std::string("\"") + FRACMAG_CLI + "\" " + args + " > \"" + (dir_ / log).string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path write_scenario(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    fracmag::write_text(p, text);
    return p;
  }

  std::string smoke_text() const { return fracmag::read_text(kScenarios / "smoke_1d.yaml"); }
  std::string read(const fs::path& p) const { return fracmag::read_text(dir_ / p); }

  fs::path dir_;
};

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  if (pos == std::string::npos) throw std::runtime_error("pattern not found: " + from);
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_F(Cli, EveryCommandRunsOnTheSmokeScenario) {
  const std::string s = "--scenario \"" + (kScenarios / "smoke_1d.yaml").string() + "\"";
  for (const char* cmd : {"forward", "dtn", "identity", "runge", "invert", "report"}) {
    EXPECT_EQ(run(std::string(cmd) + " " + s + " --out \"" + (dir_ / cmd).string() + "\""), 0) << cmd;
    const auto manifest = nlohmann::json::parse(read(fs::path(cmd) / "manifest.json"));
    EXPECT_EQ(manifest.at("command"), cmd);
    EXPECT_EQ(manifest.at("scenario_sha256").get<std::string>().size(), 64u);
    for (const auto& out : manifest.at("outputs")) EXPECT_TRUE(fs::exists(out.get<std::string>())) << out;
  }
  EXPECT_NE(read(fs::path("invert") / "reconstruction.json").find("\"smoke_test_only\": true"), std::string::npos);
}

TEST_F(Cli, OutputsAreDeterministicAcrossRunsAndThreadCounts) {
  const std::string s = "--scenario \"" + (kScenarios / "smoke_1d.yaml").string() + "\"";
  for (const char* cmd : {"forward", "dtn", "runge", "invert"}) {
    ASSERT_EQ(run(std::string(cmd) + " " + s + " --threads 1 --out \"" + (dir_ / "a").string() + "\""), 0);
    ASSERT_EQ(run(std::string(cmd) + " " + s + " --threads 4 --out \"" + (dir_ / "b").string() + "\""), 0);
  }
  for (const char* file : {"solution.csv", "dtn.csv", "dtn.json", "runge.csv", "reconstruction.json",
                           "reconstruction_fields.csv"})
    EXPECT_EQ(read(fs::path("a") / file), read(fs::path("b") / file)) << file;
}

TEST_F(Cli, IdenticalModelsGiveVanishingIdentityTerms) {
  std::string text = smoke_text();
  text = replace(text, "preset: smooth_bump", "preset: zero");
  text = replace(text, "value: 1.5", "value: 1.0");
  text += "reference:\n  magnetic: {preset: zero}\n  electric: {preset: constant, value: 1.0}\n";
  const fs::path sc = write_scenario("same.yaml", text);
  ASSERT_EQ(run("identity --scenario \"" + sc.string() + "\" --out \"" + (dir_ / "o").string() + "\""), 0);
  const auto j = nlohmann::json::parse(read("o/identity.json")).at("windows");
  for (const char* k : {"I1", "I2", "I3", "I4", "mass_term", "rhs"}) EXPECT_EQ(j.at(k).get<double>(), 0.0) << k;
  EXPECT_LE(std::abs(j.at("lhs").get<double>()), 1e-15);
}

TEST_F(Cli, DumpedFormMatchesTheLibraryAssembly) {
  const fs::path sc = kScenarios / "smoke_1d.yaml";
  ASSERT_EQ(run("forward --dump-form --scenario \"" + sc.string() + "\" --out \"" + (dir_ / "o").string() + "\""), 0);
  std::ifstream in(dir_ / "o" / "form.bin", std::ios::binary);
  int n = 0;
  double s = 0.0;
  const Eigen::MatrixXd M = fracmag::read_form_binary(in, n, s);
  EXPECT_EQ(n, 1);
  EXPECT_EQ(s, 0.5);
  EXPECT_EQ(M.rows(), 12);
  EXPECT_EQ((M - M.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(Cli, InvertAcceptsExternalDtnData) {
  const std::string s = "--scenario \"" + (kScenarios / "smoke_1d.yaml").string() + "\"";
  ASSERT_EQ(run("dtn " + s + " --out \"" + (dir_ / "d").string() + "\""), 0);
  ASSERT_EQ(run("invert " + s + " --out \"" + (dir_ / "sim").string() + "\""), 0);
  ASSERT_EQ(run("invert " + s + " --data \"" + (dir_ / "d" / "dtn.csv").string() + "\" --out \"" +
                (dir_ / "ext").string() + "\""),
            0);
  EXPECT_EQ(read("sim/reconstruction_fields.csv"), read("ext/reconstruction_fields.csv"));
}

TEST_F(Cli, ExitCodesFollowTheErrorKind) {
  EXPECT_EQ(run("--version"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("bogus --scenario x.yaml"), 2);
  EXPECT_EQ(run("dtn --scenario \"" + (dir_ / "missing.yaml").string() + "\""), 2);
  const fs::path smoke = kScenarios / "smoke_1d.yaml";
  EXPECT_EQ(run("invert --mode sideways --scenario \"" + smoke.string() + "\" --out \"" + dir_.string() + "\""), 2);

  const fs::path unknown = write_scenario("unknown.yaml", smoke_text() + "extra: 1\n");
  EXPECT_EQ(run("dtn --scenario \"" + unknown.string() + "\"", "unknown.txt"), 2);
  EXPECT_TRUE(std::regex_search(read("unknown.txt"), std::regex("unknown\\.yaml:[0-9]+: unknown key 'extra'")));

  const fs::path low_q = write_scenario("low_q.yaml", replace(smoke_text(), "value: 1.5", "value: 0.3"));
  EXPECT_EQ(run("forward --scenario \"" + low_q.string() + "\" --out \"" + dir_.string() + "\""), 3);

  std::string opposite = replace(smoke_text(), "lo: [2.5], hi: [3.5]", "lo: [-2.5], hi: [-1.5]");
  opposite = replace(opposite, "lo: [-1.5], hi: [4.5]", "lo: [-3.0], hi: [4.5]");
  const fs::path opp = write_scenario("opposite.yaml", opposite);
  EXPECT_EQ(run("invert --scenario \"" + opp.string() + "\" --out \"" + dir_.string() + "\""), 5);

  std::string diverge = fracmag::read_text(kScenarios / "semilinear.yaml");
  diverge = replace(diverge, "coefficients: [1.0, 1.0]", "coefficients: [1.0, 0.0, -60.0]");
  diverge = replace(diverge, "  amplitude: 1.0\nnewton", "  amplitude: 10000.0\nnewton");
  const fs::path div = write_scenario("diverge.yaml", diverge);
  EXPECT_EQ(run("forward --scenario \"" + div.string() + "\" --out \"" + dir_.string() + "\"", "div.txt"), 4);
  EXPECT_NE(read("div.txt").find("SMALLNESS_EXCEEDED"), std::string::npos);
}
