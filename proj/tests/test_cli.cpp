// Drives the prescribe executable through std::system.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "prescribe/io/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::path(PRESCRIBE_TEST_WORK) / "cli";
const fs::path kSamples = PRESCRIBE_SAMPLES;

int run(const std::string& args, const std::string& log = "log.txt") {
  fs::create_directories(kWork);
  const std::string cmd =
      "\"" + std::string(PRESCRIBE_CLI) + "\" " + args + " > \"" + (kWork / log).string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

fs::path fresh(const std::string& name) {
  const fs::path d = kWork / name;
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST(Cli, ConstructThenVerifyPasses) {
  const fs::path out = fresh("minimal");
  ASSERT_EQ(run("construct --spec " + q(kSamples / "minimal_2x2.json") + " --out " + q(out)), 0);
  for (const char* f : {"A.mtx", "b.mtx", "manifest.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  const fs::path rep = kWork / "minimal_report.json";
  ASSERT_EQ(run("verify --spec " + q(kSamples / "minimal_2x2.json") + " --in " + q(out) + " --report " + q(rep)), 0)
      << slurp(kWork / "log.txt");
  const auto doc = prescribe::io::json::parse(slurp(rep));
  EXPECT_TRUE(doc.at("pass").get<bool>());
  EXPECT_EQ(doc.at("schema"), prescribe::io::kReportSchema);
}

TEST(Cli, TamperedOperatorFails) {
  const fs::path out = fresh("tampered");
  ASSERT_EQ(run("construct --spec " + q(kSamples / "restarted_m3_l4.json") + " --out " + q(out)), 0);
  prescribe::Matrix A = prescribe::io::read_matrix_market((out / "A.mtx").string());
  A(0, 0) += 0.5;
  prescribe::io::write_matrix_market((out / "A.mtx").string(), A);
  const fs::path rep = kWork / "tampered_report.json";
  EXPECT_EQ(run("verify --spec " + q(kSamples / "restarted_m3_l4.json") + " --in " + q(out) + " --report " + q(rep)), 1);
  const auto doc = prescribe::io::json::parse(slurp(rep));
  EXPECT_FALSE(doc.at("pass").get<bool>());
  bool named = false;
  for (const auto& c : doc.at("reports").at(0).at("checks"))
    if (c.at("name") == "residual_trace") named = !c.at("pass").get<bool>();
  EXPECT_TRUE(named);
}

TEST(Cli, InadmissibleWritesNothing) {
  const fs::path out = fresh("inadmissible");
  EXPECT_EQ(run("construct --spec " + q(kSamples / "inadmissible_transition.json") + " --out " + q(out)), 2);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_NE(slurp(kWork / "log.txt").find("non-strict-transition"), std::string::npos);
}

TEST(Cli, RepeatedConstructionIsByteIdentical) {
  for (const char* name : {"restarted_random_basis", "restarted_block_p2"}) {
    const fs::path a = fresh(std::string(name) + "_a");
    const fs::path b = fresh(std::string(name) + "_b");
    const fs::path spec = kSamples / (std::string(name) + ".json");
    ASSERT_EQ(run("construct --spec " + q(spec) + " --out " + q(a)), 0);
    ASSERT_EQ(run("construct --spec " + q(spec) + " --out " + q(b)), 0);
    for (const auto& e : fs::directory_iterator(a))
      EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
  }
}

TEST(Cli, RunWritesResidualCsv) {
  fs::create_directories(kWork);
  prescribe::io::write_matrix_market((kWork / "I.mtx").string(), prescribe::Matrix::Identity(4, 4));
  prescribe::Matrix b = prescribe::Matrix::Ones(4, 1);
  prescribe::io::write_matrix_market((kWork / "ones.mtx").string(), b);
  const fs::path csv = kWork / "identity.csv";
  ASSERT_EQ(run("run --matrix " + q(kWork / "I.mtx") + " --rhs " + q(kWork / "ones.mtx") + " --m 3 --csv " + q(csv)), 0);
  const std::string text = slurp(csv);
  EXPECT_EQ(text.rfind("cycle,iteration,resnorm\n1,0,2\n1,1,", 0), 0u) << text;
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("demo no-such-demo"), 2);
  const std::string log = slurp(kWork / "log.txt");
  EXPECT_NE(log.find("mirroring"), std::string::npos);
  EXPECT_NE(log.find("rank-one-tail"), std::string::npos);

  fs::create_directories(kWork);
  std::ofstream(kWork / "broken.json") << "{\"schema\": \"prescribe.scenario/1\", \"kind\": \"gmres\",";
  EXPECT_EQ(run("construct --spec " + q(kWork / "broken.json") + " --out " + q(fresh("broken"))), 2);
  EXPECT_NE(slurp(kWork / "log.txt").find("broken.json"), std::string::npos);

  EXPECT_EQ(run("frobnicate"), 2);
}

TEST(Cli, MirroringDemo) {
  const fs::path out = fresh("demo_mirroring");
  EXPECT_EQ(run("demo mirroring --out " + q(out)), 0);
  EXPECT_NE(slurp(kWork / "log.txt").find("0.9 0.9"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "report.json"));
}
