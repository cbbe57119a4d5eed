#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "support.hpp"

namespace mmcirt {
namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MMCIRT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = testing::temp_dir("cli");
    const std::string d = dir_.string();
    ASSERT_EQ(run_cli("generate --items 8 --persons 300 --seed 5 --out " + d + "/gen"), 0);
    ASSERT_EQ(run_cli("fit --data " + d + "/gen/responses.csv --key " + d + "/gen/key.csv --model mmc --epochs 8 --seed 2 --out " +
                      d + "/fit"),
              0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string d() { return dir_.string(); }
  static std::string key() { return " --key " + d() + "/gen/key.csv "; }
  static std::string data() { return " --data " + d() + "/gen/responses.csv "; }

  static inline fs::path dir_;
};

TEST_F(Cli, GenerateAndFitOutputs) {
  EXPECT_TRUE(fs::exists(dir_ / "gen" / "true_theta.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "gen" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir_ / "fit" / "model.json"));
  EXPECT_TRUE(fs::exists(dir_ / "fit" / "training_log.csv"));
}

TEST_F(Cli, PipelineCommandsSucceed) {
  const std::string fitted = " --fitted " + d() + "/fit/model.json";
  EXPECT_EQ(run_cli("score" + fitted + data() + "--out " + d() + "/score"), 0);
  EXPECT_EQ(run_cli("eval" + fitted + data() + "--out " + d() + "/eval"), 0);
  EXPECT_EQ(run_cli("bit" + fitted + data() + "--grid-size 401 --out " + d() + "/bit"), 0);
  EXPECT_TRUE(fs::exists(dir_ / "score" / "scores.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "eval" / "report.json"));
  EXPECT_TRUE(fs::exists(dir_ / "eval" / "grouped_residuals.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "bit" / "bit_scores.csv"));
}

TEST_F(Cli, BitAxisStartsAtZeroAndRises) {
  ASSERT_EQ(run_cli("export-irf --fitted " + d() + "/fit/model.json" + data() + "--axis bit --svg --out " + d() + "/irf"), 0);
  std::ifstream in(dir_ / "irf" / "irf_item1.csv");
  ASSERT_TRUE(in);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 5), "bits,");
  double last = -1.0;
  bool first = true;
  while (std::getline(in, line)) {
    const double b = std::stod(line.substr(0, line.find(',')));
    if (first) EXPECT_EQ(b, 0.0);
    first = false;
    EXPECT_GE(b, last);
    last = b;
  }
  EXPECT_GT(last, 0.0);
  EXPECT_TRUE(fs::exists(dir_ / "irf" / "irf_item1.svg"));
}

TEST_F(Cli, ReplayIsByteIdentical) {
  ASSERT_EQ(run_cli("replay --manifest " + d() + "/fit/manifest.json --out " + d() + "/fit2"), 0);
  EXPECT_EQ(slurp(dir_ / "fit" / "model.json"), slurp(dir_ / "fit2" / "model.json"));
  EXPECT_EQ(slurp(dir_ / "fit" / "training_log.csv"), slurp(dir_ / "fit2" / "training_log.csv"));
}

TEST_F(Cli, ErrorsMapToExitCodes) {
  EXPECT_EQ(run_cli("fit" + data() + key() + "--model foo --out " + d() + "/bad"), 2);
  EXPECT_EQ(run_cli("fit --data " + d() + "/nope.csv" + key() + "--out " + d() + "/bad"), 3);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("score --data x.csv"), 2);
}

}  // namespace
}  // namespace mmcirt
