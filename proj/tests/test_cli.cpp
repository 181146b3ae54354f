#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <gtest/gtest.h>

#include "armr/checkpoint.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

// ctest runs each case in its own process, so each gets its own directory.
const fs::path kRoot =
    fs::temp_directory_path() / ("armr_test_cli_" + std::to_string(::getpid()));

int run(const std::string& args) {
  const std::string cmd = std::string(ARMR_CLI) + " " + args + " > " +
                          (kRoot / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    ASSERT_EQ(run("generate --patients 60 --num-diagnoses 40 --num-procedures 30 "
                  "--num-medications 20 --clusters 8 --seed 3 --out " + (kRoot / "gen").string()),
              0);
  }
  static void TearDownTestSuite() { fs::remove_all(kRoot); }
  static std::string data() { return (kRoot / "gen" / "cohort.jsonl").string(); }
  static std::string vocab() { return (kRoot / "gen" / "vocab.json").string(); }
  static std::string small() { return " --dim 8 --state-size 4 "; }
};

}  // namespace

TEST_F(Cli, GenerateIsDeterministic) {
  ASSERT_EQ(run("generate --patients 60 --num-diagnoses 40 --num-procedures 30 "
                "--num-medications 20 --clusters 8 --seed 3 --out " + (kRoot / "gen2").string()),
            0);
  EXPECT_EQ(slurp(kRoot / "gen" / "cohort.jsonl"), slurp(kRoot / "gen2" / "cohort.jsonl"));
  EXPECT_EQ(slurp(kRoot / "gen" / "vocab.json"), slurp(kRoot / "gen2" / "vocab.json"));
}

TEST_F(Cli, InvalidArgumentsExitWithOne) {
  EXPECT_EQ(run("generate --new-drug-ratio 1.5 --out " + (kRoot / "bad").string()), 1);
  EXPECT_EQ(run("train --data " + data()), 1);
  EXPECT_EQ(run("train --data " + (kRoot / "nope.jsonl").string() + " --vocab " + vocab()), 1);
  EXPECT_EQ(run("frobnicate"), 1);
}

TEST_F(Cli, ConfigFileLosesToFlags) {
  const fs::path cfg = kRoot / "cfg.json";
  std::ofstream(cfg) << R"({"dim": 6, "state-size": 2, "epochs": 1, "seed": 11})";
  ASSERT_EQ(run("train --data " + data() + " --vocab " + vocab() + " --config " + cfg.string() +
                " --dim 4 --out " + (kRoot / "cfgrun").string()),
            0)
      << slurp(kRoot / "last.log");
  const auto manifest = nlohmann::json::parse(slurp(kRoot / "cfgrun" / "manifest.json"));
  const auto model = armr::load_checkpoint(kRoot / "cfgrun" / "best.ckpt").meta.at("model");
  EXPECT_EQ(model.at("dim"), 4);
  EXPECT_EQ(model.at("state_size"), 2);
  EXPECT_EQ(manifest.at("config").at("dim"), 4);
  EXPECT_EQ(manifest.at("config").at("seed"), 11);
  EXPECT_EQ(manifest.at("config").at("epochs"), 1);
}

TEST_F(Cli, TrainEvalAndNoArmCheckpoint) {
  const std::string out = (kRoot / "noarm").string();
  ASSERT_EQ(run("train --data " + data() + " --vocab " + vocab() + small() +
                "--epochs 2 --variant no-arm --seed 2 --out " + out),
            0)
      << slurp(kRoot / "last.log");
  for (const char* f : {"manifest.json", "train_log.jsonl", "last.ckpt", "best.ckpt", "report.json"})
    EXPECT_TRUE(fs::exists(fs::path(out) / f)) << f;
  const auto ckpt = armr::load_checkpoint(fs::path(out) / "best.ckpt");
  for (const auto& [name, m] : ckpt.tensors) EXPECT_NE(name.rfind("arm.", 0), 0u) << name;

  ASSERT_EQ(run("eval --data " + data() + " --vocab " + vocab() + " --checkpoint " + out +
                "/best.ckpt --part test --seed 2 --out " + (kRoot / "noarm_eval").string()),
            0)
      << slurp(kRoot / "last.log");
  const auto trained = nlohmann::json::parse(slurp(fs::path(out) / "report.json"));
  const auto evaluated = nlohmann::json::parse(slurp(kRoot / "noarm_eval" / "report.json"));
  EXPECT_EQ(trained.at("jaccard"), evaluated.at("jaccard"));
}

TEST_F(Cli, AblateReportsEveryVariant) {
  const std::string out = (kRoot / "ablate").string();
  ASSERT_EQ(run("ablate --data " + data() + " --vocab " + vocab() + small() +
                "--epochs 1 --seeds 2 --seed 1 --out " + out),
            0)
      << slurp(kRoot / "last.log");
  const auto j = nlohmann::json::parse(slurp(fs::path(out) / "ablation.json"));
  EXPECT_EQ(j.at("runs").size(), 10u);
  std::vector<std::string> variants;
  for (const auto& row : j.at("summary")) variants.push_back(row.at("variant"));
  EXPECT_EQ(variants, (std::vector<std::string>{"full", "no-ptl", "no-ptl-l", "no-ptl-n", "no-arm"}));
}

TEST_F(Cli, StatsAndGradcheck) {
  ASSERT_EQ(run("stats --data " + data() + " --vocab " + vocab() + " --out " +
                (kRoot / "stats").string()),
            0);
  const auto s = nlohmann::json::parse(slurp(kRoot / "stats" / "stats.json"));
  EXPECT_TRUE(s.contains("new_drug_histogram"));
  EXPECT_TRUE(s.contains("similarity_by_interval"));
  EXPECT_EQ(run("gradcheck --trials 2 --out " + (kRoot / "gc").string()), 0);
  EXPECT_TRUE(fs::exists(kRoot / "gc" / "gradcheck.json"));
}
