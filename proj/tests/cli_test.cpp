#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "lgrpool/tu_dataset.hpp"
#include "test_util.hpp"

using namespace lgrpool;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
Result run(const std::string& args) {
  const std::string cmd = std::string(LGRPOOL_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliWithData : public ::testing::Test {
 protected:
  void SetUp() override {
    auto ds = test::toy_dataset(30, 5);
    ds.name = "TOY";
    write_tu_dataset(ds, data_.path() / "TOY");
    std::ofstream(data_.path() / "tiny.cfg") << "hidden = 8\nepochs = 2\nem_rounds_max = 2\n"
                                                "num_pooling_layers = 3\nbatch_size = 8\n";
  }
  std::string dataset() const { return (data_.path() / "TOY").string(); }
  std::string config() const { return (data_.path() / "tiny.cfg").string(); }
  std::string out(const char* name) const { return (data_.path() / name).string(); }

  test::TempDir data_{"cli"};
};

}  // namespace

TEST(Cli, GradcheckPassesAndCatchesFault) {
  auto ok = run("gradcheck");
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("total_loss"), std::string::npos);
  auto bad = run("gradcheck --inject-sigmoid-fault");
  EXPECT_EQ(bad.code, 3) << bad.out;
  EXPECT_NE(bad.out.find("sigmoid:a"), std::string::npos);
  EXPECT_EQ(run("gradcheck --eps 1e-5").code, 0);
  EXPECT_EQ(run("gradcheck --eps 1").code, 1);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  auto missing = run("train --dataset /nonexistent/lgrpool/MUTAG");
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.out.find("/nonexistent/lgrpool/MUTAG"), std::string::npos);
}

TEST_F(CliWithData, InspectPrintsSummaryAndTrace) {
  auto r = run("inspect --dataset " + dataset());
  ASSERT_EQ(r.code, 0) << r.out;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["graphs"], 30);
  EXPECT_EQ(j["classes"], 2);
  for (const char* key : {"avg_nodes", "avg_edges", "feature_dim"}) EXPECT_TRUE(j.contains(key));

  auto t = run("inspect --dataset " + dataset() + " --config " + config() + " --trace --graph 2");
  ASSERT_EQ(t.code, 0) << t.out;
  auto tj = nlohmann::json::parse(t.out);
  EXPECT_EQ(tj["graph"], 2);
  EXPECT_TRUE(tj["trace"].contains("layers"));
  EXPECT_EQ(run("inspect --dataset " + dataset() + " --trace --graph 99").code, 1);
}

TEST_F(CliWithData, DatasetRootFromEnvironment) {
  const std::string cmd = "env LGRPOOL_DATA=" + data_.path().string() + " " +
                          std::string(LGRPOOL_CLI) + " inspect --dataset TOY";
  FILE* pipe = popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  char buf[256];
  std::string out;
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  EXPECT_EQ(WEXITSTATUS(pclose(pipe)), 0);
  EXPECT_NE(out.find("\"TOY\""), std::string::npos);
}

TEST_F(CliWithData, TrainWritesArtifactsAndEvalOnlyAgrees) {
  const std::string base = "--dataset " + dataset() + " --config " + config();
  auto r = run("train " + base + " --seeds 0..2 --jobs 2 --out " + out("run"));
  ASSERT_EQ(r.code, 0) << r.out;
  auto summary_text = read_file(out("run") + "/summary.json");
  auto summary = nlohmann::json::parse(summary_text);
  EXPECT_EQ(summary["per_seed"].size(), 3u);
  EXPECT_TRUE(summary.contains("mean_acc"));
  EXPECT_TRUE(summary.contains("std_acc"));
  for (int s = 0; s < 3; ++s) {
    auto dir = out("run") + "/seed_" + std::to_string(s);
    EXPECT_TRUE(std::filesystem::exists(dir + "/checkpoint.json"));
    EXPECT_EQ(read_file(dir + "/metrics.csv").rfind("epoch,phase,em_round,", 0), 0u);
  }
  auto manifest = nlohmann::json::parse(read_file(out("run") + "/manifest.json"));
  EXPECT_EQ(manifest["content_hash"].get<std::string>().size(), 40u);
  EXPECT_EQ(manifest["seeds"].size(), 3u);

  auto again = run("train " + base + " --seeds 0..2 --out " + out("run") + " --eval-only");
  ASSERT_EQ(again.code, 0) << again.out;
  EXPECT_EQ(again.out, summary_text);

  // Same inputs overwrite; different inputs are refused.
  EXPECT_EQ(run("train " + base + " --seeds 0..2 --out " + out("run")).code, 0);
  EXPECT_EQ(read_file(out("run") + "/summary.json"), summary_text);
  auto clash = run("train " + base + " --seeds 0..2 --set gamma=0.3 --out " + out("run"));
  EXPECT_EQ(clash.code, 1);
  EXPECT_NE(clash.out.find("different run"), std::string::npos);

  auto ev = run("eval --dataset " + dataset() + " --checkpoint " + out("run") +
                "/seed_1/checkpoint.json");
  ASSERT_EQ(ev.code, 0) << ev.out;
  auto evj = nlohmann::json::parse(ev.out);
  EXPECT_EQ(evj["seed"], 1);
  EXPECT_EQ(evj["test_acc"], summary["per_seed"][1]["test_acc"]);
}

TEST_F(CliWithData, AblateWritesOneRowPerGamma) {
  const std::string base = "--dataset " + dataset() + " --config " + config() + " --seeds 0";
  auto r = run("ablate " + base + " --gamma 0.2 --out " + out("abl1"));
  ASSERT_EQ(r.code, 0) << r.out;
  auto csv = read_file(out("abl1") + "/gamma_ablation.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_EQ(csv.rfind("gamma,mean_acc,std_acc\n0.2,", 0), 0u);

  auto grid = run("ablate " + base + " --gamma 0.10,0.15,0.20,0.25,0.30 --out " + out("abl5"));
  ASSERT_EQ(grid.code, 0) << grid.out;
  auto csv5 = read_file(out("abl5") + "/gamma_ablation.csv");
  EXPECT_EQ(std::count(csv5.begin(), csv5.end(), '\n'), 6);

  EXPECT_EQ(run("ablate " + base + " --gamma 0.1,abc --out " + out("abl_bad")).code, 1);
  EXPECT_EQ(run("ablate " + base + " --gamma=-0.5 --out " + out("abl_bad")).code, 1);
}

TEST_F(CliWithData, BadConfigExitsOne) {
  std::ofstream(out("bad.cfg")) << "hidden = lots\n";
  auto r = run("train --dataset " + dataset() + " --config " + out("bad.cfg"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("line 1"), std::string::npos);
}

TEST_F(CliWithData, DivergenceExitsTwo) {
  auto r = run("train --dataset " + dataset() + " --config " + config() +
               " --set lr=1e300 --out " + out("diverged"));
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("diverged in EM round 1"), std::string::npos) << r.out;
}
