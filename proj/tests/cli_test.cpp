#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "iccn/data.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

const char* kCli = ICCN_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = std::string(kCli) + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

std::map<std::string, double> read_metrics(const fs::path& p) {
  std::ifstream is(p);
  std::map<std::string, double> out;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("metrics line without '=': " + line);
    }
    out[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::make_unique<testutil::TempDir>("cli");
    data_ = (dir_->path() / "data.mmf").string();
    ASSERT_EQ(run("gen --preset toy --seed 7 --train-n 160 --val-n 40 "
                  "--test-n 40 -o " + data_),
              0);
  }

  std::string out(const std::string& name) {
    return (dir_->path() / name).string();
  }

  std::unique_ptr<testutil::TempDir> dir_;
  std::string data_;
};

TEST_F(CliTest, GenWritesSplitManifest) {
  const std::string manifest = slurp(data_ + ".splits");
  EXPECT_NE(manifest.find("train 160"), std::string::npos);
  EXPECT_NE(manifest.find("val 40"), std::string::npos);
  EXPECT_NE(manifest.find("test 40"), std::string::npos);
}

TEST_F(CliTest, GenMosiPresetManifest) {
  const std::string mosi = out("mosi.mmf");
  ASSERT_EQ(run("gen --preset mosi-like --seed 3 -o " + mosi), 0);
  const std::string manifest = slurp(mosi + ".splits");
  EXPECT_NE(manifest.find("train 1283"), std::string::npos);
  EXPECT_NE(manifest.find("val 229"), std::string::npos);
  EXPECT_NE(manifest.find("test 686"), std::string::npos);
}

TEST_F(CliTest, GenRerunIsByteIdentical) {
  const std::string again = out("again.mmf");
  ASSERT_EQ(run("gen --preset toy --seed 7 --train-n 160 --val-n 40 "
                "--test-n 40 -o " + again),
            0);
  EXPECT_EQ(slurp(data_), slurp(again));
  EXPECT_EQ(slurp(data_ + ".splits"), slurp(again + ".splits"));
}

TEST_F(CliTest, InvalidFlagValueFailsNonzero) {
  EXPECT_NE(run("gen --preset bogus -o " + out("x.mmf")), 0);
  EXPECT_NE(run("gen --train-n notanumber -o " + out("y.mmf")), 0);
}

TEST_F(CliTest, TrainWritesCurveRowsPerEpoch) {
  const std::string run_dir = out("run");
  ASSERT_EQ(run("train " + data_ + " --variant full --epochs 5 --seed 1 "
                "--batch 64 --embed-dim 16 --loss-dim 8 -o " + run_dir),
            0);
  std::ifstream is(run_dir + "/curves.csv");
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line,
            "epoch,loss,mean_canonical_correlation,mean_cosine_similarity");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (!line.empty()) ++rows;
  }
  EXPECT_EQ(rows, 5u);
  EXPECT_TRUE(fs::exists(run_dir + "/checkpoint.bin"));
  EXPECT_TRUE(fs::exists(run_dir + "/config.json"));
}

TEST_F(CliTest, TrainZeroEpochsEqualsInitialization) {
  const std::string a = out("ep0a"), b = out("ep0b");
  ASSERT_EQ(run("train " + data_ + " --epochs 0 --seed 9 --batch 64 "
                "--embed-dim 16 --loss-dim 8 -o " + a),
            0);
  ASSERT_EQ(run("train " + data_ + " --epochs 0 --seed 9 --batch 64 "
                "--embed-dim 16 --loss-dim 8 -o " + b),
            0);
  EXPECT_EQ(slurp(a + "/checkpoint.bin"), slurp(b + "/checkpoint.bin"));
  // Zero epochs leave the file equal to a fresh initialization at the same
  // seed, which another zero-epoch run reproduces bit-exactly.
  const std::string curves = slurp(a + "/curves.csv");
  EXPECT_EQ(curves,
            "epoch,loss,mean_canonical_correlation,mean_cosine_similarity\n");
}

TEST_F(CliTest, TrainRerunByteIdentical) {
  const std::string a = out("rr-a");
  const std::string flags = " --variant cos --epochs 3 --seed 4 --batch 64 "
                            "--embed-dim 16 --loss-dim 8 -o ";
  ASSERT_EQ(run("train " + data_ + flags + a), 0);
  const std::string ckpt = slurp(a + "/checkpoint.bin");
  const std::string curves = slurp(a + "/curves.csv");
  const std::string config = slurp(a + "/config.json");
  // Identical flags (including -o) must reproduce every byte.
  ASSERT_EQ(run("train " + data_ + flags + a), 0);
  EXPECT_EQ(slurp(a + "/checkpoint.bin"), ckpt);
  EXPECT_EQ(slurp(a + "/curves.csv"), curves);
  EXPECT_EQ(slurp(a + "/config.json"), config);
}

TEST_F(CliTest, EvalProducesExactMetricKeys) {
  const std::string run_dir = out("eval-run");
  ASSERT_EQ(run("train " + data_ + " --epochs 2 --seed 1 --batch 64 "
                "--embed-dim 16 --loss-dim 8 -o " + run_dir),
            0);
  ASSERT_EQ(run("eval " + run_dir + "/checkpoint.bin " + data_ +
                " --mlp-epochs 10 -o " + out("eval-out")),
            0);
  std::map<std::string, double> metrics =
      read_metrics(out("eval-out") + "/metrics.txt");
  EXPECT_GE(metrics.at("acc2"), 0.0);
  EXPECT_LE(metrics.at("acc2"), 1.0);
  EXPECT_GE(metrics.at("mae"), 0.0);
  std::ifstream is(out("eval-out") + "/metrics.txt");
  std::string keys, line;
  while (std::getline(is, line)) keys += line.substr(0, line.find('=')) + " ";
  EXPECT_EQ(keys, "acc2 f_score mae acc7 corr n_excluded ");
}

TEST_F(CliTest, EvalDoesNotMutateCheckpoint) {
  const std::string run_dir = out("frozen");
  ASSERT_EQ(run("train " + data_ + " --epochs 2 --seed 2 --batch 64 "
                "--embed-dim 16 --loss-dim 8 -o " + run_dir),
            0);
  const std::string before = slurp(run_dir + "/checkpoint.bin");
  ASSERT_EQ(run("eval " + run_dir + "/checkpoint.bin " + data_ +
                " --mlp-epochs 5 -o " + out("frozen-eval")),
            0);
  EXPECT_EQ(slurp(run_dir + "/checkpoint.bin"), before);
}

TEST_F(CliTest, EvalMissingCheckpointFails) {
  EXPECT_NE(run("eval " + out("nope/checkpoint.bin") + " " + data_ + " -o " +
                out("bad-eval")),
            0);
}

TEST_F(CliTest, TrainOnTruncatedFileFails) {
  const std::string bytes = slurp(data_);
  const std::string cut = out("cut.mmf");
  std::ofstream(cut, std::ios::binary) << bytes.substr(0, bytes.size() / 3);
  EXPECT_NE(run("train " + cut + " --epochs 1 -o " + out("cut-run")), 0);
}

TEST_F(CliTest, BaselineUnknownKindListsValid) {
  const std::string cmd = std::string(kCli) + " baseline wat " + data_ +
                          " -o " + out("wat") + " 2>" + out("stderr.txt");
  EXPECT_NE(std::system(cmd.c_str()), 0);
  const std::string err = slurp(out("stderr.txt"));
  EXPECT_NE(err.find("gcca+text"), std::string::npos);
}

TEST_F(CliTest, BaselineTextRunsAndReports) {
  ASSERT_EQ(run("baseline text " + data_ + " --mlp-epochs 10 -o " +
                out("btext")),
            0);
  std::ifstream is(out("btext") + "/metrics.txt");
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line.rfind("acc2=", 0), 0u);
}

TEST_F(CliTest, BaselineDccaConcatRuns) {
  ASSERT_EQ(run("baseline dcca-concat " + data_ +
                " --r 8 --dcca-epochs 3 --mlp-epochs 5 -o " + out("bdcca")),
            0);
  EXPECT_TRUE(fs::exists(out("bdcca") + "/metrics.txt"));
}

TEST_F(CliTest, GridLeaderboardAndSelection) {
  const std::string gdir = out("grid");
  ASSERT_EQ(run("grid " + data_ +
                " --grid-lr 1e-4,1e-3 --grid-batch 64 --grid-epochs 2 "
                "--grid-hidden 16,32 --grid-loss-dim 8 --embed-dim 16 "
                "--seed 5 -o " + gdir),
            0);
  std::ifstream is(gdir + "/leaderboard.csv");
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "cell,lr,batch,epochs,hidden,loss_dim,val_mae");
  double best = 1e9;
  std::size_t best_cell = 0, rows = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t cell, batch, epochs, hidden, loss_dim;
    double lr, val;
    ASSERT_EQ(std::sscanf(line.c_str(), "%zu,%lf,%zu,%zu,%zu,%zu,%lf", &cell,
                          &lr, &batch, &epochs, &hidden, &loss_dim, &val),
              7);
    if (val < best) {
      best = val;
      best_cell = cell;
    }
    ++rows;
  }
  EXPECT_EQ(rows, 4u);
  const std::string best_json = slurp(gdir + "/best-config.json");
  std::ostringstream want;
  want << "\"cell\": " << best_cell;
  EXPECT_NE(best_json.find(want.str()), std::string::npos);
  EXPECT_TRUE(fs::exists(gdir + "/metrics-test.txt"));

  // Same seed rerun gives the identical leaderboard.
  const std::string gdir2 = out("grid2");
  ASSERT_EQ(run("grid " + data_ +
                " --grid-lr 1e-4,1e-3 --grid-batch 64 --grid-epochs 2 "
                "--grid-hidden 16,32 --grid-loss-dim 8 --embed-dim 16 "
                "--seed 5 -o " + gdir2),
            0);
  EXPECT_EQ(slurp(gdir + "/leaderboard.csv"), slurp(gdir2 + "/leaderboard.csv"));
}

TEST_F(CliTest, CurvesExportMatchesRun) {
  const std::string run_dir = out("cv");
  ASSERT_EQ(run("train " + data_ + " --epochs 4 --seed 6 --batch 64 "
                "--embed-dim 16 --loss-dim 8 -o " + run_dir),
            0);
  const std::string exported = out("curves-out.csv");
  ASSERT_EQ(run("curves " + run_dir + " -o " + exported), 0);
  EXPECT_EQ(slurp(exported), slurp(run_dir + "/curves.csv"));
  EXPECT_NE(run("curves " + out("no-such-dir")), 0);
}

TEST_F(CliTest, MmfRoundTripThroughCliArtifacts) {
  iccn::Dataset d = iccn::load_mmf(data_);
  const std::string copy = out("copy.mmf");
  iccn::save_mmf(d, copy);
  EXPECT_EQ(slurp(data_), slurp(copy));
}

}  // namespace
