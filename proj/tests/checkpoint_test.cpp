#include <gtest/gtest.h>

#include <fstream>

#include "iccn/checkpoint.hpp"
#include "iccn/iccn.hpp"
#include "test_util.hpp"

using namespace iccn;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST(Checkpoint, RoundTripsBitExactly) {
  testutil::TempDir dir("ckpt");
  Rng rng(1);
  Tensor a = rng.normal_tensor({3, 4});
  Tensor b = rng.normal_tensor({5});
  // Values with tricky bit patterns survive.
  b[0] = -0.0;
  b[1] = 1e-308;
  const auto path = dir.path() / "m.ckpt";
  save_checkpoint(path, {{"layer.w", &a}, {"layer.b", &b}});
  auto loaded = load_checkpoint(path);
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded.at("layer.w"), a);
  EXPECT_EQ(loaded.at("layer.b"), b);
  EXPECT_TRUE(std::signbit(loaded.at("layer.b")[0]));
}

TEST(Checkpoint, CanonicalBytesIndependentOfInsertionOrder) {
  testutil::TempDir dir("ckpt-order");
  Rng rng(2);
  Tensor a = rng.normal_tensor({2, 2});
  Tensor b = rng.normal_tensor({3});
  const auto p1 = dir.path() / "a.ckpt";
  const auto p2 = dir.path() / "b.ckpt";
  save_checkpoint(p1, {{"x", &a}, {"y", &b}});
  save_checkpoint(p2, {{"y", &b}, {"x", &a}});
  EXPECT_EQ(slurp(p1), slurp(p2));
}

TEST(Checkpoint, MagicIsChecked) {
  testutil::TempDir dir("ckpt-magic");
  const auto path = dir.path() / "bad.ckpt";
  std::ofstream(path, std::ios::binary) << "NOPE!";
  EXPECT_THROW(load_checkpoint(path), ParseError);
}

TEST(Checkpoint, ModelParamsRoundTrip) {
  testutil::TempDir dir("ckpt-model");
  IccnConfig cfg;
  cfg.d_t = 6;
  cfg.d_a = 3;
  cfg.d_v = 3;
  cfg.conv1d_audio = {2, 0};
  cfg.conv1d_video = {2, 0};
  cfg.lstm_hidden_audio = 4;
  cfg.lstm_hidden_video = 4;
  cfg.conv2d.stages = {{2, 3, false}};
  cfg.conv2d.embed_dim = 8;
  cfg.loss = {4, 1e-4, kSpectrumFloor};
  cfg.batch = 16;
  cfg.seed = 3;
  IccnModel model(cfg);
  const auto path = dir.path() / "model.ckpt";
  save_checkpoint(path, model.params());

  cfg.seed = 99;  // different init, then restored from file
  IccnModel other(cfg);
  restore_params(other.params(), load_checkpoint(path));
  nn::ParamRefs a = model.params(), b = other.params();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->name;
  }
}

TEST(Checkpoint, MissingTensorNamed) {
  testutil::TempDir dir("ckpt-miss");
  Rng rng(4);
  Tensor a = rng.normal_tensor({2});
  const auto path = dir.path() / "one.ckpt";
  save_checkpoint(path, {{"present", &a}});
  nn::Parameter missing{"absent", Tensor({2})};
  nn::ParamRefs refs{&missing};
  try {
    restore_params(refs, load_checkpoint(path));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("absent"), std::string::npos);
  }
}
