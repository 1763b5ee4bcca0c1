#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "iccn/cca.hpp"
#include "iccn/data.hpp"
#include "test_util.hpp"

using namespace iccn;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST(Generate, SplitCountsExact) {
  SyntheticSpec spec;
  spec.n_train = 1283;
  spec.n_val = 229;
  spec.n_test = 686;
  spec.seed = 7;
  Dataset data = generate(spec);
  EXPECT_EQ(data.size(), 2198u);
  Splits s = split_by_prefix(data);
  EXPECT_EQ(s.train.size(), 1283u);
  EXPECT_EQ(s.val.size(), 229u);
  EXPECT_EQ(s.test.size(), 686u);
}

TEST(Generate, DeterministicPerSeed) {
  SyntheticSpec spec;
  spec.n_train = 20;
  spec.n_val = 5;
  spec.n_test = 5;
  spec.seed = 3;
  Dataset a = generate(spec);
  Dataset b = generate(spec);
  EXPECT_TRUE(a == b);
  spec.seed = 4;
  EXPECT_FALSE(generate(spec) == a);
}

TEST(Generate, LabelsWithinRange) {
  SyntheticSpec spec;
  spec.n_train = 200;
  spec.n_val = 1;
  spec.n_test = 1;
  Dataset data = generate(spec);
  for (const auto& rec : data.records) {
    EXPECT_GE(rec.label, -3.0);
    EXPECT_LE(rec.label, 3.0);
  }
}

TEST(Generate, LinearNoiselessModeIsLinearlyRecoverable) {
  SyntheticSpec spec;
  spec.nonlinear = false;
  spec.noise_text = spec.noise_audio = spec.noise_video = 0.0;
  spec.latent_dim = 4;
  spec.text_latent_dim = 4;
  spec.nuisance_dim = 0;
  spec.d_t = 4;  // d_t = latent dim
  spec.n_train = 120;
  spec.n_val = 1;
  spec.n_test = 1;
  Dataset data = generate(spec);
  Splits s = split_by_prefix(data);
  Tensor text = modality_matrix(data, s.train, Modality::text);
  Tensor audio = modality_matrix(data, s.train, Modality::audio);
  CcaSolution sol = linear_cca(text, audio, 2, 1e-10);
  // Audio holds the first half of the text block as a noiseless linear
  // image of the same latent coordinates.
  for (int i = 0; i < 2; ++i) EXPECT_GT(sol.correlations[i], 0.999);
}

TEST(Generate, NonlinearModeHidesLinearCorrelation) {
  SyntheticSpec spec;  // nonlinear by default
  spec.n_train = 400;
  spec.n_val = 1;
  spec.n_test = 1;
  spec.noise_audio = 0.1;
  Dataset data = generate(spec);
  Splits s = split_by_prefix(data);
  Tensor text = modality_matrix(data, s.train, Modality::text);
  Tensor audio = modality_matrix(data, s.train, Modality::audio);
  CcaSolution lin = linear_cca(text, audio, 3, 1e-4);
  KccaSolution ker = kernel_cca(text, audio, {KernelSpec::Kind::rbf, 0.0},
                                {KernelSpec::Kind::rbf, 0.0}, 3, 1e-4);
  EXPECT_GT(ker.correlations[0], lin.correlations[0] + 0.2);
}

TEST(Generate, EmotionTaskProducesBinaryLabels) {
  SyntheticSpec spec;
  spec.task = Task::emotion4;
  spec.n_train = 30;
  spec.n_val = 5;
  spec.n_test = 5;
  Dataset data = generate(spec);
  for (const auto& rec : data.records) {
    ASSERT_EQ(rec.emotion_labels.size(), kEmotionCount);
    for (double v : rec.emotion_labels) {
      EXPECT_TRUE(v == 0.0 || v == 1.0);
    }
  }
}

TEST(Mmf, RoundTripEqualsAndBytesStable) {
  testutil::TempDir dir("mmf");
  SyntheticSpec spec;
  spec.n_train = 12;
  spec.n_val = 4;
  spec.n_test = 4;
  spec.seed = 9;
  Dataset data = generate(spec);
  const auto path = dir.path() / "data.mmf";
  save_mmf(data, path);
  Dataset loaded = load_mmf(path);
  EXPECT_TRUE(loaded == data);
  const auto path2 = dir.path() / "again.mmf";
  save_mmf(loaded, path2);
  EXPECT_EQ(slurp(path), slurp(path2));
}

TEST(Mmf, EmotionRoundTrip) {
  testutil::TempDir dir("mmf-emo");
  SyntheticSpec spec;
  spec.task = Task::emotion4;
  spec.n_train = 6;
  spec.n_val = 2;
  spec.n_test = 2;
  Dataset data = generate(spec);
  const auto path = dir.path() / "emo.mmf";
  save_mmf(data, path);
  EXPECT_TRUE(load_mmf(path) == data);
}

TEST(Mmf, VariableLengthMode) {
  Dataset data;
  data.d_t = 2;
  data.d_a = 2;
  data.d_v = 1;
  data.l_a = 0;  // per-record lengths
  data.l_v = 0;
  UtteranceRecord a{"a", Tensor::vector({1, 2}), Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}),
                    Tensor::matrix(1, 2, {7, 8}), 0.5, {}};
  UtteranceRecord b{"b", Tensor::vector({3, 4}), Tensor::matrix(2, 1, {9, 10}),
                    Tensor::matrix(1, 4, {1, 1, 2, 2}), -1.25, {}};
  data.records = {a, b};
  testutil::TempDir dir("mmf-var");
  const auto path = dir.path() / "var.mmf";
  save_mmf(data, path);
  Dataset loaded = load_mmf(path);
  EXPECT_TRUE(loaded == data);
  EXPECT_EQ(loaded.records[1].audio.dim(1), 1u);
  EXPECT_EQ(loaded.records[1].video.dim(1), 4u);
}

TEST(Mmf, NanFrameNamesRecord) {
  Dataset data;
  data.d_t = 1;
  data.d_a = 1;
  data.d_v = 1;
  data.l_a = 1;
  data.l_v = 1;
  data.records.push_back({"bad-one", Tensor::vector({1}),
                          Tensor::matrix(1, 1, {std::nan("")}),
                          Tensor::matrix(1, 1, {1}), 0.5, {}});
  testutil::TempDir dir("mmf-nan");
  const auto path = dir.path() / "nan.mmf";
  // The writer stores raw bytes; the reader must reject the NaN.
  save_mmf(data, path);
  try {
    load_mmf(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad-one"), std::string::npos);
  }
}

TEST(Mmf, EmptyDatasetIsValid) {
  Dataset data;
  data.d_t = 3;
  data.d_a = 2;
  data.d_v = 2;
  data.l_a = 4;
  data.l_v = 4;
  testutil::TempDir dir("mmf-empty");
  const auto path = dir.path() / "empty.mmf";
  save_mmf(data, path);
  Dataset loaded = load_mmf(path);
  EXPECT_EQ(loaded.size(), 0u);
  EXPECT_EQ(loaded.d_t, 3u);
}

TEST(Mmf, TruncatedFileReportsOffset) {
  testutil::TempDir dir("mmf-trunc");
  SyntheticSpec spec;
  spec.n_train = 2;
  spec.n_val = 1;
  spec.n_test = 1;
  Dataset data = generate(spec);
  const auto path = dir.path() / "t.mmf";
  save_mmf(data, path);
  std::string bytes = slurp(path);
  const auto cut = dir.path() / "cut.mmf";
  std::ofstream(cut, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_THROW(load_mmf(cut), ParseError);
}

TEST(Split, FractionsGiveExactSizes) {
  Dataset data;
  data.d_t = data.d_a = data.d_v = 1;
  data.l_a = data.l_v = 1;
  for (int i = 0; i < 10; ++i) {
    data.records.push_back({"r" + std::to_string(i), Tensor::vector({0}),
                            Tensor::matrix(1, 1, {0}), Tensor::matrix(1, 1, {0}),
                            0.0, {}});
  }
  Splits s = split(data, {0.6, 0.2, 0.2}, 1);
  EXPECT_EQ(s.train.size(), 6u);
  EXPECT_EQ(s.val.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
  // Disjoint and exhaustive.
  std::set<std::size_t> all;
  for (auto v : {&s.train, &s.val, &s.test})
    for (std::size_t i : *v) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 10u);
  // Deterministic.
  Splits s2 = split(data, {0.6, 0.2, 0.2}, 1);
  EXPECT_EQ(s.train, s2.train);
  EXPECT_EQ(s.test, s2.test);
}

TEST(Split, ExplicitIdsExactMembershipAndOverlapError) {
  Dataset data;
  data.d_t = data.d_a = data.d_v = 1;
  data.l_a = data.l_v = 1;
  for (int i = 0; i < 4; ++i) {
    data.records.push_back({"id" + std::to_string(i), Tensor::vector({0}),
                            Tensor::matrix(1, 1, {0}), Tensor::matrix(1, 1, {0}),
                            0.0, {}});
  }
  Splits s = split(data, {"id2", "id0"}, {"id1"}, {"id3"});
  EXPECT_EQ(s.train, (std::vector<std::size_t>{2, 0}));
  EXPECT_EQ(s.val, (std::vector<std::size_t>{1}));
  EXPECT_THROW(split(data, {"id0", "id0"}, {"id1"}, {"id2"}), DataError);
  EXPECT_THROW(split(data, {"id0"}, {"id1"}, {"id2"}), DataError);
}
