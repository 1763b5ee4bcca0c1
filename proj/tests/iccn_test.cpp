#include <gtest/gtest.h>

#include <cmath>

#include "iccn/iccn.hpp"
#include "iccn/linalg.hpp"
#include "test_util.hpp"

using namespace iccn;

namespace {

// Small config that keeps gradient checks and training fast.
IccnConfig toy_config() {
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
  cfg.no_text_hidden = {8};
  cfg.loss = {4, 1e-4, kSpectrumFloor};
  cfg.batch = 32;
  cfg.epochs = 3;
  cfg.lr = 1e-3;
  return cfg;
}

SyntheticSpec toy_data_spec() {
  SyntheticSpec spec;
  spec.latent_dim = 4;
  spec.text_latent_dim = 3;
  spec.nuisance_dim = 0;
  spec.d_t = 6;
  spec.d_a = 3;
  spec.d_v = 3;
  spec.l_a = 5;
  spec.l_v = 5;
  spec.n_train = 64;
  spec.n_val = 8;
  spec.n_test = 8;
  spec.seed = 7;
  return spec;
}

// Full finite-difference sweep over every parameter of the composed graph.
// Biases are first nudged off zero: freshly initialized conv stacks sit on
// the ReLU kink, where central differences straddle the non-differentiable
// point and compare garbage.
double model_gradcheck(IccnModel& model, const Dataset& data,
                       const std::vector<std::size_t>& batch,
                       double h = 1e-5) {
  for (nn::Parameter* p : model.params()) {
    if (p->name.ends_with(".b")) {
      for (std::size_t i = 0; i < p->value.numel(); ++i) p->value[i] += 0.25;
    }
  }
  nn::Graph g;
  ad::Var loss = iccn_batch_loss(model, g, data, batch);
  ad::backward(loss);
  auto eval = [&]() {
    nn::Graph tmp;
    return iccn_batch_loss(model, tmp, data, batch)->value[0];
  };
  double worst = 0;
  for (nn::Parameter* p : model.params()) {
    const Tensor analytic = g.grad_of(*p);
    double diff2 = 0, a2 = 0, n2 = 0;
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double save = p->value[i];
      p->value[i] = save + h;
      const double up = eval();
      p->value[i] = save - h;
      const double down = eval();
      p->value[i] = save;
      const double numeric = (up - down) / (2 * h);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    // Same zero-gradient floor as testutil::gradcheck.
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-6});
    worst = std::max(worst, std::sqrt(diff2) / denom);
  }
  return worst;
}

}  // namespace

TEST(IccnForward, PaperScaleShapes) {
  IccnConfig cfg;
  cfg.d_t = 768;
  cfg.d_a = 74;
  cfg.d_v = 35;
  cfg.lstm_hidden_audio = 8;
  cfg.lstm_hidden_video = 6;
  cfg.conv2d = fit_conv2d_spec(cfg.conv2d, 768, 6);  // narrower branch
  cfg.batch = 128;
  IccnModel model(cfg);
  Rng rng(1);
  UtteranceRecord rec{"r", rng.normal_tensor({768}), rng.normal_tensor({74, 10}),
                      rng.normal_tensor({35, 9}), 0.0, {}};
  auto [h_ta, h_tv] = model.interaction_matrices(rec);
  EXPECT_EQ(h_ta.shape(), (Shape{768, 8}));
  EXPECT_EQ(h_tv.shape(), (Shape{768, 6}));
  auto [k_ta, k_tv] = model.forward(rec);
  EXPECT_EQ(k_ta.numel(), cfg.conv2d.embed_dim);
  EXPECT_EQ(k_tv.numel(), cfg.conv2d.embed_dim);
  EXPECT_EQ(model.extract_embedding(rec).numel(), 2 * cfg.conv2d.embed_dim + 768);
}

TEST(IccnForward, ZeroTextZeroesInteraction) {
  IccnModel model(toy_config());
  Rng rng(2);
  UtteranceRecord a{"a", Tensor({6}), rng.normal_tensor({3, 5}),
                    rng.normal_tensor({3, 5}), 0.0, {}};
  UtteranceRecord b{"b", Tensor({6}), rng.normal_tensor({3, 5}),
                    rng.normal_tensor({3, 5}), 0.0, {}};
  auto [h_ta, h_tv] = model.interaction_matrices(a);
  EXPECT_EQ(h_ta.max_abs(), 0.0);
  EXPECT_EQ(h_tv.max_abs(), 0.0);
  // K then only reflects the network's response to a zero input.
  auto [ka_a, kv_a] = model.forward(a);
  auto [ka_b, kv_b] = model.forward(b);
  EXPECT_EQ(ka_a, ka_b);
  EXPECT_EQ(kv_a, kv_b);
}

TEST(IccnForward, InteractionMatrixIsRankOne) {
  IccnModel model(toy_config());
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    UtteranceRecord rec{"r", rng.normal_tensor({6}), rng.normal_tensor({3, 5}),
                        rng.normal_tensor({3, 5}), 0.0, {}};
    auto [h_ta, h_tv] = model.interaction_matrices(rec);
    for (const Tensor* m : {&h_ta, &h_tv}) {
      SvdResult s = svd(*m);
      if (s.s[0] > 1e-12) {
        EXPECT_LT(s.s[1], 1e-10 * s.s[0]);
      }
    }
  }
}

TEST(IccnForward, TooShortSequenceNamesRecord) {
  IccnModel model(toy_config());
  UtteranceRecord rec{"short-rec", Tensor({6}), Tensor({3, 1}), Tensor({3, 5}),
                      0.0, {}};
  try {
    model.forward(rec);
    FAIL() << "expected DegenerateInputError";
  } catch (const DegenerateInputError& e) {
    EXPECT_NE(std::string(e.what()).find("short-rec"), std::string::npos);
  }
}

TEST(IccnForward, DeterministicEmbeddings) {
  IccnModel model(toy_config());
  Rng rng(4);
  UtteranceRecord rec{"r", rng.normal_tensor({6}), rng.normal_tensor({3, 5}),
                      rng.normal_tensor({3, 5}), 0.0, {}};
  EXPECT_EQ(model.extract_embedding(rec), model.extract_embedding(rec));
}

TEST(IccnForward, TextCouplesThroughOuterProduct) {
  IccnModel model(toy_config());
  Rng rng(5);
  Tensor audio = rng.normal_tensor({3, 5});
  Tensor video = rng.normal_tensor({3, 5});
  UtteranceRecord a{"a", rng.normal_tensor({6}), audio, video, 0.0, {}};
  UtteranceRecord b{"b", rng.normal_tensor({6}), audio, video, 0.0, {}};
  auto [ka_a, kv_a] = model.forward(a);
  auto [ka_b, kv_b] = model.forward(b);
  EXPECT_FALSE(ka_a == ka_b);
  EXPECT_FALSE(kv_a == kv_b);
}

TEST(IccnVariants, StructuralGraphDifferences) {
  Dataset data = generate(toy_data_spec());
  Splits s = split_by_prefix(data);
  std::vector<std::size_t> batch(s.train.begin(), s.train.begin() + 16);

  IccnConfig cfg = toy_config();
  cfg.batch = 16;
  cfg.loss.out_dim = 4;
  {
    IccnModel model(cfg);
    nn::Graph g;
    ad::Var loss = iccn_batch_loss(model, g, data, batch);
    EXPECT_TRUE(ad::graph_contains_op(loss, "outer"));
    EXPECT_TRUE(ad::graph_contains_op(loss, "conv2d"));
    EXPECT_TRUE(ad::graph_contains_op(loss, "cca_loss"));
  }
  cfg.variant = Variant::no_text;
  {
    IccnModel model(cfg);
    nn::Graph g;
    ad::Var loss = iccn_batch_loss(model, g, data, batch);
    EXPECT_FALSE(ad::graph_contains_op(loss, "outer"));
    EXPECT_FALSE(ad::graph_contains_op(loss, "conv2d"));
    EXPECT_TRUE(ad::graph_contains_op(loss, "cca_loss"));
  }
  cfg.variant = Variant::cos;
  {
    IccnModel model(cfg);
    nn::Graph g;
    ad::Var loss = iccn_batch_loss(model, g, data, batch);
    EXPECT_TRUE(ad::graph_contains_op(loss, "outer"));
    EXPECT_TRUE(ad::graph_contains_op(loss, "cosine_loss"));
    EXPECT_FALSE(ad::graph_contains_op(loss, "cca_loss"));
  }
  cfg.variant = Variant::no_text_cos;
  {
    IccnModel model(cfg);
    nn::Graph g;
    ad::Var loss = iccn_batch_loss(model, g, data, batch);
    EXPECT_FALSE(ad::graph_contains_op(loss, "outer"));
    EXPECT_TRUE(ad::graph_contains_op(loss, "cosine_loss"));
  }
  EXPECT_THROW(parse_variant("bogus"), ConfigError);
}

TEST(IccnTrain, ComposedGraphGradcheck) {
  Dataset data = generate(toy_data_spec());
  Splits s = split_by_prefix(data);
  std::vector<std::size_t> batch(s.train.begin(), s.train.begin() + 32);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    IccnConfig cfg = toy_config();
    cfg.seed = seed;
    IccnModel model(cfg);
    EXPECT_LT(model_gradcheck(model, data, batch), 1e-3) << "seed " << seed;
  }
}

TEST(IccnTrain, ComposedNoTextGradcheck) {
  Dataset data = generate(toy_data_spec());
  Splits s = split_by_prefix(data);
  std::vector<std::size_t> batch(s.train.begin(), s.train.begin() + 32);
  IccnConfig cfg = toy_config();
  cfg.variant = Variant::no_text_cos;
  IccnModel model(cfg);
  EXPECT_LT(model_gradcheck(model, data, batch), 1e-3);
}

TEST(IccnTrain, ZeroEpochsKeepsInitialization) {
  Dataset data = generate(toy_data_spec());
  Splits s = split_by_prefix(data);
  IccnConfig cfg = toy_config();
  cfg.epochs = 0;
  IccnModel model(cfg);
  IccnModel fresh(cfg);
  TrainingCurve curve = train_iccn(model, data, s.train);
  EXPECT_TRUE(curve.empty());
  nn::ParamRefs a = model.params(), b = fresh.params();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->name;
  }
}

TEST(IccnTrain, CcaLossRaisesCanonicalCorrelation) {
  Dataset data = generate(toy_data_spec());
  Splits s = split_by_prefix(data);
  IccnConfig cfg = toy_config();
  cfg.epochs = 10;
  cfg.lr = 2e-3;
  IccnModel model(cfg);
  TrainingCurve curve = train_iccn(model, data, s.train);
  ASSERT_EQ(curve.size(), 10u);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    EXPECT_EQ(curve[i].epoch, i + 1);
    EXPECT_TRUE(std::isfinite(curve[i].loss));
  }
  EXPECT_GT(curve.back().mean_canonical_correlation,
            curve.front().mean_canonical_correlation);
  // The loss is the negative summed correlation at k components.
  EXPECT_NEAR(curve.back().loss,
              -curve.back().mean_canonical_correlation *
                  static_cast<double>(cfg.loss.out_dim),
              1e-9);
}

TEST(IccnTrain, CosineLossRaisesCosine) {
  Dataset data = generate(toy_data_spec());
  Splits s = split_by_prefix(data);
  IccnConfig cfg = toy_config();
  cfg.variant = Variant::cos;
  cfg.epochs = 10;
  cfg.lr = 2e-3;
  IccnModel model(cfg);
  TrainingCurve curve = train_iccn(model, data, s.train);
  EXPECT_GT(curve.back().mean_cosine_similarity,
            curve.front().mean_cosine_similarity);
}

TEST(IccnTrain, DeterministicCurve) {
  Dataset data = generate(toy_data_spec());
  Splits s = split_by_prefix(data);
  IccnConfig cfg = toy_config();
  cfg.epochs = 4;
  IccnModel a(cfg), b(cfg);
  TrainingCurve ca = train_iccn(a, data, s.train);
  TrainingCurve cb = train_iccn(b, data, s.train);
  ASSERT_EQ(ca.size(), cb.size());
  for (std::size_t i = 0; i < ca.size(); ++i) {
    EXPECT_EQ(ca[i].loss, cb[i].loss);
    EXPECT_EQ(ca[i].mean_canonical_correlation,
              cb[i].mean_canonical_correlation);
    EXPECT_EQ(ca[i].mean_cosine_similarity, cb[i].mean_cosine_similarity);
  }
  nn::ParamRefs pa = a.params(), pb = b.params();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->value, pb[i]->value);
  }
}

TEST(IccnConfig, ValidationErrors) {
  IccnConfig cfg = toy_config();
  cfg.batch = 8;  // not above embed_dim
  EXPECT_THROW(IccnModel{cfg}, ConfigError);
  cfg = toy_config();
  cfg.lr = 1.5;
  EXPECT_THROW(IccnModel{cfg}, ConfigError);
  cfg = toy_config();
  cfg.loss.out_dim = 9;  // exceeds embed_dim
  EXPECT_THROW(IccnModel{cfg}, ConfigError);
}
