#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iccn/cca_loss.hpp"
#include "iccn/data.hpp"
#include "iccn/layers.hpp"
#include "iccn/optim.hpp"
#include "iccn/rng.hpp"

namespace iccn {

// Model variants: "full" is the complete interaction network; "no-text"
// drops the outer product with text (dense stacks replace the 2D CNNs);
// "cos" swaps the CCA loss for cosine similarity; "no-text+cos" does both.
enum class Variant { full, no_text, cos, no_text_cos };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_text: return "no-text";
    case Variant::cos: return "cos";
    default: return "no-text+cos";
  }
}

inline Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "no-text") return Variant::no_text;
  if (s == "cos") return Variant::cos;
  if (s == "no-text+cos") return Variant::no_text_cos;
  throw ConfigError("unknown variant '" + s +
                    "' (expected full, no-text, cos, no-text+cos)");
}

inline bool variant_uses_text(Variant v) {
  return v == Variant::full || v == Variant::cos;
}

inline bool variant_uses_cca_loss(Variant v) {
  return v == Variant::full || v == Variant::no_text;
}

struct IccnConfig {
  std::size_t d_t = 16, d_a = 6, d_v = 5;
  nn::Conv1dSpec conv1d_audio{3, 0};
  nn::Conv1dSpec conv1d_video{3, 0};
  std::size_t lstm_hidden_audio = 8;
  std::size_t lstm_hidden_video = 8;
  nn::Conv2dBlockSpec conv2d;             // shared spec, separate weights
  std::vector<std::size_t> no_text_hidden{64};  // dense stack for no-text
  CcaLossConfig loss{30, 1e-4, kSpectrumFloor};
  double lr = 3e-4;
  std::size_t batch = 128;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  Variant variant = Variant::full;

  void validate() const {
    if (d_t < 1 || d_a < 1 || d_v < 1) {
      throw ConfigError("iccn: modality dims must be >= 1");
    }
    if (lstm_hidden_audio < 1 || lstm_hidden_video < 1) {
      throw ConfigError("iccn: LSTM hidden dims must be >= 1");
    }
    if (lr <= 0 || lr >= 1) {
      throw ConfigError("iccn: learning rate must lie in (0, 1)");
    }
    if (batch <= loss.out_dim || batch <= conv2d.embed_dim) {
      throw ConfigError(
          "iccn: batch size must exceed the loss out_dim and the embedding "
          "width");
    }
    if (loss.out_dim > conv2d.embed_dim) {
      throw ConfigError("iccn: loss out_dim exceeds the embedding width");
    }
  }
};

/// Picks per-stage pooling so the default stack fits the given outer-product
/// shape; explicit specs are validated, not adapted.
inline nn::Conv2dBlockSpec fit_conv2d_spec(nn::Conv2dBlockSpec spec,
                                           std::size_t h, std::size_t w) {
  std::size_t ch = h, cw = w;
  for (auto& st : spec.stages) {
    if (ch < st.kernel || cw < st.kernel) {
      st.kernel = std::max<std::size_t>(1, std::min({ch, cw, st.kernel}));
    }
    ch -= st.kernel - 1;
    cw -= st.kernel - 1;
    if (st.pool && (ch / 2 == 0 || cw / 2 == 0)) st.pool = false;
    if (st.pool) {
      ch /= 2;
      cw /= 2;
    }
  }
  return spec;
}

struct CurvePoint {
  std::size_t epoch = 0;  // 1-based, recorded after the epoch's updates
  double loss = 0.0;
  double mean_canonical_correlation = 0.0;
  double mean_cosine_similarity = 0.0;
};

using TrainingCurve = std::vector<CurvePoint>;

/// The interaction network of the training pipeline: per-modality encoders
/// (1D conv + LSTM), outer product with the text embedding, and a 2D CNN
/// per branch producing the text-based audio/video features K_ta and K_tv.
class IccnModel {
 public:
  explicit IccnModel(IccnConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(derive_seed(cfg_.seed, "iccn-init"));
    conv1d_a_.emplace("audio.conv1d", cfg_.d_a, cfg_.conv1d_audio, rng);
    lstm_a_.emplace("audio.lstm", conv1d_a_->out_channels(),
                    cfg_.lstm_hidden_audio, rng);
    conv1d_v_.emplace("video.conv1d", cfg_.d_v, cfg_.conv1d_video, rng);
    lstm_v_.emplace("video.lstm", conv1d_v_->out_channels(),
                    cfg_.lstm_hidden_video, rng);
    if (variant_uses_text(cfg_.variant)) {
      cnn_ta_.emplace("audio.cnn", cfg_.d_t, cfg_.lstm_hidden_audio,
                      cfg_.conv2d, rng);
      cnn_tv_.emplace("video.cnn", cfg_.d_t, cfg_.lstm_hidden_video,
                      cfg_.conv2d, rng);
    } else {
      nn::MlpSpec stack{cfg_.no_text_hidden, cfg_.conv2d.embed_dim};
      stack_a_.emplace("audio.stack", cfg_.lstm_hidden_audio, stack, rng);
      stack_v_.emplace("video.stack", cfg_.lstm_hidden_video, stack, rng);
    }
  }

  const IccnConfig& config() const { return cfg_; }

  std::size_t embed_dim() const { return cfg_.conv2d.embed_dim; }

  /// Output width of extract_embedding: [K_ta; H_t; K_tv].
  std::size_t embedding_dim() const { return 2 * embed_dim() + cfg_.d_t; }

  nn::ParamRefs params() {
    nn::ParamRefs refs;
    conv1d_a_->collect(refs);
    lstm_a_->collect(refs);
    conv1d_v_->collect(refs);
    lstm_v_->collect(refs);
    if (cnn_ta_) cnn_ta_->collect(refs);
    if (cnn_tv_) cnn_tv_->collect(refs);
    if (stack_a_) stack_a_->collect(refs);
    if (stack_v_) stack_v_->collect(refs);
    return refs;
  }

  /// Utterance-level audio summary: the LSTM's final hidden state over the
  /// conv1d output (H_a2 of Algorithm 1).
  ad::Var audio_summary(nn::Graph& g, const UtteranceRecord& rec) {
    check_record(rec);
    return lstm_a_->apply(g, conv1d_a_->apply(g, ad::constant(rec.audio)));
  }

  ad::Var video_summary(nn::Graph& g, const UtteranceRecord& rec) {
    check_record(rec);
    return lstm_v_->apply(g, conv1d_v_->apply(g, ad::constant(rec.video)));
  }

  /// Graph for the text-based audio feature of one record (K_ta column of
  /// Algorithm 1), or the direct audio feature K_a for no-text variants.
  ad::Var audio_feature(nn::Graph& g, const UtteranceRecord& rec) {
    ad::Var h2 = audio_summary(g, rec);
    if (cnn_ta_) {
      ad::Var interaction = ad::outer(ad::constant(rec.text), h2);
      return cnn_ta_->apply(g, interaction);
    }
    return stack_a_->apply(g, h2);
  }

  ad::Var video_feature(nn::Graph& g, const UtteranceRecord& rec) {
    ad::Var h2 = video_summary(g, rec);
    if (cnn_tv_) {
      ad::Var interaction = ad::outer(ad::constant(rec.text), h2);
      return cnn_tv_->apply(g, interaction);
    }
    return stack_v_->apply(g, h2);
  }

  /// The per-example interaction matrices (H_ta, H_tv); text variants only.
  std::pair<Tensor, Tensor> interaction_matrices(const UtteranceRecord& rec) {
    if (!variant_uses_text(cfg_.variant)) {
      throw ConfigError("iccn: variant '" +
                        std::string(variant_name(cfg_.variant)) +
                        "' builds no interaction matrices");
    }
    nn::Graph g;
    Tensor h_a2 = audio_summary(g, rec)->value;
    Tensor h_v2 = video_summary(g, rec)->value;
    Tensor h_ta({cfg_.d_t, h_a2.numel()});
    Tensor h_tv({cfg_.d_t, h_v2.numel()});
    for (std::size_t i = 0; i < cfg_.d_t; ++i) {
      for (std::size_t j = 0; j < h_a2.numel(); ++j) {
        h_ta(i, j) = rec.text[i] * h_a2[j];
      }
      for (std::size_t j = 0; j < h_v2.numel(); ++j) {
        h_tv(i, j) = rec.text[i] * h_v2[j];
      }
    }
    return {h_ta, h_tv};
  }

  /// Frozen forward pass: (K_ta, K_tv) values for one record.
  std::pair<Tensor, Tensor> forward(const UtteranceRecord& rec) {
    nn::Graph g;
    return {audio_feature(g, rec)->value, video_feature(g, rec)->value};
  }

  /// Multimodal embedding [K_ta; H_t; K_tv] on frozen parameters.
  Tensor extract_embedding(const UtteranceRecord& rec) {
    auto [k_ta, k_tv] = forward(rec);
    Tensor out({embedding_dim()});
    std::size_t off = 0;
    for (std::size_t i = 0; i < k_ta.numel(); ++i) out[off++] = k_ta[i];
    for (std::size_t i = 0; i < rec.text.numel(); ++i) out[off++] = rec.text[i];
    for (std::size_t i = 0; i < k_tv.numel(); ++i) out[off++] = k_tv[i];
    return out;
  }

  /// Stacked feature batches (m x embed) over the given records, frozen.
  std::pair<Tensor, Tensor> feature_batches(
      const Dataset& data, const std::vector<std::size_t>& idx) {
    Tensor fx({idx.size(), embed_dim()});
    Tensor fy({idx.size(), embed_dim()});
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto [ka, kv] = forward(data.records[idx[r]]);
      for (std::size_t j = 0; j < embed_dim(); ++j) {
        fx(r, j) = ka[j];
        fy(r, j) = kv[j];
      }
    }
    return {fx, fy};
  }

  /// Variant loss on frozen features.
  double loss_value(const Tensor& fx, const Tensor& fy) const {
    if (variant_uses_cca_loss(cfg_.variant)) {
      return cca_loss(fx, fy, cfg_.loss).loss;
    }
    return cosine_loss(fx, fy).loss;
  }

 private:
  void check_record(const UtteranceRecord& rec) const {
    if (rec.text.numel() != cfg_.d_t || rec.audio.rank() != 2 ||
        rec.audio.dim(0) != cfg_.d_a || rec.video.rank() != 2 ||
        rec.video.dim(0) != cfg_.d_v) {
      throw ContractViolation("iccn: record '" + rec.id +
                              "' dims do not match the model config");
    }
    if (rec.audio.dim(1) < conv1d_a_->kernel()) {
      throw DegenerateInputError("iccn: record '" + rec.id +
                                 "' audio sequence shorter than conv kernel");
    }
    if (rec.video.dim(1) < conv1d_v_->kernel()) {
      throw DegenerateInputError("iccn: record '" + rec.id +
                                 "' video sequence shorter than conv kernel");
    }
  }

  IccnConfig cfg_;
  std::optional<nn::Conv1dLayer> conv1d_a_, conv1d_v_;
  std::optional<nn::LstmLayer> lstm_a_, lstm_v_;
  std::optional<nn::Conv2dBlock> cnn_ta_, cnn_tv_;
  std::optional<nn::Mlp> stack_a_, stack_v_;
};

/// Loss graph for one minibatch; exposed for structural tests.
inline ad::Var iccn_batch_loss(IccnModel& model, nn::Graph& g,
                               const Dataset& data,
                               const std::vector<std::size_t>& batch) {
  std::vector<ad::Var> ka, kv;
  ka.reserve(batch.size());
  kv.reserve(batch.size());
  for (std::size_t idx : batch) {
    ka.push_back(model.audio_feature(g, data.records[idx]));
    kv.push_back(model.video_feature(g, data.records[idx]));
  }
  ad::Var fy = ad::stack_rows(kv);
  ad::Var fx = ad::stack_rows(ka);
  if (variant_uses_cca_loss(model.config().variant)) {
    return ad::cca_loss_node(fy, fx, model.config().loss);
  }
  return ad::cosine_loss_node(fy, fx);
}

/// Minibatch RMSProp training of the variant's objective. Deterministic
/// given the config seed; the per-epoch curve is measured on the full
/// train split with frozen parameters.
inline TrainingCurve train_iccn(IccnModel& model, const Dataset& data,
                                const std::vector<std::size_t>& train_idx,
                                bool record_curve = true) {
  const IccnConfig& cfg = model.config();
  if (train_idx.size() < cfg.batch) {
    throw DegenerateInputError("train_iccn: split of " +
                               std::to_string(train_idx.size()) +
                               " records is smaller than one batch of " +
                               std::to_string(cfg.batch));
  }
  nn::RmsProp opt({cfg.lr, 0.9, 1e-8});
  nn::ParamRefs params = model.params();
  Rng shuffle_rng(derive_seed(cfg.seed, "iccn-shuffle"));
  TrainingCurve curve;
  std::vector<std::size_t> order = train_idx;
  const std::size_t batches = train_idx.size() / cfg.batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<std::size_t> batch(
          order.begin() + static_cast<long>(b * cfg.batch),
          order.begin() + static_cast<long>((b + 1) * cfg.batch));
      nn::Graph g;
      ad::Var loss = iccn_batch_loss(model, g, data, batch);
      if (!std::isfinite(loss->value[0])) {
        throw TrainError("train_iccn: non-finite loss at epoch " +
                         std::to_string(epoch) + ", batch " +
                         std::to_string(b));
      }
      ad::backward(loss);
      opt.step_all(params, g);
    }
    if (record_curve) {
      auto [fx, fy] = model.feature_batches(data, train_idx);
      AlignmentReport rep = measure_alignment(fx, fy, cfg.loss);
      curve.push_back(CurvePoint{epoch, model.loss_value(fx, fy),
                                 rep.mean_canonical_correlation,
                                 rep.mean_cosine_similarity});
    }
  }
  return curve;
}

}  // namespace iccn
