#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "iccn/autodiff.hpp"
#include "iccn/data.hpp"
#include "iccn/errors.hpp"
#include "iccn/layers.hpp"
#include "iccn/optim.hpp"
#include "iccn/rng.hpp"

namespace iccn {

// ---------------------------------------------------------------------------
// label binning
// ---------------------------------------------------------------------------

enum class Sentiment2 { negative, positive, excluded };

/// [-3, 0) -> negative, (0, 3] -> positive; exactly 0 is excluded because
/// neither interval contains it.
inline Sentiment2 binarize(double label) {
  if (!(label >= -3.0 && label <= 3.0)) {
    throw DataError("binarize: label " + std::to_string(label) +
                    " outside [-3, 3]");
  }
  if (label < 0.0) return Sentiment2::negative;
  if (label > 0.0) return Sentiment2::positive;
  return Sentiment2::excluded;
}

/// 7-class sentiment level: round half away from zero, then shift to 0..6.
inline int seven_class(double label) {
  if (!(label >= -3.0 && label <= 3.0)) {
    throw DataError("seven_class: label " + std::to_string(label) +
                    " outside [-3, 3]");
  }
  const double rounded =
      label >= 0.0 ? std::floor(label + 0.5) : std::ceil(label - 0.5);
  return static_cast<int>(rounded) + 3;
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

struct LabelSpec {
  Task task = Task::sentiment;
  bool weighted_f = true;  // support-weighted binary F1; else positive-class F1
};

struct MetricsReport {
  double acc2 = 0.0;
  double f_score = 0.0;
  double mae = 0.0;
  double acc7 = 0.0;
  double pearson = 0.0;
  bool pearson_degenerate = false;
  std::size_t n_excluded = 0;
};

namespace detail {

struct BinaryCounts {
  double tp = 0, tn = 0, fp = 0, fn = 0;
  double total() const { return tp + tn + fp + fn; }
};

inline double f1(double tp, double fp, double fn) {
  const double denom = 2 * tp + fp + fn;
  return denom > 0 ? 2 * tp / denom : 0.0;
}

inline double binary_f(const BinaryCounts& c, bool weighted) {
  const double f_pos = f1(c.tp, c.fp, c.fn);
  if (!weighted) return f_pos;
  // Negative class F1 with roles swapped.
  const double f_neg = f1(c.tn, c.fn, c.fp);
  const double support_pos = c.tp + c.fn;
  const double support_neg = c.tn + c.fp;
  const double total = support_pos + support_neg;
  if (total == 0) return 0.0;
  return (f_pos * support_pos + f_neg * support_neg) / total;
}

inline double pearson(const std::vector<double>& a,
                      const std::vector<double>& b, bool* degenerate) {
  const std::size_t n = a.size();
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) {
    *degenerate = true;
    return 0.0;
  }
  *degenerate = false;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

/// Sentiment metrics. Binary accuracy and F drop pairs whose *label* is
/// exactly 0; MAE, Acc-7, and Pearson use every pair. Predictions are
/// clamped into [-3, 3] before binning.
inline MetricsReport evaluate(const std::vector<double>& predictions,
                              const std::vector<double>& labels,
                              const LabelSpec& spec = {}) {
  if (predictions.size() != labels.size() || labels.empty()) {
    throw ContractViolation("evaluate: need equal-length, non-empty inputs");
  }
  MetricsReport rep;
  detail::BinaryCounts counts;
  double abs_err = 0.0;
  std::size_t acc7_hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double label = labels[i];
    if (!(label >= -3.0 && label <= 3.0)) {
      throw DataError("evaluate: label " + std::to_string(label) +
                      " outside [-3, 3]");
    }
    const double pred = std::clamp(predictions[i], -3.0, 3.0);
    abs_err += std::abs(label - predictions[i]);
    if (seven_class(pred) == seven_class(label)) ++acc7_hits;
    const Sentiment2 truth = binarize(label);
    if (truth == Sentiment2::excluded) {
      ++rep.n_excluded;
      continue;
    }
    const bool pred_pos = pred > 0.0;
    if (truth == Sentiment2::positive) {
      pred_pos ? ++counts.tp : ++counts.fn;
    } else {
      pred_pos ? ++counts.fp : ++counts.tn;
    }
  }
  if (counts.total() == 0) {
    throw EvalError("evaluate: no usable pairs after excluding 0-labels");
  }
  rep.acc2 = (counts.tp + counts.tn) / counts.total();
  rep.f_score = detail::binary_f(counts, spec.weighted_f);
  rep.mae = abs_err / static_cast<double>(labels.size());
  rep.acc7 = static_cast<double>(acc7_hits) /
             static_cast<double>(labels.size());
  rep.pearson =
      detail::pearson(predictions, labels, &rep.pearson_degenerate);
  return rep;
}

struct EmotionMetrics {
  std::array<double, kEmotionCount> acc2{};
  std::array<double, kEmotionCount> f_score{};
};

/// Per-emotion binary accuracy and F over probability predictions
/// thresholded at 0.5.
inline EmotionMetrics evaluate_emotion(
    const std::vector<std::vector<double>>& predictions,
    const std::vector<std::vector<double>>& labels, bool weighted_f = true) {
  if (predictions.size() != labels.size() || labels.empty()) {
    throw ContractViolation("evaluate_emotion: need equal-length inputs");
  }
  EmotionMetrics rep;
  for (std::size_t e = 0; e < kEmotionCount; ++e) {
    detail::BinaryCounts counts;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i].size() != kEmotionCount ||
          predictions[i].size() != kEmotionCount) {
        throw ContractViolation("evaluate_emotion: expected " +
                                std::to_string(kEmotionCount) +
                                " values per example");
      }
      const bool truth = labels[i][e] > 0.5;
      const bool pred = predictions[i][e] > 0.5;
      if (truth) {
        pred ? ++counts.tp : ++counts.fn;
      } else {
        pred ? ++counts.fp : ++counts.tn;
      }
    }
    rep.acc2[e] = (counts.tp + counts.tn) / counts.total();
    rep.f_score[e] = detail::binary_f(counts, weighted_f);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// downstream MLP
// ---------------------------------------------------------------------------

struct MlpHyper {
  std::vector<std::size_t> hidden{64};
  double lr = 1e-3;
  std::size_t batch = 32;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
};

namespace detail {

// Stable binary cross-entropy on logits: max(z,0) - z*t + log1p(exp(-|z|)).
inline ad::Var bce_with_logits(const ad::Var& logits, const Tensor& targets) {
  Tensor out(logits->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double z = logits->value[i];
    out[i] = std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
  }
  auto t = std::make_shared<Tensor>(targets);
  return ad::detail::make(std::move(out), "bce", {logits}, [t](ad::Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor& g = self.parents[0]->grad_ref();
    const Tensor& z = self.parents[0]->value;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-z[i]));
      g[i] += self.grad[i] * (s - (*t)[i]);
    }
  });
}

}  // namespace detail

/// The downstream task model: a dense ReLU stack with a scalar regression
/// head (MAE loss, sentiment) or one sigmoid head per emotion (binary
/// cross-entropy). Model selection keeps the epoch with the best validation
/// loss.
class DownstreamModel {
 public:
  DownstreamModel(Task task, std::size_t in_dim, const MlpHyper& hyper)
      : task_(task),
        hyper_(hyper),
        rng_(derive_seed(hyper.seed, "downstream-init")),
        net_("mlp", in_dim,
             nn::MlpSpec{hyper.hidden,
                         task == Task::sentiment ? 1 : kEmotionCount},
             rng_) {}

  /// X rows are embeddings; y holds one label per row (sentiment) or
  /// kEmotionCount 0/1 values per row (emotion4).
  void fit(const Tensor& x_train, const Tensor& y_train, const Tensor& x_val,
           const Tensor& y_val) {
    if (x_train.rank() != 2 || x_train.rows() == 0 || x_val.rows() == 0) {
      throw DataError("downstream fit: empty split");
    }
    nn::ParamRefs params;
    net_.collect(params);
    nn::RmsProp opt({hyper_.lr, 0.9, 1e-8});
    Rng shuffle_rng(derive_seed(hyper_.seed, "downstream-shuffle"));
    std::vector<std::size_t> order(x_train.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best;
    const std::size_t batch = std::max<std::size_t>(
        1, std::min(hyper_.batch, x_train.rows()));
    for (std::size_t epoch = 0; epoch < hyper_.epochs; ++epoch) {
      shuffle_rng.shuffle(order);
      for (std::size_t b = 0; b + batch <= order.size(); b += batch) {
        Tensor xb({batch, x_train.cols()});
        Tensor yb({batch, y_train.cols()});
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t j = 0; j < x_train.cols(); ++j) {
            xb(r, j) = x_train(order[b + r], j);
          }
          for (std::size_t j = 0; j < y_train.cols(); ++j) {
            yb(r, j) = y_train(order[b + r], j);
          }
        }
        nn::Graph g;
        ad::Var loss = loss_graph(g, xb, yb);
        ad::backward(loss);
        opt.step_all(params, g);
      }
      const double val = split_loss(x_val, y_val);
      if (val < best_val) {
        best_val = val;
        best.clear();
        for (nn::Parameter* p : params) best.push_back(p->value);
      }
    }
    if (!best.empty()) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        params[i]->value = best[i];
      }
    }
  }

  /// Sentiment predictions clamped to [-3, 3].
  std::vector<double> predict(const Tensor& x) {
    Tensor out = forward_values(x);
    std::vector<double> preds(out.rows());
    for (std::size_t i = 0; i < out.rows(); ++i) {
      preds[i] = std::clamp(out(i, 0), -3.0, 3.0);
    }
    return preds;
  }

  /// Per-emotion probabilities.
  std::vector<std::vector<double>> predict_emotion(const Tensor& x) {
    Tensor out = forward_values(x);
    std::vector<std::vector<double>> preds(out.rows());
    for (std::size_t i = 0; i < out.rows(); ++i) {
      preds[i].resize(kEmotionCount);
      for (std::size_t e = 0; e < kEmotionCount; ++e) {
        preds[i][e] = 1.0 / (1.0 + std::exp(-out(i, e)));
      }
    }
    return preds;
  }

  double split_loss(const Tensor& x, const Tensor& y) {
    nn::Graph g;
    return loss_graph(g, x, y)->value[0];
  }

  nn::ParamRefs params() {
    nn::ParamRefs refs;
    net_.collect(refs);
    return refs;
  }

 private:
  Tensor forward_values(const Tensor& x) {
    nn::Graph g;
    return net_.apply_batch(g, ad::constant(x))->value;
  }

  ad::Var loss_graph(nn::Graph& g, const Tensor& x, const Tensor& y) {
    ad::Var out = net_.apply_batch(g, ad::constant(x));
    if (task_ == Task::sentiment) {
      return ad::mean_all(ad::abs_op(ad::sub(out, ad::constant(y))));
    }
    return ad::mean_all(detail::bce_with_logits(out, y));
  }

  Task task_;
  MlpHyper hyper_;
  Rng rng_;
  nn::Mlp net_;
};

/// Label matrix for a subset of records: (n x 1) for sentiment, or
/// (n x kEmotionCount) for emotion4.
inline Tensor label_matrix(const Dataset& data,
                           const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw DataError("label_matrix: empty split");
  const std::size_t width =
      data.task == Task::sentiment ? 1 : kEmotionCount;
  Tensor y({idx.size(), width});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const UtteranceRecord& rec = data.records[idx[r]];
    if (data.task == Task::sentiment) {
      y(r, 0) = rec.label;
    } else {
      for (std::size_t e = 0; e < kEmotionCount; ++e) {
        y(r, e) = rec.emotion_labels[e];
      }
    }
  }
  return y;
}

}  // namespace iccn
