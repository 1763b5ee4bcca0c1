#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "iccn/autodiff.hpp"
#include "iccn/rng.hpp"
#include "iccn/tensor.hpp"

namespace iccn::nn {

struct Parameter {
  std::string name;
  Tensor value;
};

using ParamRefs = std::vector<Parameter*>;

/// Per-minibatch binding of parameters to graph leaves. A parameter used
/// several times in one graph maps to a single leaf, so its gradient
/// accumulates across all uses and all examples of the batch.
class Graph {
 public:
  ad::Var use(Parameter& p) {
    auto it = bound_.find(&p);
    if (it != bound_.end()) return it->second;
    ad::Var v = ad::leaf(p.value);
    bound_.emplace(&p, v);
    return v;
  }

  /// Gradient accumulated for p in this graph; zeros if p was unused.
  Tensor grad_of(const Parameter& p) const {
    auto it = bound_.find(&p);
    if (it == bound_.end() || it->second->grad.numel() == 0) {
      return Tensor(p.value.shape());
    }
    return it->second->grad;
  }

 private:
  std::unordered_map<const Parameter*, ad::Var> bound_;
};

inline Tensor fanin_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return rng.uniform_tensor(std::move(shape), -bound, bound);
}

// ---------------------------------------------------------------------------

struct DenseLayer {
  Parameter w;  // out x in
  Parameter b;  // out

  DenseLayer(const std::string& prefix, std::size_t in, std::size_t out,
             Rng& rng)
      : w{prefix + ".w", fanin_uniform({out, in}, in, rng)},
        b{prefix + ".b", Tensor({out})} {}

  std::size_t in_dim() const { return w.value.cols(); }
  std::size_t out_dim() const { return w.value.rows(); }

  ad::Var apply(Graph& g, const ad::Var& x) {
    if (x->value.rank() != 1 || x->value.numel() != in_dim()) {
      throw ContractViolation("dense " + w.name + ": input width " +
                              std::to_string(x->value.numel()) +
                              " != " + std::to_string(in_dim()));
    }
    return ad::add(ad::matvec(g.use(w), x), g.use(b));
  }

  /// Batched form on X (m x in) -> (m x out).
  ad::Var apply_batch(Graph& g, const ad::Var& x) {
    if (x->value.rank() != 2 || x->value.cols() != in_dim()) {
      throw ContractViolation("dense " + w.name + ": batch width " +
                              shape_str(x->value.shape()) + " != " +
                              std::to_string(in_dim()));
    }
    return ad::add_rowvec(ad::matmul_nt(x, g.use(w)), g.use(b));
  }

  void collect(ParamRefs& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

// ---------------------------------------------------------------------------

struct Conv1dSpec {
  std::size_t kernel = 3;
  std::size_t out_channels = 0;  // 0: same as input channels
};

struct Conv1dLayer {
  Parameter w;  // out x in x k
  Parameter b;  // out

  Conv1dLayer(const std::string& prefix, std::size_t in_channels,
              const Conv1dSpec& spec, Rng& rng)
      : w{prefix + ".w",
          fanin_uniform({spec.out_channels ? spec.out_channels : in_channels,
                         in_channels, spec.kernel},
                        in_channels * spec.kernel, rng)},
        b{prefix + ".b",
          Tensor({spec.out_channels ? spec.out_channels : in_channels})} {
    if (spec.kernel == 0) throw ConfigError("conv1d: kernel must be >= 1");
  }

  std::size_t out_channels() const { return w.value.dim(0); }
  std::size_t kernel() const { return w.value.dim(2); }

  ad::Var apply(Graph& g, const ad::Var& x) {
    return ad::conv1d(x, g.use(w), g.use(b));
  }

  void collect(ParamRefs& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

// ---------------------------------------------------------------------------

/// Single-layer LSTM over a (features x length) sequence; returns the final
/// hidden state. Gate order in the stacked weights: input, forget,
/// candidate, output.
struct LstmLayer {
  Parameter w_ih;  // 4h x in
  Parameter w_hh;  // 4h x h
  Parameter b;     // 4h

  LstmLayer(const std::string& prefix, std::size_t in, std::size_t hidden,
            Rng& rng)
      : w_ih{prefix + ".w_ih", fanin_uniform({4 * hidden, in}, in, rng)},
        w_hh{prefix + ".w_hh", fanin_uniform({4 * hidden, hidden}, hidden, rng)},
        b{prefix + ".b", Tensor({4 * hidden})} {}

  std::size_t hidden_dim() const { return w_hh.value.cols(); }
  std::size_t in_dim() const { return w_ih.value.cols(); }

  ad::Var apply(Graph& g, const ad::Var& seq) {
    const Tensor& sv = seq->value;
    if (sv.rank() != 2 || sv.dim(0) != in_dim()) {
      throw ContractViolation("lstm " + w_ih.name + ": input shape " +
                              shape_str(sv.shape()) + " != (" +
                              std::to_string(in_dim()) + " x L)");
    }
    const std::size_t len = sv.dim(1);
    if (len == 0) {
      throw DegenerateInputError("lstm: zero-length sequence");
    }
    const std::size_t h = hidden_dim();
    ad::Var wih = g.use(w_ih), whh = g.use(w_hh), bias = g.use(b);
    ad::Var hidden = ad::constant(Tensor({h}));
    ad::Var cell = ad::constant(Tensor({h}));
    for (std::size_t t = 0; t < len; ++t) {
      ad::Var zx = ad::matvec(wih, ad::column(seq, t));
      ad::Var z = ad::add(ad::add(zx, ad::matvec(whh, hidden)), bias);
      ad::Var gate_i = ad::sigmoid(ad::slice1d(z, 0, h));
      ad::Var gate_f = ad::sigmoid(ad::slice1d(z, h, h));
      ad::Var cand = ad::tanh_op(ad::slice1d(z, 2 * h, h));
      ad::Var gate_o = ad::sigmoid(ad::slice1d(z, 3 * h, h));
      cell = ad::add(ad::mul(gate_f, cell), ad::mul(gate_i, cand));
      hidden = ad::mul(gate_o, ad::tanh_op(cell));
    }
    return hidden;
  }

  void collect(ParamRefs& out) {
    out.push_back(&w_ih);
    out.push_back(&w_hh);
    out.push_back(&b);
  }
};

// ---------------------------------------------------------------------------

struct Conv2dStageSpec {
  std::size_t out_channels = 4;
  std::size_t kernel = 3;
  bool pool = true;  // 2x2 max pool after the conv + relu
};

struct Conv2dBlockSpec {
  std::vector<Conv2dStageSpec> stages{{4, 3, true}, {8, 3, true}};
  std::size_t embed_dim = 64;
};

/// Spatial dims after running the spec on an h x w input. Throws
/// ConfigError if any stage collapses below 1x1.
inline std::pair<std::size_t, std::size_t> conv2d_block_output(
    const Conv2dBlockSpec& spec, std::size_t h, std::size_t w) {
  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    const auto& st = spec.stages[s];
    if (h < st.kernel || w < st.kernel) {
      throw ConfigError("conv2d block: stage " + std::to_string(s) +
                        " kernel " + std::to_string(st.kernel) +
                        " exceeds input " + std::to_string(h) + "x" +
                        std::to_string(w));
    }
    h -= st.kernel - 1;
    w -= st.kernel - 1;
    if (st.pool) {
      h /= 2;
      w /= 2;
      if (h == 0 || w == 0) {
        throw ConfigError("conv2d block: stage " + std::to_string(s) +
                          " pools below 1x1");
      }
    }
  }
  return {h, w};
}

/// Stacked conv -> relu -> (optional) 2x2 max pool stages over a 1-channel
/// h x w input, flattened and projected to a fixed embedding width.
struct Conv2dBlock {
  struct Stage {
    Parameter w;  // out x in x k x k
    Parameter b;  // out
    bool pool;
  };

  std::vector<Stage> stages;
  DenseLayer head;
  std::size_t in_h, in_w;

  Conv2dBlock(const std::string& prefix, std::size_t h, std::size_t w,
              const Conv2dBlockSpec& spec, Rng& rng)
      : head(prefix + ".head", make_stages(prefix, h, w, spec, rng, stages),
             spec.embed_dim, rng),
        in_h(h),
        in_w(w) {}

  ad::Var apply(Graph& g, const ad::Var& image) {
    const Tensor& iv = image->value;
    if (iv.rank() != 2 || iv.dim(0) != in_h || iv.dim(1) != in_w) {
      throw ContractViolation("conv2d block: input shape " +
                              shape_str(iv.shape()) + " != (" +
                              std::to_string(in_h) + " x " +
                              std::to_string(in_w) + ")");
    }
    ad::Var x = ad::reshape(image, {1, in_h, in_w});
    for (auto& st : stages) {
      x = ad::relu(ad::conv2d(x, g.use(st.w), g.use(st.b)));
      if (st.pool) x = ad::maxpool2d(x, 2);
    }
    return head.apply(g, ad::flatten(x));
  }

  std::size_t embed_dim() const { return head.out_dim(); }

  void collect(ParamRefs& out) {
    for (auto& st : stages) {
      out.push_back(&st.w);
      out.push_back(&st.b);
    }
    head.collect(out);
  }

 private:
  // Builds the conv stages and returns the flattened width for the head.
  static std::size_t make_stages(const std::string& prefix, std::size_t h,
                                 std::size_t w, const Conv2dBlockSpec& spec,
                                 Rng& rng, std::vector<Stage>& out) {
    auto [ho, wo] = conv2d_block_output(spec, h, w);  // validates up front
    std::size_t channels = 1;
    for (std::size_t s = 0; s < spec.stages.size(); ++s) {
      const auto& st = spec.stages[s];
      const std::string name = prefix + ".stage" + std::to_string(s);
      out.push_back(Stage{
          Parameter{name + ".w",
                    fanin_uniform({st.out_channels, channels, st.kernel,
                                   st.kernel},
                                  channels * st.kernel * st.kernel, rng)},
          Parameter{name + ".b", Tensor({st.out_channels})}, st.pool});
      channels = st.out_channels;
    }
    return channels * ho * wo;
  }
};

// ---------------------------------------------------------------------------

struct MlpSpec {
  std::vector<std::size_t> hidden{64};
  std::size_t out = 1;
};

/// Dense stack with ReLU between layers and a linear output layer.
struct Mlp {
  std::vector<DenseLayer> layers;

  Mlp(const std::string& prefix, std::size_t in, const MlpSpec& spec,
      Rng& rng) {
    std::size_t width = in;
    for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
      layers.emplace_back(prefix + ".fc" + std::to_string(i), width,
                          spec.hidden[i], rng);
      width = spec.hidden[i];
    }
    layers.emplace_back(prefix + ".out", width, spec.out, rng);
  }

  ad::Var apply(Graph& g, ad::Var x) {
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
      x = ad::relu(layers[i].apply(g, x));
    }
    return layers.back().apply(g, x);
  }

  ad::Var apply_batch(Graph& g, ad::Var x) {
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
      x = ad::relu(layers[i].apply_batch(g, x));
    }
    return layers.back().apply_batch(g, x);
  }

  std::size_t out_dim() const { return layers.back().out_dim(); }

  void collect(ParamRefs& out) {
    for (auto& l : layers) l.collect(out);
  }
};

}  // namespace iccn::nn
