#pragma once

#include <string>
#include <vector>

#include "iccn/cca_loss.hpp"
#include "iccn/layers.hpp"
#include "iccn/optim.hpp"
#include "iccn/rng.hpp"

namespace iccn {

struct DccaConfig {
  std::vector<std::size_t> hidden{64};  // shared stack shape for both nets
  std::size_t out_dim = 30;             // network output width
  CcaLossConfig loss{10, 1e-4, kSpectrumFloor};
  double lr = 1e-3;
  std::size_t batch = 128;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
};

/// Two dense stacks trained so the canonical correlation of their outputs
/// is maximal. Inputs are (m x d) batches, rows are examples.
class DeepCca {
 public:
  DeepCca(std::size_t in_x, std::size_t in_y, DccaConfig cfg)
      : cfg_(std::move(cfg)),
        rng_(derive_seed(cfg_.seed, "dcca-init")),
        net_x_("dcca.x", in_x, nn::MlpSpec{cfg_.hidden, cfg_.out_dim}, rng_),
        net_y_("dcca.y", in_y, nn::MlpSpec{cfg_.hidden, cfg_.out_dim}, rng_) {
    if (cfg_.loss.out_dim > cfg_.out_dim) {
      throw ConfigError("dcca: loss out_dim exceeds the network output width");
    }
  }

  const DccaConfig& config() const { return cfg_; }

  void fit(const Tensor& x, const Tensor& y) {
    if (x.rank() != 2 || y.rank() != 2 || x.rows() != y.rows()) {
      throw ContractViolation("dcca fit: views must share the sample count");
    }
    const std::size_t batch = std::min(cfg_.batch, x.rows());
    if (batch <= cfg_.out_dim) {
      throw MinibatchError("dcca fit: batch of " + std::to_string(batch) +
                           " too small for output width " +
                           std::to_string(cfg_.out_dim));
    }
    nn::ParamRefs params;
    net_x_.collect(params);
    net_y_.collect(params);
    nn::RmsProp opt({cfg_.lr, 0.9, 1e-8});
    Rng shuffle_rng(derive_seed(cfg_.seed, "dcca-shuffle"));
    std::vector<std::size_t> order(x.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
      shuffle_rng.shuffle(order);
      for (std::size_t b = 0; b + batch <= order.size(); b += batch) {
        Tensor xb({batch, x.cols()});
        Tensor yb({batch, y.cols()});
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t j = 0; j < x.cols(); ++j) xb(r, j) = x(order[b + r], j);
          for (std::size_t j = 0; j < y.cols(); ++j) yb(r, j) = y(order[b + r], j);
        }
        nn::Graph g;
        ad::Var fx = net_x_.apply_batch(g, ad::constant(xb));
        ad::Var fy = net_y_.apply_batch(g, ad::constant(yb));
        ad::Var loss = ad::cca_loss_node(fx, fy, cfg_.loss);
        if (!std::isfinite(loss->value[0])) {
          throw TrainError("dcca fit: non-finite loss at epoch " +
                           std::to_string(epoch));
        }
        ad::backward(loss);
        opt.step_all(params, g);
      }
    }
  }

  Tensor transform_x(const Tensor& x) {
    nn::Graph g;
    return net_x_.apply_batch(g, ad::constant(x))->value;
  }

  Tensor transform_y(const Tensor& y) {
    nn::Graph g;
    return net_y_.apply_batch(g, ad::constant(y))->value;
  }

  /// Alignment of the trained outputs on the given data.
  AlignmentReport measure(const Tensor& x, const Tensor& y) {
    return measure_alignment(transform_x(x), transform_y(y), cfg_.loss);
  }

 private:
  DccaConfig cfg_;
  Rng rng_;
  nn::Mlp net_x_, net_y_;
};

}  // namespace iccn
