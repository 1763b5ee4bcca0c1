#pragma once

#include <cmath>
#include <map>
#include <string>

#include "iccn/errors.hpp"
#include "iccn/layers.hpp"
#include "iccn/tensor.hpp"

namespace iccn::nn {

struct RmsPropConfig {
  double lr = 1e-3;
  double rho = 0.9;     // decay of the squared-gradient average
  double eps = 1e-8;    // denominator guard
};

/// RMSProp: v <- rho*v + (1-rho)*g^2; p <- p - lr * g / (sqrt(v) + eps).
class RmsProp {
 public:
  explicit RmsProp(RmsPropConfig cfg) : cfg_(cfg) {}

  const RmsPropConfig& config() const { return cfg_; }

  void step(Parameter& p, const Tensor& grad) {
    if (!grad.same_shape(p.value)) {
      throw ContractViolation("rmsprop: gradient shape " +
                              shape_str(grad.shape()) + " != parameter " +
                              p.name + " " + shape_str(p.value.shape()));
    }
    if (!grad.all_finite()) {
      throw TrainError("rmsprop: non-finite gradient for parameter " + p.name);
    }
    Tensor& v = mean_square_.try_emplace(p.name, Tensor(p.value.shape()))
                    .first->second;
    for (std::size_t i = 0; i < grad.numel(); ++i) {
      v[i] = cfg_.rho * v[i] + (1.0 - cfg_.rho) * grad[i] * grad[i];
      p.value[i] -= cfg_.lr * grad[i] / (std::sqrt(v[i]) + cfg_.eps);
    }
    if (!p.value.all_finite()) {
      throw TrainError("rmsprop: parameter " + p.name +
                       " became non-finite after update");
    }
  }

  void step_all(const ParamRefs& params, const Graph& g) {
    for (Parameter* p : params) step(*p, g.grad_of(*p));
  }

 private:
  RmsPropConfig cfg_;
  std::map<std::string, Tensor> mean_square_;
};

}  // namespace iccn::nn
