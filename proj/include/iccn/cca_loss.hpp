#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "iccn/autodiff.hpp"
#include "iccn/errors.hpp"
#include "iccn/linalg.hpp"
#include "iccn/tensor.hpp"

namespace iccn {

struct CcaLossConfig {
  std::size_t out_dim = 30;   // number of correlation components summed (k)
  double eps = 1e-4;          // ridge on both feature covariances
  double sv_floor = kSpectrumFloor;

  void validate(std::size_t d1, std::size_t d2) const {
    if (out_dim < 1 || out_dim > std::min(d1, d2)) {
      throw ConfigError("cca loss: out_dim " + std::to_string(out_dim) +
                        " outside [1, min(" + std::to_string(d1) + ", " +
                        std::to_string(d2) + ")]");
    }
    if (eps < 0) throw ConfigError("cca loss: eps must be >= 0");
  }
};

struct CcaLossResult {
  double loss = 0.0;      // -(sum of top-k singular values of E)
  Tensor grad_fx;         // d loss / d f_x, same shape as f_x
  Tensor grad_fy;
  Tensor proj_cx;         // closed-form projection C* (d1 x k)
  Tensor proj_dy;         // closed-form projection D* (d2 x k)
  Tensor correlations;    // top-k canonical correlations, descending
};

namespace detail {

struct WhitenedCross {
  Eigen::MatrixXd fx_c, fy_c;       // centered batches (m x d)
  Eigen::MatrixXd k11, k22;         // inverse covariance square roots
  Eigen::MatrixXd e;                // whitened cross-covariance (d1 x d2)
};

inline void check_batch(const Tensor& fx, const Tensor& fy) {
  if (fx.rank() != 2 || fy.rank() != 2 || fx.rows() != fy.rows()) {
    throw ContractViolation("cca loss: expected two (m x d) batches, got " +
                            shape_str(fx.shape()) + " and " +
                            shape_str(fy.shape()));
  }
  const std::size_t m = fx.rows();
  const std::size_t need = std::max(fx.cols(), fy.cols());
  if (m <= need) {
    throw MinibatchError("cca loss: minibatch of " + std::to_string(m) +
                         " samples too small; need more than " +
                         std::to_string(need) + " for feature dims (" +
                         std::to_string(fx.cols()) + ", " +
                         std::to_string(fy.cols()) + ")");
  }
  ensure_finite(fx, "cca loss input x");
  ensure_finite(fy, "cca loss input y");
}

inline WhitenedCross whitened_cross(const Tensor& fx, const Tensor& fy,
                                    const CcaLossConfig& cfg) {
  check_batch(fx, fy);
  const double m = static_cast<double>(fx.rows());
  WhitenedCross wc;
  wc.fx_c = to_eigen(fx);
  wc.fy_c = to_eigen(fy);
  wc.fx_c.rowwise() -= wc.fx_c.colwise().mean().eval();
  wc.fy_c.rowwise() -= wc.fy_c.colwise().mean().eval();

  const double scale = 1.0 / (m - 1.0);
  Eigen::MatrixXd r11 = scale * (wc.fx_c.transpose() * wc.fx_c);
  Eigen::MatrixXd r22 = scale * (wc.fy_c.transpose() * wc.fy_c);
  r11 = (0.5 * (r11 + r11.transpose().eval())).eval();
  r22 = (0.5 * (r22 + r22.transpose().eval())).eval();
  Eigen::MatrixXd r12 = scale * (wc.fx_c.transpose() * wc.fy_c);

  wc.k11 = to_eigen(inv_sqrt_sym(from_eigen(r11), cfg.eps));
  wc.k22 = to_eigen(inv_sqrt_sym(from_eigen(r22), cfg.eps));
  wc.e = wc.k11 * r12 * wc.k22;
  return wc;
}

}  // namespace detail

/// Negative total canonical correlation of two feature batches, truncated
/// to the top out_dim components, with the analytic gradient through the
/// whitened cross-covariance SVD.
inline CcaLossResult cca_loss(const Tensor& fx, const Tensor& fy,
                              const CcaLossConfig& cfg) {
  cfg.validate(fx.cols(), fy.cols());
  detail::WhitenedCross wc = detail::whitened_cross(fx, fy, cfg);
  const std::size_t k = cfg.out_dim;
  const double m = static_cast<double>(fx.rows());

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      wc.e, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalError("cca loss: SVD of whitened cross-covariance failed");
  }
  Eigen::MatrixXd u_k = svd.matrixU().leftCols(static_cast<long>(k));
  Eigen::MatrixXd v_k = svd.matrixV().leftCols(static_cast<long>(k));
  Eigen::VectorXd sigma = svd.singularValues().head(static_cast<long>(k));

  CcaLossResult out;
  out.correlations = Tensor({k});
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double c = std::max(sigma[static_cast<long>(i)], 0.0);
    out.correlations[i] = c;
    total += c;
  }
  out.loss = -total;

  // d corr / d R12 and d corr / d R11 in the whitened basis.
  Eigen::MatrixXd d12 = wc.k11 * u_k * v_k.transpose() * wc.k22;
  Eigen::MatrixXd d11 =
      -0.5 * wc.k11 * u_k * sigma.asDiagonal() * u_k.transpose() * wc.k11;
  Eigen::MatrixXd d22 =
      -0.5 * wc.k22 * v_k * sigma.asDiagonal() * v_k.transpose() * wc.k22;

  const double scale = 1.0 / (m - 1.0);
  Eigen::MatrixXd gx = -scale * (2.0 * wc.fx_c * d11 + wc.fy_c * d12.transpose());
  Eigen::MatrixXd gy = -scale * (2.0 * wc.fy_c * d22 + wc.fx_c * d12);

  out.grad_fx = from_eigen(gx);
  out.grad_fy = from_eigen(gy);
  out.proj_cx = from_eigen(Eigen::MatrixXd(wc.k11 * u_k));
  out.proj_dy = from_eigen(Eigen::MatrixXd(wc.k22 * v_k));
  ensure_finite(out.grad_fx, "cca loss grad x");
  ensure_finite(out.grad_fy, "cca loss grad y");
  return out;
}

struct CosineLossResult {
  double loss = 0.0;  // 1 - mean rowwise cosine similarity
  Tensor grad_fx;
  Tensor grad_fy;
};

inline constexpr double kCosineNormGuard = 1e-12;

/// 1 - mean over the batch of cos(f_x_i, f_y_i). Norms are guarded so a
/// zero row yields cosine 0 rather than NaN.
inline CosineLossResult cosine_loss(const Tensor& fx, const Tensor& fy) {
  if (fx.rank() != 2 || !fx.same_shape(fy)) {
    throw ContractViolation("cosine loss: batches must share one (m x d) shape");
  }
  const std::size_t m = fx.rows(), d = fx.cols();
  if (m == 0) throw DegenerateInputError("cosine loss: empty batch");
  CosineLossResult out;
  out.grad_fx = Tensor({m, d});
  out.grad_fy = Tensor({m, d});
  double mean_cos = 0.0;
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    double dot = 0.0, nx2 = 0.0, ny2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dot += fx(i, j) * fy(i, j);
      nx2 += fx(i, j) * fx(i, j);
      ny2 += fy(i, j) * fy(i, j);
    }
    const double nx = std::sqrt(nx2 + kCosineNormGuard);
    const double ny = std::sqrt(ny2 + kCosineNormGuard);
    const double c = dot / (nx * ny);
    mean_cos += c * inv_m;
    // d cos / d x = y/(|x||y|) - cos * x/|x|^2 (with guarded norms);
    // loss contributes -1/m of that.
    for (std::size_t j = 0; j < d; ++j) {
      out.grad_fx(i, j) =
          -inv_m * (fy(i, j) / (nx * ny) - c * fx(i, j) / (nx * nx));
      out.grad_fy(i, j) =
          -inv_m * (fx(i, j) / (nx * ny) - c * fy(i, j) / (ny * ny));
    }
  }
  out.loss = 1.0 - mean_cos;
  return out;
}

struct AlignmentReport {
  double mean_canonical_correlation = 0.0;  // (sum of top-k sigma) / k
  double mean_cosine_similarity = 0.0;      // batch-mean rowwise cosine
};

/// Diagnostic measurement on frozen features; no gradients.
inline AlignmentReport measure_alignment(const Tensor& fx, const Tensor& fy,
                                         const CcaLossConfig& cfg) {
  cfg.validate(fx.cols(), fy.cols());
  detail::WhitenedCross wc = detail::whitened_cross(fx, fy, cfg);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(wc.e);
  const std::size_t k = cfg.out_dim;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    total += std::max(svd.singularValues()[static_cast<long>(i)], 0.0);
  }
  AlignmentReport rep;
  rep.mean_canonical_correlation = total / static_cast<double>(k);

  if (fx.cols() != fy.cols()) {
    throw ContractViolation(
        "measure_alignment: cosine needs equal feature widths, got " +
        std::to_string(fx.cols()) + " and " + std::to_string(fy.cols()));
  }
  const std::size_t m = fx.rows(), d = fx.cols();
  double mean_cos = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double dot = 0.0, nx2 = 0.0, ny2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dot += fx(i, j) * fy(i, j);
      nx2 += fx(i, j) * fx(i, j);
      ny2 += fy(i, j) * fy(i, j);
    }
    mean_cos += dot / (std::sqrt(nx2 + kCosineNormGuard) *
                       std::sqrt(ny2 + kCosineNormGuard));
  }
  rep.mean_cosine_similarity = mean_cos / static_cast<double>(m);
  return rep;
}

namespace ad {

/// Graph node for the CCA loss; forward and backward reuse the closed-form
/// result above.
inline Var cca_loss_node(const Var& fx, const Var& fy,
                         const CcaLossConfig& cfg) {
  auto result = std::make_shared<CcaLossResult>(
      cca_loss(fx->value, fy->value, cfg));
  return detail::make(Tensor::scalar(result->loss), "cca_loss", {fx, fy},
                      [result](Node& self) {
                        const double g = self.grad[0];
                        detail::accumulate(self.parents[0],
                                           result->grad_fx * g);
                        detail::accumulate(self.parents[1],
                                           result->grad_fy * g);
                      });
}

inline Var cosine_loss_node(const Var& fx, const Var& fy) {
  auto result = std::make_shared<CosineLossResult>(
      cosine_loss(fx->value, fy->value));
  return detail::make(Tensor::scalar(result->loss), "cosine_loss", {fx, fy},
                      [result](Node& self) {
                        const double g = self.grad[0];
                        detail::accumulate(self.parents[0],
                                           result->grad_fx * g);
                        detail::accumulate(self.parents[1],
                                           result->grad_fy * g);
                      });
}

}  // namespace ad
}  // namespace iccn
