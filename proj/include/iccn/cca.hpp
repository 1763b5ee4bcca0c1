#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "iccn/errors.hpp"
#include "iccn/linalg.hpp"
#include "iccn/tensor.hpp"

namespace iccn {

// ---------------------------------------------------------------------------
// linear CCA
// ---------------------------------------------------------------------------

struct CcaSolution {
  Tensor map_x;         // n1 x r projection A*
  Tensor map_y;         // n2 x r projection B*
  Tensor correlations;  // r canonical correlations, descending
  Tensor mean_x;        // per-view centering vectors
  Tensor mean_y;
  double eps = 0.0;     // ridge used
};

namespace detail {

inline Eigen::VectorXd row_means(const Eigen::MatrixXd& m) {
  return m.rowwise().mean();
}

}  // namespace detail

/// Closed-form linear CCA on x (n1 x m) and y (n2 x m), samples in columns.
/// A* = S11^{-1/2} U[:, :r], B* = S22^{-1/2} V[:, :r] from the SVD of the
/// whitened cross-covariance Z = S11^{-1/2} S12 S22^{-1/2}.
inline CcaSolution linear_cca(const Tensor& x, const Tensor& y, std::size_t r,
                              double eps) {
  if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.cols()) {
    throw ContractViolation("linear_cca: views must share the sample count");
  }
  const std::size_t m = x.cols();
  if (m < 2) {
    throw DegenerateInputError("linear_cca: need at least 2 samples");
  }
  if (r == 0 || r > std::min(x.rows(), y.rows())) {
    throw ContractViolation("linear_cca: output dim " + std::to_string(r) +
                            " outside [1, min(n1, n2)]");
  }
  Eigen::MatrixXd xc = to_eigen(x);
  Eigen::MatrixXd yc = to_eigen(y);
  Eigen::VectorXd mx = detail::row_means(xc);
  Eigen::VectorXd my = detail::row_means(yc);
  xc.colwise() -= mx;
  yc.colwise() -= my;

  const double scale = 1.0 / static_cast<double>(m - 1);
  Eigen::MatrixXd s11 = scale * (xc * xc.transpose());
  Eigen::MatrixXd s22 = scale * (yc * yc.transpose());
  s11 = (0.5 * (s11 + s11.transpose().eval())).eval();
  s22 = (0.5 * (s22 + s22.transpose().eval())).eval();
  Eigen::MatrixXd s12 = scale * (xc * yc.transpose());

  Tensor k11, k22;
  try {
    k11 = inv_sqrt_sym(from_eigen(s11), eps);
    k22 = inv_sqrt_sym(from_eigen(s22), eps);
  } catch (const SingularityError& e) {
    throw SingularityError(std::string(e.what()) +
                           " (a view covariance is singular; pass eps > 0)");
  }
  Eigen::MatrixXd z = to_eigen(k11) * s12 * to_eigen(k22);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalError("linear_cca: SVD did not converge");
  }

  CcaSolution sol;
  sol.eps = eps;
  sol.mean_x = from_eigen_vec(mx);
  sol.mean_y = from_eigen_vec(my);
  sol.map_x = from_eigen(Eigen::MatrixXd(
      to_eigen(k11) * svd.matrixU().leftCols(static_cast<long>(r))));
  sol.map_y = from_eigen(Eigen::MatrixXd(
      to_eigen(k22) * svd.matrixV().leftCols(static_cast<long>(r))));
  sol.correlations = Tensor({r});
  for (std::size_t i = 0; i < r; ++i) {
    sol.correlations[i] =
        std::max(svd.singularValues()[static_cast<long>(i)], 0.0);
  }
  return sol;
}

/// Center with the stored training means, then project both views.
/// Returns (r x m) coordinate matrices.
inline std::pair<Tensor, Tensor> cca_project(const CcaSolution& sol,
                                             const Tensor& x_new,
                                             const Tensor& y_new) {
  if (x_new.rank() != 2 || x_new.rows() != sol.mean_x.numel() ||
      y_new.rank() != 2 || y_new.rows() != sol.mean_y.numel()) {
    throw ContractViolation("cca_project: view widths do not match training");
  }
  Eigen::MatrixXd xc = to_eigen(x_new);
  Eigen::MatrixXd yc = to_eigen(y_new);
  xc.colwise() -= Eigen::Map<const Eigen::VectorXd>(
      sol.mean_x.data(), static_cast<long>(sol.mean_x.numel()));
  yc.colwise() -= Eigen::Map<const Eigen::VectorXd>(
      sol.mean_y.data(), static_cast<long>(sol.mean_y.numel()));
  return {from_eigen(Eigen::MatrixXd(to_eigen(sol.map_x).transpose() * xc)),
          from_eigen(Eigen::MatrixXd(to_eigen(sol.map_y).transpose() * yc))};
}

// ---------------------------------------------------------------------------
// kernel CCA
// ---------------------------------------------------------------------------

struct KernelSpec {
  enum class Kind { linear, rbf };
  Kind kind = Kind::rbf;
  double bandwidth = 0.0;  // rbf only; must be > 0 once resolved
};

/// Median pairwise distance over the columns of x; the usual parameter-free
/// RBF bandwidth.
inline double median_bandwidth(const Tensor& x) {
  const std::size_t m = x.cols();
  std::vector<double> dists;
  dists.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double d2 = 0.0;
      for (std::size_t a = 0; a < x.rows(); ++a) {
        const double d = x(a, i) - x(a, j);
        d2 += d * d;
      }
      dists.push_back(std::sqrt(d2));
    }
  }
  if (dists.empty()) return 1.0;
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2,
                   dists.end());
  double med = dists[dists.size() / 2];
  return med > 0 ? med : 1.0;
}

namespace detail {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double kernel_eval(const KernelSpec& spec, const double* a,
                          const double* b, std::size_t n) {
  if (spec.kind == KernelSpec::Kind::linear) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-d2 / (2.0 * spec.bandwidth * spec.bandwidth));
}

/// Gram matrix over columns of x (features x m).
inline Eigen::MatrixXd gram(const Tensor& x, const KernelSpec& spec) {
  const std::size_t m = x.cols(), n = x.rows();
  RowMajorMatrix colmaj = to_eigen(x).transpose();  // m x n, rows contiguous
  Eigen::MatrixXd k(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const double v = kernel_eval(spec, colmaj.row(static_cast<long>(i)).data(),
                                   colmaj.row(static_cast<long>(j)).data(), n);
      k(static_cast<long>(i), static_cast<long>(j)) = v;
      k(static_cast<long>(j), static_cast<long>(i)) = v;
    }
  }
  return k;
}

struct GramBasis {
  Eigen::MatrixXd vectors;  // m x q eigenvectors of the centered Gram
  Eigen::VectorXd sigma;    // singular values of the implicit feature matrix
  Eigen::VectorXd gain;     // sqrt(lambda~ / (lambda~ + reg)) per component
};

/// Eigen-basis of the doubly centered Gram matrix, keeping components above
/// a relative floor.
inline GramBasis gram_basis(const Eigen::MatrixXd& k_centered, double reg,
                            double m_minus_one) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k_centered);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("kernel_cca: Gram eigendecomposition failed");
  }
  const long m = k_centered.rows();
  const double lmax = std::max(eig.eigenvalues()(m - 1), 0.0);
  const double floor = std::max(lmax * kSpectrumFloor, 1e-300);
  std::vector<long> keep;
  for (long i = m - 1; i >= 0; --i) {  // descending
    if (eig.eigenvalues()(i) > floor) keep.push_back(i);
  }
  GramBasis basis;
  basis.vectors.resize(m, static_cast<long>(keep.size()));
  basis.sigma.resize(static_cast<long>(keep.size()));
  basis.gain.resize(static_cast<long>(keep.size()));
  for (std::size_t idx = 0; idx < keep.size(); ++idx) {
    const double lambda = eig.eigenvalues()(keep[idx]);
    basis.vectors.col(static_cast<long>(idx)) = eig.eigenvectors().col(keep[idx]);
    basis.sigma(static_cast<long>(idx)) = std::sqrt(lambda);
    const double lambda_cov = lambda / m_minus_one;
    basis.gain(static_cast<long>(idx)) =
        std::sqrt(lambda_cov / (lambda_cov + reg));
  }
  return basis;
}

}  // namespace detail

struct KccaSolution {
  Tensor correlations;  // r values in [0, 1], descending
  Tensor dual_x;        // m x r dual coefficients: proj = dual^T k_centered
  Tensor dual_y;
  Tensor train_x;       // training views kept for out-of-sample kernels
  Tensor train_y;
  Tensor gram_row_mean_x;  // centering statistics of the training Grams
  Tensor gram_row_mean_y;
  double gram_grand_mean_x = 0.0;
  double gram_grand_mean_y = 0.0;
  KernelSpec kernel_x, kernel_y;
  double reg = 0.0;
};

/// Regularized kernel CCA on the centered Gram matrices. Works in the
/// eigenbasis of each Gram, which keeps the whitening well-posed and makes
/// the linear-kernel case match linear_cca at the same ridge.
inline KccaSolution kernel_cca(const Tensor& x, const Tensor& y,
                               KernelSpec spec_x, KernelSpec spec_y,
                               std::size_t r, double reg) {
  if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.cols()) {
    throw ContractViolation("kernel_cca: views must share the sample count");
  }
  if (reg <= 0) {
    throw ContractViolation("kernel_cca: regularization must be > 0");
  }
  const std::size_t m = x.cols();
  if (m < 4) {
    throw DegenerateInputError("kernel_cca: need at least 4 samples");
  }
  if (spec_x.kind == KernelSpec::Kind::rbf && spec_x.bandwidth <= 0) {
    spec_x.bandwidth = median_bandwidth(x);
  }
  if (spec_y.kind == KernelSpec::Kind::rbf && spec_y.bandwidth <= 0) {
    spec_y.bandwidth = median_bandwidth(y);
  }

  Eigen::MatrixXd kx = detail::gram(x, spec_x);
  Eigen::MatrixXd ky = detail::gram(y, spec_y);
  Eigen::VectorXd row_mean_x = kx.rowwise().mean();
  Eigen::VectorXd row_mean_y = ky.rowwise().mean();
  const double grand_x = row_mean_x.mean();
  const double grand_y = row_mean_y.mean();
  auto center = [](Eigen::MatrixXd& k, const Eigen::VectorXd& rm, double gm) {
    k.colwise() -= rm;
    k.rowwise() -= rm.transpose();
    k.array() += gm;
    k = (0.5 * (k + k.transpose().eval())).eval();
  };
  center(kx, row_mean_x, grand_x);
  center(ky, row_mean_y, grand_y);

  const double m1 = static_cast<double>(m - 1);
  detail::GramBasis bx = detail::gram_basis(kx, reg, m1);
  detail::GramBasis by = detail::gram_basis(ky, reg, m1);
  const std::size_t rank_cap =
      std::min<std::size_t>(bx.sigma.size(), by.sigma.size());
  if (r == 0 || r > rank_cap) {
    throw ContractViolation("kernel_cca: output dim " + std::to_string(r) +
                            " exceeds usable rank " +
                            std::to_string(rank_cap));
  }

  // Correlations are the singular values of diag(gain_x) Vx^T Vy diag(gain_y).
  Eigen::MatrixXd w = bx.gain.asDiagonal() *
                      (bx.vectors.transpose() * by.vectors) *
                      by.gain.asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalError("kernel_cca: SVD did not converge");
  }

  KccaSolution sol;
  sol.reg = reg;
  sol.kernel_x = spec_x;
  sol.kernel_y = spec_y;
  sol.train_x = x;
  sol.train_y = y;
  sol.gram_row_mean_x = from_eigen_vec(row_mean_x);
  sol.gram_row_mean_y = from_eigen_vec(row_mean_y);
  sol.gram_grand_mean_x = grand_x;
  sol.gram_grand_mean_y = grand_y;
  sol.correlations = Tensor({r});
  for (std::size_t i = 0; i < r; ++i) {
    sol.correlations[i] = std::min(
        std::max(svd.singularValues()[static_cast<long>(i)], 0.0), 1.0);
  }
  // Dual coefficients: alpha = V diag(1 / (sigma sqrt(lambda~ + reg))) P_r,
  // so that alpha^T k_centered(new) projects a new sample.
  auto duals = [&](const detail::GramBasis& b, const Eigen::MatrixXd& pr) {
    Eigen::VectorXd inv(b.sigma.size());
    for (long i = 0; i < b.sigma.size(); ++i) {
      const double lambda_cov = b.sigma(i) * b.sigma(i) / m1;
      inv(i) = 1.0 / (b.sigma(i) * std::sqrt(lambda_cov + reg));
    }
    return Eigen::MatrixXd(b.vectors * inv.asDiagonal() *
                           pr.leftCols(static_cast<long>(r)));
  };
  sol.dual_x = from_eigen(duals(bx, svd.matrixU()));
  sol.dual_y = from_eigen(duals(by, svd.matrixV()));
  return sol;
}

namespace detail {

inline Tensor kcca_project_one_view(const Tensor& train,
                                    const KernelSpec& spec,
                                    const Tensor& row_mean, double grand_mean,
                                    const Tensor& dual, const Tensor& x_new) {
  if (x_new.rank() != 2 || x_new.rows() != train.rows()) {
    throw ContractViolation("kcca_project: view width does not match training");
  }
  const std::size_t m = train.cols(), mc = x_new.cols();
  RowMajorMatrix train_cm = to_eigen(train).transpose();  // m x n
  RowMajorMatrix new_cm = to_eigen(x_new).transpose();    // mc x n
  Eigen::MatrixXd k(static_cast<long>(m), static_cast<long>(mc));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < mc; ++j)
      k(static_cast<long>(i), static_cast<long>(j)) =
          kernel_eval(spec, train_cm.row(static_cast<long>(i)).data(),
                      new_cm.row(static_cast<long>(j)).data(), train.rows());
  // Center against the training distribution.
  Eigen::VectorXd col_mean = k.colwise().mean();
  Eigen::Map<const Eigen::VectorXd> rm(row_mean.data(),
                                       static_cast<long>(row_mean.numel()));
  k.colwise() -= rm;
  k.rowwise() -= col_mean.transpose();
  k.array() += grand_mean;
  return from_eigen(Eigen::MatrixXd(to_eigen(dual).transpose() * k));  // r x mc
}

}  // namespace detail

/// Project new samples of view x into the learned subspace (r x m_new).
inline Tensor kcca_project_x(const KccaSolution& sol, const Tensor& x_new) {
  return detail::kcca_project_one_view(sol.train_x, sol.kernel_x,
                                       sol.gram_row_mean_x,
                                       sol.gram_grand_mean_x, sol.dual_x,
                                       x_new);
}

inline Tensor kcca_project_y(const KccaSolution& sol, const Tensor& y_new) {
  return detail::kcca_project_one_view(sol.train_y, sol.kernel_y,
                                       sol.gram_row_mean_y,
                                       sol.gram_grand_mean_y, sol.dual_y,
                                       y_new);
}

// ---------------------------------------------------------------------------
// generalized CCA (MAXVAR)
// ---------------------------------------------------------------------------

struct GccaSolution {
  Tensor shared;                  // r x m common representation G
  std::vector<Tensor> view_maps;  // n_i x r, minimize |G - W_i^T X_i|_F
  std::vector<Tensor> view_means;
  std::vector<double> residuals;  // |G - W_i^T Xc_i|_F per view
  double reg = 0.0;
};

/// MAXVAR generalized CCA: G's rows are the top-r eigenvectors of the sum
/// of the views' whitened projectors, so G maximizes the total squared
/// alignment to every whitened view.
inline GccaSolution gcca(const std::vector<Tensor>& views, std::size_t r,
                         double reg) {
  if (views.size() < 2) {
    throw ContractViolation("gcca: need at least 2 views");
  }
  const std::size_t m = views[0].cols();
  for (const auto& v : views) {
    if (v.rank() != 2 || v.cols() != m) {
      throw ContractViolation("gcca: views must share the sample count");
    }
  }
  if (r == 0 || r > m) {
    throw ContractViolation("gcca: output dim " + std::to_string(r) +
                            " outside [1, m]");
  }
  if (m < 2) throw DegenerateInputError("gcca: need at least 2 samples");

  const double scale = 1.0 / static_cast<double>(m - 1);
  GccaSolution sol;
  sol.reg = reg;
  Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(static_cast<long>(m),
                                                static_cast<long>(m));
  std::vector<Eigen::MatrixXd> centered;
  centered.reserve(views.size());
  for (const auto& view : views) {
    Eigen::MatrixXd xc = to_eigen(view);
    Eigen::VectorXd mean = detail::row_means(xc);
    xc.colwise() -= mean;
    sol.view_means.push_back(from_eigen_vec(mean));
    Eigen::MatrixXd s = scale * (xc * xc.transpose());
    s = (0.5 * (s + s.transpose().eval())).eval();
    Tensor k = inv_sqrt_sym(from_eigen(s), reg);
    Eigen::MatrixXd t = std::sqrt(scale) * (to_eigen(k) * xc);
    accum.noalias() += t.transpose() * t;
    centered.push_back(std::move(xc));
  }
  accum = (0.5 * (accum + accum.transpose().eval())).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(accum);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("gcca: eigendecomposition failed");
  }
  Eigen::MatrixXd g(static_cast<long>(r), static_cast<long>(m));
  for (std::size_t i = 0; i < r; ++i) {
    g.row(static_cast<long>(i)) =
        eig.eigenvectors().col(static_cast<long>(m - 1 - i)).transpose();
  }
  sol.shared = from_eigen(g);

  for (std::size_t i = 0; i < views.size(); ++i) {
    const Eigen::MatrixXd& xc = centered[i];
    Eigen::MatrixXd gram = xc * xc.transpose();
    gram.diagonal().array() += reg * static_cast<double>(m - 1);
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("gcca: view " + std::to_string(i) +
                           " normal equations not positive definite");
    }
    Eigen::MatrixXd w = llt.solve(xc * g.transpose());  // n x r
    sol.view_maps.push_back(from_eigen(w));
    sol.residuals.push_back((g - w.transpose() * xc).norm());
  }
  return sol;
}

/// Project new samples of one view through its learned map (r x m_new).
inline Tensor gcca_project(const GccaSolution& sol, std::size_t view_index,
                           const Tensor& x_new) {
  if (view_index >= sol.view_maps.size()) {
    throw ContractViolation("gcca_project: view index out of range");
  }
  const Tensor& mean = sol.view_means[view_index];
  if (x_new.rank() != 2 || x_new.rows() != mean.numel()) {
    throw ContractViolation("gcca_project: view width does not match training");
  }
  Eigen::MatrixXd xc = to_eigen(x_new);
  xc.colwise() -= Eigen::Map<const Eigen::VectorXd>(
      mean.data(), static_cast<long>(mean.numel()));
  return from_eigen(
      Eigen::MatrixXd(to_eigen(sol.view_maps[view_index]).transpose() * xc));
}

}  // namespace iccn
