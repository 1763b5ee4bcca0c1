#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "iccn/errors.hpp"
#include "iccn/tensor.hpp"

namespace iccn {

inline Eigen::MatrixXd to_eigen(const Tensor& t) {
  if (t.rank() == 1) {
    return Eigen::Map<const Eigen::VectorXd>(t.data(),
                                             static_cast<long>(t.numel()));
  }
  if (t.rank() != 2) {
    throw ContractViolation("to_eigen: expected rank 1 or 2, got shape " +
                            shape_str(t.shape()));
  }
  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(t.data(), static_cast<long>(t.rows()),
                                    static_cast<long>(t.cols()));
}

inline Tensor from_eigen(const Eigen::MatrixXd& m) {
  Tensor t({static_cast<std::size_t>(m.rows()),
            static_cast<std::size_t>(m.cols())});
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j)
      t(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);
  return t;
}

inline Tensor from_eigen_vec(const Eigen::VectorXd& v) {
  Tensor t({static_cast<std::size_t>(v.size())});
  for (long i = 0; i < v.size(); ++i) t[static_cast<std::size_t>(i)] = v(i);
  return t;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ContractViolation("matmul: incompatible shapes " +
                            shape_str(a.shape()) + " x " +
                            shape_str(b.shape()));
  }
  return from_eigen(to_eigen(a) * to_eigen(b));
}

inline Tensor transpose(const Tensor& m) {
  if (m.rank() != 2) {
    throw ContractViolation("transpose: expected rank 2, got " +
                            shape_str(m.shape()));
  }
  Tensor t({m.cols(), m.rows()});
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

struct SvdResult {
  Tensor u;  // left singular vectors, column-orthonormal
  Tensor s;  // singular values, descending, non-negative
  Tensor v;  // right singular vectors, column-orthonormal
};

/// Thin SVD. Singular values come out sorted descending.
inline SvdResult svd(const Tensor& m) {
  if (m.rank() != 2) {
    throw ContractViolation("svd: expected rank 2, got " +
                            shape_str(m.shape()));
  }
  ensure_finite(m, "svd input");
  Eigen::JacobiSVD<Eigen::MatrixXd> solver(
      to_eigen(m), Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("svd: iteration did not converge for shape " +
                         shape_str(m.shape()));
  }
  SvdResult out{from_eigen(solver.matrixU()),
                from_eigen_vec(solver.singularValues()),
                from_eigen(solver.matrixV())};
  ensure_finite(out.u, "svd U");
  ensure_finite(out.s, "svd S");
  ensure_finite(out.v, "svd V");
  return out;
}

inline double trace_norm(const Tensor& m) {
  if (m.rank() != 2) {
    throw ContractViolation("trace_norm: expected rank 2, got " +
                            shape_str(m.shape()));
  }
  // Canonical orientation, so trace_norm(M) == trace_norm(M^T) bit-exactly.
  Tensor t = transpose(m);
  const Tensor* pick = &m;
  if (m.cols() > m.rows() ||
      (m.cols() == m.rows() && t.storage() < m.storage())) {
    pick = &t;
  }
  return svd(*pick).s.sum();
}

struct EigSymResult {
  Tensor values;   // descending
  Tensor vectors;  // columns are the eigenvectors, orthonormal
};

/// Symmetric eigendecomposition. Input must be symmetric within sym_tol.
inline EigSymResult eig_sym(const Tensor& m, double sym_tol = 1e-10) {
  if (m.rank() != 2 || m.rows() != m.cols()) {
    throw ContractViolation("eig_sym: expected square matrix, got " +
                            shape_str(m.shape()));
  }
  ensure_finite(m, "eig_sym input");
  double asym = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      asym = std::max(asym, std::abs(m(i, j) - m(j, i)));
  if (asym > sym_tol) {
    throw ContractViolation("eig_sym: input asymmetric, max |a_ij - a_ji| = " +
                            std::to_string(asym));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(m));
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eig_sym: iteration did not converge for shape " +
                         shape_str(m.shape()));
  }
  const std::size_t n = m.rows();
  // Eigen sorts ascending; flip to descending.
  EigSymResult out{Tensor({n}), Tensor({n, n})};
  for (std::size_t k = 0; k < n; ++k) {
    const long src = static_cast<long>(n - 1 - k);
    out.values[k] = solver.eigenvalues()(src);
    for (std::size_t i = 0; i < n; ++i) {
      out.vectors(i, k) = solver.eigenvectors()(static_cast<long>(i), src);
    }
  }
  return out;
}

// Relative floor applied to spectra before any inverse, so rank-deficient
// minibatch covariances cannot emit Inf.
inline constexpr double kSpectrumFloor = 1e-12;

/// (m + eps*I)^{-1/2} for symmetric positive definite m + eps*I.
inline Tensor inv_sqrt_sym(const Tensor& m, double eps) {
  if (eps < 0) {
    throw ContractViolation("inv_sqrt_sym: ridge eps must be >= 0");
  }
  EigSymResult eig = eig_sym(m);
  const std::size_t n = eig.values.numel();
  Tensor shifted = eig.values;
  for (std::size_t i = 0; i < n; ++i) shifted[i] += eps;
  const double smallest = shifted[n - 1];
  if (smallest <= 0.0) {
    throw SingularityError(
        "inv_sqrt_sym: matrix plus ridge is not positive definite; smallest "
        "eigenvalue = " +
        std::to_string(smallest));
  }
  const double floor = kSpectrumFloor * shifted[0];
  Eigen::MatrixXd v = to_eigen(eig.vectors);
  Eigen::VectorXd inv_sqrt(static_cast<long>(n));
  for (std::size_t i = 0; i < n; ++i) {
    inv_sqrt[static_cast<long>(i)] =
        1.0 / std::sqrt(std::max(shifted[i], floor));
  }
  Eigen::MatrixXd r = v * inv_sqrt.asDiagonal() * v.transpose();
  r = 0.5 * (r + r.transpose().eval());
  return from_eigen(r);
}

/// Sample cross-covariance of x (n x m, samples in columns) and y (p x m):
/// (1/(m-1)) Xc Yc^T, with per-variable means removed when center is set.
inline Tensor covariance(const Tensor& x, const Tensor& y, bool center = true) {
  if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.cols()) {
    throw ContractViolation("covariance: sample counts differ, " +
                            shape_str(x.shape()) + " vs " +
                            shape_str(y.shape()));
  }
  const std::size_t m = x.cols();
  if (m < 2) {
    throw DegenerateInputError(
        "covariance: need at least 2 samples, got " + std::to_string(m));
  }
  Eigen::MatrixXd xc = to_eigen(x);
  Eigen::MatrixXd yc = to_eigen(y);
  if (center) {
    xc.colwise() -= xc.rowwise().mean().eval();
    yc.colwise() -= yc.rowwise().mean().eval();
  }
  Eigen::MatrixXd c = (xc * yc.transpose()) / static_cast<double>(m - 1);
  if (x.data() == y.data() && x.same_shape(y)) {
    c = 0.5 * (c + c.transpose().eval());  // keep self-covariance exactly symmetric
  }
  return from_eigen(c);
}

}  // namespace iccn
