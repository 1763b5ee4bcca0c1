#include <gtest/gtest.h>

#include <cmath>

#include "iccn/linalg.hpp"
#include "iccn/tensor.hpp"
#include "test_util.hpp"

using namespace iccn;

namespace {

// Independent 2x2 oracle: singular values of A are the square roots of the
// eigenvalues of A^T A, computed by the quadratic formula.
std::pair<double, double> singular_values_2x2(const Tensor& a) {
  double g00 = 0, g01 = 0, g11 = 0;
  for (int i = 0; i < 2; ++i) {
    g00 += a(i, 0) * a(i, 0);
    g01 += a(i, 0) * a(i, 1);
    g11 += a(i, 1) * a(i, 1);
  }
  const double tr = g00 + g11;
  const double det = g00 * g11 - g01 * g01;
  const double disc = std::sqrt(tr * tr - 4 * det);
  return {std::sqrt((tr + disc) / 2), std::sqrt((tr - disc) / 2)};
}

Tensor reconstruct(const SvdResult& r) {
  Tensor us = r.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= r.s[j];
  return matmul(us, transpose(r.v));
}

}  // namespace

TEST(Tensor, ShapeAndDataInvariant) {
  Tensor t({2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_THROW(Tensor({2, 3}, {1.0, 2.0}), ContractViolation);
  EXPECT_THROW(t.reshaped({4, 2}), ContractViolation);
  EXPECT_EQ(t.reshaped({3, 2}).rows(), 3u);
}

TEST(Svd, DiagonalCase) {
  SvdResult r = svd(Tensor::diag({3, 1}));
  EXPECT_NEAR(r.s[0], 3.0, 1e-12);
  EXPECT_NEAR(r.s[1], 1.0, 1e-12);
}

TEST(Svd, OneByOneNegative) {
  SvdResult r = svd(Tensor::matrix(1, 1, {-3}));
  EXPECT_NEAR(r.s[0], 3.0, 1e-12);
}

TEST(Svd, MatchesTwoByTwoEigenOracle) {
  Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  auto [s0, s1] = singular_values_2x2(a);
  SvdResult r = svd(a);
  EXPECT_NEAR(r.s[0], s0, 1e-10);
  EXPECT_NEAR(r.s[1], s1, 1e-10);
  // Frozen values from the oracle.
  EXPECT_NEAR(r.s[0], 5.4649857042190426, 1e-10);
  EXPECT_NEAR(r.s[1], 0.36596619062625746, 1e-10);
}

TEST(Svd, ReconstructionAndOrthonormality) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    Tensor m = testutil::random_matrix(5, 3, seed);
    SvdResult r = svd(m);
    // Descending order.
    for (std::size_t i = 1; i < r.s.numel(); ++i) {
      EXPECT_LE(r.s[i], r.s[i - 1] + 1e-14);
      EXPECT_GE(r.s[i], 0.0);
    }
    Tensor utu = matmul(transpose(r.u), r.u);
    Tensor vtv = matmul(transpose(r.v), r.v);
    for (std::size_t i = 0; i < utu.rows(); ++i)
      for (std::size_t j = 0; j < utu.cols(); ++j) {
        EXPECT_NEAR(utu(i, j), i == j ? 1.0 : 0.0, 1e-10);
        EXPECT_NEAR(vtv(i, j), i == j ? 1.0 : 0.0, 1e-10);
      }
    const double rel = testutil::frobenius(reconstruct(r) - m) /
                       std::max(1.0, testutil::frobenius(m));
    EXPECT_LT(rel, 1e-8);
  }
}

TEST(Svd, RejectsNonFinite) {
  Tensor bad = Tensor::matrix(2, 2, {1, 2, std::nan(""), 4});
  EXPECT_THROW(svd(bad), NumericalError);
}

TEST(EigSym, IdentityAndDiagonal) {
  EigSymResult id = eig_sym(Tensor::identity(3));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(id.values[i], 1.0, 1e-12);

  EigSymResult d = eig_sym(Tensor::diag({9, 4}));
  EXPECT_NEAR(d.values[0], 9.0, 1e-12);
  EXPECT_NEAR(d.values[1], 4.0, 1e-12);
  // Axis eigenvectors up to sign.
  EXPECT_NEAR(std::abs(d.vectors(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(d.vectors(1, 1)), 1.0, 1e-12);
}

TEST(EigSym, MultiplyBackOracle) {
  Tensor m = testutil::random_spd(4, 77);
  EigSymResult r = eig_sym(m);
  // V diag(lambda) V^T reconstructs the input.
  Tensor vl = r.vectors;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) vl(i, j) *= r.values[j];
  Tensor back = matmul(vl, transpose(r.vectors));
  EXPECT_LT(testutil::frobenius(back - m), 1e-8);
  // m v_i = lambda_i v_i per column.
  Tensor mv = matmul(m, r.vectors);
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t i = 0; i < 4; ++i)
      EXPECT_NEAR(mv(i, j), r.values[j] * r.vectors(i, j), 1e-8);
}

TEST(EigSym, RejectsAsymmetric) {
  Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  EXPECT_THROW(eig_sym(m), ContractViolation);
}

TEST(InvSqrtSym, IdentityAndDiagonal) {
  Tensor r = inv_sqrt_sym(Tensor::identity(3), 0.0);
  EXPECT_LT(testutil::frobenius(r - Tensor::identity(3)), 1e-12);

  Tensor d = inv_sqrt_sym(Tensor::diag({4, 9}), 0.0);
  EXPECT_NEAR(d(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(d(1, 1), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(d(0, 1), 0.0, 1e-12);
}

TEST(InvSqrtSym, MultiplyBackOracle) {
  const double eps = 1e-4;
  Tensor m = testutil::random_spd(3, 5);
  Tensor r = inv_sqrt_sym(m, eps);
  Tensor shifted = m;
  for (int i = 0; i < 3; ++i) shifted(i, i) += eps;
  Tensor check = matmul(matmul(r, r), shifted);
  EXPECT_LT(testutil::frobenius(check - Tensor::identity(3)), 1e-6);
}

TEST(InvSqrtSym, CommutesWithInput) {
  Tensor m = testutil::random_spd(5, 11);
  Tensor r = inv_sqrt_sym(m, 1e-6);
  Tensor ab = matmul(r, m);
  Tensor ba = matmul(m, r);
  EXPECT_LT(testutil::frobenius(ab - ba), 1e-8);
}

TEST(InvSqrtSym, SingularityNamesEigenvalue) {
  Tensor m = Tensor::diag({1.0, -0.5});
  try {
    inv_sqrt_sym(m, 0.0);
    FAIL() << "expected SingularityError";
  } catch (const SingularityError& e) {
    EXPECT_NE(std::string(e.what()).find("-0.5"), std::string::npos);
  }
}

TEST(Covariance, HandArithmetic) {
  // Two samples of a scalar variable: 0 and 2 -> variance 2.
  Tensor x = Tensor::matrix(1, 2, {0, 2});
  Tensor c = covariance(x, x);
  EXPECT_NEAR(c(0, 0), 2.0, 1e-15);
}

TEST(Covariance, SignSymmetry) {
  Tensor x = testutil::random_matrix(3, 50, 42);
  Tensor y = x * -1.0;
  Tensor cxy = covariance(x, y);
  Tensor cxx = covariance(x, x);
  EXPECT_LT(testutil::frobenius(cxy + cxx), 1e-12);
}

TEST(Covariance, MatchesTwoPassOracle) {
  Tensor x = testutil::random_matrix(3, 100, 9);
  Tensor y = testutil::random_matrix(2, 100, 10);
  // Textbook two-pass formula.
  const std::size_t m = 100;
  std::vector<double> mx(3, 0.0), my(2, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    for (int i = 0; i < 3; ++i) mx[i] += x(i, j) / m;
    for (int i = 0; i < 2; ++i) my[i] += y(i, j) / m;
  }
  Tensor expect({3, 2});
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 2; ++b) {
      double s = 0;
      for (std::size_t j = 0; j < m; ++j)
        s += (x(a, j) - mx[a]) * (y(b, j) - my[b]);
      expect(a, b) = s / (m - 1);
    }
  EXPECT_LT(testutil::frobenius(covariance(x, y) - expect), 1e-12);
}

TEST(Covariance, SelfCovarianceIsSymmetricPsd) {
  for (std::uint64_t seed : {3u, 13u, 23u}) {
    Tensor x = testutil::random_matrix(4, 30, seed);
    Tensor c = covariance(x, x);
    EigSymResult eig = eig_sym(c);
    EXPECT_GE(eig.values[3], -1e-10);
  }
}

TEST(Covariance, DegenerateSampleCount) {
  Tensor x = Tensor::matrix(2, 1, {1, 2});
  EXPECT_THROW(covariance(x, x), DegenerateInputError);
}

TEST(TraceNorm, IdentityAndRankOne) {
  EXPECT_NEAR(trace_norm(Tensor::identity(4)), 4.0, 1e-10);
  // Rank-1 outer product u v^T has trace norm |u| |v|.
  Tensor u = Tensor::vector({1, 2, 2});   // norm 3
  Tensor v = Tensor::vector({3, 4});      // norm 5
  Tensor outer({3, 2});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) outer(i, j) = u[i] * v[j];
  EXPECT_NEAR(trace_norm(outer), 15.0, 1e-10);
}

TEST(TraceNorm, FrozenTwoByTwo) {
  // Sum of the SVD-oracle values of [[1,2],[3,4]].
  EXPECT_NEAR(trace_norm(Tensor::matrix(2, 2, {1, 2, 3, 4})),
              5.4649857042190426 + 0.36596619062625746, 1e-9);
}

TEST(TraceNorm, TransposeAndOrthogonalInvariance) {
  Tensor m = testutil::random_matrix(4, 4, 21);
  EXPECT_DOUBLE_EQ(trace_norm(m), trace_norm(transpose(m)));
  Tensor q1 = testutil::random_orthogonal(4, 31);
  Tensor q2 = testutil::random_orthogonal(4, 32);
  EXPECT_NEAR(trace_norm(matmul(matmul(q1, m), q2)), trace_norm(m), 1e-8);
}
