#include "efa/dense_oracle.hpp"

#include "efa/model.hpp"

#include <Eigen/SVD>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>

namespace efa::oracle {

Matrix commutation_matrix(Index rows, Index cols) {
  const Index n = rows * cols;
  Matrix k = Matrix::Zero(n, n);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      // vec(X^T)[c + r*cols] = vec(X)[r + c*rows]
      k(c + r * cols, r + c * rows) = 1.0;
    }
  }
  return k;
}

void check_oracle_scale(Index p, Index q) {
  if (p * q > 64 || p * p > 4096) {
    throw std::invalid_argument("oracle scale guard exceeded: P*Q = " + std::to_string(p * q) +
                                " (max 64), P^2 = " + std::to_string(p * p) + " (max 4096)");
  }
}

DenseJacobian build_jacobian(const FactorModel& model, const NoiseMask& mask) {
  const Index p = model.dim();
  const Index q = model.rank();
  check_oracle_scale(p, q);
  if (mask.dim() != p) throw std::invalid_argument("build_jacobian: mask dimension mismatch");

  const Index pq = p * q;
  const Index m = mask.support_size();
  DenseJacobian out;
  out.a_offset = 0;
  out.a_conj_offset = pq;
  out.s_offset = 2 * pq;
  out.J = Matrix::Zero(p * p, 2 * pq + m);

  if (q > 0) {
    out.J.middleCols(out.a_offset, pq) =
        Eigen::kroneckerProduct(model.A().conjugate(), Matrix::Identity(p, p));
    out.J.middleCols(out.a_conj_offset, pq) =
        Eigen::kroneckerProduct(Matrix::Identity(p, p), model.A()) * commutation_matrix(p, q);
  }
  const auto& support = mask.support_indices();
  for (Index k = 0; k < m; ++k) {
    const auto [i, j] = support[static_cast<size_t>(k)];
    out.J(i + j * p, out.s_offset + k) = 1.0;
  }
  return out;
}

ReductionBasis build_reduction_basis(const FactorModel& model) {
  const Index p = model.dim();
  const Index q = model.rank();
  check_oracle_scale(p, q);
  if (q == 0) {
    throw std::invalid_argument("build_reduction_basis: model has no loading columns");
  }
  const RealVector& gamma = model.gamma();
  if (!(gamma.minCoeff() > 0.0)) {
    throw RankDeficientError("build_reduction_basis: nonpositive loading power",
                             gamma.minCoeff());
  }

  // U_n is needed explicitly only here; take it from a full SVD of A.
  Eigen::JacobiSVD<Matrix> svd(model.A(), Eigen::ComputeFullU);
  const Matrix un = svd.matrixU().rightCols(p - q);

  const Index pq = p * q;
  const Index q2 = q * q;
  const Matrix kqp = commutation_matrix(q, p);

  RealVector g(q2);
  for (Index a = 0; a < q; ++a) {
    for (Index b = 0; b < q; ++b) {
      g(a * q + b) = 1.0 / (gamma(a) + gamma(b));
    }
  }
  const RealVector g_sqrt = g.cwiseSqrt();

  Matrix v = Matrix::Zero(2 * pq, 2 * pq - q2);
  Index col = 0;
  // Columns spanning perturbations of vec(A) that leave the column span.
  v.block(0, col, pq, q * (p - q)) =
      Eigen::kroneckerProduct(Matrix::Identity(q, q), un);
  col += q * (p - q);
  // The conjugate-side counterpart.
  v.block(pq, col, pq, (p - q) * q) =
      kqp * Eigen::kroneckerProduct(un.conjugate(), Matrix::Identity(q, q));
  col += (p - q) * q;
  // In-span perturbations, normalized by the paired-power weights.
  const Matrix gamma_sqrt =
      model.gamma().cwiseSqrt().cast<Complex>().asDiagonal().toDenseMatrix();
  v.block(0, col, pq, q2) =
      Eigen::kroneckerProduct(gamma_sqrt, model.U0()) * g_sqrt.cast<Complex>().asDiagonal();
  v.block(pq, col, pq, q2) = kqp *
                             Eigen::kroneckerProduct(model.U0().conjugate(), gamma_sqrt) *
                             g_sqrt.cast<Complex>().asDiagonal();

  Matrix z = Matrix::Zero(2 * pq, q2);
  z.topRows(pq) = Eigen::kroneckerProduct(Matrix::Identity(q, q), model.A()) *
                  g_sqrt.cast<Complex>().asDiagonal();
  z.bottomRows(pq) = -kqp *
                     Eigen::kroneckerProduct(model.A().conjugate(), Matrix::Identity(q, q)) *
                     g_sqrt.cast<Complex>().asDiagonal();

  RealVector eigvals(2 * pq);
  Index at = 0;
  for (Index a = 0; a < q; ++a) {
    for (Index b = 0; b < p - q; ++b) eigvals(at++) = gamma(a);
  }
  for (Index a = 0; a < p - q; ++a) {
    for (Index b = 0; b < q; ++b) eigvals(at++) = gamma(b);
  }
  for (Index a = 0; a < q; ++a) {
    for (Index b = 0; b < q; ++b) eigvals(at++) = gamma(a) + gamma(b);
  }
  for (Index k = 0; k < q2; ++k) eigvals(at++) = 0.0;

  return ReductionBasis{std::move(v), std::move(z), std::move(eigvals), std::move(g)};
}

DescentDirection solve_direction_dense(const FactorModel& model, const SampleCovariance& rhat,
                                       const NoiseMask& mask) {
  const Index p = model.dim();
  const Index q = model.rank();
  check_oracle_scale(p, q);

  const DenseJacobian jac = build_jacobian(model, mask);
  const HermitianMatrix e0 = residual(model, rhat);
  const Vector r = Eigen::Map<const Vector>(e0.mat().data(), e0.mat().size());

  const Matrix gram = jac.J.adjoint() * jac.J;
  const Vector rhs = jac.J.adjoint() * r;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const RealVector lambda = eig.eigenvalues();
  const double lambda_max = lambda.maxCoeff();
  RealVector inv = RealVector::Zero(lambda.size());
  for (Index k = 0; k < lambda.size(); ++k) {
    if (lambda(k) > 1e-10 * lambda_max) inv(k) = 1.0 / lambda(k);
  }
  const Vector delta =
      eig.eigenvectors() * (inv.cast<Complex>().asDiagonal() * (eig.eigenvectors().adjoint() * rhs));

  DescentDirection dir;
  dir.delta_A = Eigen::Map<const Matrix>(delta.data(), p, q);
  Matrix scattered = mask.scatter_support(delta.segment(jac.s_offset, mask.support_size()));
  scattered = 0.5 * (scattered + scattered.adjoint()).eval();
  dir.delta_psi = HermitianMatrix::mirrored(scattered);
  dir.mu = 0.0;
  return dir;
}

}  // namespace efa::oracle
