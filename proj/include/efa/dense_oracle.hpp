#pragma once

#include "efa/types.hpp"

namespace efa::oracle {

/// Explicitly assembled Jacobian of vec(A A^H + Psi) with respect to
/// [vec(A); vec(A)*; psi]. Small-scale verification object only; the fast
/// solver never forms it.
struct DenseJacobian {
  Matrix J;              // P^2 x (2PQ + m)
  Index a_offset = 0;    // columns for vec(A)
  Index a_conj_offset;   // columns for vec(A)*
  Index s_offset;        // selection-matrix columns
};

/// Closed-form eigenstructure of the loading-block Gram matrix: the
/// null-space basis Z, its orthonormal complement V, the eigenvalues (three
/// positive blocks followed by Q^2 zeros), and the diagonal of
/// (Gamma kron I + I kron Gamma)^{-1}.
struct ReductionBasis {
  Matrix V;            // 2PQ x (2PQ - Q^2)
  Matrix Z;            // 2PQ x Q^2
  RealVector eigvals;  // 2PQ
  RealVector g;        // Q^2
};

/// Dense commutation matrix K^{rows,cols}: vec(X^T) = K vec(X) for
/// rows x cols matrices X. Oracle-scale only; the solver applies the
/// permutation by index arithmetic.
Matrix commutation_matrix(Index rows, Index cols);

/// Guard for all oracle builders: P*Q <= 64 and P^2 <= 4096.
void check_oracle_scale(Index p, Index q);

DenseJacobian build_jacobian(const FactorModel& model, const NoiseMask& mask);

ReductionBasis build_reduction_basis(const FactorModel& model);

/// Minimum-norm Gauss-Newton direction via truncated pseudoinverse of the
/// full Gram matrix (eigenvalues below 1e-10 times the largest are dropped).
/// The step length is left unset.
DescentDirection solve_direction_dense(const FactorModel& model, const SampleCovariance& rhat,
                                       const NoiseMask& mask);

}  // namespace efa::oracle
