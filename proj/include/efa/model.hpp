#pragma once

#include "efa/types.hpp"

namespace efa {

/// Averages outer products of the snapshots: (1/N) sum y[n] y[n]^H.
/// The result is Hermitian by construction. Positive semi-definiteness is
/// checked to a tolerance of 1e-10 times the largest diagonal entry.
SampleCovariance sample_covariance(const std::vector<Vector>& samples);

/// E0 = Rhat - A A^H - Psi.
HermitianMatrix residual(const FactorModel& model, const SampleCovariance& rhat);

/// Squared Frobenius norm of the residual.
double cost(const FactorModel& model, const SampleCovariance& rhat);

/// Matrix-free evaluation of the normal-equation right-hand side:
/// a_part = vec(E0 A) and psi_part = E0 at the mask's free entries. The
/// conjugate loading block is the conjugate of a_part and is not stored.
ParameterVector gradient(const FactorModel& model, const SampleCovariance& rhat,
                         const NoiseMask& mask);

/// sqrt(2 ||E0 A||_F^2 + sum over all masked cells |E0_ij|^2); the Euclidean
/// norm of the full stacked right-hand side.
double gradient_norm(const FactorModel& model, const SampleCovariance& rhat,
                     const NoiseMask& mask);

/// Unique parameter count of the model: 2PQ + ||M||_1 - Q^2.
long degrees_of_freedom(Index p, Index q, const NoiseMask& mask);

/// Counting rule: true iff degrees_of_freedom(p, q, mask) < p^2. A necessary
/// style check, not a sufficiency proof.
bool check_identifiability(Index p, Index q, const NoiseMask& mask);

/// Economic SVD A_raw = U0 S Q^H; returns A = U0 S (so A^H A is diagonal,
/// descending) and discards the right factor. Throws RankDeficientError if
/// the smallest singular value falls below 1e-12 times the largest.
Loadings enforce_constraint(const Matrix& a_raw);

/// Flattens a model into vec(A) plus the free noise entries.
ParameterVector pack(const FactorModel& model, const NoiseMask& mask);

/// Inverse of pack. The loading part must satisfy the orthogonal-columns
/// constraint (it always does for vectors produced by pack).
FactorModel unpack(const ParameterVector& theta, Index p, Index q, const NoiseMask& mask);

}  // namespace efa
