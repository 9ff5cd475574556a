#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace efa {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// A loading matrix (or one of its columns) has fallen below the numerical
/// rank tolerance. Carries the offending singular value (or eigenvalue).
class RankDeficientError : public std::runtime_error {
 public:
  RankDeficientError(const std::string& what, double singular_value)
      : std::runtime_error(what), singular_value_(singular_value) {}
  double singular_value() const { return singular_value_; }

 private:
  double singular_value_;
};

/// The inner linear solve did not reach its tolerance within the iteration
/// budget. Carries the relative residual at the point of failure; this is
/// the symptom of a near-unidentifiable mask/subspace alignment.
class IllConditionedError : public std::runtime_error {
 public:
  IllConditionedError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Hermitian P x P matrix. Construction keeps the lower triangle, mirrors it
/// onto the upper one, and drops imaginary parts on the diagonal, so
/// entries(i,j) == conj(entries(j,i)) holds exactly (not just to tolerance).
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(Index dim) : m_(Matrix::Zero(dim, dim)) {}

  /// Builds from an arbitrary square matrix; only the lower triangle
  /// (including the real part of the diagonal) is read.
  static HermitianMatrix mirrored(const Matrix& any);

  Index dim() const { return m_.rows(); }
  const Matrix& mat() const { return m_; }
  Complex operator()(Index i, Index j) const { return m_(i, j); }

  double norm() const { return m_.norm(); }
  double squared_norm() const { return m_.squaredNorm(); }

  /// Smallest eigenvalue (self-adjoint solve, eigenvalues only).
  double min_eigenvalue() const;

 private:
  Matrix m_;
};

HermitianMatrix operator+(const HermitianMatrix& a, const HermitianMatrix& b);
HermitianMatrix operator-(const HermitianMatrix& a, const HermitianMatrix& b);
HermitianMatrix operator*(double s, const HermitianMatrix& a);

/// Hermitian covariance estimate together with the number of averaged
/// snapshots. sample_count == 0 marks a population covariance that did not
/// come from samples (file loads, exact-covariance experiments).
struct SampleCovariance {
  HermitianMatrix matrix;
  long sample_count = 0;

  Index dim() const { return matrix.dim(); }
};

/// Symmetric 0/1 support pattern for the structured noise covariance, plus
/// the index maps realizing the selection matrix S (which is never stored
/// dense). All diagonal cells must be set; the classical configuration is
/// the identity mask.
class NoiseMask {
 public:
  using IndexPair = std::pair<Index, Index>;

  explicit NoiseMask(const BoolMatrix& mask);

  static NoiseMask identity(Index dim);
  /// Cells with |i - j| <= bandwidth. bandwidth 0 reproduces identity(dim).
  static NoiseMask banded(Index dim, Index bandwidth);

  Index dim() const { return mask_.rows(); }
  bool is_identity() const { return identity_; }
  /// ||M||_1: the number of set cells.
  Index support_size() const { return static_cast<Index>(support_.size()); }
  bool contains(Index i, Index j) const { return mask_(i, j); }
  const BoolMatrix& mask() const { return mask_; }

  /// Lower-triangular (row >= col) support cells: the free parameters of the
  /// noise covariance. Diagonal cells carry real values.
  const std::vector<IndexPair>& free_indices() const { return free_; }

  /// All support cells in column-major order; fixes the column order of the
  /// selection matrix S and of any vector in full selected form.
  const std::vector<IndexPair>& support_indices() const { return support_; }

  /// Hermitian expansion of a free-entry vector (diagonal imaginary parts
  /// are discarded).
  Matrix expand(const Vector& folded) const;
  /// Free entries of a matrix, in free_indices() order.
  Vector fold(const Matrix& full) const;

  /// Entries of a matrix at all support cells (the action of S^H on vec).
  Vector select_support(const Matrix& full) const;
  /// Scatters a support-ordered vector into a dense matrix (unvec of S x).
  Matrix scatter_support(const Vector& selected) const;

  /// Keeps masked entries of a Hermitian matrix, zeroing the rest.
  HermitianMatrix project(const HermitianMatrix& x) const;

 private:
  BoolMatrix mask_;
  std::vector<IndexPair> free_;
  std::vector<IndexPair> support_;
  bool identity_ = false;
};

/// Loading factors satisfying the orthogonal-columns constraint:
/// A = U0 * diag(gamma)^{1/2}, A^H A = diag(gamma), gamma descending.
struct Loadings {
  Matrix A;          // P x Q
  Matrix U0;         // P x Q, orthonormal columns
  RealVector gamma;  // Q, strictly positive, descending
};

/// The estimate being optimized: loadings A (with the cached constraint
/// data U0 and gamma) and the masked noise covariance. Immutable after
/// construction; all solver operations produce new values.
class FactorModel {
 public:
  /// From an unconstrained loading matrix; applies the orthogonal-columns
  /// constraint via an economic SVD (the right unitary factor is discarded,
  /// the model is invariant to it).
  static FactorModel from_loadings(const Matrix& a_raw, const HermitianMatrix& psi,
                                   const NoiseMask& mask);

  /// From a loading matrix that already satisfies the constraint. U0 and
  /// gamma are recomputed from A; violations beyond 1e-12 relative are
  /// rejected.
  static FactorModel from_constrained(const Matrix& a, const HermitianMatrix& psi,
                                      const NoiseMask& mask);

  Index dim() const { return a_.rows(); }
  Index rank() const { return a_.cols(); }
  const Matrix& A() const { return a_; }
  const Matrix& U0() const { return u0_; }
  const RealVector& gamma() const { return gamma_; }
  const HermitianMatrix& psi() const { return psi_; }

  /// A A^H.
  HermitianMatrix signal() const;
  /// A A^H + Psi.
  HermitianMatrix covariance() const;

 private:
  FactorModel(Matrix a, Matrix u0, RealVector gamma, HermitianMatrix psi)
      : a_(std::move(a)), u0_(std::move(u0)), gamma_(std::move(gamma)), psi_(std::move(psi)) {}

  Matrix a_;
  Matrix u0_;
  RealVector gamma_;
  HermitianMatrix psi_;
};

/// Flat parameterization of a model: vec(A) plus the free noise entries.
/// The conjugate loading block is implicit and never stored twice.
struct ParameterVector {
  Vector a_part;    // length P*Q
  Vector psi_part;  // over free_indices, diagonal entries real
};

/// Descent direction for one Gauss-Newton step, plus the step length chosen
/// for it. delta_A carries no component in the null space of the loading
/// Jacobian; delta_psi has support inside the mask.
struct DescentDirection {
  Matrix delta_A;            // P x Q
  HermitianMatrix delta_psi; // support inside the mask
  double mu = 0.0;
};

}  // namespace efa
