#include "efa/types.hpp"

#include "efa/model.hpp"

#include <algorithm>
#include <cmath>

namespace efa {

HermitianMatrix HermitianMatrix::mirrored(const Matrix& any) {
  if (any.rows() != any.cols()) {
    throw std::invalid_argument("HermitianMatrix: input must be square, got " +
                                std::to_string(any.rows()) + "x" + std::to_string(any.cols()));
  }
  const Index p = any.rows();
  HermitianMatrix out;
  out.m_ = Matrix(p, p);
  for (Index j = 0; j < p; ++j) {
    out.m_(j, j) = Complex(any(j, j).real(), 0.0);
    for (Index i = j + 1; i < p; ++i) {
      out.m_(i, j) = any(i, j);
      out.m_(j, i) = std::conj(any(i, j));
    }
  }
  return out;
}

double HermitianMatrix::min_eigenvalue() const {
  if (dim() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m_, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

HermitianMatrix operator+(const HermitianMatrix& a, const HermitianMatrix& b) {
  return HermitianMatrix::mirrored(a.mat() + b.mat());
}

HermitianMatrix operator-(const HermitianMatrix& a, const HermitianMatrix& b) {
  return HermitianMatrix::mirrored(a.mat() - b.mat());
}

HermitianMatrix operator*(double s, const HermitianMatrix& a) {
  return HermitianMatrix::mirrored(s * a.mat());
}

NoiseMask::NoiseMask(const BoolMatrix& mask) : mask_(mask) {
  if (mask.rows() != mask.cols() || mask.rows() < 1) {
    throw std::invalid_argument("NoiseMask: mask must be square and nonempty");
  }
  const Index p = mask.rows();
  identity_ = true;
  for (Index j = 0; j < p; ++j) {
    if (!mask(j, j)) {
      throw std::invalid_argument("NoiseMask: diagonal cell (" + std::to_string(j) + "," +
                                  std::to_string(j) + ") must be set");
    }
    for (Index i = 0; i < p; ++i) {
      if (mask(i, j) != mask(j, i)) {
        throw std::invalid_argument("NoiseMask: mask must be symmetric, differs at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
      }
      if (i != j && mask(i, j)) identity_ = false;
    }
  }
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < p; ++i) {
      if (!mask(i, j)) continue;
      support_.emplace_back(i, j);
      if (i >= j) free_.emplace_back(i, j);
    }
  }
}

NoiseMask NoiseMask::identity(Index dim) {
  BoolMatrix m = BoolMatrix::Constant(dim, dim, false);
  for (Index i = 0; i < dim; ++i) m(i, i) = true;
  return NoiseMask(m);
}

NoiseMask NoiseMask::banded(Index dim, Index bandwidth) {
  BoolMatrix m = BoolMatrix::Constant(dim, dim, false);
  for (Index j = 0; j < dim; ++j) {
    for (Index i = 0; i < dim; ++i) {
      if (std::abs(static_cast<long>(i - j)) <= bandwidth) m(i, j) = true;
    }
  }
  return NoiseMask(m);
}

Matrix NoiseMask::expand(const Vector& folded) const {
  if (folded.size() != static_cast<Index>(free_.size())) {
    throw std::invalid_argument("NoiseMask::expand: expected " + std::to_string(free_.size()) +
                                " free entries, got " + std::to_string(folded.size()));
  }
  Matrix out = Matrix::Zero(dim(), dim());
  for (size_t k = 0; k < free_.size(); ++k) {
    const auto [i, j] = free_[k];
    if (i == j) {
      out(i, i) = Complex(folded(static_cast<Index>(k)).real(), 0.0);
    } else {
      out(i, j) = folded(static_cast<Index>(k));
      out(j, i) = std::conj(folded(static_cast<Index>(k)));
    }
  }
  return out;
}

Vector NoiseMask::fold(const Matrix& full) const {
  if (full.rows() != dim() || full.cols() != dim()) {
    throw std::invalid_argument("NoiseMask::fold: dimension mismatch");
  }
  Vector out(static_cast<Index>(free_.size()));
  for (size_t k = 0; k < free_.size(); ++k) {
    out(static_cast<Index>(k)) = full(free_[k].first, free_[k].second);
  }
  return out;
}

Vector NoiseMask::select_support(const Matrix& full) const {
  if (full.rows() != dim() || full.cols() != dim()) {
    throw std::invalid_argument("NoiseMask::select_support: dimension mismatch");
  }
  Vector out(support_size());
  for (size_t k = 0; k < support_.size(); ++k) {
    out(static_cast<Index>(k)) = full(support_[k].first, support_[k].second);
  }
  return out;
}

Matrix NoiseMask::scatter_support(const Vector& selected) const {
  if (selected.size() != support_size()) {
    throw std::invalid_argument("NoiseMask::scatter_support: expected " +
                                std::to_string(support_size()) + " entries, got " +
                                std::to_string(selected.size()));
  }
  Matrix out = Matrix::Zero(dim(), dim());
  for (size_t k = 0; k < support_.size(); ++k) {
    out(support_[k].first, support_[k].second) = selected(static_cast<Index>(k));
  }
  return out;
}

HermitianMatrix NoiseMask::project(const HermitianMatrix& x) const {
  if (x.dim() != dim()) throw std::invalid_argument("NoiseMask::project: dimension mismatch");
  Matrix out = Matrix::Zero(dim(), dim());
  for (const auto& [i, j] : free_) {
    if (i == j) {
      out(i, i) = x(i, i);
    } else {
      out(i, j) = x(i, j);
    }
  }
  return HermitianMatrix::mirrored(out);
}

namespace {

// Shared validation for both FactorModel factories.
void check_psi_support(const HermitianMatrix& psi, const NoiseMask& mask) {
  if (psi.dim() != mask.dim()) {
    throw std::invalid_argument("FactorModel: psi dimension " + std::to_string(psi.dim()) +
                                " does not match mask dimension " + std::to_string(mask.dim()));
  }
  for (Index j = 0; j < psi.dim(); ++j) {
    for (Index i = j; i < psi.dim(); ++i) {
      if (!mask.contains(i, j) && psi(i, j) != Complex(0.0, 0.0)) {
        throw std::invalid_argument("FactorModel: psi has an entry outside the mask at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
}

}  // namespace

FactorModel FactorModel::from_loadings(const Matrix& a_raw, const HermitianMatrix& psi,
                                       const NoiseMask& mask) {
  Loadings ld = enforce_constraint(a_raw);
  check_psi_support(psi, mask);
  if (ld.A.rows() != mask.dim()) {
    throw std::invalid_argument("FactorModel: loading rows do not match mask dimension");
  }
  return FactorModel(std::move(ld.A), std::move(ld.U0), std::move(ld.gamma), psi);
}

FactorModel FactorModel::from_constrained(const Matrix& a, const HermitianMatrix& psi,
                                          const NoiseMask& mask) {
  check_psi_support(psi, mask);
  if (a.rows() != mask.dim()) {
    throw std::invalid_argument("FactorModel: loading rows do not match mask dimension");
  }
  const Index q = a.cols();
  if (q == 0) {
    return FactorModel(a, Matrix(a.rows(), 0), RealVector(0), psi);
  }
  Matrix gram = a.adjoint() * a;
  RealVector gamma = gram.diagonal().real();
  const double gnorm = gamma.norm();
  Matrix offdiag = gram;
  offdiag.diagonal().setZero();
  if (offdiag.norm() > 1e-12 * std::max(gnorm, 1e-300)) {
    throw std::invalid_argument(
        "FactorModel: loading columns are not orthogonal; use from_loadings");
  }
  for (Index k = 0; k < q; ++k) {
    if (!(gamma(k) > 0.0)) {
      throw RankDeficientError("FactorModel: nonpositive column power at index " +
                                   std::to_string(k),
                               gamma(k));
    }
    if (k > 0 && gamma(k) > gamma(k - 1) * (1.0 + 1e-12)) {
      throw std::invalid_argument("FactorModel: column powers must be sorted descending");
    }
  }
  Matrix u0 = a * gamma.cwiseSqrt().cwiseInverse().cast<Complex>().asDiagonal();
  return FactorModel(a, std::move(u0), std::move(gamma), psi);
}

HermitianMatrix FactorModel::signal() const {
  return HermitianMatrix::mirrored(a_ * a_.adjoint());
}

HermitianMatrix FactorModel::covariance() const {
  return HermitianMatrix::mirrored(a_ * a_.adjoint() + psi_.mat());
}

}  // namespace efa
