#include "efa/model.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace efa {

SampleCovariance sample_covariance(const std::vector<Vector>& samples) {
  if (samples.empty()) {
    throw std::invalid_argument("sample_covariance: empty sample set");
  }
  const Index p = samples.front().size();
  if (p < 1) throw std::invalid_argument("sample_covariance: zero-length snapshots");
  Matrix acc = Matrix::Zero(p, p);
  for (size_t n = 0; n < samples.size(); ++n) {
    if (samples[n].size() != p) {
      throw std::invalid_argument("sample_covariance: snapshot " + std::to_string(n) +
                                  " has length " + std::to_string(samples[n].size()) +
                                  ", expected " + std::to_string(p));
    }
    acc.noalias() += samples[n] * samples[n].adjoint();
  }
  acc /= static_cast<double>(samples.size());
  HermitianMatrix m = HermitianMatrix::mirrored(acc);
  const double max_diag = m.mat().diagonal().real().maxCoeff();
  const double lambda_min = m.min_eigenvalue();
  if (lambda_min < -1e-10 * max_diag) {
    throw std::runtime_error("sample_covariance: result is not positive semi-definite "
                             "(smallest eigenvalue " + std::to_string(lambda_min) + ")");
  }
  return SampleCovariance{std::move(m), static_cast<long>(samples.size())};
}

HermitianMatrix residual(const FactorModel& model, const SampleCovariance& rhat) {
  if (model.dim() != rhat.dim()) {
    throw std::invalid_argument("residual: model dimension " + std::to_string(model.dim()) +
                                " does not match covariance dimension " +
                                std::to_string(rhat.dim()));
  }
  return HermitianMatrix::mirrored(rhat.matrix.mat() - model.A() * model.A().adjoint() -
                                   model.psi().mat());
}

double cost(const FactorModel& model, const SampleCovariance& rhat) {
  return residual(model, rhat).squared_norm();
}

ParameterVector gradient(const FactorModel& model, const SampleCovariance& rhat,
                         const NoiseMask& mask) {
  if (model.dim() != mask.dim()) {
    throw std::invalid_argument("gradient: model/mask dimension mismatch");
  }
  const HermitianMatrix e0 = residual(model, rhat);
  const Matrix ea = e0.mat() * model.A();
  ParameterVector g;
  g.a_part = Eigen::Map<const Vector>(ea.data(), ea.size());
  g.psi_part = mask.fold(e0.mat());
  return g;
}

double gradient_norm(const FactorModel& model, const SampleCovariance& rhat,
                     const NoiseMask& mask) {
  if (model.dim() != mask.dim()) {
    throw std::invalid_argument("gradient_norm: model/mask dimension mismatch");
  }
  const HermitianMatrix e0 = residual(model, rhat);
  const Matrix ea = e0.mat() * model.A();
  double sum = 2.0 * ea.squaredNorm();
  for (const auto& [i, j] : mask.support_indices()) {
    sum += std::norm(e0(i, j));
  }
  return std::sqrt(sum);
}

long degrees_of_freedom(Index p, Index q, const NoiseMask& mask) {
  if (p < 1) throw std::invalid_argument("degrees_of_freedom: dimension must be positive");
  if (q < 0 || q > p) {
    throw std::invalid_argument("degrees_of_freedom: rank " + std::to_string(q) +
                                " out of range for dimension " + std::to_string(p));
  }
  if (mask.dim() != p) throw std::invalid_argument("degrees_of_freedom: mask dimension mismatch");
  return 2 * static_cast<long>(p) * q + static_cast<long>(mask.support_size()) -
         static_cast<long>(q) * q;
}

bool check_identifiability(Index p, Index q, const NoiseMask& mask) {
  return degrees_of_freedom(p, q, mask) < static_cast<long>(p) * p;
}

Loadings enforce_constraint(const Matrix& a_raw) {
  const Index q = a_raw.cols();
  if (q == 0) {
    return Loadings{Matrix(a_raw.rows(), 0), Matrix(a_raw.rows(), 0), RealVector(0)};
  }
  if (a_raw.rows() < q) {
    throw std::invalid_argument("enforce_constraint: loading matrix must be tall");
  }
  Eigen::JacobiSVD<Matrix> svd(a_raw, Eigen::ComputeThinU);
  const RealVector sv = svd.singularValues();
  if (!(sv(q - 1) > 1e-12 * sv(0))) {
    throw RankDeficientError("enforce_constraint: singular value " + std::to_string(sv(q - 1)) +
                                 " below tolerance " + std::to_string(1e-12 * sv(0)),
                             sv(q - 1));
  }
  Loadings ld;
  ld.U0 = svd.matrixU();
  ld.gamma = sv.cwiseProduct(sv);
  ld.A = ld.U0 * sv.cast<Complex>().asDiagonal();
  return ld;
}

ParameterVector pack(const FactorModel& model, const NoiseMask& mask) {
  ParameterVector theta;
  theta.a_part = Eigen::Map<const Vector>(model.A().data(), model.A().size());
  theta.psi_part = mask.fold(model.psi().mat());
  return theta;
}

FactorModel unpack(const ParameterVector& theta, Index p, Index q, const NoiseMask& mask) {
  if (theta.a_part.size() != p * q) {
    throw std::invalid_argument("unpack: loading part has wrong length");
  }
  Matrix a = Eigen::Map<const Matrix>(theta.a_part.data(), p, q);
  HermitianMatrix psi = HermitianMatrix::mirrored(mask.expand(theta.psi_part));
  return FactorModel::from_constrained(a, psi, mask);
}

}  // namespace efa
