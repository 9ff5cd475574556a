#include "efa/baselines.hpp"

#include "efa/model.hpp"
#include "fit_loop.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace efa {

namespace {

constexpr double kGammaFloor = 1e-10;

}  // namespace

FactorModel alternating_ls_step(const SampleCovariance& rhat, const FactorModel& model,
                                const NoiseMask& mask) {
  const Index p = model.dim();
  const Index q = model.rank();
  if (rhat.dim() != p || mask.dim() != p) {
    throw std::invalid_argument("alternating_ls_step: dimension mismatch");
  }

  const HermitianMatrix psi = mask.project(rhat.matrix - model.signal());
  if (q == 0) return FactorModel::from_constrained(Matrix(p, 0), psi, mask);

  const HermitianMatrix work = rhat.matrix - psi;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(work.mat());
  const RealVector lam = eig.eigenvalues();  // ascending

  const double lam_top = std::max(lam(p - 1), 0.0);
  const double lam_q = lam(p - q);
  if (!(lam_q > 0.0)) {
    throw RankDeficientError("alternating step: fewer than Q positive eigenvalues", lam_q);
  }
  if (lam_q < kGammaFloor * lam_top) {
    throw RankDeficientError("alternating step: loading power collapsed", lam_q);
  }

  Matrix a(p, q);
  for (Index k = 0; k < q; ++k) {
    const Index source = p - 1 - k;
    a.col(k) = eig.eigenvectors().col(source) * std::sqrt(lam(source));
  }
  return FactorModel::from_constrained(a, psi, mask);
}

FitResult fit_alternating(const SampleCovariance& rhat, const NoiseMask& mask, Index q,
                          const SolverConfig& cfg, const std::optional<FactorModel>& init,
                          const IterationObserver& observer) {
  return detail::run_fit_loop(
      rhat, mask, q, cfg, init, observer, [&](const FactorModel& model) {
        FactorModel next = alternating_ls_step(rhat, model, mask);
        DescentDirection dir{next.A() - model.A(), next.psi() - model.psi(), 1.0};
        const double cost_after = cost(next, rhat);
        return StepOutcome{std::move(next), std::move(dir), 0, cost_after};
      });
}

}  // namespace efa
