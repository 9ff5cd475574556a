#pragma once

#include "efa/reduced_gn.hpp"
#include "efa/types.hpp"

namespace efa {

/// One sweep of the classical two-block coordinate descent: the noise
/// covariance is replaced by the masked part of Rhat - A A^H (the exact
/// minimizer over its block), then the loadings by the top-Q eigenpairs of
/// Rhat - Psi with negative eigenvalues clamped to zero. The output
/// satisfies the orthogonal-columns constraint by construction. Throws
/// RankDeficientError when fewer than Q usable eigenvalues survive the
/// clamp or a loading power falls below 1e-10 times the largest.
FactorModel alternating_ls_step(const SampleCovariance& rhat, const FactorModel& model,
                                const NoiseMask& mask);

/// Loop around alternating_ls_step with the same stopping rules, trace
/// schema, and failure reporting as fit, so traces from the two solvers
/// overlay directly.
FitResult fit_alternating(const SampleCovariance& rhat, const NoiseMask& mask, Index q,
                          const SolverConfig& cfg = {},
                          const std::optional<FactorModel>& init = std::nullopt,
                          const IterationObserver& observer = {});

}  // namespace efa
