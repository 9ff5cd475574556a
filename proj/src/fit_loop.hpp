#pragma once

#include "efa/reduced_gn.hpp"

#include <functional>

namespace efa::detail {

/// Outer driver shared by the reduced solver and the alternating baseline:
/// initial record, step loop, stopping rules, failure capture. step is
/// invoked on the current model and must return the next iterate with its
/// bookkeeping.
FitResult run_fit_loop(const SampleCovariance& rhat, const NoiseMask& mask, Index q,
                       const SolverConfig& cfg, const std::optional<FactorModel>& init,
                       const IterationObserver& observer,
                       const std::function<StepOutcome(const FactorModel&)>& step);

}  // namespace efa::detail
