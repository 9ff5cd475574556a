#pragma once

#include "efa/baselines.hpp"
#include "efa/reduced_gn.hpp"
#include "efa/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace efa {

/// Gradient-drop factor used in aggregate statistics: a run "reaches the
/// drop" once its gradient norm falls to 1e-6 of the initial one.
inline constexpr double kGradDropFactor = 1e6;

enum class MaskKind { Identity, Banded, File };

/// Mask recipe for an experiment. File masks carry the already-loaded
/// pattern (the harness does no I/O itself).
struct MaskSpec {
  MaskKind kind = MaskKind::Identity;
  Index bandwidth = 0;
  std::optional<NoiseMask> loaded;

  static MaskSpec identity();
  static MaskSpec banded(Index bandwidth);
  static MaskSpec file(NoiseMask mask);

  /// The concrete mask for dimension p.
  NoiseMask realize(Index p) const;
};

enum class SolverKind { Reduced, AltLs };

std::string to_string(SolverKind kind);

struct ExperimentSpec {
  Index p = 0;
  Index q = 0;
  /// Snapshot count; 0 means "fit the exact population covariance".
  long n = 0;
  MaskSpec mask;
  std::uint64_t model_seed = 0;
  std::uint64_t noise_seed = 0;
  std::vector<SolverKind> solvers{SolverKind::Reduced};
  SolverConfig cfg;
};

struct SolverOutcome {
  SolverKind solver = SolverKind::Reduced;
  ConvergenceTrace trace;
  double final_cost = 0.0;
  /// Largest principal angle between the true and estimated loading spans,
  /// in [0, pi/2].
  double subspace_error = 0.0;
};

struct TrialResult {
  ExperimentSpec spec;
  std::vector<SolverOutcome> outcomes;
};

struct SweepStats {
  struct PerSolver {
    SolverKind solver = SolverKind::Reduced;
    long runs = 0;
    long converged = 0;
    long failed = 0;
    long reached_drop = 0;
    /// Median iteration count to the kGradDropFactor gradient drop, over
    /// the runs that reached it; NaN when none did.
    double median_iters_to_drop = 0.0;
    double failure_rate = 0.0;
  };
  std::vector<PerSolver> per_solver;
};

struct SweepResult {
  std::vector<TrialResult> trials;
  SweepStats stats;
};

/// Draws a ground-truth model: loading entries i.i.d. circular complex
/// Gaussian with unit power, noise covariance of uniform [1,5] powers for
/// the identity mask, or a masked random Gram matrix (ridged to positive
/// semi-definite when the masking breaks it) otherwise. Bitwise
/// deterministic in the seed.
std::pair<FactorModel, NoiseMask> generate_model(Index p, Index q, const MaskSpec& mask_spec,
                                                 std::uint64_t seed);

/// y[n] = A s[n] + Psi^{1/2} w[n] with unit-power complex Gaussian sources
/// and noise. Psi^{1/2} comes from an eigendecomposition, or entrywise
/// square roots when Psi is diagonal. Bitwise deterministic in the seed.
std::vector<Vector> simulate_samples(const FactorModel& truth, long n, std::uint64_t seed);

/// Builds the truth and covariance for the spec, then runs every requested
/// solver from one shared starting point. A solver failure is captured in
/// that solver's trace; it never aborts the trial.
TrialResult run_experiment(const ExperimentSpec& spec);

/// Runs the specs on a bounded worker pool. Results are positionally
/// aligned with the input and identical for any parallelism level.
SweepResult sweep(const std::vector<ExperimentSpec>& specs, int parallelism);

/// First iteration whose gradient norm is at most the initial one divided
/// by factor; -1 when the trace never gets there.
long iterations_to_drop(const ConvergenceTrace& trace, double factor);

/// Largest principal angle between the column spans, in [0, pi/2]. Inputs
/// need not be orthonormal; they are orthonormalized internally.
double largest_principal_angle(const Matrix& a, const Matrix& b);

}  // namespace efa
