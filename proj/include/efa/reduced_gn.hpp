#pragma once

#include "efa/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace efa {

enum class StepMode { ExactCubic, Fixed };

/// Inner solver for the noise-update system (I - T) x = b. Conjugate
/// gradients is the default and exploits the positive definiteness of
/// I - T; Richardson is the plain fixed-point iteration x <- T x + b,
/// kept as an option for fidelity testing.
enum class InnerSolver { Cg, Richardson };

struct SolverConfig {
  long max_iterations = 500;
  /// Stop when gradient_norm <= grad_tol_rel * (gradient_norm at start).
  double grad_tol_rel = 1e-8;
  /// Stop when the relative cost decrease over the trailing five
  /// iterations falls to this level.
  double cost_stall_tol = 1e-14;
  /// Relative residual target for the inner solve.
  double inner_cg_tol = 1e-10;
  long inner_cg_max = 500;
  StepMode step_mode = StepMode::ExactCubic;
  /// Step length used when step_mode == Fixed.
  double fixed_mu = 1.0;
  InnerSolver inner_solver = InnerSolver::Cg;
};

enum class TerminalStatus { Converged, MaxIters, Stalled, Failed };

std::string to_string(TerminalStatus status);

struct TraceRecord {
  long iter = 0;
  double cost = 0.0;
  double grad_norm = 0.0;
  double mu = 0.0;
  long inner_iters = 0;
  double wall_ms = 0.0;
};

struct ConvergenceTrace {
  std::vector<TraceRecord> records;
  TerminalStatus status = TerminalStatus::MaxIters;
  /// Stop context; the failure reason when status == Failed.
  std::string message;
  std::vector<std::string> warnings;
};

struct FitResult {
  FactorModel model;
  ConvergenceTrace trace;
};

/// Called after the initial record and after every accepted iterate, with
/// the model the record describes. Lets callers audit per-iterate
/// invariants without re-running the solver.
using IterationObserver = std::function<void(const FactorModel&, const TraceRecord&)>;

/// One outer step together with its bookkeeping. The direction carries the
/// step length that was actually applied; a zero step returns the input
/// model unchanged.
struct StepOutcome {
  FactorModel model;
  DescentDirection direction;
  long inner_iters = 0;
  double cost_after = 0.0;
};

/// Action of T = S^H (P^T kron I + I kron P - P^T kron P) S on a vector
/// over the mask's free entries, with P = U0 U0^H. Expands to the Hermitian
/// matrix X, forms X P + P X - P X P at cost O(P^2 Q), and folds back;
/// nothing of size P^2 x P^2 is ever built.
Vector apply_T(const Vector& x, const Matrix& u0, const NoiseMask& mask);

/// Solves (I - T) x = S^H vec[Pperp (Rhat - Psi) Pperp] for the noise
/// update, matrix-free. Returns the Hermitian expansion of x and the inner
/// iteration count. Throws IllConditionedError (carrying the relative
/// residual) when the budget is exhausted; for identifiable instances I - T
/// is positive definite and this signals mask/subspace alignment trouble.
std::pair<HermitianMatrix, long> solve_delta_psi(const SampleCovariance& rhat,
                                                 const FactorModel& model, const NoiseMask& mask,
                                                 const SolverConfig& cfg);

/// Closed-form loading update for the residual E (already net of the noise
/// update): with Me = U0^H E U0, the in-span part is
/// U0 [Gtilde hadamard (Gamma Me + Me Gamma)] Gamma^{1/2} where
/// Gtilde_ij = (gamma_i + gamma_j)^{-2}, and the out-of-span part is
/// (I - U0 U0^H) E U0 Gamma^{-1/2}. No basis for the orthogonal complement
/// is ever materialized.
Matrix solve_delta_A(const HermitianMatrix& e, const Matrix& u0, const RealVector& gamma);

/// Exact step length: the cost along the ray is the real quartic
/// f(mu) = ||E0 - mu B - mu^2 C||_F^2 with B = dA A^H + A dA^H + dPsi and
/// C = dA dA^H; returns the critical point of f (a root of the cubic f')
/// with the smallest cost, so f(mu) <= f(0) always.
double line_search_mu(const HermitianMatrix& e0, const FactorModel& model,
                      const DescentDirection& direction);

/// One Gauss-Newton iteration: noise update, then loading update, then the
/// step length, then re-enforcement of the orthogonal-columns constraint.
/// Under StepMode::ExactCubic the returned cost never exceeds the input
/// cost (the step length is halved, down to zero, if rounding ever says
/// otherwise). Throws RankDeficientError when a loading power falls below
/// 1e-10 times the largest.
StepOutcome gn_step(const SampleCovariance& rhat, const FactorModel& model, const NoiseMask& mask,
                    const SolverConfig& cfg);

/// Deterministic starting point: Psi0 = half the masked part of Rhat; A0
/// from the top-Q eigenpairs of Rhat - Psi0 with eigenvalues clamped to
/// 1e-6 times the largest.
FactorModel initialize_model(const SampleCovariance& rhat, const NoiseMask& mask, Index q);

/// Full solve: iterates gn_step until the gradient target, a cost stall,
/// or the iteration budget. An unidentifiable parameter count is recorded
/// as a warning, not an error. Step failures are reported as
/// TerminalStatus::Failed with the offending iteration in the message.
FitResult fit(const SampleCovariance& rhat, const NoiseMask& mask, Index q,
              const SolverConfig& cfg = {}, const std::optional<FactorModel>& init = std::nullopt,
              const IterationObserver& observer = {});

/// Largest eigenvalue of T by power iteration on apply_T, stopping when
/// the Rayleigh quotient settles to rel_tol. Identifiable instances have
/// spectral radius strictly below one.
double spectral_radius_T(const Matrix& u0, const NoiseMask& mask, std::uint64_t seed = 0,
                         double rel_tol = 1e-9, long max_iters = 20000);

/// Smallest Ritz value of I - T from a Lanczos run (full
/// reorthogonalization) on apply_T; positive for identifiable instances.
double lanczos_min_ritz(const Matrix& u0, const NoiseMask& mask, long steps = 32,
                        std::uint64_t seed = 0);

}  // namespace efa
