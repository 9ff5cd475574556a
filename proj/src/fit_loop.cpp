#include "fit_loop.hpp"

#include "efa/model.hpp"

#include <chrono>
#include <limits>
#include <optional>

namespace efa::detail {

namespace {

// Trailing window for the cost-stall rule: 1e-14 relative over five
// iterations by default.
constexpr long kStallWindow = 5;

void validate_config(const SolverConfig& cfg) {
  if (cfg.max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
  if (!(cfg.grad_tol_rel > 0.0)) throw std::invalid_argument("grad_tol_rel must be positive");
  if (!(cfg.cost_stall_tol > 0.0)) throw std::invalid_argument("cost_stall_tol must be positive");
  if (!(cfg.inner_cg_tol > 0.0)) throw std::invalid_argument("inner_cg_tol must be positive");
  if (cfg.inner_cg_max < 1) throw std::invalid_argument("inner_cg_max must be at least 1");
}

}  // namespace

FitResult run_fit_loop(const SampleCovariance& rhat, const NoiseMask& mask, Index q,
                       const SolverConfig& cfg, const std::optional<FactorModel>& init,
                       const IterationObserver& observer,
                       const std::function<StepOutcome(const FactorModel&)>& step) {
  validate_config(cfg);
  const Index p = rhat.dim();
  if (q < 0 || q > p) throw std::invalid_argument("rank must satisfy 0 <= Q <= P");
  if (mask.dim() != p) throw std::invalid_argument("mask dimension does not match covariance");
  if (init && (init->dim() != p || init->rank() != q)) {
    throw std::invalid_argument("initial model dimensions do not match the problem");
  }

  ConvergenceTrace trace;
  if (!check_identifiability(p, q, mask)) {
    trace.warnings.push_back("parameter count " +
                             std::to_string(degrees_of_freedom(p, q, mask)) +
                             " reaches P^2 = " + std::to_string(p * p) +
                             ": instance fails the identifiability count");
  }

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const auto elapsed_ms = [&start] {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  };

  FactorModel model = init ? *init : initialize_model(rhat, mask, q);

  double current_cost = cost(model, rhat);
  double grad = gradient_norm(model, rhat, mask);
  const double grad0 = grad;
  trace.records.push_back({0, current_cost, grad, 0.0, 0, elapsed_ms()});
  if (observer) observer(model, trace.records.back());

  if (grad0 == 0.0) {
    trace.status = TerminalStatus::Converged;
    trace.message = "gradient exactly zero at the starting point";
    return {std::move(model), std::move(trace)};
  }
  const double grad_target = cfg.grad_tol_rel * grad0;

  trace.status = TerminalStatus::MaxIters;
  trace.message = "iteration budget exhausted";
  for (long k = 1; k <= cfg.max_iterations; ++k) {
    std::optional<StepOutcome> out;
    try {
      out.emplace(step(model));
    } catch (const RankDeficientError& e) {
      trace.status = TerminalStatus::Failed;
      trace.message = "iteration " + std::to_string(k) + ": " + e.what();
      return {std::move(model), std::move(trace)};
    } catch (const IllConditionedError& e) {
      trace.status = TerminalStatus::Failed;
      trace.message = "iteration " + std::to_string(k) + ": " + e.what();
      return {std::move(model), std::move(trace)};
    }

    model = out->model;
    current_cost = out->cost_after;
    grad = gradient_norm(model, rhat, mask);
    trace.records.push_back({k, current_cost, grad, out->direction.mu, out->inner_iters,
                             elapsed_ms()});
    if (observer) observer(model, trace.records.back());

    if (grad <= grad_target) {
      trace.status = TerminalStatus::Converged;
      trace.message = "relative gradient tolerance reached";
      break;
    }
    if (k >= kStallWindow) {
      const double before =
          trace.records[trace.records.size() - 1 - kStallWindow].cost;
      const double floor_scale = std::max(before, std::numeric_limits<double>::min());
      if (before - current_cost <= cfg.cost_stall_tol * floor_scale) {
        trace.status = TerminalStatus::Stalled;
        trace.message = "cost decrease stalled over the trailing window";
        break;
      }
    }
  }
  return {std::move(model), std::move(trace)};
}

}  // namespace efa::detail
