#include "efa/harness.hpp"

#include "efa/model.hpp"
#include "efa/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace efa {

namespace {

// RNG streams; apply_T probes use stream 4 (see reduced_gn.cpp).
constexpr std::uint64_t kLoadingStream = 0;
constexpr std::uint64_t kNoiseCovStream = 1;
constexpr std::uint64_t kSourceStream = 2;
constexpr std::uint64_t kNoiseStream = 3;

bool is_diagonal(const HermitianMatrix& psi) {
  for (Index j = 0; j < psi.dim(); ++j) {
    for (Index i = j + 1; i < psi.dim(); ++i) {
      if (psi(i, j) != Complex(0.0, 0.0)) return false;
    }
  }
  return true;
}

// Psi^{1/2} as a dense factor; entrywise on the diagonal fast path.
Matrix noise_sqrt(const HermitianMatrix& psi) {
  const Index p = psi.dim();
  if (is_diagonal(psi)) {
    Matrix root = Matrix::Zero(p, p);
    for (Index i = 0; i < p; ++i) {
      const double d = psi(i, i).real();
      if (d < 0.0) {
        throw std::runtime_error("simulate_samples: noise covariance is not PSD "
                                 "(diagonal entry " + std::to_string(d) + ")");
      }
      root(i, i) = std::sqrt(d);
    }
    return root;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(psi.mat());
  const RealVector lam = eig.eigenvalues();
  const double scale = std::max(std::abs(lam(p - 1)), 1.0);
  if (lam(0) < -1e-12 * scale) {
    throw std::runtime_error("simulate_samples: noise covariance is not PSD "
                             "(smallest eigenvalue " + std::to_string(lam(0)) + ")");
  }
  return eig.eigenvectors() *
         lam.cwiseMax(0.0).cwiseSqrt().cast<Complex>().asDiagonal() *
         eig.eigenvectors().adjoint();
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace

MaskSpec MaskSpec::identity() { return MaskSpec{}; }

MaskSpec MaskSpec::banded(Index bandwidth) {
  MaskSpec spec;
  spec.kind = MaskKind::Banded;
  spec.bandwidth = bandwidth;
  return spec;
}

MaskSpec MaskSpec::file(NoiseMask mask) {
  MaskSpec spec;
  spec.kind = MaskKind::File;
  spec.loaded = std::move(mask);
  return spec;
}

NoiseMask MaskSpec::realize(Index p) const {
  switch (kind) {
    case MaskKind::Identity:
      return NoiseMask::identity(p);
    case MaskKind::Banded:
      return NoiseMask::banded(p, bandwidth);
    case MaskKind::File:
      if (!loaded) throw std::invalid_argument("MaskSpec: file mask was never loaded");
      if (loaded->dim() != p) {
        throw std::invalid_argument("MaskSpec: loaded mask has dimension " +
                                    std::to_string(loaded->dim()) + ", experiment needs " +
                                    std::to_string(p));
      }
      return *loaded;
  }
  throw std::logic_error("MaskSpec: unknown kind");
}

std::string to_string(SolverKind kind) {
  return kind == SolverKind::Reduced ? "reduced" : "altls";
}

std::pair<FactorModel, NoiseMask> generate_model(Index p, Index q, const MaskSpec& mask_spec,
                                                 std::uint64_t seed) {
  if (p < 1 || q < 0 || q > p) throw std::invalid_argument("generate_model: invalid dimensions");
  NoiseMask mask = mask_spec.realize(p);

  CounterRng loading_rng(seed, kLoadingStream);
  Matrix a(p, q);
  for (Index j = 0; j < q; ++j) {
    for (Index i = 0; i < p; ++i) a(i, j) = loading_rng.complex_normal();
  }

  CounterRng noise_rng(seed, kNoiseCovStream);
  HermitianMatrix psi(p);
  if (mask.is_identity()) {
    Matrix d = Matrix::Zero(p, p);
    for (Index i = 0; i < p; ++i) d(i, i) = noise_rng.uniform(1.0, 5.0);
    psi = HermitianMatrix::mirrored(d);
  } else {
    // Masked random Gram matrix; masking can break positive
    // semi-definiteness, so ridge the diagonal just past the deficit.
    Matrix l = Matrix::Zero(p, p);
    for (Index j = 0; j < p; ++j) {
      for (Index i = j; i < p; ++i) {
        if (mask.contains(i, j)) l(i, j) = noise_rng.complex_normal();
      }
    }
    psi = mask.project(HermitianMatrix::mirrored(l * l.adjoint()));
    const double lam_min = psi.min_eigenvalue();
    if (lam_min < 0.0) {
      Matrix ridged = psi.mat();
      ridged.diagonal().array() += Complex(1.1 * (-lam_min), 0.0);
      psi = HermitianMatrix::mirrored(ridged);
    }
  }

  return {FactorModel::from_loadings(a, psi, mask), std::move(mask)};
}

std::vector<Vector> simulate_samples(const FactorModel& truth, long n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("simulate_samples: snapshot count must be positive");
  const Index p = truth.dim();
  const Index q = truth.rank();
  const Matrix root = noise_sqrt(truth.psi());

  CounterRng source_rng(seed, kSourceStream);
  CounterRng noise_rng(seed, kNoiseStream);
  std::vector<Vector> samples;
  samples.reserve(static_cast<std::size_t>(n));
  for (long k = 0; k < n; ++k) {
    Vector s(q);
    for (Index i = 0; i < q; ++i) s(i) = source_rng.complex_normal();
    Vector w(p);
    for (Index i = 0; i < p; ++i) w(i) = noise_rng.complex_normal();
    samples.push_back(truth.A() * s + root * w);
  }
  return samples;
}

TrialResult run_experiment(const ExperimentSpec& spec) {
  auto [truth, mask] = generate_model(spec.p, spec.q, spec.mask, spec.model_seed);

  SampleCovariance rhat;
  if (spec.n == 0) {
    rhat = SampleCovariance{truth.covariance(), 0};
  } else {
    rhat = sample_covariance(simulate_samples(truth, spec.n, spec.noise_seed));
  }

  TrialResult result;
  result.spec = spec;
  std::optional<FactorModel> init;
  std::string init_failure;
  try {
    init = initialize_model(rhat, mask, spec.q);
  } catch (const std::exception& e) {
    init_failure = std::string("initialization: ") + e.what();
  }
  for (SolverKind kind : spec.solvers) {
    SolverOutcome outcome;
    outcome.solver = kind;
    if (!init) {
      outcome.trace.status = TerminalStatus::Failed;
      outcome.trace.message = init_failure;
      outcome.final_cost = std::numeric_limits<double>::quiet_NaN();
      outcome.subspace_error = std::numeric_limits<double>::quiet_NaN();
      result.outcomes.push_back(std::move(outcome));
      continue;
    }
    try {
      FitResult fitted = kind == SolverKind::Reduced
                             ? fit(rhat, mask, spec.q, spec.cfg, init)
                             : fit_alternating(rhat, mask, spec.q, spec.cfg, init);
      outcome.trace = std::move(fitted.trace);
      outcome.final_cost = outcome.trace.records.back().cost;
      outcome.subspace_error = spec.q > 0
                                   ? largest_principal_angle(truth.U0(), fitted.model.U0())
                                   : 0.0;
    } catch (const std::exception& e) {
      outcome.trace.status = TerminalStatus::Failed;
      outcome.trace.message = e.what();
      outcome.final_cost = std::numeric_limits<double>::quiet_NaN();
      outcome.subspace_error = std::numeric_limits<double>::quiet_NaN();
    }
    result.outcomes.push_back(std::move(outcome));
  }
  return result;
}

SweepResult sweep(const std::vector<ExperimentSpec>& specs, int parallelism) {
  SweepResult result;
  result.trials.resize(specs.size());
  if (!specs.empty()) {
    const int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(specs.size())));
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= specs.size()) return;
        result.trials[k] = run_experiment(specs[k]);
      }
    };
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(workers));
      for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
  }

  // Aggregate per solver kind, in first-seen order.
  std::vector<SolverKind> order;
  std::vector<std::vector<double>> drops;
  for (const TrialResult& trial : result.trials) {
    for (const SolverOutcome& outcome : trial.outcomes) {
      std::size_t slot = order.size();
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i] == outcome.solver) slot = i;
      }
      if (slot == order.size()) {
        order.push_back(outcome.solver);
        result.stats.per_solver.push_back({outcome.solver, 0, 0, 0, 0, 0.0, 0.0});
        drops.emplace_back();
      }
      SweepStats::PerSolver& agg = result.stats.per_solver[slot];
      agg.runs += 1;
      if (outcome.trace.status == TerminalStatus::Converged) agg.converged += 1;
      if (outcome.trace.status == TerminalStatus::Failed) agg.failed += 1;
      const long drop = iterations_to_drop(outcome.trace, kGradDropFactor);
      if (drop >= 0) {
        agg.reached_drop += 1;
        drops[slot].push_back(static_cast<double>(drop));
      }
    }
  }
  for (std::size_t i = 0; i < result.stats.per_solver.size(); ++i) {
    SweepStats::PerSolver& agg = result.stats.per_solver[i];
    agg.median_iters_to_drop = median(drops[i]);
    agg.failure_rate = agg.runs > 0 ? static_cast<double>(agg.failed) / agg.runs : 0.0;
  }
  return result;
}

long iterations_to_drop(const ConvergenceTrace& trace, double factor) {
  if (trace.records.empty()) return -1;
  const double target = trace.records.front().grad_norm / factor;
  for (const TraceRecord& rec : trace.records) {
    if (rec.grad_norm <= target) return rec.iter;
  }
  return -1;
}

double largest_principal_angle(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("largest_principal_angle: shape mismatch");
  }
  const Index q = a.cols();
  if (q == 0) return 0.0;
  const Index p = a.rows();
  Eigen::HouseholderQR<Matrix> qra(a);
  Eigen::HouseholderQR<Matrix> qrb(b);
  const Matrix ua = qra.householderQ() * Matrix::Identity(p, q);
  const Matrix ub = qrb.householderQ() * Matrix::Identity(p, q);
  Eigen::JacobiSVD<Matrix> svd(ua.adjoint() * ub);
  const double sigma_min = std::clamp(svd.singularValues()(q - 1), 0.0, 1.0);
  return std::acos(sigma_min);
}

}  // namespace efa
