#include "efa/reduced_gn.hpp"

#include "efa/model.hpp"
#include "efa/rng.hpp"
#include "fit_loop.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace efa {

namespace {

// Loading powers below this fraction of the largest abort the iteration
// rather than silently dropping rank.
constexpr double kGammaFloor = 1e-10;

// RNG stream for probe vectors (streams 0..3 belong to the simulation
// layer).
constexpr std::uint64_t kProbeStream = 4;

// Real inner product on the space of masked Hermitian matrices in folded
// form: diagonal entries count once, strictly-lower entries twice (they
// stand for a conjugate pair). T and I - T are self-adjoint in it.
double folded_dot(const Vector& x, const Vector& y, const NoiseMask& mask) {
  const auto& free = mask.free_indices();
  double sum = 0.0;
  for (std::size_t k = 0; k < free.size(); ++k) {
    const Index i = static_cast<Index>(k);
    const double term = std::real(std::conj(x(i)) * y(i));
    sum += free[k].first == free[k].second ? term : 2.0 * term;
  }
  return sum;
}

// Seeded Hermitian-structured probe: real on the diagonal, circular complex
// below it.
Vector random_folded(const NoiseMask& mask, std::uint64_t seed) {
  CounterRng rng(seed, kProbeStream);
  const auto& free = mask.free_indices();
  Vector x(static_cast<Index>(free.size()));
  for (std::size_t k = 0; k < free.size(); ++k) {
    x(static_cast<Index>(k)) =
        free[k].first == free[k].second ? Complex(rng.normal(), 0.0) : rng.complex_normal();
  }
  return x;
}

double frob_inner(const Matrix& x, const Matrix& y) {
  return x.conjugate().cwiseProduct(y).sum().real();
}

// All real roots of a3 u^3 + a2 u^2 + a1 u + a0 with a3 != 0, by the
// closed-form depressed-cubic solution (trigonometric branch when all
// three roots are real).
std::vector<double> cubic_real_roots(double a3, double a2, double a1, double a0) {
  const double b = a2 / a3;
  const double c = a1 / a3;
  const double d = a0 / a3;
  const double shift = b / 3.0;
  const double p = c - b * b / 3.0;
  const double q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
  const double disc = 0.25 * q * q + p * p * p / 27.0;

  std::vector<double> roots;
  if (disc > 0.0) {
    const double s = std::sqrt(disc);
    roots.push_back(std::cbrt(-0.5 * q + s) + std::cbrt(-0.5 * q - s) - shift);
  } else {
    const double r = std::sqrt(std::max(-p / 3.0, 0.0));
    if (r == 0.0) {
      roots.push_back(-shift);
    } else {
      const double arg = std::clamp(3.0 * q / (2.0 * p * r), -1.0, 1.0);
      const double theta = std::acos(arg) / 3.0;
      for (int k = 0; k < 3; ++k) {
        roots.push_back(2.0 * r * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0) - shift);
      }
    }
  }
  return roots;
}

// Pperp D Pperp for Hermitian D, with Pperp = I - U0 U0^H, at cost O(P^2 Q).
Matrix project_complement(const Matrix& d, const Matrix& u0) {
  if (u0.cols() == 0) return d;
  const Matrix w = u0.adjoint() * d;
  const Matrix pd = u0 * w;
  return d - pd - pd.adjoint() + u0 * ((w * u0) * u0.adjoint());
}

}  // namespace

std::string to_string(TerminalStatus status) {
  switch (status) {
    case TerminalStatus::Converged: return "Converged";
    case TerminalStatus::MaxIters: return "MaxIters";
    case TerminalStatus::Stalled: return "Stalled";
    case TerminalStatus::Failed: return "Failed";
  }
  return "Unknown";
}

Vector apply_T(const Vector& x, const Matrix& u0, const NoiseMask& mask) {
  if (x.size() != static_cast<Index>(mask.free_indices().size())) {
    throw std::invalid_argument("apply_T: folded vector length does not match mask");
  }
  if (u0.rows() != mask.dim()) {
    throw std::invalid_argument("apply_T: projector dimension does not match mask");
  }
  if (u0.cols() == 0) return Vector::Zero(x.size());

  const Matrix full = mask.expand(x);
  const Matrix w = u0.adjoint() * full;
  const Matrix px = u0 * w;
  // X P + P X - P X P; X Hermitian makes X P the adjoint of P X.
  const Matrix y = px + px.adjoint() - u0 * ((w * u0) * u0.adjoint());
  return mask.fold(y);
}

std::pair<HermitianMatrix, long> solve_delta_psi(const SampleCovariance& rhat,
                                                 const FactorModel& model, const NoiseMask& mask,
                                                 const SolverConfig& cfg) {
  const Index p = model.dim();
  if (rhat.dim() != p || mask.dim() != p) {
    throw std::invalid_argument("solve_delta_psi: dimension mismatch");
  }
  const Matrix& u0 = model.U0();
  const Matrix diff = rhat.matrix.mat() - model.psi().mat();
  const Vector b = mask.fold(project_complement(diff, u0));

  const double bnorm = std::sqrt(folded_dot(b, b, mask));
  if (bnorm == 0.0) return {HermitianMatrix(p), 0};
  const double target = cfg.inner_cg_tol * bnorm;

  Vector x = Vector::Zero(b.size());
  if (cfg.inner_solver == InnerSolver::Richardson) {
    for (long it = 1; it <= cfg.inner_cg_max; ++it) {
      const Vector next = apply_T(x, u0, mask) + b;
      const Vector resid = next - x;
      x = next;
      if (std::sqrt(folded_dot(resid, resid, mask)) <= target) {
        return {HermitianMatrix::mirrored(mask.expand(x)), it};
      }
    }
    const Vector resid = b - x + apply_T(x, u0, mask);
    throw IllConditionedError("noise-update fixed-point iteration exhausted its budget",
                              std::sqrt(folded_dot(resid, resid, mask)) / bnorm);
  }

  Vector r = b;
  Vector dir = r;
  double rs = folded_dot(r, r, mask);
  for (long it = 1; it <= cfg.inner_cg_max; ++it) {
    const Vector ad = dir - apply_T(dir, u0, mask);
    const double curvature = folded_dot(dir, ad, mask);
    if (!(curvature > 0.0)) {
      throw IllConditionedError("noise-update system is not positive definite along a search direction",
                                std::sqrt(rs) / bnorm);
    }
    const double alpha = rs / curvature;
    x += alpha * dir;
    r -= alpha * ad;
    const double rs_next = folded_dot(r, r, mask);
    if (std::sqrt(rs_next) <= target) {
      return {HermitianMatrix::mirrored(mask.expand(x)), it};
    }
    dir = r + (rs_next / rs) * dir;
    rs = rs_next;
  }
  throw IllConditionedError("noise-update conjugate gradients exhausted its budget",
                            std::sqrt(rs) / bnorm);
}

Matrix solve_delta_A(const HermitianMatrix& e, const Matrix& u0, const RealVector& gamma) {
  const Index p = u0.rows();
  const Index q = u0.cols();
  if (e.dim() != p) throw std::invalid_argument("solve_delta_A: dimension mismatch");
  if (gamma.size() != q) throw std::invalid_argument("solve_delta_A: gamma length mismatch");
  if (q == 0) return Matrix(p, 0);
  const double gmax = gamma.maxCoeff();
  if (!(gamma.minCoeff() > 1e-12 * gmax)) {
    throw RankDeficientError("solve_delta_A: loading power below tolerance", gamma.minCoeff());
  }

  const Matrix w = e.mat() * u0;
  const Matrix me = u0.adjoint() * w;
  // Gtilde hadamard (Gamma Me + Me Gamma): the weights (gamma_i+gamma_j)^-2
  // against the sum (gamma_i+gamma_j) Me_ij collapse to Me_ij/(gamma_i+gamma_j).
  Matrix t(q, q);
  for (Index j = 0; j < q; ++j) {
    const double sj = std::sqrt(gamma(j));
    for (Index i = 0; i < q; ++i) {
      t(i, j) = me(i, j) / (gamma(i) + gamma(j)) * sj;
    }
  }
  const Matrix out_of_span =
      (w - u0 * me) * gamma.cwiseSqrt().cwiseInverse().cast<Complex>().asDiagonal();
  return u0 * t + out_of_span;
}

double line_search_mu(const HermitianMatrix& e0, const FactorModel& model,
                      const DescentDirection& direction) {
  if (direction.delta_psi.dim() != model.dim() || direction.delta_A.rows() != model.dim() ||
      direction.delta_A.cols() != model.rank()) {
    throw std::invalid_argument("line_search_mu: direction does not match model");
  }
  Matrix bm = direction.delta_psi.mat();
  if (model.rank() > 0) {
    const Matrix cross = direction.delta_A * model.A().adjoint();
    bm += cross + cross.adjoint();
  }
  const Matrix cm = direction.delta_A * direction.delta_A.adjoint();

  const double f0 = e0.squared_norm();
  const double b1 = frob_inner(e0.mat(), bm);
  const double b2 = bm.squaredNorm();
  const double c1 = frob_inner(e0.mat(), cm);
  const double bc = frob_inner(bm, cm);
  const double c2 = cm.squaredNorm();

  // f(mu) = f0 - 2 b1 mu + (b2 - 2 c1) mu^2 + 2 bc mu^3 + c2 mu^4.
  const auto f = [&](double mu) {
    return f0 + mu * (-2.0 * b1 + mu * ((b2 - 2.0 * c1) + mu * (2.0 * bc + mu * c2)));
  };

  if (c2 == 0.0) {
    if (b2 == 0.0) return 0.0;
    const double mu = b1 / b2;
    return f(mu) <= f0 ? mu : 0.0;
  }

  // f'(mu) = 2 (2 c2 mu^3 + 3 bc mu^2 + (b2 - 2 c1) mu - b1).
  const double g3 = 2.0 * c2;
  const double g2 = 3.0 * bc;
  const double g1 = b2 - 2.0 * c1;
  const double g0 = -b1;
  std::vector<double> roots = cubic_real_roots(g3, g2, g1, g0);

  double best_mu = 0.0;
  double best_f = f0;
  for (double root : roots) {
    // A couple of Newton corrections absorb the roundoff of the closed form.
    for (int it = 0; it < 3; ++it) {
      const double val = ((g3 * root + g2) * root + g1) * root + g0;
      const double slope = (3.0 * g3 * root + 2.0 * g2) * root + g1;
      if (slope == 0.0) break;
      const double refined = root - val / slope;
      if (!std::isfinite(refined)) break;
      root = refined;
    }
    const double fr = f(root);
    if (fr < best_f) {
      best_f = fr;
      best_mu = root;
    }
  }
  return best_mu;
}

StepOutcome gn_step(const SampleCovariance& rhat, const FactorModel& model, const NoiseMask& mask,
                    const SolverConfig& cfg) {
  auto [delta_psi, inner_iters] = solve_delta_psi(rhat, model, mask, cfg);
  const HermitianMatrix e0 = residual(model, rhat);

  Matrix delta_a(model.dim(), model.rank());
  if (model.rank() > 0) {
    const HermitianMatrix e = e0 - delta_psi;
    delta_a = solve_delta_A(e, model.U0(), model.gamma());
  }
  DescentDirection dir{std::move(delta_a), std::move(delta_psi), 0.0};

  double mu =
      cfg.step_mode == StepMode::Fixed ? cfg.fixed_mu : line_search_mu(e0, model, dir);
  const double cost_before = e0.squared_norm();

  const auto advance = [&](double step) {
    FactorModel next = FactorModel::from_loadings(model.A() + step * dir.delta_A,
                                                  model.psi() + step * dir.delta_psi, mask);
    if (next.rank() > 0) {
      const RealVector& g = next.gamma();
      if (g.minCoeff() < kGammaFloor * g.maxCoeff()) {
        throw RankDeficientError("loading power collapsed during the update", g.minCoeff());
      }
    }
    return next;
  };

  const bool zero_direction = dir.delta_A.norm() == 0.0 && dir.delta_psi.norm() == 0.0;
  if (mu == 0.0 || zero_direction) {
    dir.mu = 0.0;
    return {model, std::move(dir), inner_iters, cost_before};
  }

  FactorModel next = advance(mu);
  double cost_after = cost(next, rhat);
  if (cfg.step_mode == StepMode::ExactCubic) {
    // The quartic guarantees descent in exact arithmetic; halve away any
    // rounding-level increase and fall back to a null step if none helps.
    int halvings = 0;
    while (cost_after > cost_before && halvings < 60) {
      mu *= 0.5;
      ++halvings;
      next = advance(mu);
      cost_after = cost(next, rhat);
    }
    if (cost_after > cost_before) {
      dir.mu = 0.0;
      return {model, std::move(dir), inner_iters, cost_before};
    }
  }
  dir.mu = mu;
  return {std::move(next), std::move(dir), inner_iters, cost_after};
}

FactorModel initialize_model(const SampleCovariance& rhat, const NoiseMask& mask, Index q) {
  const Index p = rhat.dim();
  if (q < 0 || q > p) throw std::invalid_argument("rank must satisfy 0 <= Q <= P");
  if (mask.dim() != p) throw std::invalid_argument("mask dimension does not match covariance");

  const HermitianMatrix psi0 = 0.5 * mask.project(rhat.matrix);
  if (q == 0) return FactorModel::from_constrained(Matrix(p, 0), psi0, mask);

  const HermitianMatrix work = rhat.matrix - psi0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(work.mat());
  const RealVector lam = eig.eigenvalues();  // ascending
  const double lam_max = lam(p - 1);
  if (!(lam_max > 0.0)) {
    throw RankDeficientError("initialization: no positive eigenvalue to seed the loadings",
                             lam_max);
  }
  const double floor_value = 1e-6 * lam_max;
  Matrix a0(p, q);
  for (Index k = 0; k < q; ++k) {
    const Index source = p - 1 - k;
    a0.col(k) = eig.eigenvectors().col(source) * std::sqrt(std::max(lam(source), floor_value));
  }
  return FactorModel::from_loadings(a0, psi0, mask);
}

FitResult fit(const SampleCovariance& rhat, const NoiseMask& mask, Index q,
              const SolverConfig& cfg, const std::optional<FactorModel>& init,
              const IterationObserver& observer) {
  return detail::run_fit_loop(rhat, mask, q, cfg, init, observer,
                              [&](const FactorModel& model) {
                                return gn_step(rhat, model, mask, cfg);
                              });
}

double spectral_radius_T(const Matrix& u0, const NoiseMask& mask, std::uint64_t seed,
                         double rel_tol, long max_iters) {
  Vector x = random_folded(mask, seed);
  const double xnorm = std::sqrt(folded_dot(x, x, mask));
  if (xnorm == 0.0) return 0.0;
  x /= xnorm;

  double rho = 0.0;
  for (long it = 0; it < max_iters; ++it) {
    const Vector tx = apply_T(x, u0, mask);
    const double rayleigh = folded_dot(x, tx, mask);
    const double tnorm = std::sqrt(folded_dot(tx, tx, mask));
    if (tnorm == 0.0) return 0.0;
    x = tx / tnorm;
    if (it > 0 && std::abs(rayleigh - rho) <= rel_tol * std::max(rayleigh, 1e-300)) {
      return rayleigh;
    }
    rho = rayleigh;
  }
  return rho;
}

double lanczos_min_ritz(const Matrix& u0, const NoiseMask& mask, long steps,
                        std::uint64_t seed) {
  // Real dimension of the folded space: one per diagonal cell, two per
  // strictly-lower cell, which is exactly the support size.
  const long dim = static_cast<long>(mask.support_size());
  const long krylov = std::min(steps, dim);
  if (krylov < 1) throw std::invalid_argument("lanczos_min_ritz: empty mask");

  std::vector<Vector> basis;
  std::vector<double> alpha;
  std::vector<double> beta;

  Vector v = random_folded(mask, seed);
  v /= std::sqrt(folded_dot(v, v, mask));
  basis.push_back(v);

  for (long j = 0; j < krylov; ++j) {
    Vector w = basis.back() - apply_T(basis.back(), u0, mask);
    const double a = folded_dot(basis.back(), w, mask);
    alpha.push_back(a);
    w -= a * basis.back();
    if (j > 0) w -= beta.back() * basis[basis.size() - 2];
    // Full reorthogonalization; the spaces are small enough that the cost
    // is irrelevant and it keeps the Ritz values trustworthy.
    for (const Vector& prev : basis) {
      w -= folded_dot(prev, w, mask) * prev;
    }
    const double b = std::sqrt(std::max(folded_dot(w, w, mask), 0.0));
    if (j + 1 == krylov || b <= 1e-13) break;
    beta.push_back(b);
    basis.push_back(w / b);
  }

  const long k = static_cast<long>(alpha.size());
  RealMatrix tri = RealMatrix::Zero(k, k);
  for (long j = 0; j < k; ++j) {
    tri(j, j) = alpha[static_cast<std::size_t>(j)];
    if (j + 1 < k) {
      tri(j, j + 1) = beta[static_cast<std::size_t>(j)];
      tri(j + 1, j) = beta[static_cast<std::size_t>(j)];
    }
  }
  Eigen::SelfAdjointEigenSolver<RealMatrix> eig(tri);
  return eig.eigenvalues()(0);
}

}  // namespace efa
