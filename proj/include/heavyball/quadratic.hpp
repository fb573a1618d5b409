#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "heavyball/momentum.hpp"
#include "heavyball/residual.hpp"
#include "heavyball/spectral.hpp"

namespace heavyball {

/// min_w 1/2 w' Gamma w + b' w with Gamma symmetric positive definite.
struct QuadraticProblem {
  Matrix gamma;
  Vector b;
  Vector w_star;  // unique minimizer, -Gamma^{-1} b
  SpectrumSummary spectrum;

  Objective objective() const;
};

QuadraticProblem make_quadratic(const std::vector<double>& eigenvalues, std::uint64_t rotation_seed,
                                const Vector& b);
QuadraticProblem make_quadratic(const std::vector<double>& eigenvalues, std::uint64_t rotation_seed,
                                std::uint64_t b_seed);

struct Schedule {
  HyperParams hp;
  BoundConstants bounds;
  double envelope_rate = 0.0;
  double envelope_multiplier = 0.0;
};

/// eta = 1/alpha, beta = (1 - 1/(2 sqrt(kappa)))^2; envelope rate
/// 1 - 1/(2 sqrt(kappa)) with multiplier 4 sqrt(kappa).
Schedule stc_schedule(const SpectrumSummary& spectrum);

/// eta = 4/(sqrt(mu)+sqrt(alpha))^2, beta = boundary + margin (strictly above
/// the admissibility boundary so C0 stays finite).
HyperParams polyak_schedule(const SpectrumSummary& spectrum, double beta_margin);

struct QuadraticRunReport {
  CertifyReport cert;
  ResidualTrace trace;
  double kappa = 0.0;
  double c0 = 0.0;
  std::optional<int> iters_to_1e8;  // first t with ||w_t - w*|| <= 1e-8
};

/// Runs momentum on the quadratic and certifies the stacked residual against
/// (sqrt(beta))^t C0 ||initial stack|| at every iteration. The recorded
/// perturbation phi_t is identically zero for this realization.
QuadraticRunReport certify_quadratic_run(const QuadraticProblem& problem, const HyperParams& hp,
                                         const Vector& w0, int T);

/// First t <= t_max with ||w_t - w*|| <= tol, or nullopt.
std::optional<int> iterations_to_residual(const Objective& obj, const Vector& w_star,
                                          const HyperParams& hp, const Vector& w0, double tol,
                                          int t_max);

/// Smooth strongly convex test function
///   f(w) = 1/2 w' Gamma w + c * sum_i log cosh(w_i),
/// with Hessian range inside [mu, alpha], Hessian-Lipschitz constant
/// 0.77 c <= alpha and minimizer w* = 0 (gradient vanishes there by
/// construction; a damped-Newton polish confirms it to 1e-13).
struct SmoothStronglyConvexProblem {
  Matrix gamma;
  double c = 0.0;
  double mu = 0.0;
  double alpha = 0.0;
  double hessian_lipschitz = 0.0;
  Vector w_star;

  double kappa() const { return alpha / mu; }
  Objective objective() const;
  Matrix hessian(const Vector& w) const;
};

SmoothStronglyConvexProblem make_f2_testfn(double mu, double alpha, int dim,
                                           std::uint64_t seed = 0);

struct LocalRunReport {
  CertifyReport cert;
  ResidualTrace trace;
  double kappa = 0.0;
  double required_radius = 0.0;  // 1/(683 kappa^{3/2})
  bool radius_feasible = true;
};

/// Theorem-STC local certification: requires the initial stacked distance
/// inside 1/(683 kappa^{3/2}); runs eta = 1/alpha, beta = (1-1/(2 sqrt k))^2
/// and asserts the (1 - 1/(4 sqrt k))^t * 8 sqrt(k) envelope per iteration.
LocalRunReport certify_local_run(const SmoothStronglyConvexProblem& problem, const Vector& w0,
                                 int T);

}  // namespace heavyball
