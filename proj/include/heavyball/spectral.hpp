#pragma once

#include <optional>
#include <string>
#include <vector>

#include "heavyball/common.hpp"
#include "heavyball/momentum.hpp"

namespace heavyball {

struct SpectrumSummary {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double kappa = 0.0;  // lambda_max / lambda_min, +inf when lambda_min == 0

  static SpectrumSummary from_bounds(double lmin, double lmax);
  static SpectrumSummary of_symmetric(const Matrix& h);
};

/// h(beta, z) = -(beta - (1 - sqrt(z))^2) * (beta - (1 + sqrt(z))^2).
/// Positive exactly for beta strictly between the two squared terms.
double h_function(double beta, double z);

/// Admissible momentum interval (lower, 1]: lower is the larger of
/// (1 - sqrt(eta * lambda))^2 at the two spectrum ends.
struct BetaRange {
  double lower = 0.0;
  double upper = 1.0;
  bool contains(double beta) const;  // strict at lower (1e-12 margin), closed at upper
};

BetaRange admissible_beta_range(double eta, const SpectrumSummary& spectrum);

struct BoundConstants {
  double c0 = std::numeric_limits<double>::quiet_NaN();
  double h_at_min = 0.0;
  double h_at_max = 0.0;
  double beta_star = 0.0;          // sqrt(beta)
  std::optional<double> theta;     // beta_star + sqrt(eta*lambda_min)/4, set by schedules
  bool valid = false;
};

/// Evaluates C0 = sqrt(2) (beta+1) / sqrt(min{h(beta, eta*lmin), h(beta, eta*lmax)}).
/// An inadmissible beta yields valid=false and NaN c0 (no exception).
BoundConstants c0_constant(double eta, double beta, const SpectrumSummary& spectrum);

/// The 2n0 x 2n0 companion matrix [ (1+beta) I - eta H, -beta I ; I, 0 ].
struct DynamicsMatrix {
  int n0 = 0;
  Matrix h;  // the generating PSD matrix
  double eta = 0.0;
  double beta = 0.0;
  SpectrumSummary spectrum;

  Matrix top_left() const { return (1.0 + beta) * Matrix::Identity(n0, n0) - eta * h; }
  Matrix assemble() const;
  Vector apply(const Vector& v) const;  // A * v without forming A
};

/// Validates symmetry (1e-8) and positive semidefiniteness (eigenvalues in
/// [-1e-10, 0) are clamped to 0) before building the companion matrix.
DynamicsMatrix build_dynamics_matrix(const Matrix& h, const HyperParams& hp);

struct PowerBoundReport {
  int n0 = 0;
  double eta = 0.0;
  double beta = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double c0 = 0.0;
  int max_power = 0;
  std::vector<double> ratios;  // ||A^k v0|| / (beta_star^k C0 ||v0||), k = 0..K
  double max_ratio = 0.0;
  std::optional<int> first_violation_k;
  bool passed = false;
  // Worst-case vectors can push the ratio up to sqrt(2): the eigenvector-Gram
  // floor behind C0 is h/(2(beta+1)), not h/(beta+1). The corrected
  // multiplier 2(beta+1)/sqrt(min h) = sqrt(2) C0 certifies every vector;
  // run-style stacked vectors [x; x] stay within the uncorrected C0.
  double c0_corrected = 0.0;
  double max_ratio_corrected = 0.0;
  bool passed_corrected = false;
  // First k where the t*theta^t-style bound k (sqrt(beta))^k already exceeds
  // (sqrt(beta))^k C0; diagnostic for the iteration-uniform claim.
  int t_theta_crossover_k = 0;

  std::string to_json() const;
};

/// Certifies ||A^k v0|| <= (sqrt(beta))^k C0 ||v0|| for k = 0..K by exact
/// repeated multiplication; no eigen-decomposition on this path. Passes iff
/// every ratio <= 1 + 1e-8. Refuses inadmissible (eta, beta, H).
PowerBoundReport certify_power_bound(const DynamicsMatrix& a, const Vector& v0, int max_power);

struct EigenstructureReport {
  std::vector<double> moduli;      // |lambda_i(A)|, all 2 n0 of them
  double spectral_radius = 0.0;    // rho(A), the Gelfand baseline
  double max_modulus_error = 0.0;  // max | |lambda_i| - sqrt(beta) |
  bool all_moduli_sqrt_beta = false;
  // Per eigenvalue of H: the 2x2 eigenvector-Gram facts.
  double max_block_gram_eig = 0.0;     // max over blocks of lambda_max(Q_i Q_i^*)
  double block_gram_upper = 0.0;       // 2 (beta + 1)
  bool block_gram_bounds_hold = false; // lambda_max <= 2(beta+1), lambda_min >= h/(1+beta)
};

/// Eigen-solves A, asserting every eigenvalue modulus equals sqrt(beta)
/// (valid for beta strictly inside the admissible range) and checking the
/// per-block eigenvector-Gram bounds in the H-eigenbasis.
EigenstructureReport eigenstructure_check(const DynamicsMatrix& a, double tol = 1e-8);

}  // namespace heavyball
