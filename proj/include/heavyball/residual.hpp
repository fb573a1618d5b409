#pragma once

#include <optional>
#include <string>
#include <vector>

#include "heavyball/common.hpp"
#include "heavyball/momentum.hpp"
#include "heavyball/spectral.hpp"

namespace heavyball {

enum class Realization { quadratic, smooth_strongly_convex, relu, deep_linear };

std::string realization_name(Realization r);

struct TraceEntry {
  int t = 0;
  Vector xi;
  double stacked_norm = 0.0;  // ||[xi_t; xi_{t-1}]||, with xi_{-1} = xi_0
  double phi_norm = std::numeric_limits<double>::quiet_NaN();  // when measurable
  std::optional<Vector> phi;  // remainder against the H0-dynamics, when recorded
};

/// Per-iteration residual log shared by all realizations.
struct ResidualTrace {
  int n0 = 0;
  std::vector<TraceEntry> entries;

  void append(const Vector& xi);
  void append(const Vector& xi, const Vector& phi);
  double initial_stacked_norm() const;
};

/// Constants of the envelope rate^t * (C0 + 1_phi C1) with
/// rate = sqrt(beta) + 1_phi C2.
struct EnvelopeParams {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double nu = 1.0;
  bool indicator_phi = false;
  double rate = 0.0;
  std::optional<double> theta;  // alias for the rate when it equals 1 - sqrt(eta*lambda)/4

  double multiplier() const { return c0 + (indicator_phi ? c1 : 0.0); }
  /// Verifies (sqrt(beta))^t C0 + rate^t 1_phi C3 <= rate^t (C0 + 1_phi C1)
  /// numerically for t = 0..horizon.
  bool consistent(double beta_star, int horizon) const;
  double beta_star = 0.0;
};

/// Quadratic realization: C1 = C2 = C3 = 0 (rate sqrt(beta), multiplier C0).
/// Network / smooth realizations: C1 = C3 = C0, C2 = sqrt(eta*lambda)/4,
/// nu = 2 (rate theta = 1 - sqrt(eta*lambda)/4, multiplier 2 C0).
EnvelopeParams make_envelope(const HyperParams& hp, const BoundConstants& bounds, bool has_phi,
                             Realization realization);

struct CertifyReport {
  Realization realization = Realization::quadratic;
  double rate = 0.0;
  double multiplier = 0.0;
  bool passed = false;
  double max_ratio = 0.0;
  std::optional<int> first_violation;
  bool preconditions_met = true;  // theorem-scale width flag, set by the caller
  std::vector<double> envelope;   // per iteration
  std::vector<double> ratios;     // stacked_norm / envelope

  std::string to_json() const;
};

/// Checks every entry of the trace against the envelope. A violation is a
/// stacked norm above envelope * (1 + 1e-8) + 1e-8 * initial stacked norm;
/// the absolute term covers iterations where the envelope has decayed below
/// what double precision can represent relative to the problem scale.
CertifyReport certify_trace(const ResidualTrace& trace, const EnvelopeParams& env,
                            int consistency_horizon = -1);

struct PerturbationBudgetReport {
  bool complete = false;  // false when some phi vectors were not recorded
  int checked_iterations = 0;
  std::vector<double> lhs_norms;  // || sum_s A^{t-s-1} [phi_s; 0] ||
  std::vector<double> ratios;     // lhs / (rate^t C3 ||[xi_0; xi_-1]||)
  double max_ratio = 0.0;
};

/// Accumulates the perturbation sum of the meta-theorem premise exactly and
/// compares against rate^t C3 ||initial stack||. Diagnostic: the inequality is
/// guaranteed only under theorem-scale preconditions.
PerturbationBudgetReport perturbation_budget_check(const ResidualTrace& trace,
                                                   const EnvelopeParams& env,
                                                   const DynamicsMatrix& a);

}  // namespace heavyball
