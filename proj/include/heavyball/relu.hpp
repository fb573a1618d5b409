#pragma once

#include <cstdint>
#include <vector>

#include "heavyball/momentum.hpp"
#include "heavyball/quadratic.hpp"
#include "heavyball/residual.hpp"

namespace heavyball {

/// One-hidden-layer ReLU net: x -> sum_r a_r relu(<w_r, x>) / sqrt(m).
/// Only the first layer trains; the signs a_r stay fixed.
struct ReluNetwork {
  int m = 0;
  int d = 0;
  Matrix w;       // m x d first-layer weights
  Vector a;       // m second-layer signs in {-1, +1}
  Matrix w_init;  // immutable snapshot of w at t = 0
};

ReluNetwork init_relu(int m, int d, std::uint64_t seed);

struct ReluDataset {
  Matrix x;  // n x d inputs, ||x_i|| <= 1, no two rows parallel
  Vector y;  // n labels

  int n() const { return static_cast<int>(x.rows()); }
  void validate() const;
};

/// Appendix-style data: Gaussian rows scaled to unit norm, labels uniform
/// in {-1, +1}. Regenerates with a derived sub-seed if a draw violates the
/// non-parallel check; `regen_attempts` counts the retries.
ReluDataset make_relu_dataset(int n, int d, std::uint64_t seed, int* regen_attempts = nullptr);

Vector forward(const ReluNetwork& net, const Matrix& x);

/// Per-neuron subgradient rows: row r = a_r/sqrt(m) * sum_i (u_i - y_i)
/// 1{<w_r, x_i> >= 0} x_i. Ties at zero count as active.
Matrix subgradient(const ReluNetwork& net, const ReluDataset& data);

enum class GramKind { empirical_at_w, empirical_at_init, expected };

struct GramMatrix {
  Matrix h;
  SpectrumSummary spectrum;
  GramKind kind = GramKind::empirical_at_w;
};

/// H[i,j] = x_i' x_j / m * #{r : both activations on}.
GramMatrix gram_empirical(const ReluNetwork& net, const ReluDataset& data);

/// Arc-cosine closed form of the expectation over w ~ N(0, I):
/// Hbar[i,j] = x_i' x_j (pi - theta_ij) / (2 pi).
GramMatrix gram_expected(const ReluDataset& data);

/// eta = 1/lambda_max(H0), beta = (1 - 1/(2 sqrt(kappa_hat)))^2; envelope
/// rate 1 - 1/(4 sqrt(kappa_hat)), multiplier 8 sqrt(kappa_hat).
Schedule acc_schedule(const GramMatrix& gram0);

struct ActivationPatternReport {
  double changed_fraction = 0.0;      // of the m*n patterns, relative to init
  std::vector<int> per_sample_flips;  // |S_i^perp| counts
  double radius_max = 0.0;            // max_r ||w_t_r - w_0_r||
};

struct ReluIterRow {
  int t = 0;
  double loss = 0.0;
  double residual_norm = 0.0;
  double pattern_changed_fraction = 0.0;
  double max_neuron_drift = 0.0;
  double iota_norm = 0.0;   // eta ||(H0 - H_t) xi_t||
  double phi_norm = 0.0;    // residual-recursion remainder against H_t
  double gram_drift_fro = 0.0;  // ||H_t - H0||_F
  int flips_since_prev = 0;     // pattern entries differing from iteration t-1
};

struct ReluTrainOptions {
  bool record_dynamics = true;  // Gram recomputation + remainder per iteration
  int gram_stride = 1;          // stride for larger sweeps
};

struct ReluTrainResult {
  ResidualTrace trace;  // phi vectors hold the measured H0-form remainder
  std::vector<ReluIterRow> rows;
  ActivationPatternReport final_pattern;
  GramMatrix gram0;
};

/// Momentum training driven through the generic optimizer on flattened
/// weights. Records residuals, pattern statistics, drift and the measured
/// perturbations per iteration.
ReluTrainResult train_relu(const ReluNetwork& net0, const ReluDataset& data,
                           const HyperParams& hp, int T, const ReluTrainOptions& options = {});

struct ReluCertReport {
  CertifyReport cert;
  double kappa_hat = 0.0;
  double c0 = 0.0;
  double drift_budget = 0.0;  // R_relu = lambda_min(H0) / (1024 n C0)
  double max_drift = 0.0;
  bool drift_within_budget = false;
  bool preconditions_met = false;  // theorem-scale width never holds at desk scale
};

/// Envelope certification of a trace produced under acc_schedule. The width
/// precondition is reported, not enforced: at desk scale the certificate
/// distinguishes "envelope holds empirically" from "theorem preconditions
/// satisfied".
ReluCertReport certify_relu_run(const ReluTrainResult& result, const Schedule& schedule);

/// Mean over seeds of ||H0 - Hbar||_F at each width; used for the
/// concentration measurement.
std::vector<double> gram_concentration(const ReluDataset& data, const std::vector<int>& m_values,
                                       int n_seeds, std::uint64_t seed0);

}  // namespace heavyball
