#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "heavyball/momentum.hpp"
#include "heavyball/quadratic.hpp"
#include "heavyball/residual.hpp"

namespace heavyball {

/// L-layer linear net: x -> W_L ... W_1 x / sqrt(m^{L-1} d_y).
/// Layer shapes: W_1 in m x d, middle layers m x m, W_L in d_y x m
/// (for L = 1 the single layer is d_y x d and d must equal d_y).
struct LinearNetwork {
  int depth = 0;  // L
  int m = 0;
  int d = 0;
  int d_y = 0;
  std::vector<Matrix> layers;
  std::vector<Matrix> layers_init;
  std::vector<Matrix> layers_prev;  // W_{t-1}; equals layers at t = 0

  /// Orthogonality invariants of the scaled-orthogonal init, to 1e-8 * m.
  void validate_init() const;
};

LinearNetwork init_orthogonal(int depth, int m, int d, int d_y, std::uint64_t seed);

struct LinearDataset {
  Matrix x;       // d x n
  Matrix y;       // d_y x n, equals w_star * x exactly
  Matrix w_star;  // d_y x d generating matrix
  int rank = 0;
  SpectrumSummary spectrum;  // of X'X restricted to its range

  void validate() const;
};

/// Appendix-style data: X Gaussian d x n, W* = I + 0.1 * Gaussian, Y = W* X.
LinearDataset make_linear_dataset(int d, int d_y, int n, std::uint64_t seed);

Matrix forward_linear(const LinearNetwork& net, const Matrix& x);

/// d loss / d W_l for the squared loss, all layers. Computed with
/// per-layer normalized prefix/suffix products so no intermediate reaches
/// m^{L/2} scale.
std::vector<Matrix> layer_gradients(const LinearNetwork& net, const LinearDataset& data);

struct MomentumBuffers {
  std::vector<Matrix> m;  // per-layer M_{t,l}, zero at t = -1

  static MomentumBuffers zeros_like(const LinearNetwork& net);
};

struct KroneckerGram {
  Matrix h;  // (d_y n) x (d_y n)
  SpectrumSummary spectrum;
};

/// Dense H_t = sum_l (W^{l-1:1} X)'(W^{l-1:1} X) (x) W^{L:l+1} (W^{L:l+1})'
/// / (m^{L-1} d_y), column-major vectorization (vec(ACB) = (B' (x) A) vec C).
/// Refuses when d_y * n > 4096.
KroneckerGram gram_kronecker(const LinearNetwork& net, const LinearDataset& data);

/// The small factors of H_t: H_t vec(M) = (1/d_y) sum_l vec(A_l M B_l) with
/// A_l = suffix * suffix' (d_y x d_y) and B_l = prefix-image Gram (n x n).
struct GramFactors {
  std::vector<Matrix> a;
  std::vector<Matrix> b;

  Matrix apply(const Matrix& m_mat, double d_y) const;
  Matrix assemble_dense(double d_y) const;
};

GramFactors gram_factors(const LinearNetwork& net, const Matrix& x);

/// eta = d_y / (L sigma_max^2(X)), beta = (1 - 1/(2 sqrt(kappa)))^2 with
/// kappa = sigma_max^2 / sigma_min^2 on the range of X; envelope rate
/// 1 - 1/(4 sqrt(kappa)), multiplier 8 sqrt(kappa).
Schedule linearnet_schedule(const LinearDataset& data, int depth, int d_y);

struct LinearIterRow {
  int t = 0;
  double loss = 0.0;
  double residual_norm = 0.0;
  double max_layer_drift = 0.0;
  double iota_norm = 0.0;       // eta ||(H0 - H_t) xi_t||
  double remainder_norm = 0.0;  // ||phi_t + psi_t|| assembled per the residual lemma
  double closure_mismatch = 0.0;  // || xi-recursion identity residue ||
};

struct ProductSigmaCheck {
  int t = 0;
  int from = 0;  // layer range [from, to], 1-based
  int to = 0;
  double sigma_min_normalized = 0.0;  // of prod W / sqrt(m); target [0.9, 1.1]
  double sigma_max_normalized = 0.0;
};

struct LinearTrainOptions {
  bool record_dynamics = true;
  int sigma_stride = 25;       // iterations between product singular-value checks
  double stop_at_loss = 0.0;   // > 0: stop once the loss reaches this value
};

struct LinearTrainResult {
  ResidualTrace trace;  // phi vectors hold phi + psi + iota against H0
  std::vector<LinearIterRow> rows;
  std::vector<ProductSigmaCheck> sigma_checks;
  double b0 = 0.0;  // measured ||U_0 - Y||_F, instantiates the B_0 constant
  std::optional<int> iters_to_loss_1e8;
};

LinearTrainResult train_linear(const LinearNetwork& net0, const LinearDataset& data,
                               const HyperParams& hp, int T,
                               const LinearTrainOptions& options = {});

/// First t <= t_max with loss <= tol under momentum (or GD for beta = 0);
/// lean loop without dynamics recording.
std::optional<int> iterations_to_loss(const LinearNetwork& net0, const LinearDataset& data,
                                      const HyperParams& hp, double tol, int t_max);

struct LinearCertReport {
  CertifyReport cert;
  double kappa = 0.0;
  double c0 = 0.0;
  double drift_budget = 0.0;  // 64 ||X||_2 sqrt(d_y) / (L sigma_min^2) * nu C0 B0
  double max_drift = 0.0;
  bool drift_within_budget = false;
  double max_iota_budget_ratio = 0.0;  // ||iota_t|| vs (eta lambda / 80) theta^t nu C0 S0
  bool sigma_bounds_hold = true;       // sampled products within [0.9, 1.1] m^{(j-i+1)/2}
  double width_required_c1 = 0.0;      // kappa^5 (d_y (1+||W*||^2) + log(r/delta)) / sigma_max^2
  bool preconditions_met = false;
};

LinearCertReport certify_linear_run(const LinearTrainResult& result, const LinearDataset& data,
                                    const Schedule& schedule, int depth);

}  // namespace heavyball
