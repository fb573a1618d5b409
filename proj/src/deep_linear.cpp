#include "heavyball/deep_linear.hpp"

#include <cmath>

namespace heavyball {

namespace {

int layer_rows(int l, int depth, int m, int d_y) { return l == depth - 1 ? d_y : m; }
int layer_cols(int l, int m, int d) { return l == 0 ? d : m; }

// Prefix images F[k] = (W_k / sqrt(m)) ... (W_1 / sqrt(m)) X, F[0] = X.
std::vector<Matrix> prefix_images(const std::vector<Matrix>& layers, const Matrix& x, double m) {
  const double sm = std::sqrt(m);
  std::vector<Matrix> f;
  f.reserve(layers.size());
  f.push_back(x);
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) f.push_back((layers[k] / sm) * f.back());
  return f;
}

Matrix output_from_prefix(const std::vector<Matrix>& layers, const std::vector<Matrix>& f,
                          double m, double d_y) {
  const double sm = std::sqrt(m);
  return std::sqrt(m / d_y) * ((layers.back() / sm) * f.back());
}

// Normalized suffix products S[k] = (W_L / sqrt(m)) ... (W_{k+2} / sqrt(m)),
// mapping the output space of layer k+1 to R^{d_y}; S[L-1] = I.
std::vector<Matrix> suffix_products(const std::vector<Matrix>& layers, double m, int d_y) {
  const double sm = std::sqrt(m);
  const int depth = static_cast<int>(layers.size());
  std::vector<Matrix> s(depth);
  s[depth - 1] = Matrix::Identity(d_y, d_y);
  for (int k = depth - 2; k >= 0; --k) s[k] = s[k + 1] * (layers[k + 1] / sm);
  return s;
}

std::vector<Matrix> gradients_from(const std::vector<Matrix>& layers,
                                   const std::vector<Matrix>& f, const Matrix& err, double m,
                                   double d_y) {
  const double sm = std::sqrt(m);
  const int depth = static_cast<int>(layers.size());
  std::vector<Matrix> grads(depth);
  Matrix dback = err;  // suffix' * E, built backwards
  for (int k = depth - 1; k >= 0; --k) {
    grads[k] = (dback * f[k].transpose()) / std::sqrt(d_y);
    if (k > 0) dback = (layers[k] / sm).transpose() * dback;
  }
  return grads;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector vec(const Matrix& m_mat) { return Eigen::Map<const Vector>(m_mat.data(), m_mat.size()); }

Matrix unvec(const Vector& v, int rows, int cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace

void LinearNetwork::validate_init() const {
  const double tol = 1e-8 * m;
  for (int l = 0; l < depth; ++l) {
    const Matrix& w = layers_init[l];
    const bool first = l == 0;
    const bool last = l == depth - 1;
    if (first || (!first && !last)) {
      const Matrix gram = w.transpose() * w;
      if ((gram - m * Matrix::Identity(w.cols(), w.cols())).cwiseAbs().maxCoeff() > tol)
        throw ValidationError("LinearNetwork: W'W = mI violated at layer " + std::to_string(l + 1));
    }
    if (last || (!first && !last)) {
      const Matrix gram = w * w.transpose();
      if ((gram - m * Matrix::Identity(w.rows(), w.rows())).cwiseAbs().maxCoeff() > tol)
        throw ValidationError("LinearNetwork: WW' = mI violated at layer " + std::to_string(l + 1));
    }
  }
}

LinearNetwork init_orthogonal(int depth, int m, int d, int d_y, std::uint64_t seed) {
  if (depth < 1) throw ValidationError("init_orthogonal: depth must be >= 1");
  if (m < std::max(d, d_y))
    throw ValidationError("init_orthogonal: need m >= max{d, d_y}");
  if (depth == 1 && d != d_y)
    throw ValidationError("init_orthogonal: a single layer needs d == d_y");

  auto eng = make_engine(seed);
  const double sm = std::sqrt(static_cast<double>(m));
  LinearNetwork net;
  net.depth = depth;
  net.m = m;
  net.d = d;
  net.d_y = d_y;
  for (int l = 0; l < depth; ++l) {
    const int rows = layer_rows(l, depth, m, d_y);
    const int cols = layer_cols(l, m, d);
    Matrix w;
    if (rows >= cols)
      w = sm * haar_orthonormal_columns(rows, cols, eng);
    else
      w = sm * haar_orthonormal_columns(cols, rows, eng).transpose();
    net.layers.push_back(std::move(w));
  }
  net.layers_init = net.layers;
  net.layers_prev = net.layers;
  net.validate_init();
  return net;
}

void LinearDataset::validate() const {
  if (x.cols() != y.cols()) throw ValidationError("LinearDataset: X and Y column counts differ");
  if ((y - w_star * x).cwiseAbs().maxCoeff() > 0.0)
    throw ValidationError("LinearDataset: Y != W* X");
}

LinearDataset make_linear_dataset(int d, int d_y, int n, std::uint64_t seed) {
  auto eng = make_engine(seed);
  LinearDataset data;
  data.x = gaussian_matrix(d, n, eng);
  data.w_star = Matrix::Identity(d_y, d) + 0.1 * gaussian_matrix(d_y, d, eng);
  data.y = data.w_star * data.x;
  Eigen::JacobiSVD<Matrix> svd(data.x);
  const auto& sv = svd.singularValues();
  data.rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-12 * sv[0]) ++data.rank;
  const double smax = sv[0];
  const double smin = sv[data.rank - 1];
  data.spectrum = SpectrumSummary::from_bounds(smin * smin, smax * smax);
  return data;
}

Matrix forward_linear(const LinearNetwork& net, const Matrix& x) {
  if (x.rows() != net.d) throw ValidationError("forward_linear: input dimension mismatch");
  const auto f = prefix_images(net.layers, x, net.m);
  return output_from_prefix(net.layers, f, net.m, net.d_y);
}

std::vector<Matrix> layer_gradients(const LinearNetwork& net, const LinearDataset& data) {
  const auto f = prefix_images(net.layers, data.x, net.m);
  const Matrix err = output_from_prefix(net.layers, f, net.m, net.d_y) - data.y;
  return gradients_from(net.layers, f, err, net.m, net.d_y);
}

MomentumBuffers MomentumBuffers::zeros_like(const LinearNetwork& net) {
  MomentumBuffers bufs;
  for (const Matrix& w : net.layers) bufs.m.push_back(Matrix::Zero(w.rows(), w.cols()));
  return bufs;
}

Matrix GramFactors::apply(const Matrix& m_mat, double d_y) const {
  Matrix out = Matrix::Zero(m_mat.rows(), m_mat.cols());
  for (std::size_t l = 0; l < a.size(); ++l) out += a[l] * m_mat * b[l];
  return out / d_y;
}

Matrix GramFactors::assemble_dense(double d_y) const {
  const int rows = static_cast<int>(a.front().rows());
  const int cols = static_cast<int>(b.front().rows());
  Matrix h = Matrix::Zero(rows * cols, rows * cols);
  for (std::size_t l = 0; l < a.size(); ++l) h += kron(b[l], a[l]);
  return h / d_y;
}

GramFactors gram_factors(const LinearNetwork& net, const Matrix& x) {
  const auto f = prefix_images(net.layers, x, net.m);
  const auto s = suffix_products(net.layers, net.m, net.d_y);
  GramFactors factors;
  for (int l = 0; l < net.depth; ++l) {
    factors.a.push_back(s[l] * s[l].transpose());
    factors.b.push_back(f[l].transpose() * f[l]);
  }
  return factors;
}

KroneckerGram gram_kronecker(const LinearNetwork& net, const LinearDataset& data) {
  const long size = static_cast<long>(net.d_y) * data.x.cols();
  if (size > 4096)
    throw ValidationError("gram_kronecker: dense matrix of side " + std::to_string(size) +
                          " exceeds the 4096 cap; use gram_factors for the action");
  KroneckerGram g;
  g.h = gram_factors(net, data.x).assemble_dense(net.d_y);
  g.spectrum = SpectrumSummary::of_symmetric(g.h);
  return g;
}

Schedule linearnet_schedule(const LinearDataset& data, int depth, int d_y) {
  if (data.rank < data.x.cols())
    throw ValidationError("linearnet_schedule: X is rank-deficient beyond the A1 setup");
  const double smax2 = data.spectrum.lambda_max;
  const double smin2 = data.spectrum.lambda_min;
  if (!(smin2 > 0.0)) throw ValidationError("linearnet_schedule: sigma_min(X) must be positive");

  const SpectrumSummary h0_bounds =
      SpectrumSummary::from_bounds(depth * smin2 / d_y, depth * smax2 / d_y);
  Schedule s = stc_schedule(h0_bounds);
  const double sk = std::sqrt(h0_bounds.kappa);
  s.envelope_rate = 1.0 - 0.25 / sk;
  s.envelope_multiplier = 8.0 * sk;
  return s;
}

LinearTrainResult train_linear(const LinearNetwork& net0, const LinearDataset& data,
                               const HyperParams& hp, int T, const LinearTrainOptions& options) {
  data.validate();
  hp.validate();
  LinearNetwork net = net0;
  MomentumBuffers bufs = MomentumBuffers::zeros_like(net);
  const double m = net.m;
  const double sm = std::sqrt(m);
  const double d_y = net.d_y;
  const int n = static_cast<int>(data.x.cols());
  const int depth = net.depth;

  LinearTrainResult result;

  GramFactors h0_factors;  // measured at t = 0
  GramFactors pending_factors;
  Matrix pending_phi_partial, pending_psi, pending_iota;
  Matrix u_prev;

  for (int t = 0; t <= T; ++t) {
    const auto f = prefix_images(net.layers, data.x, m);
    const Matrix u = output_from_prefix(net.layers, f, m, d_y);
    const Matrix err = u - data.y;
    const Vector xi = vec(err);

    LinearIterRow row;
    row.t = t;
    row.loss = 0.5 * xi.squaredNorm();
    row.residual_norm = xi.norm();
    for (int l = 0; l < depth; ++l)
      row.max_layer_drift =
          std::max(row.max_layer_drift, (net.layers[l] - net.layers_init[l]).norm());
    if (t == 0) result.b0 = err.norm();
    if (!result.iters_to_loss_1e8 && row.loss <= 1e-8) result.iters_to_loss_1e8 = t;

    std::vector<Matrix> suffixes;
    GramFactors factors;
    if (options.record_dynamics) {
      suffixes = suffix_products(net.layers, m, net.d_y);
      for (int l = 0; l < depth; ++l) {
        factors.a.push_back(suffixes[l] * suffixes[l].transpose());
        factors.b.push_back(f[l].transpose() * f[l]);
      }
      if (t == 0) h0_factors = factors;
      const Matrix iota = hp.eta * (h0_factors.apply(err, d_y) - factors.apply(err, d_y));
      row.iota_norm = iota.norm();

      if (t >= 1) {
        // Close iteration t-1: phi needs U_t, psi and iota were staged.
        const Matrix phi_hat = u + pending_phi_partial;
        const Matrix rem = phi_hat + pending_psi;
        result.rows[t - 1].remainder_norm = rem.norm();
        const Matrix xi_t = unvec(result.trace.entries[t - 1].xi, net.d_y, n);
        const Matrix xi_tm1 =
            unvec(result.trace.entries[t >= 2 ? t - 2 : 0].xi, net.d_y, n);
        const Matrix linear_part = xi_t - hp.eta * pending_factors.apply(xi_t, d_y) +
                                   hp.beta * (xi_t - xi_tm1);
        result.rows[t - 1].closure_mismatch = (err - linear_part - rem).norm();
        const Matrix phi_meta = rem + pending_iota;  // against the H0 dynamics
        result.trace.entries[t - 1].phi = vec(phi_meta);
        result.trace.entries[t - 1].phi_norm = phi_meta.norm();
      }
      pending_iota = iota;
    }

    result.trace.append(xi);
    result.rows.push_back(row);
    if (t == T) break;
    if (options.stop_at_loss > 0.0 && row.loss <= options.stop_at_loss) break;

    if (options.record_dynamics && options.sigma_stride > 0 &&
        t % options.sigma_stride == 0 && depth >= 2) {
      // Prefix and suffix products only: ranges spanning both rectangular
      // ends have small singular values already at init (random-subspace
      // angles), so the m^{(j-i+1)/2} scale does not apply to them.
      const int half = depth / 2;
      std::vector<std::pair<int, int>> ranges = {{1, half}, {half + 1, depth}};
      if (depth >= 3) ranges.push_back({1, depth - 1});
      for (auto [from, to] : ranges) {
        Matrix prod = net.layers[from - 1] / sm;
        for (int l = from; l < to; ++l) prod = (net.layers[l] / sm) * prod;
        Eigen::JacobiSVD<Matrix> svd(prod);
        ProductSigmaCheck check;
        check.t = t;
        check.from = from;
        check.to = to;
        check.sigma_max_normalized = svd.singularValues()[0];
        check.sigma_min_normalized = svd.singularValues()[svd.singularValues().size() - 1];
        result.sigma_checks.push_back(check);
      }
    }

    const auto grads = gradients_from(net.layers, f, err, m, d_y);
    for (int l = 0; l < depth; ++l) bufs.m[l] = hp.beta * bufs.m[l] + grads[l];

    if (options.record_dynamics) {
      Matrix phi_sum = Matrix::Zero(net.d_y, n);
      Matrix psi_sum = Matrix::Zero(net.d_y, n);
      for (int l = 0; l < depth; ++l) {
        phi_sum += suffixes[l] * (bufs.m[l] * f[l]);
        psi_sum += suffixes[l] * (net.layers_prev[l] * f[l]);
      }
      pending_phi_partial = -u + (hp.eta / std::sqrt(d_y)) * phi_sum;
      const Matrix& u_for_prev = t == 0 ? u : u_prev;  // U_{t-1}, with U_{-1} = U_0
      pending_psi =
          hp.beta * ((depth - 1) * u + u_for_prev - psi_sum / std::sqrt(d_y));
      pending_factors = factors;
    }
    u_prev = u;

    net.layers_prev = net.layers;
    for (int l = 0; l < depth; ++l) net.layers[l] -= hp.eta * bufs.m[l];
    for (int l = 0; l < depth; ++l)
      if (!net.layers[l].allFinite()) throw DivergedError(t + 1, "non-finite layer weights");
  }
  return result;
}

std::optional<int> iterations_to_loss(const LinearNetwork& net0, const LinearDataset& data,
                                      const HyperParams& hp, double tol, int t_max) {
  LinearNetwork net = net0;
  MomentumBuffers bufs = MomentumBuffers::zeros_like(net);
  const double m = net.m;
  for (int t = 0; t <= t_max; ++t) {
    const auto f = prefix_images(net.layers, data.x, m);
    const Matrix err = output_from_prefix(net.layers, f, m, net.d_y) - data.y;
    if (0.5 * err.squaredNorm() <= tol) return t;
    const auto grads = gradients_from(net.layers, f, err, m, net.d_y);
    for (int l = 0; l < net.depth; ++l) {
      bufs.m[l] = hp.beta * bufs.m[l] + grads[l];
      net.layers[l] -= hp.eta * bufs.m[l];
    }
  }
  return std::nullopt;
}

LinearCertReport certify_linear_run(const LinearTrainResult& result, const LinearDataset& data,
                                    const Schedule& schedule, int depth) {
  LinearCertReport rep;
  rep.kappa = data.spectrum.lambda_max / data.spectrum.lambda_min;
  rep.c0 = schedule.bounds.c0;

  const double smax = std::sqrt(data.spectrum.lambda_max);
  const double smin2 = data.spectrum.lambda_min;
  const double d_y = static_cast<double>(data.y.rows());
  const double nu = 2.0;
  rep.drift_budget =
      64.0 * smax * std::sqrt(d_y) / (depth * smin2) * nu * rep.c0 * result.b0;
  for (const auto& row : result.rows) rep.max_drift = std::max(rep.max_drift, row.max_layer_drift);
  rep.drift_within_budget = rep.max_drift <= rep.drift_budget;

  // ||iota_t|| against the (eta lambda / 80) theta^t nu C0 S0 path; observation.
  const double eta_lambda = schedule.hp.eta * depth * smin2 / d_y;
  const double s0 = result.trace.initial_stacked_norm();
  double theta_pow = 1.0;
  const double theta = schedule.bounds.theta.value_or(1.0);
  for (const auto& row : result.rows) {
    const double budget = (eta_lambda / 80.0) * theta_pow * nu * rep.c0 * s0;
    if (row.iota_norm > 0.0 && budget > 0.0)
      rep.max_iota_budget_ratio = std::max(rep.max_iota_budget_ratio, row.iota_norm / budget);
    theta_pow *= theta;
  }

  for (const auto& check : result.sigma_checks)
    if (check.sigma_max_normalized > 1.1 + 1e-9 || check.sigma_min_normalized < 0.9 - 1e-9)
      rep.sigma_bounds_hold = false;

  const double delta = 0.01;
  rep.width_required_c1 = std::pow(rep.kappa, 5.0) *
                          (d_y * (1.0 + data.w_star.operatorNorm() * data.w_star.operatorNorm()) +
                           std::log(data.rank / delta)) /
                          data.spectrum.lambda_max;
  rep.preconditions_met = false;

  const EnvelopeParams env =
      make_envelope(schedule.hp, schedule.bounds, /*has_phi=*/true, Realization::deep_linear);
  rep.cert = certify_trace(result.trace, env);
  rep.cert.realization = Realization::deep_linear;
  rep.cert.preconditions_met = false;
  return rep;
}

}  // namespace heavyball
