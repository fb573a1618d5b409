#include "heavyball/relu.hpp"

#include <cmath>

namespace heavyball {

namespace {
constexpr double kPi = 3.14159265358979323846;

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Activation indicators per (sample, neuron): 1{<w_r, x_i> >= 0}.
BoolMatrix activations(const Matrix& x, const Matrix& w) {
  return ((x * w.transpose()).array() >= 0.0).matrix();
}

Matrix gram_from_activations(const Matrix& x, const BoolMatrix& act, int m) {
  const Matrix counts = act.cast<double>() * act.cast<double>().transpose();
  // Scalar dot products per entry: keeps H bitwise-reproducible against a
  // plain double-loop reference regardless of SIMD summation order.
  Matrix h(x.rows(), x.rows());
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.rows(); ++j)
      h(i, j) = x.row(i).dot(x.row(j)) * counts(i, j) / static_cast<double>(m);
  return h;
}

}  // namespace

ReluNetwork init_relu(int m, int d, std::uint64_t seed) {
  if (m < 1 || d < 1) throw ValidationError("init_relu: need m >= 1, d >= 1");
  auto eng = make_engine(seed);
  ReluNetwork net;
  net.m = m;
  net.d = d;
  net.w = gaussian_matrix(m, d, eng);
  net.a = Vector(m);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int r = 0; r < m; ++r) net.a[r] = coin(eng) ? 1.0 : -1.0;
  net.w_init = net.w;
  return net;
}

void ReluDataset::validate() const {
  const int nn = n();
  if (nn < 1 || x.cols() < 1) throw ValidationError("ReluDataset: empty data");
  if (y.size() != nn) throw ValidationError("ReluDataset: label count mismatch");
  for (int i = 0; i < nn; ++i)
    if (x.row(i).norm() > 1.0 + 1e-12)
      throw ValidationError("ReluDataset: ||x_i|| <= 1 violated at row " + std::to_string(i));
  for (int i = 0; i < nn; ++i)
    for (int j = i + 1; j < nn; ++j) {
      const double dot = std::abs(x.row(i).dot(x.row(j)));
      if (dot >= x.row(i).norm() * x.row(j).norm() - 1e-12)
        throw ValidationError("ReluDataset: rows " + std::to_string(i) + " and " +
                              std::to_string(j) + " are (near-)parallel");
    }
}

ReluDataset make_relu_dataset(int n, int d, std::uint64_t seed, int* regen_attempts) {
  int attempts = 0;
  for (;; ++attempts) {
    auto eng = make_engine(derive_seed(seed, static_cast<std::uint64_t>(attempts)));
    ReluDataset data;
    data.x = gaussian_matrix(n, d, eng);
    for (int i = 0; i < n; ++i) data.x.row(i).normalize();
    data.y = Vector(n);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int i = 0; i < n; ++i) data.y[i] = coin(eng) ? 1.0 : -1.0;
    try {
      data.validate();
    } catch (const ValidationError&) {
      if (attempts > 64) throw;
      continue;
    }
    if (regen_attempts) *regen_attempts = attempts;
    return data;
  }
}

Vector forward(const ReluNetwork& net, const Matrix& x) {
  if (x.cols() != net.d) throw ValidationError("forward: input dimension mismatch");
  const Matrix z = x * net.w.transpose();  // n x m
  return z.cwiseMax(0.0) * net.a / std::sqrt(static_cast<double>(net.m));
}

Matrix subgradient(const ReluNetwork& net, const ReluDataset& data) {
  const Vector xi = forward(net, data.x) - data.y;
  const Matrix act = activations(data.x, net.w).cast<double>();   // n x m
  const Matrix weighted = act.array().colwise() * xi.array();     // n x m
  return net.a.asDiagonal() * (weighted.transpose() * data.x) / std::sqrt(double(net.m));
}

GramMatrix gram_empirical(const ReluNetwork& net, const ReluDataset& data) {
  GramMatrix g;
  g.h = gram_from_activations(data.x, activations(data.x, net.w), net.m);
  g.spectrum = SpectrumSummary::of_symmetric(g.h);
  g.kind = (net.w == net.w_init) ? GramKind::empirical_at_init : GramKind::empirical_at_w;
  return g;
}

GramMatrix gram_expected(const ReluDataset& data) {
  const int n = data.n();
  GramMatrix g;
  g.h = Matrix(n, n);
  g.kind = GramKind::expected;
  for (int i = 0; i < n; ++i) {
    const double ni = data.x.row(i).norm();
    if (!(ni > 0.0)) throw ValidationError("gram_expected: zero-norm input");
    for (int j = i; j < n; ++j) {
      const double nj = data.x.row(j).norm();
      const double dot = data.x.row(i).dot(data.x.row(j));
      const double cosang = std::clamp(dot / (ni * nj), -1.0, 1.0);
      const double theta = std::acos(cosang);
      g.h(i, j) = g.h(j, i) = dot * (kPi - theta) / (2.0 * kPi);
    }
  }
  g.spectrum = SpectrumSummary::of_symmetric(g.h);
  return g;
}

Schedule acc_schedule(const GramMatrix& gram0) {
  if (!(gram0.spectrum.lambda_min > 0.0))
    throw ValidationError("acc_schedule: singular Gram matrix at initialization");
  Schedule s = stc_schedule(gram0.spectrum);
  const double sk = std::sqrt(gram0.spectrum.kappa);
  s.envelope_rate = 1.0 - 0.25 / sk;
  s.envelope_multiplier = 8.0 * sk;
  return s;
}

ReluTrainResult train_relu(const ReluNetwork& net0, const ReluDataset& data,
                           const HyperParams& hp, int T, const ReluTrainOptions& options) {
  data.validate();
  hp.validate();
  const int m = net0.m, d = net0.d, n = data.n();
  const double sqm = std::sqrt(static_cast<double>(m));

  ReluTrainResult result;
  const BoolMatrix act0 = activations(data.x, net0.w_init);
  result.gram0.h = gram_from_activations(data.x, act0, m);
  result.gram0.spectrum = SpectrumSummary::of_symmetric(result.gram0.h);
  result.gram0.kind = GramKind::empirical_at_init;
  const Matrix& h0 = result.gram0.h;

  // The training loop runs on the generic optimizer over flattened weights.
  Objective obj;
  obj.dim = m * d;
  auto unflatten = [m, d](const Vector& v) {
    return Eigen::Map<const Matrix>(v.data(), m, d);
  };
  obj.eval = [&, m](const Vector& v) {
    const Matrix z = data.x * unflatten(v).transpose();
    const Vector u = z.cwiseMax(0.0) * net0.a / sqm;
    return 0.5 * (u - data.y).squaredNorm();
  };
  obj.grad = [&, m](const Vector& v) -> Vector {
    const Matrix wt = unflatten(v);
    const Matrix z = data.x * wt.transpose();
    const Vector u = z.cwiseMax(0.0) * net0.a / sqm;
    const Vector xi = u - data.y;
    const Matrix act = (z.array() >= 0.0).cast<double>();
    const Matrix weighted = act.array().colwise() * xi.array();
    Matrix g = net0.a.asDiagonal() * (weighted.transpose() * data.x) / sqm;
    return Eigen::Map<Vector>(g.data(), m * d);
  };

  Vector w_flat = Eigen::Map<const Vector>(net0.w_init.data(), m * d);
  OptimizerState state = OptimizerState::init(w_flat);

  Vector xi_prev;
  Matrix h_prev;
  BoolMatrix act_prev;
  for (int t = 0; t <= T; ++t) {
    const Matrix wt = unflatten(state.w_curr);
    const Matrix z = data.x * wt.transpose();
    const BoolMatrix act = (z.array() >= 0.0).matrix();
    const Vector u = z.cwiseMax(0.0) * net0.a / sqm;
    const Vector xi = u - data.y;

    ReluIterRow row;
    row.t = t;
    row.loss = 0.5 * xi.squaredNorm();
    row.residual_norm = xi.norm();

    int total_flips = 0;
    std::vector<int> per_sample(n, 0);
    for (int i = 0; i < n; ++i) {
      for (int r = 0; r < m; ++r)
        if (act(i, r) != act0(i, r)) ++per_sample[i];
      total_flips += per_sample[i];
    }
    if (t > 0)
      for (int i = 0; i < n; ++i)
        for (int r = 0; r < m; ++r)
          if (act(i, r) != act_prev(i, r)) ++row.flips_since_prev;
    row.pattern_changed_fraction = static_cast<double>(total_flips) / (double(m) * double(n));
    row.max_neuron_drift = (wt - net0.w_init).rowwise().norm().maxCoeff();

    const bool dyn = options.record_dynamics && (t % std::max(1, options.gram_stride) == 0);
    Matrix ht;
    if (dyn) {
      ht = gram_from_activations(data.x, act, m);
      row.iota_norm = (hp.eta * (h0 - ht) * xi).norm();
      row.gram_drift_fro = (ht - h0).norm();
    }

    result.trace.append(xi);
    // Close the previous iteration's recursion remainders now that xi_t is known.
    if (t >= 1 && options.record_dynamics) {
      const Vector& xi_t = xi_prev;
      const Vector& xi_tm1 =
          result.trace.entries[static_cast<std::size_t>(t) - (t >= 2 ? 2 : 1)].xi;
      const Vector linear_h0 =
          xi_t - hp.eta * (h0 * xi_t) + hp.beta * (xi_t - xi_tm1);
      const Vector phi_meta = xi - linear_h0;  // phi_t + iota_t in the meta equation
      result.trace.entries[t - 1].phi = phi_meta;
      result.trace.entries[t - 1].phi_norm = phi_meta.norm();
      if (h_prev.size() > 0) {
        const Vector linear_ht =
            xi_t - hp.eta * (h_prev * xi_t) + hp.beta * (xi_t - xi_tm1);
        result.rows[t - 1].phi_norm = (xi - linear_ht).norm();
      }
    }

    result.rows.push_back(row);
    if (t == T) {
      result.final_pattern.changed_fraction = row.pattern_changed_fraction;
      result.final_pattern.per_sample_flips = per_sample;
      result.final_pattern.radius_max = row.max_neuron_drift;
      break;
    }
    xi_prev = xi;
    h_prev = dyn ? ht : Matrix();
    act_prev = act;
    state = step_v2(state, obj, hp);
  }
  return result;
}

ReluCertReport certify_relu_run(const ReluTrainResult& result, const Schedule& schedule) {
  ReluCertReport rep;
  rep.kappa_hat = result.gram0.spectrum.kappa;
  rep.c0 = schedule.bounds.c0;
  const int n = result.trace.n0;
  rep.drift_budget = result.gram0.spectrum.lambda_min / (1024.0 * n * schedule.bounds.c0);
  for (const auto& row : result.rows) rep.max_drift = std::max(rep.max_drift, row.max_neuron_drift);
  rep.drift_within_budget = rep.max_drift <= rep.drift_budget;
  rep.preconditions_met = false;  // theorem-scale width is out of reach at desk scale

  const EnvelopeParams env =
      make_envelope(schedule.hp, schedule.bounds, /*has_phi=*/true, Realization::relu);
  rep.cert = certify_trace(result.trace, env);
  rep.cert.realization = Realization::relu;
  rep.cert.preconditions_met = false;
  return rep;
}

std::vector<double> gram_concentration(const ReluDataset& data, const std::vector<int>& m_values,
                                       int n_seeds, std::uint64_t seed0) {
  const GramMatrix expected = gram_expected(data);
  std::vector<double> means;
  means.reserve(m_values.size());
  for (std::size_t mi = 0; mi < m_values.size(); ++mi) {
    double total = 0.0;
    for (int s = 0; s < n_seeds; ++s) {
      const ReluNetwork net =
          init_relu(m_values[mi], static_cast<int>(data.x.cols()),
                    derive_seed(seed0, mi * 1000 + static_cast<std::uint64_t>(s)));
      total += (gram_empirical(net, data).h - expected.h).norm();
    }
    means.push_back(total / n_seeds);
  }
  return means;
}

}  // namespace heavyball
