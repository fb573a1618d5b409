#include "heavyball/momentum.hpp"

#include <cmath>

namespace heavyball {

void HyperParams::validate() const {
  if (!(eta > 0.0)) throw ValidationError("HyperParams: eta must be positive");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("HyperParams: beta must lie in [0, 1]");
}

namespace {

void check_finite(const Vector& w, int iter) {
  if (!w.allFinite()) throw DivergedError(iter, "non-finite iterate coordinate");
  if (w.norm() > kDivergenceNormCap) throw DivergedError(iter, "iterate norm exceeds cap");
}

Vector checked_gradient(const Objective& obj, const Vector& w, int iter) {
  Vector g = obj.grad(w);
  if (g.size() != obj.dim)
    throw ValidationError("Objective: gradient dimension does not match dim");
  if (!g.allFinite()) throw DivergedError(iter, "non-finite gradient component");
  return g;
}

}  // namespace

OptimizerState step_v1(const OptimizerState& state, const Objective& obj, const HyperParams& hp) {
  hp.validate();
  Vector g = checked_gradient(obj, state.w_curr, state.iter);
  OptimizerState next;
  next.momentum_buf = hp.beta * state.momentum_buf + g;
  next.w_curr = state.w_curr - hp.eta * next.momentum_buf;
  next.w_prev = state.w_curr;
  next.iter = state.iter + 1;
  check_finite(next.w_curr, next.iter);
  return next;
}

OptimizerState step_v2(const OptimizerState& state, const Objective& obj, const HyperParams& hp) {
  hp.validate();
  Vector g = checked_gradient(obj, state.w_curr, state.iter);
  OptimizerState next;
  next.w_curr = state.w_curr - hp.eta * g + hp.beta * (state.w_curr - state.w_prev);
  next.w_prev = state.w_curr;
  next.momentum_buf = state.momentum_buf;  // unused by this form
  next.iter = state.iter + 1;
  check_finite(next.w_curr, next.iter);
  return next;
}

OptimizerState run(const Objective& obj, const HyperParams& hp, const Vector& w0, int T,
                   const Recorder& recorder, StepForm form) {
  if (T < 0) throw ValidationError("run: T must be nonnegative");
  OptimizerState state = OptimizerState::init(w0);

  auto record = [&](const OptimizerState& s) {
    if (!recorder) return;
    RunRecord rec;
    rec.t = s.iter;
    rec.w = s.w_curr;
    rec.loss = obj.eval(s.w_curr);
    rec.grad_norm = obj.grad(s.w_curr).norm();
    try {
      recorder(rec);
    } catch (const std::exception& e) {
      throw std::runtime_error("recorder failed at iteration " + std::to_string(s.iter) + ": " +
                               e.what());
    }
  };

  record(state);
  for (int t = 0; t < T; ++t) {
    state = (form == StepForm::v1) ? step_v1(state, obj, hp) : step_v2(state, obj, hp);
    record(state);
  }
  return state;
}

Matrix gaussian_matrix(int rows, int cols, std::mt19937_64& eng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = normal(eng);
  return a;
}

Matrix haar_orthonormal_columns(int rows, int cols, std::mt19937_64& eng) {
  if (rows < cols) throw ValidationError("haar_orthonormal_columns: need rows >= cols");
  Matrix a = gaussian_matrix(rows, cols, eng);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  // Sign correction makes the distribution Haar.
  for (int j = 0; j < cols; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace heavyball
