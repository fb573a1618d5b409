#pragma once

#include <functional>

#include "heavyball/common.hpp"

namespace heavyball {

struct HyperParams {
  double eta = 0.0;   // step size, > 0
  double beta = 0.0;  // momentum parameter, in [0, 1]

  void validate() const;
};

/// Loss with a (sub)gradient oracle. `grad` must return a vector of size `dim`.
struct Objective {
  int dim = 0;
  std::function<double(const Vector&)> eval;
  std::function<Vector(const Vector&)> grad;
};

struct OptimizerState {
  Vector w_curr;
  Vector w_prev;      // w_{t-1}; equals w_curr at t = 0
  Vector momentum_buf;  // M_{t-1}, used by the version-1 form only; zero at t = 0
  int iter = 0;

  static OptimizerState init(const Vector& w0) {
    OptimizerState s;
    s.w_curr = w0;
    s.w_prev = w0;
    s.momentum_buf = Vector::Zero(w0.size());
    s.iter = 0;
    return s;
  }
};

enum class StepForm { v1, v2 };

// The two presentations of the same method. They generate identical iterate
// sequences (up to roundoff) given the standard initialization, and both are
// kept so the equivalence stays under test.
//
// v1:  M_t = beta * M_{t-1} + g(w_t);  w_{t+1} = w_t - eta * M_t
// v2:  w_{t+1} = w_t - eta * g(w_t) + beta * (w_t - w_{t-1})
OptimizerState step_v1(const OptimizerState& state, const Objective& obj, const HyperParams& hp);
OptimizerState step_v2(const OptimizerState& state, const Objective& obj, const HyperParams& hp);

struct RunRecord {
  int t = 0;
  Vector w;
  double loss = 0.0;
  double grad_norm = 0.0;
};

using Recorder = std::function<void(const RunRecord&)>;

/// Runs T steps of the chosen form from w0, invoking the recorder once for the
/// initial point and once after each step. Deterministic given inputs.
/// Throws DivergedError when an iterate goes non-finite or its norm exceeds
/// kDivergenceNormCap; recorder exceptions abort with the iteration index.
OptimizerState run(const Objective& obj, const HyperParams& hp, const Vector& w0, int T,
                   const Recorder& recorder, StepForm form = StepForm::v2);

}  // namespace heavyball
