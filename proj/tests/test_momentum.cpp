#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "heavyball/momentum.hpp"
#include "heavyball/quadratic.hpp"

using namespace heavyball;

namespace {

Objective scalar_half_square() {
  Objective obj;
  obj.dim = 1;
  obj.eval = [](const Vector& w) { return 0.5 * w[0] * w[0]; };
  obj.grad = [](const Vector& w) { return Vector::Constant(1, w[0]); };
  return obj;
}

}  // namespace

TEST_CASE("two hand-computed steps of version 1") {
  const Objective obj = scalar_half_square();
  const HyperParams hp{0.5, 0.1};
  OptimizerState s = OptimizerState::init(Vector::Constant(1, 1.0));

  s = step_v1(s, obj, hp);
  CHECK(s.momentum_buf[0] == doctest::Approx(1.0));
  CHECK(s.w_curr[0] == doctest::Approx(0.5));

  s = step_v1(s, obj, hp);
  CHECK(s.momentum_buf[0] == doctest::Approx(0.6));
  CHECK(s.w_curr[0] == doctest::Approx(0.2));
  CHECK(s.iter == 2);
}

TEST_CASE("version 2 matches the same hand computation") {
  const Objective obj = scalar_half_square();
  const HyperParams hp{0.5, 0.1};
  OptimizerState s = OptimizerState::init(Vector::Constant(1, 1.0));

  s = step_v2(s, obj, hp);
  CHECK(s.w_curr[0] == doctest::Approx(0.5));
  s = step_v2(s, obj, hp);
  CHECK(s.w_curr[0] == doctest::Approx(0.2));
}

TEST_CASE("beta = 0 reduces both forms to plain gradient descent") {
  const QuadraticProblem p = make_quadratic({1.0, 3.0, 7.0}, 11, std::uint64_t{12});
  const Objective obj = p.objective();
  const HyperParams hp{0.1, 0.0};
  Vector w0 = Vector::LinSpaced(3, -1.0, 2.0);

  OptimizerState s1 = OptimizerState::init(w0);
  OptimizerState s2 = OptimizerState::init(w0);
  Vector w_gd = w0;
  for (int t = 0; t < 25; ++t) {
    s1 = step_v1(s1, obj, hp);
    s2 = step_v2(s2, obj, hp);
    w_gd = w_gd - hp.eta * obj.grad(w_gd);
    CHECK((s1.w_curr - w_gd).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s2.w_curr - w_gd).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("zero gradient with zero momentum buffer is a fixed point") {
  const Objective obj = scalar_half_square();
  OptimizerState s = OptimizerState::init(Vector::Zero(1));
  const OptimizerState next = step_v1(s, obj, HyperParams{0.5, 0.9});
  CHECK(next.w_curr[0] == 0.0);
  CHECK(next.iter == 1);
  const OptimizerState next2 = step_v2(s, obj, HyperParams{0.5, 0.9});
  CHECK(next2.w_curr[0] == 0.0);
}

TEST_CASE("the two forms agree per coordinate over random problems") {
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 2 + 3 * trial;
    std::vector<double> spec(dim);
    for (int i = 0; i < dim; ++i) spec[i] = 0.5 + i;
    const QuadraticProblem p = make_quadratic(spec, 100 + trial, std::uint64_t(200 + trial));
    const Objective obj = p.objective();
    const Schedule sched = stc_schedule(p.spectrum);

    auto eng = make_engine(300 + trial);
    const Vector w0 = gaussian_matrix(dim, 1, eng).col(0);
    OptimizerState s1 = OptimizerState::init(w0);
    OptimizerState s2 = OptimizerState::init(w0);
    for (int t = 0; t < 500; ++t) {
      s1 = step_v1(s1, obj, sched.hp);
      s2 = step_v2(s2, obj, sched.hp);
      for (int i = 0; i < dim; ++i) {
        const double scale = std::max({1.0, std::abs(s1.w_curr[i]), std::abs(s2.w_curr[i])});
        CHECK(std::abs(s1.w_curr[i] - s2.w_curr[i]) <= 1e-10 * scale);
      }
    }
  }
}

TEST_CASE("divergence raises an error carrying the iteration index") {
  const Objective obj = scalar_half_square();
  const HyperParams hp{10.0, 0.9};  // far outside the stable region
  OptimizerState s = OptimizerState::init(Vector::Constant(1, 1.0));
  int caught_iter = -1;
  try {
    for (int t = 0; t < 1000; ++t) s = step_v2(s, obj, hp);
  } catch (const DivergedError& e) {
    caught_iter = e.iter();
  }
  CHECK(caught_iter > 0);
}

TEST_CASE("run with T = 0 logs only the initial record") {
  const Objective obj = scalar_half_square();
  int records = 0;
  run(obj, HyperParams{0.1, 0.5}, Vector::Constant(1, 2.0), 0, [&](const RunRecord& rec) {
    ++records;
    CHECK(rec.t == 0);
    CHECK(rec.loss == doctest::Approx(2.0));
  });
  CHECK(records == 1);
}

TEST_CASE("run is deterministic: identical inputs give bit-identical logs") {
  const QuadraticProblem p = make_quadratic({1.0, 4.0}, 5, std::uint64_t{6});
  const Schedule sched = stc_schedule(p.spectrum);
  const Vector w0 = Vector::Constant(2, 1.5);

  std::vector<double> log1, log2;
  auto capture = [](std::vector<double>& sink) {
    return [&sink](const RunRecord& rec) {
      sink.push_back(rec.loss);
      for (int i = 0; i < rec.w.size(); ++i) sink.push_back(rec.w[i]);
    };
  };
  run(p.objective(), sched.hp, w0, 100, capture(log1));
  run(p.objective(), sched.hp, w0, 100, capture(log2));
  REQUIRE(log1.size() == log2.size());
  for (std::size_t i = 0; i < log1.size(); ++i) CHECK(log1[i] == log2[i]);
}

TEST_CASE("recorder failures abort with the iteration index") {
  const Objective obj = scalar_half_square();
  try {
    run(obj, HyperParams{0.1, 0.0}, Vector::Constant(1, 1.0), 10, [](const RunRecord& rec) {
      if (rec.t == 3) throw std::runtime_error("sink full");
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("iteration 3") != std::string::npos);
  }
}

TEST_CASE("gradient descent with eta = 1/alpha decreases the quadratic loss monotonically") {
  const QuadraticProblem p = make_quadratic({1.0, 2.0, 10.0}, 7, std::uint64_t{8});
  const Objective obj = p.objective();
  double prev = std::numeric_limits<double>::infinity();
  run(obj, HyperParams{1.0 / p.spectrum.lambda_max, 0.0}, Vector::Constant(3, 1.0), 200,
      [&](const RunRecord& rec) {
        CHECK(rec.loss <= prev + 1e-15);
        prev = rec.loss;
      });
}
