#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "heavyball/quadratic.hpp"

using namespace heavyball;

TEST_CASE("problem construction") {
  SUBCASE("identity spectrum with b = 0 has minimizer zero") {
    const QuadraticProblem p = make_quadratic({1.0, 1.0}, 3, Vector::Zero(2));
    CHECK((p.gamma - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(p.w_star.norm() == doctest::Approx(0.0));
  }
  SUBCASE("random b solves to the stated residual") {
    const QuadraticProblem p = make_quadratic({1.0, 100.0}, 4, std::uint64_t{5});
    CHECK((p.gamma * p.w_star + p.b).norm() <= 1e-8 * p.b.norm());
  }
  SUBCASE("condition number is exact from the spectrum list") {
    const QuadraticProblem p = make_quadratic({0.5, 2.0, 8.0}, 6, std::uint64_t{7});
    CHECK(p.spectrum.kappa == doctest::Approx(16.0));
  }
  SUBCASE("nonpositive eigenvalues are rejected") {
    CHECK_THROWS_AS(make_quadratic({1.0, 0.0}, 1, std::uint64_t{2}), ValidationError);
  }
}

TEST_CASE("schedules") {
  SUBCASE("stc at kappa = 1") {
    const Schedule s = stc_schedule(SpectrumSummary::from_bounds(2.0, 2.0));
    CHECK(s.hp.eta == doctest::Approx(0.5));
    CHECK(s.hp.beta == doctest::Approx(0.25));
    CHECK(s.envelope_rate == doctest::Approx(0.5));
    CHECK(s.envelope_multiplier == doctest::Approx(4.0));
  }
  SUBCASE("stc at kappa = 100") {
    const Schedule s = stc_schedule(SpectrumSummary::from_bounds(1.0, 100.0));
    CHECK(s.envelope_rate == doctest::Approx(0.95));
    CHECK(s.envelope_multiplier == doctest::Approx(40.0));
    CHECK(*s.bounds.theta == doctest::Approx(1.0 - 0.25 / 10.0));
  }
  SUBCASE("degenerate spectrum is rejected") {
    CHECK_THROWS_AS(stc_schedule(SpectrumSummary::from_bounds(0.0, 1.0)), ValidationError);
  }
  SUBCASE("polyak boundary values") {
    const HyperParams same = polyak_schedule(SpectrumSummary::from_bounds(2.0, 2.0), 1e-3);
    CHECK(same.eta == doctest::Approx(0.5));
    CHECK(same.beta == doctest::Approx(1e-3));

    const HyperParams k9 = polyak_schedule(SpectrumSummary::from_bounds(1.0, 9.0), 1e-3);
    CHECK(k9.beta == doctest::Approx(0.25 + 1e-3));

    const SpectrumSummary k100 = SpectrumSummary::from_bounds(1.0, 100.0);
    const HyperParams hp = polyak_schedule(k100, 1e-3);
    CHECK(admissible_beta_range(hp.eta, k100).contains(hp.beta));
    CHECK_THROWS_AS(polyak_schedule(SpectrumSummary::from_bounds(1.0, 1.0), 1.5), ValidationError);
  }
}

TEST_CASE("envelope certification of momentum runs") {
  SUBCASE("starting at the minimizer keeps the residual at roundoff") {
    const QuadraticProblem p = make_quadratic({1.0, 5.0}, 8, std::uint64_t{9});
    const Schedule s = stc_schedule(p.spectrum);
    const auto rep = certify_quadratic_run(p, s.hp, p.w_star, 50);
    for (const auto& e : rep.trace.entries) CHECK(e.stacked_norm <= 1e-12);
  }
  SUBCASE("kappa = 100 run stays within the envelope and phi is exactly zero") {
    std::vector<double> spec(10);
    for (int i = 0; i < 10; ++i) spec[i] = 1.0 + 99.0 * i / 9.0;
    const QuadraticProblem p = make_quadratic(spec, 10, std::uint64_t{11});
    const Schedule s = stc_schedule(p.spectrum);
    auto eng = make_engine(12);
    Vector w0 = p.w_star + gaussian_matrix(10, 1, eng).col(0).normalized();
    const auto rep = certify_quadratic_run(p, s.hp, w0, 500);
    CHECK(rep.cert.passed);
    CHECK(rep.cert.max_ratio <= 1.0 + 1e-8);
    for (const auto& e : rep.trace.entries) CHECK(e.phi_norm == 0.0);
  }
  SUBCASE("inadmissible hyper-parameters are refused") {
    const QuadraticProblem p = make_quadratic({1.0, 100.0}, 13, std::uint64_t{14});
    CHECK_THROWS_AS(certify_quadratic_run(p, HyperParams{1.0 / 100.0, 0.01}, p.w_star, 10),
                    ValidationError);
  }
}

TEST_CASE("momentum needs fewer iterations than gradient descent at kappa = 100") {
  std::vector<double> spec(15);
  for (int i = 0; i < 15; ++i) spec[i] = 1.0 + 99.0 * i / 14.0;
  const QuadraticProblem p = make_quadratic(spec, 21, std::uint64_t{22});
  const Schedule s = stc_schedule(p.spectrum);
  auto eng = make_engine(23);
  const Vector w0 = p.w_star + gaussian_matrix(15, 1, eng).col(0).normalized();

  const auto hb = iterations_to_residual(p.objective(), p.w_star, s.hp, w0, 1e-8, 100000);
  const auto gd = iterations_to_residual(p.objective(), p.w_star, HyperParams{s.hp.eta, 0.0}, w0,
                                         1e-8, 100000);
  REQUIRE(hb.has_value());
  REQUIRE(gd.has_value());
  CHECK(*hb < *gd);
}

TEST_CASE("polyak schedule approaches the 1 - 2/(sqrt(kappa)+1) contraction") {
  std::vector<double> spec(20);
  for (int i = 0; i < 20; ++i) spec[i] = 1.0 + 99.0 * i / 19.0;
  const QuadraticProblem p = make_quadratic(spec, 31, std::uint64_t{32});
  const HyperParams hp = polyak_schedule(p.spectrum, 1e-4);

  auto eng = make_engine(33);
  const Vector w0 = p.w_star + gaussian_matrix(20, 1, eng).col(0).normalized();
  std::vector<double> stacked;
  OptimizerState st = OptimizerState::init(w0);
  const Objective obj = p.objective();
  const int T = 140;
  for (int t = 0; t <= T; ++t) {
    const double cur = (st.w_curr - p.w_star).squaredNorm();
    const double prev = (st.w_prev - p.w_star).squaredNorm();
    stacked.push_back(std::sqrt(cur + prev));
    st = step_v2(st, obj, hp);
  }
  const double measured = std::pow(stacked[T] / stacked[T / 2], 1.0 / (T - T / 2));
  const double target = 1.0 - 2.0 / (std::sqrt(p.spectrum.kappa) + 1.0);
  CHECK(measured == doctest::Approx(target).epsilon(0.0125));
}

TEST_CASE("smooth strongly convex family") {
  SUBCASE("mu = alpha collapses to the pure quadratic") {
    const SmoothStronglyConvexProblem p = make_f2_testfn(2.0, 2.0, 4, 41);
    CHECK(p.c == 0.0);
    CHECK(p.w_star.norm() == 0.0);
  }
  SUBCASE("hessian matches central finite differences of the gradient in 1-D") {
    const SmoothStronglyConvexProblem p = make_f2_testfn(1.0, 3.0, 1, 42);
    const Objective obj = p.objective();
    const double w = 0.37;
    const double delta = 1e-5;
    const double fd = (obj.grad(Vector::Constant(1, w + delta))[0] -
                       obj.grad(Vector::Constant(1, w - delta))[0]) /
                      (2.0 * delta);
    CHECK(p.hessian(Vector::Constant(1, w))(0, 0) == doctest::Approx(fd).epsilon(1e-6));
  }
  SUBCASE("sampled hessian eigenvalues stay inside [mu, alpha]") {
    const SmoothStronglyConvexProblem p = make_f2_testfn(1.0, 4.0, 6, 43);
    auto eng = make_engine(44);
    for (int trial = 0; trial < 100; ++trial) {
      const Vector w = gaussian_matrix(6, 1, eng).col(0);
      const auto es = Eigen::SelfAdjointEigenSolver<Matrix>(p.hessian(w), Eigen::EigenvaluesOnly);
      CHECK(es.eigenvalues().minCoeff() >= p.mu - 1e-9);
      CHECK(es.eigenvalues().maxCoeff() <= p.alpha + 1e-9);
    }
    CHECK(p.hessian_lipschitz <= p.alpha);
  }
  SUBCASE("the minimizer is the origin to newton tolerance") {
    const SmoothStronglyConvexProblem p = make_f2_testfn(1.0, 9.0, 5, 45);
    CHECK(p.objective().grad(p.w_star).norm() <= 1e-13);
    CHECK(p.w_star.norm() <= 1e-13);
  }
}

TEST_CASE("local acceleration certification") {
  SUBCASE("kappa = 1 constants") {
    const SmoothStronglyConvexProblem p = make_f2_testfn(2.0, 2.0, 3, 51);
    const double radius = 1.0 / 683.0;
    const Vector w0 = p.w_star + (0.4 * radius / std::sqrt(2.0)) * Vector::Ones(3).normalized();
    const auto rep = certify_local_run(p, w0, 100);
    CHECK(rep.required_radius == doctest::Approx(radius));
    CHECK(rep.cert.rate == doctest::Approx(0.75));
    CHECK(rep.cert.multiplier == doctest::Approx(8.0));
    CHECK(rep.cert.passed);
  }
  SUBCASE("kappa = 4 perturbed instance satisfies the envelope over 300 iterations") {
    const SmoothStronglyConvexProblem p = make_f2_testfn(1.0, 4.0, 5, 52);
    auto eng = make_engine(53);
    Vector dir = gaussian_matrix(5, 1, eng).col(0).normalized();
    const double radius = 1.0 / (683.0 * std::pow(p.kappa(), 1.5));
    const Vector w0 = p.w_star + (0.5 * radius) * dir / std::sqrt(2.0);
    const auto rep = certify_local_run(p, w0, 300);
    CHECK(rep.cert.passed);
    CHECK(rep.cert.rate == doctest::Approx(1.0 - 0.125));
  }
  SUBCASE("initialization outside the ball is refused with the radius") {
    const SmoothStronglyConvexProblem p = make_f2_testfn(1.0, 4.0, 2, 54);
    const Vector w0 = p.w_star + Vector::Ones(2);
    CHECK_THROWS_WITH_AS(certify_local_run(p, w0, 10), doctest::Contains("radius"),
                         ValidationError);
  }
}
