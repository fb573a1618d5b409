#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "heavyball/spectral.hpp"

using namespace heavyball;

TEST_CASE("h vanishes at its roots and matches the direct scalar evaluation") {
  CHECK(h_function(1.0, 0.0) == 0.0);
  for (double z : {0.2, 1.0, 2.7}) {
    const double boundary = (1.0 - std::sqrt(z)) * (1.0 - std::sqrt(z));
    CHECK(h_function(boundary, z) == doctest::Approx(0.0));
  }
  CHECK(h_function(0.25, 1.0) == doctest::Approx(0.9375));
  CHECK_THROWS_AS(h_function(0.5, -1e-9), ValidationError);
}

TEST_CASE("admissible beta range at the schedule step size") {
  SUBCASE("kappa = 1 admits any positive beta") {
    const auto r = admissible_beta_range(1.0, SpectrumSummary::from_bounds(1.0, 1.0));
    CHECK(r.lower == doctest::Approx(0.0));
    CHECK(r.contains(0.5));
    CHECK(r.contains(1.0));
  }
  SUBCASE("kappa = 4 gives the (1 - 1/2)^2 boundary") {
    const auto r = admissible_beta_range(0.25, SpectrumSummary::from_bounds(1.0, 4.0));
    CHECK(r.lower == doctest::Approx(0.25));
    CHECK_FALSE(r.contains(0.25));  // open at the boundary
    CHECK(r.contains(0.26));
  }
  SUBCASE("lambda_min = 0 leaves only the beta = 1 boundary, flagged invalid") {
    const auto r = admissible_beta_range(1.0, SpectrumSummary::from_bounds(0.0, 1.0));
    CHECK(r.lower == doctest::Approx(1.0));
    const auto bc = c0_constant(1.0, 1.0, SpectrumSummary::from_bounds(0.0, 1.0));
    CHECK_FALSE(bc.valid);
  }
}

TEST_CASE("C0 at kappa = 1 under the schedule matches the analytic value") {
  const auto bc = c0_constant(1.0, 0.25, SpectrumSummary::from_bounds(1.0, 1.0));
  REQUIRE(bc.valid);
  CHECK(bc.h_at_min == doctest::Approx(0.9375));
  CHECK(bc.h_at_max == doctest::Approx(0.9375));
  CHECK(bc.c0 == doctest::Approx(1.8257).epsilon(1e-3));
  CHECK(bc.c0 <= 4.0);
}

TEST_CASE("under the corollary schedule C0 stays within 4 sqrt(kappa) and above 1") {
  for (double kappa : {1.0, 2.0, 10.0, 100.0, 1e4}) {
    const auto spectrum = SpectrumSummary::from_bounds(1.0 / kappa, 1.0);
    const double beta = std::pow(1.0 - 0.5 / std::sqrt(kappa), 2.0);
    const auto bc = c0_constant(1.0, beta, spectrum);
    REQUIRE(bc.valid);
    CHECK(bc.c0 <= 4.0 * std::sqrt(kappa) * (1.0 + 1e-12));
    CHECK(bc.c0 >= 1.0);
  }
}

TEST_CASE("C0 blows up toward the admissibility boundary") {
  const auto spectrum = SpectrumSummary::from_bounds(0.25, 1.0);
  const auto range = admissible_beta_range(1.0, spectrum);
  double prev = 0.0;
  for (double off : {1e-1, 1e-3, 1e-6, 1e-9}) {
    const auto bc = c0_constant(1.0, range.lower + off, spectrum);
    REQUIRE(bc.valid);
    CHECK(bc.h_at_min > 0.0);
    CHECK(bc.h_at_max > 0.0);
    CHECK(bc.c0 > prev);
    prev = bc.c0;
  }
  CHECK(prev > 1e3);
}

TEST_CASE("inadmissible beta reports valid = false without throwing") {
  const auto bc = c0_constant(1.0, 0.01, SpectrumSummary::from_bounds(0.01, 1.0));
  CHECK_FALSE(bc.valid);
  CHECK(std::isnan(bc.c0));
}

TEST_CASE("dynamics matrix structure") {
  SUBCASE("H = 0 with beta = 0 gives [I 0; I 0]") {
    const auto a = build_dynamics_matrix(Matrix::Zero(2, 2), HyperParams{1.0, 0.0});
    Matrix expect = Matrix::Zero(4, 4);
    expect.topLeftCorner(2, 2) = Matrix::Identity(2, 2);
    expect.bottomLeftCorner(2, 2) = Matrix::Identity(2, 2);
    CHECK((a.assemble() - expect).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("scalar H is the 2x2 companion matrix") {
    Matrix h(1, 1);
    h << 3.0;
    const auto a = build_dynamics_matrix(h, HyperParams{0.2, 0.4});
    Matrix expect(2, 2);
    expect << 1.4 - 0.6, -0.4, 1.0, 0.0;
    CHECK((a.assemble() - expect).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("blocks reassemble and apply() agrees with the dense product") {
    auto eng = make_engine(99);
    Matrix b = gaussian_matrix(3, 3, eng);
    Matrix h = b * b.transpose();
    const auto a = build_dynamics_matrix(h, HyperParams{0.05, 0.5});
    const Matrix dense = a.assemble();
    const Vector v = gaussian_matrix(6, 1, eng).col(0);
    CHECK(((dense * v) - a.apply(v)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((dense.bottomLeftCorner(3, 3) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(dense.bottomRightCorner(3, 3).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("asymmetric or indefinite H is rejected by name") {
    Matrix bad(2, 2);
    bad << 1.0, 0.5, -0.5, 1.0;
    CHECK_THROWS_WITH_AS(build_dynamics_matrix(bad, HyperParams{0.1, 0.1}),
                         doctest::Contains("symmetry"), ValidationError);
    Matrix indef(2, 2);
    indef << 1.0, 0.0, 0.0, -0.5;
    CHECK_THROWS_WITH_AS(build_dynamics_matrix(indef, HyperParams{0.1, 0.1}),
                         doctest::Contains("PSD"), ValidationError);
  }
}

TEST_CASE("power-bound certificate on the scalar critical case") {
  Matrix h(1, 1);
  h << 1.0;
  const auto a = build_dynamics_matrix(h, HyperParams{1.0, 0.25});
  const auto rep = certify_power_bound(a, Vector::Constant(2, 1.0), 100);
  CHECK(rep.passed);
  CHECK(rep.ratios[0] == doctest::Approx(1.0 / rep.c0));
  CHECK(rep.max_ratio <= 1.0 + 1e-8);
  // t (sqrt beta)^t overtakes the uniform bound right after C0.
  CHECK(rep.t_theta_crossover_k == static_cast<int>(std::floor(rep.c0)) + 1);
  const double bstar = std::sqrt(0.25);
  const int k = rep.t_theta_crossover_k;
  CHECK(k * std::pow(bstar, k) > std::pow(bstar, k) * rep.c0);
}

TEST_CASE("power-bound certificate over random PSD instances") {
  // Unrestricted vectors can exceed the sqrt(2)(beta+1)/sqrt(h) multiplier by
  // up to sqrt(2); the corrected multiplier certifies everything, and vectors
  // of the run form [x; x] stay within the uncorrected constant.
  int violations_vs_c0 = 0;
  for (int trial = 0; trial < 6; ++trial) {
    auto eng = make_engine(500 + trial);
    const int n = 5;
    Matrix b = gaussian_matrix(n, n, eng);
    Matrix h = b * b.transpose() / n;
    const auto spectrum = SpectrumSummary::of_symmetric(h);
    const double eta = 1.0 / spectrum.lambda_max;
    const double beta = std::pow(1.0 - 0.5 * std::sqrt(eta * spectrum.lambda_min), 2.0);
    const auto a = build_dynamics_matrix(h, HyperParams{eta, beta});
    for (int v = 0; v < 20; ++v) {
      const Vector v0 = gaussian_matrix(2 * n, 1, eng).col(0);
      const auto rep = certify_power_bound(a, v0, 200);
      violations_vs_c0 += rep.passed ? 0 : 1;
      CHECK(rep.max_ratio <= std::sqrt(2.0) * (1.0 + 1e-8));
      CHECK(rep.passed_corrected);
    }
    for (int v = 0; v < 20; ++v) {
      Vector v0(2 * n);
      v0.head(n) = gaussian_matrix(n, 1, eng).col(0);
      v0.tail(n) = v0.head(n);
      const auto rep = certify_power_bound(a, v0, 200);
      CHECK(rep.passed);
    }
  }
  CHECK(violations_vs_c0 > 0);  // the uncorrected constant is genuinely exceeded
}

TEST_CASE("power bound refuses inadmissible dynamics") {
  Matrix h(2, 2);
  h << 1.0, 0.0, 0.0, 0.01;
  const auto a = build_dynamics_matrix(h, HyperParams{1.0, 0.05});
  CHECK_THROWS_AS(certify_power_bound(a, Vector::Constant(4, 1.0), 10), ValidationError);
}

TEST_CASE("eigen moduli all equal sqrt(beta) strictly inside the admissible range") {
  SUBCASE("scalar case against the quadratic-formula oracle") {
    for (double mu : {0.3, 1.0, 2.5}) {
      const double eta = 0.9;
      const double beta = 0.6;  // above (1 - sqrt(eta mu))^2 for these mu
      REQUIRE(admissible_beta_range(eta, SpectrumSummary::from_bounds(mu, mu)).contains(beta));
      Matrix h(1, 1);
      h << mu;
      const auto a = build_dynamics_matrix(h, HyperParams{eta, beta});
      const auto rep = eigenstructure_check(a);
      const double tr = 1.0 + beta - eta * mu;
      const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr - 4.0 * beta));
      const double oracle = std::abs(0.5 * (tr + disc));
      CHECK(rep.moduli[0] == doctest::Approx(oracle).epsilon(1e-10));
      CHECK(rep.all_moduli_sqrt_beta);
      CHECK(rep.block_gram_bounds_hold);
    }
  }
  SUBCASE("spectral radius equals 1 - 1/(2 sqrt kappa) under the schedule") {
    auto eng = make_engine(77);
    Matrix b = gaussian_matrix(4, 4, eng);
    Matrix h = b * b.transpose() / 4 + 0.1 * Matrix::Identity(4, 4);
    const auto spectrum = SpectrumSummary::of_symmetric(h);
    const double eta = 1.0 / spectrum.lambda_max;
    const double beta = std::pow(1.0 - 0.5 / std::sqrt(spectrum.kappa), 2.0);
    const auto a = build_dynamics_matrix(h, HyperParams{eta, beta});
    const auto rep = eigenstructure_check(a);
    CHECK(rep.all_moduli_sqrt_beta);
    CHECK(rep.spectral_radius == doctest::Approx(std::sqrt(beta)).epsilon(1e-8));
    CHECK(rep.max_block_gram_eig <= rep.block_gram_upper * (1.0 + 1e-12));
  }
  SUBCASE("boundary beta is refused") {
    Matrix h(1, 1);
    h << 1.0;
    const double beta = (1.0 - std::sqrt(0.5)) * (1.0 - std::sqrt(0.5));
    const auto a = build_dynamics_matrix(h, HyperParams{0.5, beta});
    CHECK_THROWS_AS(eigenstructure_check(a), ValidationError);
  }
}

TEST_CASE("certificate serializes its fields to json") {
  Matrix h(1, 1);
  h << 1.0;
  const auto a = build_dynamics_matrix(h, HyperParams{1.0, 0.25});
  const auto rep = certify_power_bound(a, Vector::Constant(2, 1.0), 5);
  const std::string j = rep.to_json();
  for (const char* key : {"\"n0\"", "\"eta\"", "\"beta\"", "\"lambda_min\"", "\"lambda_max\"",
                          "\"c0\"", "\"max_ratio\"", "\"first_violation_k\""})
    CHECK(j.find(key) != std::string::npos);
  CHECK(j.find("null") != std::string::npos);  // no violation
}
