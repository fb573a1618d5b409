#include "heavyball/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include "heavyball/io.hpp"

namespace heavyball {

namespace {
constexpr double kBetaMargin = 1e-12;  // strict admissibility margin
constexpr double kRatioSlack = 1e-8;
}  // namespace

SpectrumSummary SpectrumSummary::from_bounds(double lmin, double lmax) {
  if (lmin < 0.0 || lmax < lmin)
    throw ValidationError("SpectrumSummary: need 0 <= lambda_min <= lambda_max");
  SpectrumSummary s;
  s.lambda_min = lmin;
  s.lambda_max = lmax;
  s.kappa = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  return s;
}

SpectrumSummary SpectrumSummary::of_symmetric(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("SpectrumSummary: eigen-solver did not converge");
  const auto& ev = es.eigenvalues();
  double lmin = ev.minCoeff();
  if (lmin < 0.0 && lmin >= -1e-10) lmin = 0.0;  // PSD up to rounding
  return from_bounds(lmin, ev.maxCoeff());
}

double h_function(double beta, double z) {
  if (z < 0.0) throw ValidationError("h_function: z must be nonnegative");
  const double sz = std::sqrt(z);
  return -(beta - (1.0 - sz) * (1.0 - sz)) * (beta - (1.0 + sz) * (1.0 + sz));
}

bool BetaRange::contains(double beta) const {
  return beta > lower + kBetaMargin && beta <= upper;
}

BetaRange admissible_beta_range(double eta, const SpectrumSummary& spectrum) {
  if (!(eta > 0.0)) throw ValidationError("admissible_beta_range: eta must be positive");
  auto edge = [eta](double lambda) {
    const double s = 1.0 - std::sqrt(eta * lambda);
    return s * s;
  };
  BetaRange r;
  r.lower = std::max(edge(spectrum.lambda_min), edge(spectrum.lambda_max));
  r.upper = 1.0;
  return r;
}

BoundConstants c0_constant(double eta, double beta, const SpectrumSummary& spectrum) {
  BoundConstants bc;
  bc.beta_star = std::sqrt(std::max(beta, 0.0));
  const BetaRange range = admissible_beta_range(eta, spectrum);
  if (!range.contains(beta)) {
    bc.valid = false;
    return bc;
  }
  bc.h_at_min = h_function(beta, eta * spectrum.lambda_min);
  bc.h_at_max = h_function(beta, eta * spectrum.lambda_max);
  const double hmin = std::min(bc.h_at_min, bc.h_at_max);
  bc.c0 = std::sqrt(2.0) * (beta + 1.0) / std::sqrt(hmin);
  bc.valid = bc.h_at_min > 0.0 && bc.h_at_max > 0.0 && std::isfinite(bc.c0);
  return bc;
}

Matrix DynamicsMatrix::assemble() const {
  Matrix a = Matrix::Zero(2 * n0, 2 * n0);
  a.topLeftCorner(n0, n0) = top_left();
  a.topRightCorner(n0, n0) = -beta * Matrix::Identity(n0, n0);
  a.bottomLeftCorner(n0, n0) = Matrix::Identity(n0, n0);
  return a;
}

Vector DynamicsMatrix::apply(const Vector& v) const {
  if (v.size() != 2 * n0) throw ValidationError("DynamicsMatrix::apply: bad vector size");
  Vector out(2 * n0);
  const auto x = v.head(n0);
  const auto y = v.tail(n0);
  out.head(n0) = (1.0 + beta) * x - eta * (h * x) - beta * y;
  out.tail(n0) = x;
  return out;
}

DynamicsMatrix build_dynamics_matrix(const Matrix& h, const HyperParams& hp) {
  hp.validate();
  if (h.rows() != h.cols()) throw ValidationError("build_dynamics_matrix: H must be square");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if (((h - h.transpose()).cwiseAbs().maxCoeff()) > 1e-8 * scale)
    throw ValidationError("build_dynamics_matrix: H fails the symmetry check (1e-8)");

  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("build_dynamics_matrix: eigen-solver did not converge");
  double lmin = es.eigenvalues().minCoeff();
  if (lmin < -1e-10)
    throw ValidationError("build_dynamics_matrix: H fails the PSD check (eigenvalue < -1e-10)");
  if (lmin < 0.0) lmin = 0.0;

  DynamicsMatrix a;
  a.n0 = static_cast<int>(h.rows());
  a.h = 0.5 * (h + h.transpose());
  a.eta = hp.eta;
  a.beta = hp.beta;
  a.spectrum = SpectrumSummary::from_bounds(lmin, es.eigenvalues().maxCoeff());
  return a;
}

PowerBoundReport certify_power_bound(const DynamicsMatrix& a, const Vector& v0, int max_power) {
  const BoundConstants bc = c0_constant(a.eta, a.beta, a.spectrum);
  if (!bc.valid)
    throw ValidationError(
        "certify_power_bound: (eta, beta) outside the admissible range for spectrum [" +
        std::to_string(a.spectrum.lambda_min) + ", " + std::to_string(a.spectrum.lambda_max) +
        "]");
  const double v0_norm = v0.norm();
  if (!(v0_norm > 0.0)) throw ValidationError("certify_power_bound: v0 must be nonzero");
  if (max_power < 0) throw ValidationError("certify_power_bound: max power must be >= 0");

  PowerBoundReport rep;
  rep.n0 = a.n0;
  rep.eta = a.eta;
  rep.beta = a.beta;
  rep.lambda_min = a.spectrum.lambda_min;
  rep.lambda_max = a.spectrum.lambda_max;
  rep.c0 = bc.c0;
  rep.max_power = max_power;
  rep.ratios.reserve(max_power + 1);

  Vector v = v0;
  double envelope = bc.c0 * v0_norm;  // beta_star^k C0 ||v0||
  for (int k = 0; k <= max_power; ++k) {
    const double ratio = v.norm() / envelope;
    rep.ratios.push_back(ratio);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    if (ratio > 1.0 + kRatioSlack && !rep.first_violation_k) rep.first_violation_k = k;
    if (k < max_power) {
      v = a.apply(v);
      envelope *= bc.beta_star;
    }
  }
  rep.passed = !rep.first_violation_k.has_value();
  rep.c0_corrected = std::sqrt(2.0) * bc.c0;
  rep.max_ratio_corrected = rep.max_ratio / std::sqrt(2.0);
  rep.passed_corrected = rep.max_ratio_corrected <= 1.0 + kRatioSlack;
  rep.t_theta_crossover_k = static_cast<int>(std::floor(bc.c0)) + 1;
  return rep;
}

std::string PowerBoundReport::to_json() const {
  std::ostringstream os;
  os << "{\"n0\": " << n0 << ", \"eta\": " << format_double(eta)
     << ", \"beta\": " << format_double(beta) << ", \"lambda_min\": " << format_double(lambda_min)
     << ", \"lambda_max\": " << format_double(lambda_max) << ", \"c0\": " << format_double(c0)
     << ", \"max_ratio\": " << format_double(max_ratio) << ", \"first_violation_k\": ";
  if (first_violation_k)
    os << *first_violation_k;
  else
    os << "null";
  os << ", \"c0_corrected\": " << format_double(c0_corrected)
     << ", \"max_ratio_corrected\": " << format_double(max_ratio_corrected) << "}";
  return os.str();
}

EigenstructureReport eigenstructure_check(const DynamicsMatrix& a, double tol) {
  const BetaRange range = admissible_beta_range(a.eta, a.spectrum);
  if (!range.contains(a.beta))
    throw ValidationError("eigenstructure_check: beta not strictly inside the admissible range");

  Eigen::EigenSolver<Matrix> es(a.assemble());
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eigenstructure_check: eigen-solver did not converge");

  EigenstructureReport rep;
  const double beta_star = std::sqrt(a.beta);
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double mod = std::abs(es.eigenvalues()[i]);
    rep.moduli.push_back(mod);
    rep.spectral_radius = std::max(rep.spectral_radius, mod);
    rep.max_modulus_error = std::max(rep.max_modulus_error, std::abs(mod - beta_star));
  }
  rep.all_moduli_sqrt_beta = rep.max_modulus_error <= tol;

  // Per 2x2 block in the H-eigenbasis: the companion of
  // x^2 - (1+beta-eta*lambda_i) x + beta has conjugate roots z, z~ of modulus
  // sqrt(beta); the eigenvector Gram Q_i Q_i^* = 2 [|z|^2, Re z; Re z, 1].
  Eigen::SelfAdjointEigenSolver<Matrix> hs(a.h, Eigen::EigenvaluesOnly);
  rep.block_gram_upper = 2.0 * (a.beta + 1.0);
  rep.block_gram_bounds_hold = true;
  for (int i = 0; i < hs.eigenvalues().size(); ++i) {
    const double lambda = std::max(0.0, hs.eigenvalues()[i]);
    const double re_z = 0.5 * (1.0 + a.beta - a.eta * lambda);
    Matrix qq(2, 2);
    qq << 2.0 * a.beta, 2.0 * re_z, 2.0 * re_z, 2.0;
    Eigen::SelfAdjointEigenSolver<Matrix> qs(qq, Eigen::EigenvaluesOnly);
    const double qmax = qs.eigenvalues().maxCoeff();
    const double qmin = qs.eigenvalues().minCoeff();
    rep.max_block_gram_eig = std::max(rep.max_block_gram_eig, qmax);
    // qmin * qmax = h(beta, eta lambda) and qmin + qmax = 2(beta + 1), so
    // qmin >= h / (2 (beta + 1)). The tighter h / (beta + 1) floor fails on
    // concrete blocks (qmax genuinely exceeds beta + 1).
    const double h_lower = h_function(a.beta, a.eta * lambda) / (2.0 * (1.0 + a.beta));
    if (qmax > rep.block_gram_upper * (1.0 + 1e-12) + 1e-12 ||
        qmin < h_lower * (1.0 - 1e-9) - 1e-12)
      rep.block_gram_bounds_hold = false;
  }
  return rep;
}

}  // namespace heavyball
