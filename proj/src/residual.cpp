#include "heavyball/residual.hpp"

#include <cmath>
#include <sstream>

#include "heavyball/io.hpp"

namespace heavyball {

namespace {
constexpr double kRelSlack = 1e-8;
constexpr double kAbsSlack = 1e-8;  // times the initial stacked norm
}  // namespace

std::string realization_name(Realization r) {
  switch (r) {
    case Realization::quadratic: return "quadratic";
    case Realization::smooth_strongly_convex: return "f2";
    case Realization::relu: return "relu";
    case Realization::deep_linear: return "deep-linear";
  }
  return "?";
}

void ResidualTrace::append(const Vector& xi) {
  TraceEntry e;
  e.t = static_cast<int>(entries.size());
  e.xi = xi;
  const Vector& prev = entries.empty() ? xi : entries.back().xi;
  e.stacked_norm = std::sqrt(xi.squaredNorm() + prev.squaredNorm());
  if (entries.empty()) n0 = static_cast<int>(xi.size());
  entries.push_back(std::move(e));
}

void ResidualTrace::append(const Vector& xi, const Vector& phi) {
  append(xi);
  entries.back().phi = phi;
  entries.back().phi_norm = phi.norm();
}

double ResidualTrace::initial_stacked_norm() const {
  if (entries.empty()) throw ValidationError("ResidualTrace: empty trace");
  return entries.front().stacked_norm;
}

bool EnvelopeParams::consistent(double bstar, int horizon) const {
  const double one_phi = indicator_phi ? 1.0 : 0.0;
  double bs_pow = 1.0, rate_pow = 1.0;
  for (int t = 0; t <= horizon; ++t) {
    const double lhs = bs_pow * c0 + rate_pow * one_phi * c3;
    const double rhs = rate_pow * (c0 + one_phi * c1);
    if (lhs > rhs * (1.0 + 1e-12)) return false;
    bs_pow *= bstar;
    rate_pow *= rate;
  }
  return true;
}

EnvelopeParams make_envelope(const HyperParams& hp, const BoundConstants& bounds, bool has_phi,
                             Realization realization) {
  if (!bounds.valid) throw ValidationError("make_envelope: invalid bound constants");
  EnvelopeParams env;
  env.c0 = bounds.c0;
  env.beta_star = bounds.beta_star;
  env.indicator_phi = has_phi;
  if (realization == Realization::quadratic || !has_phi) {
    env.c1 = env.c2 = env.c3 = 0.0;
    env.nu = 1.0;
    env.rate = bounds.beta_star;
  } else {
    if (!bounds.theta)
      throw ValidationError("make_envelope: schedule did not set theta for a phi-realization");
    env.c1 = env.c3 = bounds.c0;
    env.c2 = *bounds.theta - bounds.beta_star;  // = sqrt(eta*lambda)/4 under the schedules
    env.nu = 2.0;
    env.rate = *bounds.theta;
    env.theta = bounds.theta;
  }
  return env;
}

CertifyReport certify_trace(const ResidualTrace& trace, const EnvelopeParams& env,
                            int consistency_horizon) {
  if (trace.entries.empty()) throw ValidationError("certify_trace: empty trace");
  const int horizon =
      consistency_horizon >= 0 ? consistency_horizon : static_cast<int>(trace.entries.size());
  if (!env.consistent(env.beta_star, horizon))
    throw ValidationError("certify_trace: envelope constants fail the consistency inequality");

  CertifyReport rep;
  rep.rate = env.rate;
  rep.multiplier = env.multiplier();
  const double s0 = trace.initial_stacked_norm();
  double env_val = rep.multiplier * s0;
  for (const TraceEntry& e : trace.entries) {
    rep.envelope.push_back(env_val);
    const double ratio =
        env_val > 0.0 ? e.stacked_norm / env_val
                      : (e.stacked_norm > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    rep.ratios.push_back(ratio);
    // Once the envelope decays below the representable slack the raw ratio is
    // meaningless; the summary ratio measures against the slack floor instead.
    rep.max_ratio = std::max(rep.max_ratio,
                             e.stacked_norm / std::max(env_val, kAbsSlack * std::max(s0, 1e-300)));
    const bool ok = e.stacked_norm <= env_val * (1.0 + kRelSlack) + kAbsSlack * s0;
    if (!ok && !rep.first_violation) rep.first_violation = e.t;
    env_val *= env.rate;
  }
  rep.passed = !rep.first_violation.has_value();
  return rep;
}

std::string CertifyReport::to_json() const {
  std::ostringstream os;
  os << "{\"realization\": \"" << realization_name(realization) << "\""
     << ", \"rate\": " << format_double(rate) << ", \"multiplier\": " << format_double(multiplier)
     << ", \"passed\": " << (passed ? "true" : "false")
     << ", \"max_ratio\": " << format_double(max_ratio) << ", \"first_violation\": ";
  if (first_violation)
    os << *first_violation;
  else
    os << "null";
  os << ", \"preconditions_met\": " << (preconditions_met ? "true" : "false") << "}";
  return os.str();
}

PerturbationBudgetReport perturbation_budget_check(const ResidualTrace& trace,
                                                   const EnvelopeParams& env,
                                                   const DynamicsMatrix& a) {
  PerturbationBudgetReport rep;
  if (trace.entries.empty()) return rep;
  if (trace.n0 != a.n0)
    throw ValidationError("perturbation_budget_check: trace and dynamics dimensions differ");
  const double s0 = trace.initial_stacked_norm();
  const double c3 = env.indicator_phi ? env.c3 : 0.0;

  Vector acc = Vector::Zero(2 * a.n0);
  double rate_pow = 1.0;
  rep.complete = true;
  for (std::size_t t = 1; t < trace.entries.size(); ++t) {
    const TraceEntry& prev = trace.entries[t - 1];
    if (!prev.phi) {
      rep.complete = false;
      break;
    }
    acc = a.apply(acc);
    acc.head(a.n0) += *prev.phi;
    rate_pow *= env.rate;
    const double lhs = acc.norm();
    rep.lhs_norms.push_back(lhs);
    const double rhs = rate_pow * c3 * s0;
    rep.ratios.push_back(rhs > 0.0 ? lhs / rhs
                                   : (lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
    rep.max_ratio = std::max(rep.max_ratio, rep.ratios.back());
    ++rep.checked_iterations;
  }
  return rep;
}

}  // namespace heavyball
