#include "heavyball/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "heavyball/deep_linear.hpp"
#include "heavyball/io.hpp"
#include "heavyball/quadratic.hpp"
#include "heavyball/relu.hpp"
#include "heavyball/residual.hpp"

namespace heavyball {

const char* kVersion = "heavyball 0.1.0";

using nlohmann::json;

namespace {

const std::map<std::string, std::vector<std::string>> kSchemas = {
    {"quadratic", {"dim", "kappa_grid", "seeds", "t"}},
    {"f2-local", {"dim", "kappa", "t"}},
    {"relu", {"n", "d", "m", "seeds", "t", "data_seed"}},
    {"deep-linear", {"d", "dy", "m", "l", "n", "seeds", "t", "data_seed"}},
    {"bound-check", {"n0_grid", "seeds", "k"}},
    {"sweep",
     {"target", "m_grid", "kappa_grid", "l_grid", "seeds", "cell_cap", "n", "d", "dy", "m", "l",
      "t"}},
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

}  // namespace

int ExperimentConfig::get_int(const std::string& key, int def) const {
  auto it = fields.find(key);
  if (it == fields.end()) return def;
  try {
    return std::stoi(it->second);
  } catch (...) {
    throw ValidationError("config: field '" + key + "' is not an integer: " + it->second);
  }
}

double ExperimentConfig::get_double(const std::string& key, double def) const {
  auto it = fields.find(key);
  if (it == fields.end()) return def;
  try {
    return std::stod(it->second);
  } catch (...) {
    throw ValidationError("config: field '" + key + "' is not a number: " + it->second);
  }
}

std::vector<double> ExperimentConfig::get_double_list(const std::string& key,
                                                      const std::vector<double>& def) const {
  auto it = fields.find(key);
  if (it == fields.end()) return def;
  std::vector<double> out;
  for (const auto& part : split_list(it->second)) {
    try {
      out.push_back(std::stod(part));
    } catch (...) {
      throw ValidationError("config: list field '" + key + "' has a bad entry: " + part);
    }
  }
  if (out.empty()) throw ValidationError("config: list field '" + key + "' is empty");
  return out;
}

std::vector<int> ExperimentConfig::get_int_list(const std::string& key,
                                                const std::vector<int>& def) const {
  std::vector<double> d(def.begin(), def.end());
  std::vector<int> out;
  for (double v : get_double_list(key, d)) out.push_back(static_cast<int>(v));
  return out;
}

std::string ExperimentConfig::get_string(const std::string& key, const std::string& def) const {
  auto it = fields.find(key);
  return it == fields.end() ? def : it->second;
}

void ExperimentConfig::validate_keys() const {
  auto schema = kSchemas.find(experiment);
  if (schema == kSchemas.end())
    throw ValidationError("config: unknown experiment '" + experiment + "'");
  for (const auto& [key, value] : fields) {
    (void)value;
    if (std::find(schema->second.begin(), schema->second.end(), key) == schema->second.end())
      throw ValidationError("config: unknown field '" + key + "' for experiment '" + experiment +
                            "'");
  }
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream os;
  os << "experiment = " << experiment << "\n";
  os << "out = " << out.string() << "\n";
  os << "seed = " << seed << "\n";
  os << "workers = " << workers << "\n";
  for (const auto& [key, value] : fields) os << key << " = " << value << "\n";
  return os.str();
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config: line " + std::to_string(lineno) + " is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ValidationError("config: empty key or value on line " + std::to_string(lineno));
    if (key == "experiment")
      cfg.experiment = value;
    else if (key == "seed")
      cfg.seed = std::stoull(value);
    else if (key == "out")
      cfg.out = value;
    else if (key == "workers")
      cfg.workers = std::stoi(value);
    else if (cfg.fields.count(key))
      throw ValidationError("config: duplicate field '" + key + "'");
    else
      cfg.fields[key] = value;
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  return parse_config_text(read_text_file(path));
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string RunManifest::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["config_hash"] = config_hash;
  j["version"] = version;
  j["started_utc"] = started_utc;
  j["finished_utc"] = finished_utc;
  j["files"] = files;
  j["passed"] = passed;
  j["notes"] = notes;
  return j.dump(2) + "\n";
}

namespace {

void write_envelope_csv(const std::filesystem::path& path, const ResidualTrace& trace,
                        const CertifyReport& cert) {
  CsvWriter csv(path, {"t", "residual_norm", "envelope_value", "ratio"});
  for (std::size_t i = 0; i < trace.entries.size(); ++i)
    csv.row({static_cast<double>(trace.entries[i].t), trace.entries[i].stacked_norm,
             cert.envelope[i], cert.ratios[i]});
  csv.close();
}

constexpr const char* kLossPlotScript = R"PY(#!/usr/bin/env python3
# Overlays the momentum and gradient-descent loss curves from this run.
# Loss is drawn on a log scale (the source figures leave the axis unlabeled).
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))

def read(name, col):
    ts, vs = [], []
    with open(os.path.join(here, name)) as f:
        for row in csv.DictReader(f):
            v = float(row[col])
            if v > 0:
                ts.append(float(row["t"]))
                vs.append(v)
    return ts, vs

pairs = [PAIRS]
for momentum_csv, gd_csv, label in pairs:
    t1, l1 = read(momentum_csv, "loss")
    t2, l2 = read(gd_csv, "loss")
    plt.semilogy(t1, l1, label=f"momentum {label}")
    plt.semilogy(t2, l2, "--", label=f"gd {label}")
plt.xlabel("iteration")
plt.ylabel("training loss")
plt.legend()
plt.tight_layout()
out = os.path.join(here, "TITLE.png")
plt.savefig(out, dpi=150)
print(out)
)PY";

void write_loss_plot_script(const std::filesystem::path& dir, const std::string& title,
                            const std::vector<std::array<std::string, 3>>& pairs,
                            CommandResult& result) {
  std::string pair_list;
  for (const auto& p : pairs) {
    if (!pair_list.empty()) pair_list += ", ";
    pair_list += "(\"" + p[0] + "\", \"" + p[1] + "\", \"" + p[2] + "\")";
  }
  std::string script = kLossPlotScript;
  script.replace(script.find("[PAIRS]"), 7, "[" + pair_list + "]");
  script.replace(script.find("TITLE"), 5, title);
  write_text_file(dir / ("plot_" + title + ".py"), script);
  result.files.push_back("plot_" + title + ".py");
}

Vector seeded_unit_vector(int dim, std::uint64_t seed) {
  auto eng = make_engine(seed);
  Vector v = gaussian_matrix(dim, 1, eng).col(0);
  v.normalize();
  return v;
}

}  // namespace

CommandResult cmd_quadratic(const ExperimentConfig& config) {
  CommandResult result;
  const int dim = config.get_int("dim", 20);
  const std::vector<double> kappas = config.get_double_list("kappa_grid", {1, 4, 25, 100, 400});
  const int n_seeds = config.get_int("seeds", 5);
  const int T = config.get_int("t", 1000);

  json summary = json::array();
  CsvWriter iters_csv(config.out / "iterations_to_eps.csv",
                      {"kappa", "seed", "iters_momentum", "iters_gd", "ratio"});
  result.files.push_back("iterations_to_eps.csv");
  result.passed = true;

  for (std::size_t ki = 0; ki < kappas.size(); ++ki) {
    const double kappa = kappas[ki];
    for (int s = 0; s < n_seeds; ++s) {
      const std::uint64_t cell = derive_seed(config.seed, ki * 100 + s);
      std::vector<double> spec(dim);
      for (int i = 0; i < dim; ++i)
        spec[i] = 1.0 + (kappa - 1.0) * (dim == 1 ? 1.0 : double(i) / (dim - 1));
      const QuadraticProblem problem = make_quadratic(spec, cell, derive_seed(cell, 1));
      const Schedule sched = stc_schedule(problem.spectrum);
      Vector w0 = problem.w_star + seeded_unit_vector(dim, derive_seed(cell, 2));

      const QuadraticRunReport rep = certify_quadratic_run(problem, sched.hp, w0, T);
      result.passed = result.passed && rep.cert.passed;

      const std::string trace_name =
          "trace_k" + format_double(kappa) + "_s" + std::to_string(s) + ".csv";
      write_envelope_csv(config.out / trace_name, rep.trace, rep.cert);
      result.files.push_back(trace_name);

      // GD baseline at the same step size.
      HyperParams gd{sched.hp.eta, 0.0};
      const auto iters_gd =
          iterations_to_residual(problem.objective(), problem.w_star, gd, w0, 1e-8, 200 * T);
      const auto iters_hb =
          iterations_to_residual(problem.objective(), problem.w_star, sched.hp, w0, 1e-8, 200 * T);
      iters_csv.row({kappa, double(s), iters_hb ? double(*iters_hb) : -1.0,
                     iters_gd ? double(*iters_gd) : -1.0,
                     (iters_hb && iters_gd) ? double(*iters_hb) / double(*iters_gd) : -1.0});

      json entry;
      entry["kappa"] = kappa;
      entry["seed"] = s;
      entry["schedule"] = "stc";
      entry["passed"] = rep.cert.passed;
      entry["max_ratio"] = rep.cert.max_ratio;
      entry["iters_to_1e-8"] = rep.iters_to_1e8 ? json(*rep.iters_to_1e8) : json(nullptr);
      entry["c0"] = rep.c0;
      entry["c0_bound_4sqrtkappa"] = 4.0 * std::sqrt(kappa);
      summary.push_back(entry);
    }
  }
  iters_csv.close();
  write_text_file(config.out / "summary.json", summary.dump(2) + "\n");
  result.files.push_back("summary.json");
  return result;
}

CommandResult cmd_f2_local(const ExperimentConfig& config) {
  CommandResult result;
  const int dim = config.get_int("dim", 10);
  const double kappa = config.get_double("kappa", 25.0);
  const int T = config.get_int("t", 300);

  const SmoothStronglyConvexProblem problem = make_f2_testfn(1.0, kappa, dim, config.seed);
  const double radius = 1.0 / (683.0 * std::pow(problem.kappa(), 1.5));
  json summary;
  summary["kappa"] = problem.kappa();
  summary["required_radius"] = radius;

  // Desk-scale feasibility: below ~1e-9 the ball collapses into roundoff.
  if (radius < 1e-9) {
    summary["status"] = "radius-infeasible";
    result.notes.push_back("kappa too large for the 1/(683 kappa^{3/2}) ball at double precision");
    result.passed = true;  // explicitly diagnostic
  } else {
    const Vector w0 =
        problem.w_star + 0.5 * radius * seeded_unit_vector(dim, derive_seed(config.seed, 7));
    const LocalRunReport rep = certify_local_run(problem, w0, T);
    write_envelope_csv(config.out / "trace.csv", rep.trace, rep.cert);
    result.files.push_back("trace.csv");
    summary["status"] = "certified";
    summary["passed"] = rep.cert.passed;
    summary["max_ratio"] = rep.cert.max_ratio;
    result.passed = rep.cert.passed;
  }
  write_text_file(config.out / "summary.json", summary.dump(2) + "\n");
  result.files.push_back("summary.json");
  return result;
}

namespace {

void write_relu_trace_csv(const std::filesystem::path& path, const ReluTrainResult& train,
                          const CertifyReport* cert) {
  CsvWriter csv(path, {"t", "loss", "residual_norm", "envelope", "ratio",
                       "pattern_changed_fraction", "max_neuron_drift", "iota_norm"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < train.rows.size(); ++i) {
    const auto& row = train.rows[i];
    csv.row({double(row.t), row.loss, row.residual_norm, cert ? cert->envelope[i] : nan,
             cert ? cert->ratios[i] : nan, row.pattern_changed_fraction, row.max_neuron_drift,
             row.iota_norm});
  }
  csv.close();
}

}  // namespace

CommandResult cmd_relu(const ExperimentConfig& config) {
  CommandResult result;
  const int n = config.get_int("n", 5);
  const int d = config.get_int("d", 10);
  const int m = config.get_int("m", 1000);
  const int n_seeds = config.get_int("seeds", 10);
  const int T = config.get_int("t", 150);
  const std::uint64_t data_seed =
      config.fields.count("data_seed")
          ? static_cast<std::uint64_t>(std::stoull(config.fields.at("data_seed")))
          : derive_seed(config.seed, 0xD5);

  int regen = 0;
  const ReluDataset data = make_relu_dataset(n, d, data_seed, &regen);
  if (regen > 0)
    result.notes.push_back("dataset regenerated " + std::to_string(regen) +
                           " time(s) after a parallel-input draw");

  json summary = json::array();
  std::vector<std::array<std::string, 3>> plot_pairs;
  result.passed = true;
  int ordering_wins = 0;

  for (int s = 0; s < n_seeds; ++s) {
    const std::uint64_t net_seed = derive_seed(config.seed, 1000 + s);
    const ReluNetwork net = init_relu(m, d, net_seed);
    const GramMatrix gram0 = gram_empirical(net, data);
    const Schedule sched = acc_schedule(gram0);

    const ReluTrainResult momentum = train_relu(net, data, sched.hp, T);
    const ReluCertReport cert = certify_relu_run(momentum, sched);
    HyperParams gd{sched.hp.eta, 0.0};
    ReluTrainOptions lean;
    lean.record_dynamics = false;
    const ReluTrainResult vanilla = train_relu(net, data, gd, T, lean);

    const std::string mom_name = "relu_momentum_s" + std::to_string(s) + ".csv";
    const std::string gd_name = "relu_gd_s" + std::to_string(s) + ".csv";
    write_relu_trace_csv(config.out / mom_name, momentum, &cert.cert);
    write_relu_trace_csv(config.out / gd_name, vanilla, nullptr);
    result.files.push_back(mom_name);
    result.files.push_back(gd_name);
    if (s == 0) plot_pairs.push_back({mom_name, gd_name, "seed0"});

    const bool momentum_ahead = momentum.rows.back().loss < vanilla.rows.back().loss;
    ordering_wins += momentum_ahead ? 1 : 0;

    json entry;
    entry["seed"] = s;
    entry["kappa_hat"] = gram0.spectrum.kappa;
    entry["lambda_min_h0"] = gram0.spectrum.lambda_min;
    entry["final_loss_momentum"] = momentum.rows.back().loss;
    entry["final_loss_gd"] = vanilla.rows.back().loss;
    entry["momentum_ahead"] = momentum_ahead;
    entry["pattern_changed_fraction_momentum"] = momentum.final_pattern.changed_fraction;
    entry["pattern_changed_fraction_gd"] = vanilla.final_pattern.changed_fraction;
    entry["envelope"] = json::parse(cert.cert.to_json());
    entry["drift_budget"] = cert.drift_budget;
    entry["max_drift"] = cert.max_drift;
    summary.push_back(entry);
  }

  write_loss_plot_script(config.out, "relu_loss", plot_pairs, result);
  json top;
  top["runs"] = summary;
  top["ordering_wins"] = ordering_wins;
  top["seeds"] = n_seeds;
  top["preconditions_met"] = false;
  write_text_file(config.out / "summary.json", top.dump(2) + "\n");
  result.files.push_back("summary.json");
  // Envelope certificates are diagnostic at desk scale; the command itself
  // passes when the runs completed and were recorded.
  return result;
}

namespace {

void write_linear_trace_csv(const std::filesystem::path& path, const LinearTrainResult& train,
                            const CertifyReport* cert, double drift_budget) {
  CsvWriter csv(path, {"t", "loss", "residual_norm", "envelope", "ratio", "max_layer_drift",
                       "drift_budget", "iota_norm", "remainder_norm"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < train.rows.size(); ++i) {
    const auto& row = train.rows[i];
    csv.row({double(row.t), row.loss, row.residual_norm, cert ? cert->envelope[i] : nan,
             cert ? cert->ratios[i] : nan, row.max_layer_drift, drift_budget, row.iota_norm,
             row.remainder_norm});
  }
  csv.close();
}

}  // namespace

CommandResult cmd_deep_linear(const ExperimentConfig& config) {
  CommandResult result;
  const int d = config.get_int("d", 20);
  const int d_y = config.get_int("dy", 20);
  const int m = config.get_int("m", 50);
  const int depth = config.get_int("l", 100);
  const int n = config.get_int("n", 5);
  const int n_seeds = config.get_int("seeds", 10);
  const int T = config.get_int("t", 500);

  json summary = json::array();
  std::vector<std::array<std::string, 3>> plot_pairs;
  result.passed = true;
  int ordering_wins = 0;

  for (int s = 0; s < n_seeds; ++s) {
    const std::uint64_t cell = derive_seed(config.seed, 2000 + s);
    const std::uint64_t data_seed =
        config.fields.count("data_seed")
            ? static_cast<std::uint64_t>(std::stoull(config.fields.at("data_seed")))
            : derive_seed(cell, 1);
    const LinearDataset data = make_linear_dataset(d, d_y, n, data_seed);
    const LinearNetwork net = init_orthogonal(depth, m, d, d_y, derive_seed(cell, 2));
    const Schedule sched = linearnet_schedule(data, depth, d_y);

    LinearTrainOptions options;
    options.record_dynamics = (s == 0);  // full dynamics on the first seed only
    const LinearTrainResult momentum = train_linear(net, data, sched.hp, T, options);
    HyperParams gd{sched.hp.eta, 0.0};
    LinearTrainOptions lean;
    lean.record_dynamics = false;
    const LinearTrainResult vanilla = train_linear(net, data, gd, T, lean);

    const LinearCertReport cert = certify_linear_run(momentum, data, sched, depth);
    const std::string mom_name = "linear_momentum_s" + std::to_string(s) + ".csv";
    const std::string gd_name = "linear_gd_s" + std::to_string(s) + ".csv";
    write_linear_trace_csv(config.out / mom_name, momentum,
                           options.record_dynamics ? &cert.cert : nullptr, cert.drift_budget);
    write_linear_trace_csv(config.out / gd_name, vanilla, nullptr, cert.drift_budget);
    result.files.push_back(mom_name);
    result.files.push_back(gd_name);
    if (s == 0) plot_pairs.push_back({mom_name, gd_name, "seed0"});

    const auto it_hb = momentum.iters_to_loss_1e8;
    const auto it_gd = vanilla.iters_to_loss_1e8;
    const bool momentum_first = it_hb && (!it_gd || *it_hb < *it_gd);
    ordering_wins += momentum_first ? 1 : 0;

    json entry;
    entry["seed"] = s;
    entry["kappa"] = cert.kappa;
    entry["iters_to_1e-8_momentum"] = it_hb ? json(*it_hb) : json(nullptr);
    entry["iters_to_1e-8_gd"] = it_gd ? json(*it_gd) : json(nullptr);
    entry["momentum_first"] = momentum_first;
    entry["envelope"] = json::parse(cert.cert.to_json());
    entry["drift_budget"] = cert.drift_budget;
    entry["max_drift"] = cert.max_drift;
    entry["sigma_bounds_hold"] = cert.sigma_bounds_hold;
    entry["width_required_c1"] = cert.width_required_c1;
    summary.push_back(entry);
  }

  write_loss_plot_script(config.out, "deep_linear_loss", plot_pairs, result);
  json top;
  top["runs"] = summary;
  top["ordering_wins"] = ordering_wins;
  top["seeds"] = n_seeds;
  top["preconditions_met"] = false;
  write_text_file(config.out / "summary.json", top.dump(2) + "\n");
  result.files.push_back("summary.json");
  return result;
}

CommandResult cmd_bound_check(const ExperimentConfig& config) {
  CommandResult result;
  const std::vector<int> n0_grid = config.get_int_list("n0_grid", {1, 2, 5, 10});
  const int n_seeds = config.get_int("seeds", 20);
  const int K = config.get_int("k", 300);

  CsvWriter ratio_csv(config.out / "ratio_vs_k.csv", {"n0", "seed", "k", "ratio"});
  json certs = json::array();
  result.passed = true;

  for (std::size_t gi = 0; gi < n0_grid.size(); ++gi) {
    const int n0 = n0_grid[gi];
    for (int s = 0; s < n_seeds; ++s) {
      auto eng = make_engine(derive_seed(config.seed, gi * 1000 + s));
      std::uniform_real_distribution<double> unif(0.0, 1.0);

      std::vector<double> evs(n0);
      for (double& ev : evs) ev = std::pow(10.0, -1.0 + 2.0 * unif(eng));
      Matrix q = haar_orthonormal_columns(n0, n0, eng);
      Matrix diag = Matrix::Zero(n0, n0);
      for (int i = 0; i < n0; ++i) diag(i, i) = evs[i];
      const Matrix h = q.transpose() * diag * q;

      const SpectrumSummary spectrum = SpectrumSummary::of_symmetric(h);
      const double eta = (0.3 + 1.2 * unif(eng)) / spectrum.lambda_max;
      const BetaRange range = admissible_beta_range(eta, spectrum);
      const double beta = range.lower + (0.05 + 0.9 * unif(eng)) * (1.0 - range.lower);

      const DynamicsMatrix a = build_dynamics_matrix(h, HyperParams{eta, beta});
      const Vector v0 = gaussian_matrix(2 * n0, 1, eng).col(0);
      const PowerBoundReport rep = certify_power_bound(a, v0, K);
      const EigenstructureReport eig = eigenstructure_check(a);

      for (int k = 0; k <= K; ++k)
        ratio_csv.row({double(n0), double(s), double(k), rep.ratios[k]});

      json cert = json::parse(rep.to_json());
      cert["spectral_radius"] = eig.spectral_radius;
      cert["all_moduli_sqrt_beta"] = eig.all_moduli_sqrt_beta;
      cert["t_theta_crossover_k"] = rep.t_theta_crossover_k;
      certs.push_back(cert);
      result.passed = result.passed && rep.passed && eig.all_moduli_sqrt_beta;
    }
  }
  ratio_csv.close();
  result.files.push_back("ratio_vs_k.csv");

  // The analytic kappa = 1 case and a boundary-beta probe.
  const SpectrumSummary unit = SpectrumSummary::from_bounds(1.0, 1.0);
  const BoundConstants analytic = c0_constant(1.0, 0.25, unit);
  json extras;
  extras["kappa1_c0"] = analytic.c0;
  extras["kappa1_c0_expected"] = 1.8257;
  const BoundConstants boundary = c0_constant(1.0, admissible_beta_range(1.0, unit).lower, unit);
  extras["boundary_beta_valid"] = boundary.valid;  // reported invalid, not crashed
  result.passed = result.passed && std::abs(analytic.c0 - 1.8257) < 1e-3 && !boundary.valid;

  json top;
  top["certificates"] = certs;
  top["extras"] = extras;
  write_text_file(config.out / "certificates.json", top.dump(2) + "\n");
  result.files.push_back("certificates.json");
  return result;
}

CommandResult cmd_sweep(const ExperimentConfig& config) {
  CommandResult result;
  const std::string target = config.get_string("target", "relu");
  const int n_seeds = config.get_int("seeds", 1);
  const int cell_cap = config.get_int("cell_cap", 256);

  struct Cell {
    std::string axis;
    double value = 0.0;
    int seed_index = 0;
    std::uint64_t seed = 0;
    std::filesystem::path dir;
  };

  std::string axis;
  std::vector<double> grid;
  if (config.fields.count("m_grid")) {
    axis = "m";
    grid = config.get_double_list("m_grid", {});
  } else if (config.fields.count("kappa_grid")) {
    axis = "kappa";
    grid = config.get_double_list("kappa_grid", {});
  } else if (config.fields.count("l_grid")) {
    axis = "l";
    grid = config.get_double_list("l_grid", {});
  } else {
    throw ValidationError("sweep: declare one of m_grid, kappa_grid, l_grid");
  }

  const std::size_t n_cells = grid.size() * static_cast<std::size_t>(n_seeds);
  if (n_cells > static_cast<std::size_t>(cell_cap))
    throw ValidationError("sweep: " + std::to_string(n_cells) + " cells exceed the cap of " +
                          std::to_string(cell_cap));

  std::vector<Cell> cells;
  std::uint64_t ordinal = 0;
  for (double value : grid)
    for (int s = 0; s < n_seeds; ++s, ++ordinal) {
      Cell cell;
      cell.axis = axis;
      cell.value = value;
      cell.seed_index = s;
      cell.seed = derive_seed(config.seed, ordinal);
      cell.dir = config.out / ("cell_" + std::to_string(ordinal));
      cells.push_back(cell);
    }

  // Fixed dataset across relu cells so the concentration column is comparable.
  const std::uint64_t shared_data_seed = derive_seed(config.seed, 0xDA7A);

  std::mutex mu;
  std::vector<json> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> all_ok{true};

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      ExperimentConfig sub;
      sub.experiment = target;
      sub.seed = cell.seed;
      sub.out = cell.dir;
      sub.fields = config.fields;
      sub.fields.erase("target");
      sub.fields.erase(axis + "_grid");
      sub.fields.erase("m_grid");
      sub.fields.erase("kappa_grid");
      sub.fields.erase("l_grid");
      sub.fields.erase("cell_cap");
      sub.fields["seeds"] = "1";
      if (axis == "kappa")
        sub.fields["kappa_grid"] = format_double(cell.value);
      else
        sub.fields[axis] = std::to_string(static_cast<long>(cell.value));
      if (target == "relu") sub.fields["data_seed"] = std::to_string(shared_data_seed);
      sub.validate_keys();

      CommandResult sub_result;
      try {
        if (target == "relu")
          sub_result = cmd_relu(sub);
        else if (target == "quadratic")
          sub_result = cmd_quadratic(sub);
        else if (target == "deep-linear")
          sub_result = cmd_deep_linear(sub);
        else
          throw ValidationError("sweep: unsupported target '" + target + "'");
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        rows[i] = {{"cell", i}, {"error", e.what()}};
        all_ok = false;
        continue;
      }
      write_text_file(cell.dir / "config.txt", sub.canonical_text());

      json row;
      row["cell"] = i;
      row["axis"] = cell.axis;
      row["value"] = cell.value;
      row["seed_index"] = cell.seed_index;
      row["seed"] = cell.seed;
      row["dir"] = cell.dir.filename().string();
      row["passed"] = sub_result.passed;
      if (target == "relu") {
        const int m = static_cast<int>(cell.value);
        const ReluDataset data = make_relu_dataset(config.get_int("n", 5), config.get_int("d", 10),
                                                   shared_data_seed);
        const ReluNetwork net = init_relu(m, config.get_int("d", 10), derive_seed(cell.seed, 1000));
        row["h0_minus_hbar_fro"] = (gram_empirical(net, data).h - gram_expected(data).h).norm();
      }
      std::lock_guard<std::mutex> lock(mu);
      rows[i] = row;
      if (!sub_result.passed) all_ok = false;
      for (const auto& f : sub_result.files)
        result.files.push_back((cell.dir.filename() / f).string());
    }
  };

  const int n_workers = std::max(1, std::min(config.workers, static_cast<int>(cells.size())));
  std::vector<std::thread> threads;
  for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  for (auto& th : threads) th.join();

  json table = json::array();
  for (auto& row : rows) table.push_back(row);
  write_text_file(config.out / "sweep_summary.json", table.dump(2) + "\n");
  result.files.push_back("sweep_summary.json");
  result.passed = all_ok;
  return result;
}

int run_experiment(const ExperimentConfig& config) {
  config.validate_keys();
  RunManifest manifest;
  manifest.experiment = config.experiment;
  manifest.version = kVersion;
  manifest.started_utc = utc_now();
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(config.canonical_text());
  manifest.config_hash = hash.str();

  std::filesystem::create_directories(config.out);
  write_text_file(config.out / "config.txt", config.canonical_text());

  CommandResult result;
  if (config.experiment == "quadratic")
    result = cmd_quadratic(config);
  else if (config.experiment == "f2-local")
    result = cmd_f2_local(config);
  else if (config.experiment == "relu")
    result = cmd_relu(config);
  else if (config.experiment == "deep-linear")
    result = cmd_deep_linear(config);
  else if (config.experiment == "bound-check")
    result = cmd_bound_check(config);
  else if (config.experiment == "sweep")
    result = cmd_sweep(config);
  else
    throw ValidationError("unknown experiment '" + config.experiment + "'");

  manifest.finished_utc = utc_now();
  manifest.files = result.files;
  manifest.files.push_back("config.txt");
  manifest.passed = result.passed;
  manifest.notes = result.notes;
  write_text_file(config.out / "manifest.json", manifest.to_json());
  return result.passed ? 0 : 1;
}

}  // namespace heavyball
