#include "plapflow/run.hpp"

#include "plapflow/flow.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace plapflow {

using json = nlohmann::ordered_json;

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + ec.message());
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

namespace {

std::string norm_label(double q) {
  if (q == q_infinity) return "linf";
  std::string s = format_g17(q);
  return "l" + s;
}

json constant_json(const ConstantValue& c) {
  json j;
  j["value"] = c.value;
  j["rigor"] = c.rigor == Rigor::Rigorous ? "rigorous" : "estimated";
  j["source"] = c.source;
  return j;
}

}  // namespace

std::string trajectory_csv_text(const Trajectory& traj, const ExperimentConfig& config) {
  std::ostringstream out;
  out << "# plapflow schema_version=" << config.schema_version << " seed=" << config.seed
      << " p=" << format_g17(config.p) << "\n";
  out << "t,mass,dev_l1,dev_l2,dev_linf";
  for (double q : traj.q_extra) out << ",dev_" << norm_label(q);
  out << ",energy_p,f_u,newton_iters,eps_used\n";
  for (const DiagnosticsRecord& r : traj.records) {
    out << format_g17(r.t) << "," << format_g17(r.mass) << "," << format_g17(r.dev_l1) << ","
        << format_g17(r.dev_l2) << "," << format_g17(r.dev_linf);
    for (double v : r.dev_extra) out << "," << format_g17(v);
    out << "," << format_g17(r.energy_p) << "," << format_g17(r.f_u) << "," << r.newton_iters
        << "," << format_g17(r.eps_used) << "\n";
  }
  return out.str();
}

std::string bounds_json_text(const BoundsReport& rep) {
  json j;
  j["schema_version"] = 1;
  j["p"] = rep.p;
  j["n"] = rep.n;
  j["p0"] = rep.p0;
  j["admissible_delta_max"] = rep.admissible_delta_max;
  json gd = json::object();
  for (const auto& [delta, value] : rep.gamma_delta) gd[format_g17(delta)] = value;
  j["gamma_delta_p"] = gd;
  if (rep.gamma_tilde_np)
    j["gamma_tilde"] = *rep.gamma_tilde_np;
  else
    j["gamma_tilde"] = nullptr;
  j["gradient_coefficient"] = rep.gradient_coefficient;
  json poin = json::object();
  for (const auto& [q, c] : rep.poincare) poin[norm_label(q)] = constant_json(c);
  j["poincare"] = poin;
  json sob = json::object();
  for (const auto& [q, c] : rep.sobolev_embedding) sob[norm_label(q)] = constant_json(c);
  j["sobolev_embedding"] = sob;
  json envs = json::array();
  for (const Envelope& e : rep.envelopes) {
    json je;
    je["norm"] = norm_label(e.q);
    je["coefficient"] = e.coefficient;
    je["exponent"] = -1.0 / rep.p;
    je["rigor"] = e.rigor == Rigor::Rigorous ? "rigorous" : "estimated";
    je["constants"] = e.constants;
    envs.push_back(je);
  }
  j["envelopes"] = envs;
  if (rep.t_star) {
    json jt;
    jt["t_star"] = rep.t_star->t_star;
    jt["alpha"] = rep.t_star->alpha;
    jt["k"] = rep.t_star->k;
    jt["f0"] = rep.t_star->f0;
    jt["rigor"] = rep.t_star->rigor == Rigor::Rigorous ? "rigorous" : "estimated";
    j["t_star"] = jt;
  } else {
    j["t_star"] = nullptr;
  }
  j["muckenhoupt"] = rep.muckenhoupt;
  j["muckenhoupt_spot_check"] = rep.muckenhoupt_spot;
  return j.dump(2) + "\n";
}

namespace {

std::string diagnostics_json_text(const Trajectory& traj, const ExperimentConfig& config,
                                  const BoundsReport& rep) {
  json j;
  j["schema_version"] = 1;
  j["seed"] = config.seed;
  j["p"] = config.p;
  const DiagnosticsRecord& first = traj.records.front();
  const DiagnosticsRecord& last = traj.records.back();
  double max_drift = 0.0;
  int max_newton = 0;
  double eps_lo = q_infinity, eps_hi = 0.0;
  for (const DiagnosticsRecord& r : traj.records) {
    max_drift = std::max(max_drift, std::abs(r.mass - first.mass));
    max_newton = std::max(max_newton, r.newton_iters);
    eps_lo = std::min(eps_lo, r.eps_used);
    eps_hi = std::max(eps_hi, r.eps_used);
  }
  j["mass"] = {{"initial", first.mass}, {"final", last.mass}, {"max_drift", max_drift}};
  j["dev_l2"] = {{"initial", first.dev_l2}, {"final", last.dev_l2}};
  j["newton"] = {{"max_iterations", max_newton}};
  j["eps"] = {{"min_used", eps_lo}, {"max_used", eps_hi}};

  const double threshold = config.analysis.extinction_dev_factor * first.dev_l2;
  json ext;
  ext["threshold"] = threshold;
  if (threshold > 0.0) {
    const std::optional<double> t_ext = detect_extinction(traj, threshold);
    ext["detected"] = t_ext.has_value();
    if (t_ext) ext["t_ext"] = *t_ext;
  } else {
    ext["detected"] = first.dev_l2 == 0.0;
  }
  if (rep.t_star) ext["t_star_estimate"] = rep.t_star->t_star;
  j["extinction"] = ext;

  if (traj.records.size() >= 2) {
    const std::vector<double> res = dissipation_residual(traj);
    double worst = 0.0;
    for (double r : res) worst = std::max(worst, r);
    j["dissipation"] = {{"max_normalized_residual", worst}};
  }
  j["config"] = serialize_config(config);
  return j.dump(2) + "\n";
}

}  // namespace

RunPaths run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  const Grid grid = build_grid(config);
  const WeightField weight = build_weight(config, grid);
  const ScalarField u0 = build_initial(config, grid);
  const TimeGrid times = build_time_grid(config);
  const StepParams step = build_step_params(config);
  EnergyParams energy;
  energy.p = config.p;
  energy.weight = &weight;

  const Trajectory traj = evolve(u0, times, step, energy, config.analysis.q_extra);
  const BoundsReport rep =
      compute_bounds(weight, config.p, config.weight.n, config.analysis.deltas, &u0,
                     config.seed == 0 ? 20170601 : config.seed);

  namespace fs = std::filesystem;
  const fs::path dir(config.output.dir);
  RunPaths paths;
  paths.trajectory_csv = (dir / (config.output.prefix + "_trajectory.csv")).string();
  paths.diagnostics_json = (dir / (config.output.prefix + "_diagnostics.json")).string();
  paths.bounds_json = (dir / (config.output.prefix + "_bounds.json")).string();
  write_text_atomic(paths.trajectory_csv, trajectory_csv_text(traj, config));
  write_text_atomic(paths.diagnostics_json, diagnostics_json_text(traj, config, rep));
  write_text_atomic(paths.bounds_json, bounds_json_text(rep));
  return paths;
}

std::string run_bounds(const ExperimentConfig& config) {
  validate_config(config);
  const Grid grid = build_grid(config);
  const WeightField weight = build_weight(config, grid);
  const ScalarField u0 = build_initial(config, grid);
  const BoundsReport rep =
      compute_bounds(weight, config.p, config.weight.n, config.analysis.deltas, &u0,
                     config.seed == 0 ? 20170601 : config.seed);
  const std::string text = bounds_json_text(rep);
  namespace fs = std::filesystem;
  const fs::path dir(config.output.dir);
  write_text_atomic((dir / (config.output.prefix + "_bounds.json")).string(), text);
  return text;
}

void run_sweep(const std::vector<ExperimentConfig>& configs) {
  unsigned workers = std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  if (const char* cap = std::getenv("PLAPFLOW_THREADS")) {
    const long parsed = std::strtol(cap, nullptr, 10);
    if (parsed >= 1) workers = static_cast<unsigned>(parsed);
  }
  workers = std::min<unsigned>(workers, static_cast<unsigned>(configs.size()));
  if (workers <= 1) {
    for (const ExperimentConfig& c : configs) run_experiment(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= configs.size()) return;
          run_experiment(configs[i]);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace plapflow
