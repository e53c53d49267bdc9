// plapflow: weighted p-Laplacian Neumann gradient flow driver.
//   run    — simulate a configured trajectory, emit CSV + JSON outputs
//   bounds — compute the constants / envelope report only
//   verify — run a property suite, machine-readable pass/fail
//   fit    — log-log decay fit over a trajectory CSV
//   sweep  — run several configs in parallel worker threads

#include "plapflow/analysis.hpp"
#include "plapflow/config.hpp"
#include "plapflow/flow.hpp"
#include "plapflow/run.hpp"
#include "plapflow/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

// exit codes: 0 ok, 1 usage, 2 parse/input, 3 validation, 4 solver,
// 5 io, 6 verification failures
constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitSolver = 4;
constexpr int kExitIo = 5;
constexpr int kExitVerifyFailed = 6;

plapflow::ExperimentConfig load_overridden(const std::string& config_path,
                                           const std::string& out_dir, long long seed) {
  plapflow::ExperimentConfig config = plapflow::load_config_file(config_path);
  if (!out_dir.empty()) config.output.dir = out_dir;
  if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
  return config;
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  double p = 0.0;
  bool has_p = false;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);
  CsvTable table;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream meta(line.substr(1));
      std::string tok;
      while (meta >> tok) {
        const std::size_t eq = tok.find('=');
        if (eq != std::string::npos && tok.substr(0, eq) == "p") {
          table.p = std::stod(tok.substr(eq + 1));
          table.has_p = true;
        }
      }
      continue;
    }
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!header_seen) {
      table.columns = cells;
      header_seen = true;
      continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& c : cells) row.push_back(std::stod(c));
    table.rows.push_back(std::move(row));
  }
  if (!header_seen) throw std::runtime_error("CSV has no header line: " + path);
  return table;
}

int cmd_fit(const std::string& csv_path, const std::string& norm, double t_min, double t_max) {
  const CsvTable table = read_csv(csv_path);
  const std::string column = "dev_" + norm;
  int t_col = -1, dev_col = -1;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (table.columns[i] == "t") t_col = static_cast<int>(i);
    if (table.columns[i] == column) dev_col = static_cast<int>(i);
  }
  if (t_col < 0 || dev_col < 0) {
    std::cerr << "fit: missing column '" << (t_col < 0 ? "t" : column) << "' in " << csv_path
              << "\n";
    return kExitParse;
  }

  std::vector<double> xs, ys;
  bool extinct = false;
  for (const std::vector<double>& row : table.rows) {
    const double t = row[static_cast<std::size_t>(t_col)];
    const double dev = row[static_cast<std::size_t>(dev_col)];
    if (t < t_min || t > t_max || !(t > 0.0)) continue;
    if (!(dev > 0.0)) {
      extinct = true;
      continue;
    }
    xs.push_back(std::log(t));
    ys.push_back(std::log(dev));
  }
  if (extinct) {
    std::cout << "extinct: nonpositive deviations inside the window; no power-law fit\n";
    return 0;
  }
  if (xs.size() < 5) {
    std::cerr << "fit: window [" << t_min << ", " << t_max << "] holds only " << xs.size()
              << " usable points (need 5)\n";
    return kExitParse;
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - my - slope * (xs[i] - mx);
    ssr += r * r;
  }
  const double se =
      std::sqrt(ssr / (static_cast<double>(xs.size()) - 2.0) / sxx);

  std::cout << "points = " << xs.size() << "\n";
  std::cout << "slope = " << plapflow::format_g17(slope) << "\n";
  std::cout << "stderr = " << plapflow::format_g17(se) << "\n";
  if (table.has_p) {
    const double bound = -1.0 / table.p;
    std::cout << "bound_slope (-1/p) = " << plapflow::format_g17(bound) << "\n";
    std::cout << "respects_bound = " << (slope <= bound + 0.05 ? "yes" : "no") << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weighted p-Laplacian Neumann gradient flow: solver, bounds and checks"};
  app.require_subcommand(1);

  std::string config_path, out_dir, suite = "all", csv_path, norm = "l1";
  long long seed = -1;
  double t_min = 0.0, t_max = plapflow::q_infinity;
  std::vector<std::string> sweep_configs;

  CLI::App* run = app.add_subcommand("run", "simulate and emit trajectory/diagnostics/bounds");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--out", out_dir, "output directory override");
  run->add_option("--seed", seed, "seed override");

  CLI::App* bounds = app.add_subcommand("bounds", "emit the bounds report only");
  bounds->add_option("--config", config_path, "config file")->required();
  bounds->add_option("--out", out_dir, "output directory override");
  bounds->add_option("--seed", seed, "seed override");

  CLI::App* verify = app.add_subcommand("verify", "run a property suite");
  verify->add_option("--suite", suite, "semigroup | decay | extinction | oracles | all");
  verify->add_option("--out", out_dir, "directory for the JSON report");

  CLI::App* fit = app.add_subcommand("fit", "log-log decay fit over a trajectory CSV");
  fit->add_option("--csv", csv_path, "trajectory CSV")->required();
  fit->add_option("--norm", norm, "deviation column: l1 | l2 | linf | l<q>");
  fit->add_option("--tmin", t_min, "window start")->required();
  fit->add_option("--tmax", t_max, "window end")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "run several configs in parallel");
  sweep->add_option("--config", sweep_configs, "config files")->required()->expected(-1);
  sweep->add_option("--seed", seed, "seed override for every run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (run->parsed()) {
      const plapflow::RunPaths paths =
          plapflow::run_experiment(load_overridden(config_path, out_dir, seed));
      std::cout << paths.trajectory_csv << "\n"
                << paths.diagnostics_json << "\n"
                << paths.bounds_json << "\n";
      return 0;
    }
    if (bounds->parsed()) {
      std::cout << plapflow::run_bounds(load_overridden(config_path, out_dir, seed));
      return 0;
    }
    if (verify->parsed()) {
      std::vector<plapflow::CheckResult> results;
      try {
        results = plapflow::run_verify_suite(suite);
      } catch (const std::invalid_argument& e) {
        std::cerr << "verify: " << e.what() << "\n";
        return kExitUsage;
      }
      nlohmann::ordered_json report;
      report["suite"] = suite;
      bool all_ok = true;
      nlohmann::ordered_json checks = nlohmann::ordered_json::array();
      for (const plapflow::CheckResult& r : results) {
        checks.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
        all_ok = all_ok && r.passed;
        std::cerr << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << " (" << r.detail << ")\n";
      }
      report["checks"] = checks;
      report["passed"] = all_ok;
      const std::string text = report.dump(2) + "\n";
      std::cout << text;
      if (!out_dir.empty())
        plapflow::write_text_atomic(out_dir + "/verify_" + suite + ".json", text);
      return all_ok ? 0 : kExitVerifyFailed;
    }
    if (fit->parsed()) return cmd_fit(csv_path, norm, t_min, t_max);
    if (sweep->parsed()) {
      std::vector<plapflow::ExperimentConfig> configs;
      configs.reserve(sweep_configs.size());
      for (const std::string& path : sweep_configs)
        configs.push_back(load_overridden(path, "", seed));
      plapflow::run_sweep(configs);
      return 0;
    }
  } catch (const plapflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    const std::string what = e.what();
    return what.find("excluded parameter") != std::string::npos ? kExitValidation : kExitParse;
  } catch (const plapflow::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const plapflow::NewtonDivergence& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
