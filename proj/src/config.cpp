#include "plapflow/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace plapflow {

namespace {

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct RawConfig {
  // (section, key) -> (value, line)
  std::map<std::pair<std::string, std::string>, std::pair<std::string, int>> entries;
  std::string origin;

  const std::string* find(const std::string& sec, const std::string& key) const {
    auto it = entries.find({sec, key});
    return it == entries.end() ? nullptr : &it->second.first;
  }
};

RawConfig tokenize(const std::string& text, const std::string& origin) {
  RawConfig raw;
  raw.origin = origin;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!raw.entries.emplace(std::pair{section, key}, std::pair{value, lineno}).second)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                        "' in [" + section + "]");
  }
  return raw;
}

class Reader {
 public:
  Reader(const RawConfig& raw) : raw_(raw) {}

  std::string str(const std::string& sec, const std::string& key, const std::string& def) {
    mark(sec, key);
    const std::string* v = raw_.find(sec, key);
    return v ? *v : def;
  }
  double num(const std::string& sec, const std::string& key, double def) {
    mark(sec, key);
    const std::string* v = raw_.find(sec, key);
    if (!v) return def;
    return parse_double(sec, key, *v);
  }
  int integer(const std::string& sec, const std::string& key, int def) {
    mark(sec, key);
    const std::string* v = raw_.find(sec, key);
    if (!v) return def;
    try {
      std::size_t used = 0;
      const long long x = std::stoll(*v, &used);
      if (used != v->size()) throw std::invalid_argument("");
      return static_cast<int>(x);
    } catch (...) {
      fail(sec, key, "expected an integer, got '" + *v + "'");
    }
    return def;
  }
  std::uint64_t uinteger(const std::string& sec, const std::string& key, std::uint64_t def) {
    mark(sec, key);
    const std::string* v = raw_.find(sec, key);
    if (!v) return def;
    try {
      std::size_t used = 0;
      const unsigned long long x = std::stoull(*v, &used);
      if (used != v->size()) throw std::invalid_argument("");
      return x;
    } catch (...) {
      fail(sec, key, "expected a nonnegative integer, got '" + *v + "'");
    }
    return def;
  }
  std::vector<double> list(const std::string& sec, const std::string& key) {
    mark(sec, key);
    const std::string* v = raw_.find(sec, key);
    std::vector<double> out;
    if (!v) return out;
    std::istringstream in(*v);
    std::string tok;
    while (in >> tok) out.push_back(parse_double(sec, key, tok));
    return out;
  }

  void check_unknown() const {
    for (const auto& [sk, vl] : raw_.entries)
      if (!seen_.count(sk))
        throw ConfigError(raw_.origin + ":" + std::to_string(vl.second) + ": unknown key '" +
                          sk.second + "' in [" + sk.first + "]");
  }

 private:
  void mark(const std::string& sec, const std::string& key) { seen_.insert({sec, key}); }
  [[noreturn]] void fail(const std::string& sec, const std::string& key,
                         const std::string& what) {
    auto it = raw_.entries.find({sec, key});
    const int line = it == raw_.entries.end() ? 0 : it->second.second;
    throw ConfigError(raw_.origin + ":" + std::to_string(line) + ": key '" + key + "' in [" +
                      sec + "]: " + what);
  }
  double parse_double(const std::string& sec, const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("");
      return x;
    } catch (...) {
      fail(sec, key, "expected a number, got '" + v + "'");
    }
  }

  const RawConfig& raw_;
  std::set<std::pair<std::string, std::string>> seen_;
};

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  const RawConfig raw = tokenize(text, origin);
  Reader r(raw);
  ExperimentConfig c;
  c.schema_version = r.integer("", "schema_version", 1);
  if (c.schema_version != 1)
    throw ConfigError(origin + ": unsupported schema_version " +
                      std::to_string(c.schema_version));
  c.seed = r.uinteger("", "seed", 0);

  c.grid.nx = r.integer("grid", "nx", c.grid.nx);
  c.grid.ny = r.integer("grid", "ny", c.grid.ny);
  c.grid.x0 = r.num("grid", "x0", c.grid.x0);
  c.grid.y0 = r.num("grid", "y0", c.grid.y0);
  c.grid.lx = r.num("grid", "lx", c.grid.lx);
  c.grid.ly = r.num("grid", "ly", c.grid.ly);

  const std::string family = r.str("weight", "family", "constant");
  if (family == "constant") {
    c.weight.spec.family = WeightFamily::Constant;
  } else if (family == "power") {
    c.weight.spec.family = WeightFamily::Power;
  } else if (family == "checkerboard") {
    c.weight.spec.family = WeightFamily::Checkerboard;
  } else if (family == "table") {
    c.weight.spec.family = WeightFamily::Table;
  } else {
    throw ConfigError(origin + ": [weight] family must be one of constant | power | "
                      "checkerboard | table, got '" + family + "'");
  }
  c.weight.spec.c = r.num("weight", "c", c.weight.spec.c);
  c.weight.spec.center_x = r.num("weight", "center_x", c.weight.spec.center_x);
  c.weight.spec.center_y = r.num("weight", "center_y", c.weight.spec.center_y);
  c.weight.spec.alpha = r.num("weight", "alpha", c.weight.spec.alpha);
  c.weight.spec.floor = r.num("weight", "floor", c.weight.spec.floor);
  c.weight.spec.scale = r.num("weight", "scale", c.weight.spec.scale);
  c.weight.spec.c1 = r.num("weight", "c1", c.weight.spec.c1);
  c.weight.spec.c2 = r.num("weight", "c2", c.weight.spec.c2);
  c.weight.spec.cell_values = r.list("weight", "cell_values");
  c.weight.n = r.integer("weight", "n", c.weight.n);

  c.p = r.num("energy", "p", c.p);

  const std::string kind = r.str("initial", "kind", "cosine");
  if (kind == "constant") {
    c.initial.kind = InitialKind::Constant;
  } else if (kind == "cosine") {
    c.initial.kind = InitialKind::Cosine;
  } else if (kind == "smooth_random") {
    c.initial.kind = InitialKind::SmoothRandom;
  } else if (kind == "step") {
    c.initial.kind = InitialKind::Step;
  } else {
    throw ConfigError(origin + ": [initial] kind must be one of constant | cosine | "
                      "smooth_random | step, got '" + kind + "'");
  }
  c.initial.amplitude = r.num("initial", "amplitude", c.initial.amplitude);
  c.initial.mode_x = r.integer("initial", "mode_x", c.initial.mode_x);
  c.initial.mode_y = r.integer("initial", "mode_y", c.initial.mode_y);

  const std::string tkind = r.str("time", "kind", "uniform");
  if (tkind == "uniform") {
    c.time.kind = TimeKind::Uniform;
  } else if (tkind == "geometric") {
    c.time.kind = TimeKind::Geometric;
  } else if (tkind == "explicit") {
    c.time.kind = TimeKind::Explicit;
  } else {
    throw ConfigError(origin + ": [time] kind must be uniform | geometric | explicit, got '" +
                      tkind + "'");
  }
  c.time.t_end = r.num("time", "t_end", c.time.t_end);
  c.time.steps = r.integer("time", "steps", c.time.steps);
  c.time.t0 = r.num("time", "t0", c.time.t0);
  c.time.ratio = r.num("time", "ratio", c.time.ratio);
  c.time.times = r.list("time", "times");

  c.step.h = r.num("step", "h", c.step.h);
  c.step.newton_tol = r.num("step", "newton_tol", c.step.newton_tol);
  c.step.max_newton = r.integer("step", "max_newton", c.step.max_newton);
  c.step.linear_tol = r.num("step", "linear_tol", c.step.linear_tol);
  const std::string ekind = r.str("step", "eps_policy", "fixed");
  if (ekind == "fixed") {
    c.step.eps_kind = EpsKind::Fixed;
  } else if (ekind == "adaptive") {
    c.step.eps_kind = EpsKind::Adaptive;
  } else {
    throw ConfigError(origin + ": [step] eps_policy must be fixed | adaptive, got '" + ekind +
                      "'");
  }
  c.step.eps = r.num("step", "eps", c.step.eps);
  c.step.eps0 = r.num("step", "eps0", c.step.eps0);
  c.step.theta = r.num("step", "theta", c.step.theta);
  c.step.eps_min = r.num("step", "eps_min", c.step.eps_min);

  c.analysis.q_extra = r.list("analysis", "q_extra");
  c.analysis.deltas = r.list("analysis", "deltas");
  c.analysis.extinction_dev_factor =
      r.num("analysis", "extinction_dev_factor", c.analysis.extinction_dev_factor);

  c.output.dir = r.str("output", "dir", c.output.dir);
  c.output.prefix = r.str("output", "prefix", c.output.prefix);

  r.check_unknown();
  validate_config(c);
  return c;
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "schema_version = " << c.schema_version << "\n";
  out << "seed = " << c.seed << "\n\n";

  out << "[grid]\n";
  out << "nx = " << c.grid.nx << "\n";
  out << "ny = " << c.grid.ny << "\n";
  out << "x0 = " << g17(c.grid.x0) << "\n";
  out << "y0 = " << g17(c.grid.y0) << "\n";
  out << "lx = " << g17(c.grid.lx) << "\n";
  out << "ly = " << g17(c.grid.ly) << "\n\n";

  out << "[weight]\n";
  const char* families[] = {"constant", "power", "checkerboard", "table"};
  out << "family = " << families[static_cast<int>(c.weight.spec.family)] << "\n";
  out << "c = " << g17(c.weight.spec.c) << "\n";
  out << "center_x = " << g17(c.weight.spec.center_x) << "\n";
  out << "center_y = " << g17(c.weight.spec.center_y) << "\n";
  out << "alpha = " << g17(c.weight.spec.alpha) << "\n";
  out << "floor = " << g17(c.weight.spec.floor) << "\n";
  out << "scale = " << g17(c.weight.spec.scale) << "\n";
  out << "c1 = " << g17(c.weight.spec.c1) << "\n";
  out << "c2 = " << g17(c.weight.spec.c2) << "\n";
  if (!c.weight.spec.cell_values.empty()) {
    out << "cell_values =";
    for (double v : c.weight.spec.cell_values) out << " " << g17(v);
    out << "\n";
  }
  out << "n = " << c.weight.n << "\n\n";

  out << "[energy]\n";
  out << "p = " << g17(c.p) << "\n\n";

  out << "[initial]\n";
  const char* kinds[] = {"constant", "cosine", "smooth_random", "step"};
  out << "kind = " << kinds[static_cast<int>(c.initial.kind)] << "\n";
  out << "amplitude = " << g17(c.initial.amplitude) << "\n";
  out << "mode_x = " << c.initial.mode_x << "\n";
  out << "mode_y = " << c.initial.mode_y << "\n\n";

  out << "[time]\n";
  const char* tkinds[] = {"uniform", "geometric", "explicit"};
  out << "kind = " << tkinds[static_cast<int>(c.time.kind)] << "\n";
  out << "t_end = " << g17(c.time.t_end) << "\n";
  out << "steps = " << c.time.steps << "\n";
  out << "t0 = " << g17(c.time.t0) << "\n";
  out << "ratio = " << g17(c.time.ratio) << "\n";
  if (!c.time.times.empty()) {
    out << "times =";
    for (double v : c.time.times) out << " " << g17(v);
    out << "\n";
  }
  out << "\n[step]\n";
  out << "h = " << g17(c.step.h) << "\n";
  out << "newton_tol = " << g17(c.step.newton_tol) << "\n";
  out << "max_newton = " << c.step.max_newton << "\n";
  out << "linear_tol = " << g17(c.step.linear_tol) << "\n";
  out << "eps_policy = " << (c.step.eps_kind == EpsKind::Fixed ? "fixed" : "adaptive") << "\n";
  out << "eps = " << g17(c.step.eps) << "\n";
  out << "eps0 = " << g17(c.step.eps0) << "\n";
  out << "theta = " << g17(c.step.theta) << "\n";
  out << "eps_min = " << g17(c.step.eps_min) << "\n\n";

  out << "[analysis]\n";
  if (!c.analysis.q_extra.empty()) {
    out << "q_extra =";
    for (double v : c.analysis.q_extra) out << " " << g17(v);
    out << "\n";
  }
  if (!c.analysis.deltas.empty()) {
    out << "deltas =";
    for (double v : c.analysis.deltas) out << " " << g17(v);
    out << "\n";
  }
  out << "extinction_dev_factor = " << g17(c.analysis.extinction_dev_factor) << "\n\n";

  out << "[output]\n";
  out << "dir = " << c.output.dir << "\n";
  out << "prefix = " << c.output.prefix << "\n";
  return out.str();
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

void validate_config(const ExperimentConfig& c) {
  if (c.grid.nx < 2 || c.grid.ny < 2)
    throw ConfigError("[grid] nx and ny must be >= 2");
  if (!(c.grid.lx > 0.0) || !(c.grid.ly > 0.0))
    throw ConfigError("[grid] lx and ly must be > 0");

  if (c.p == 2.0)
    throw ConfigError("[energy] excluded parameter p = 2: the linear case is not supported");
  if (!(c.p > 1.0)) throw ConfigError("[energy] p must be > 1");

  if (!(std::isfinite(c.initial.amplitude)))
    throw ConfigError("[initial] amplitude must be finite");
  if (c.initial.kind == InitialKind::Cosine && (c.initial.mode_x < 0 || c.initial.mode_y < 0))
    throw ConfigError("[initial] cosine modes must be >= 0");

  switch (c.time.kind) {
    case TimeKind::Uniform:
      if (!(c.time.t_end > 0.0) || c.time.steps < 1)
        throw ConfigError("[time] uniform grid needs t_end > 0 and steps >= 1");
      break;
    case TimeKind::Geometric:
      if (!(c.time.t0 > 0.0) || !(c.time.t_end > c.time.t0) || !(c.time.ratio > 1.0))
        throw ConfigError("[time] geometric grid needs 0 < t0 < t_end and ratio > 1");
      break;
    case TimeKind::Explicit: {
      if (c.time.times.empty()) throw ConfigError("[time] explicit grid needs times");
      double prev = 0.0;
      for (double t : c.time.times) {
        if (!(t > prev))
          throw ConfigError("[time] times must be strictly increasing and positive");
        prev = t;
      }
      break;
    }
  }

  if (!(c.step.h > 0.0)) throw ConfigError("[step] h must be > 0");
  if (!(c.step.newton_tol > 0.0)) throw ConfigError("[step] newton_tol must be > 0");
  if (c.step.max_newton < 1) throw ConfigError("[step] max_newton must be >= 1");
  if (!(c.step.linear_tol > 0.0)) throw ConfigError("[step] linear_tol must be > 0");
  if (c.step.eps_kind == EpsKind::Fixed && !(c.step.eps >= 0.0))
    throw ConfigError("[step] eps must be >= 0");
  if (c.step.eps_kind == EpsKind::Adaptive &&
      (!(c.step.theta > 0.0) || !(c.step.eps_min > 0.0)))
    throw ConfigError("[step] adaptive eps policy needs theta > 0 and eps_min > 0");
  if (c.step.eps_kind == EpsKind::Fixed && c.step.eps == 0.0 && c.p < 2.0)
    throw ConfigError("[step] p < 2 needs regularization: set eps > 0 or eps_policy = adaptive");

  for (double q : c.analysis.q_extra)
    if (!(q >= 1.0)) throw ConfigError("[analysis] q_extra entries must be >= 1");
  if (!(c.analysis.extinction_dev_factor > 0.0))
    throw ConfigError("[analysis] extinction_dev_factor must be > 0");

  // weight gates, including the Muckenhoupt parameter range for power weights
  const WeightSpec& w = c.weight.spec;
  if (c.weight.n < 2) throw ConfigError("[weight] n must be >= 2");
  switch (w.family) {
    case WeightFamily::Constant:
      if (!(w.c > 0.0)) throw ConfigError("[weight] c must be > 0");
      break;
    case WeightFamily::Power:
      if (w.alpha < 0.0)
        throw ConfigError("[weight] power weights with alpha < 0 are unbounded and rejected");
      if (!muckenhoupt_admissible(w, c.p, c.weight.n))
        throw ConfigError("[weight] power weight outside the Muckenhoupt range: need 0 <= "
                          "alpha < n(p-1)");
      if (w.floor < 0.0) throw ConfigError("[weight] floor must be >= 0");
      if (!(w.scale > 0.0)) throw ConfigError("[weight] scale must be > 0");
      break;
    case WeightFamily::Checkerboard:
      if (!(w.c1 > 0.0) || !(w.c2 > 0.0)) throw ConfigError("[weight] c1, c2 must be > 0");
      break;
    case WeightFamily::Table:
      if (w.cell_values.empty()) throw ConfigError("[weight] table needs cell_values");
      if (static_cast<int>(w.cell_values.size()) != (c.grid.nx - 1) * (c.grid.ny - 1))
        throw ConfigError("[weight] table needs one value per grid cell (" +
                          std::to_string((c.grid.nx - 1) * (c.grid.ny - 1)) + ")");
      for (double v : w.cell_values)
        if (!(v > 0.0)) throw ConfigError("[weight] table values must be > 0");
      break;
  }

  // delta list against the admissible range, using the closed-form p0
  {
    const Grid g = plapflow::build_grid(c.grid.nx, c.grid.ny, c.grid.x0, c.grid.y0, c.grid.lx,
                                        c.grid.ly);
    const WeightField wf = make_weight(g, w, c.weight.n);
    const double dmax = admissible_delta_max(wf, c.p);
    for (double d : c.analysis.deltas)
      if (!(d >= 0.0) || !(d < dmax))
        throw ConfigError("[analysis] delta " + std::to_string(d) +
                          " outside the admissible range [0, " + std::to_string(dmax) + ")");
  }
}

Grid build_grid(const ExperimentConfig& c) {
  return build_grid(c.grid.nx, c.grid.ny, c.grid.x0, c.grid.y0, c.grid.lx, c.grid.ly);
}

WeightField build_weight(const ExperimentConfig& c, const Grid& g) {
  return make_weight(g, c.weight.spec, c.weight.n);
}

namespace {

double unit_from(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z = z ^ (z >> 31);
  return 2.0 * (static_cast<double>(z >> 11) * 0x1.0p-53) - 1.0;
}

}  // namespace

ScalarField build_initial(const ExperimentConfig& c, const Grid& g) {
  const double a = c.initial.amplitude;
  switch (c.initial.kind) {
    case InitialKind::Constant:
      return ScalarField(g, a);
    case InitialKind::Cosine:
      return sample_nodes(g, [&](double x, double y) {
        return a * std::cos(c.initial.mode_x * M_PI * (x - g.x0) / g.lx) *
               std::cos(c.initial.mode_y * M_PI * (y - g.y0) / g.ly);
      });
    case InitialKind::SmoothRandom: {
      const int kmax = 4;
      double coeff[kmax + 1][kmax + 1];
      std::uint64_t state = c.seed;
      for (int j = 0; j <= kmax; ++j)
        for (int k = 0; k <= kmax; ++k)
          coeff[j][k] = unit_from(state) / (1.0 + j * j + k * k);
      ScalarField u = sample_nodes(g, [&](double x, double y) {
        double acc = 0.0;
        for (int j = 0; j <= kmax; ++j)
          for (int k = 0; k <= kmax; ++k)
            acc += coeff[j][k] * std::cos(j * M_PI * (x - g.x0) / g.lx) *
                   std::cos(k * M_PI * (y - g.y0) / g.ly);
        return acc;
      });
      const double m = lq_norm(u, q_infinity);
      if (m > 0.0)
        for (double& v : u.values) v *= a / m;
      return u;
    }
    case InitialKind::Step:
      return sample_nodes(g, [&](double x, double) {
        return x - g.x0 < 0.5 * g.lx ? a : -a;
      });
  }
  throw std::logic_error("build_initial: unknown kind");
}

TimeGrid build_time_grid(const ExperimentConfig& c) {
  switch (c.time.kind) {
    case TimeKind::Uniform:
      return TimeGrid::uniform(c.time.t_end, c.time.steps);
    case TimeKind::Geometric:
      return TimeGrid::geometric(c.time.t0, c.time.t_end, c.time.ratio);
    case TimeKind::Explicit:
      return TimeGrid::explicit_times(c.time.times);
  }
  throw std::logic_error("build_time_grid: unknown kind");
}

StepParams build_step_params(const ExperimentConfig& c) {
  StepParams s;
  s.h = c.step.h;
  s.newton_tol = c.step.newton_tol;
  s.max_newton = c.step.max_newton;
  s.linear_tol = c.step.linear_tol;
  if (c.step.eps_kind == EpsKind::Fixed)
    s.eps_policy = FixedEps{c.step.eps};
  else
    s.eps_policy = AdaptiveEps{c.step.eps0, c.step.theta, c.step.eps_min};
  return s;
}

}  // namespace plapflow
