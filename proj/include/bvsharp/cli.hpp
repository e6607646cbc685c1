#pragma once

/**
 * @file cli.hpp
 * @brief Batch experiment runner: flat key = value configuration, task
 *        dispatch, and JSON/CSV report assembly.
 *
 * Reports are pure functions of the configuration. Nothing time- or
 * host-dependent is written, so identical inputs give byte-identical files.
 */

#include <bvsharp/constants.hpp>
#include <bvsharp/error.hpp>
#include <bvsharp/geometry.hpp>
#include <bvsharp/surfaces.hpp>
#include <bvsharp/test_functions.hpp>
#include <bvsharp/tv_solver.hpp>

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bvsharp::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Malformed or out-of-range configuration.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class Task {
  Constants,
  DomainCertificate,
  DomainSweep,
  Solve,
  SurfaceClassify,
  SphereCertificate,
  ExpansionAudit,
};

[[nodiscard]] inline std::string to_string(Task t) {
  switch (t) {
    case Task::Constants: return "constants";
    case Task::DomainCertificate: return "domain-certificate";
    case Task::DomainSweep: return "domain-sweep";
    case Task::Solve: return "solve";
    case Task::SurfaceClassify: return "surface-classify";
    case Task::SphereCertificate: return "sphere-certificate";
    case Task::ExpansionAudit: return "expansion-audit";
  }
  return "unknown";
}

[[nodiscard]] inline std::optional<Task> parse_task(std::string_view name) {
  for (Task t : {Task::Constants, Task::DomainCertificate, Task::DomainSweep, Task::Solve,
                 Task::SurfaceClassify, Task::SphereCertificate, Task::ExpansionAudit}) {
    if (to_string(t) == name) return t;
  }
  return std::nullopt;
}

/// One `key = value` assignment and where it came from (line 0 = flag).
struct Assignment {
  std::string key;
  std::string value;
  int line = 0;
};

/// Surface target of the surface tasks.
struct SurfaceSpec {
  SurfaceKind kind = SurfaceKind::RoundSphere;
  double a = 1.0;
  double c = 1.0;

  [[nodiscard]] SurfaceModel build() const {
    switch (kind) {
      case SurfaceKind::RoundSphere: return SurfaceModel::round_sphere(a);
      case SurfaceKind::Spheroid: return SurfaceModel::spheroid(a, c);
      case SurfaceKind::FlatTorus: return SurfaceModel::flat_torus(a, c);
    }
    throw ConfigError("unknown surface kind");
  }
};

struct ExperimentConfig {
  Task task = Task::Constants;
  int n = 2;
  int n_min = 2;
  int n_max = 10;
  std::optional<DomainSpec> domain;
  std::optional<SurfaceSpec> surface;
  std::vector<double> q{1.0};
  double h = 1.0 / 256.0;
  std::optional<double> eps_min;
  std::optional<double> eps_max;
  int eps_count = 24;
  std::vector<double> eps{0.05, 0.1, 0.2};
  SolverConfig solver;
  bool use_solver = false;
  std::string out = "out";
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string where(const Assignment& a) {
  return a.line > 0 ? "line " + std::to_string(a.line) + ": " : "flag --" + a.key + ": ";
}

inline double to_double(const Assignment& a) {
  const std::string& s = a.value;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
    throw ConfigError(where(a) + "'" + a.key + "' expects a number, got '" + s + "'");
  return v;
}

inline long long to_integer(const Assignment& a) {
  const std::string& s = a.value;
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw ConfigError(where(a) + "'" + a.key + "' expects an integer, got '" + s + "'");
  return v;
}

inline int to_int(const Assignment& a) {
  const long long v = to_integer(a);
  if (v < -1000000000LL || v > 1000000000LL)
    throw ConfigError(where(a) + "'" + a.key + "' is out of range");
  return static_cast<int>(v);
}

inline bool to_bool(const Assignment& a) {
  if (a.value == "true" || a.value == "1" || a.value == "yes") return true;
  if (a.value == "false" || a.value == "0" || a.value == "no") return false;
  throw ConfigError(where(a) + "'" + a.key + "' expects true or false, got '" + a.value + "'");
}

inline std::vector<double> to_list(const Assignment& a) {
  std::vector<double> out;
  std::stringstream ss(a.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    Assignment one{a.key, trim(item), a.line};
    out.push_back(to_double(one));
  }
  if (out.empty()) throw ConfigError(where(a) + "'" + a.key + "' expects a comma-separated list");
  return out;
}

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "task",      "n",          "n_min",        "n_max",      "shape",           "radius",
      "a",         "b",          "c",            "center_x",   "center_y",        "r0",
      "cos",       "sin",        "surface",      "q",          "h",               "eps_min",
      "eps_max",   "eps_count",  "eps",          "iterations", "initial_step",    "step_decay",
      "restarts",  "seed",       "smoothing_width", "tolerance", "stall_window", "backtracking",
      "perturbation", "use_solver", "out"};
  return keys;
}

}  // namespace detail

/// Splits config text into assignments. Blank lines and '#' comments are
/// skipped; a key may appear only once.
[[nodiscard]] inline std::vector<Assignment> parse_assignments(std::string_view text) {
  std::vector<Assignment> out;
  std::map<std::string, int> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    Assignment a{detail::trim(std::string_view(body).substr(0, eq)),
                 detail::trim(std::string_view(body).substr(eq + 1)), line_no};
    if (a.key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    const auto& keys = detail::known_keys();
    if (std::find(keys.begin(), keys.end(), a.key) == keys.end())
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + a.key + "'");
    if (auto [it, fresh] = seen.emplace(a.key, line_no); !fresh)
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + a.key +
                        "' (first on line " + std::to_string(it->second) + ")");
    out.push_back(std::move(a));
  }
  return out;
}

/// Builds and validates a configuration. Overrides (command-line flags) win
/// over file assignments with the same key.
[[nodiscard]] inline ExperimentConfig build_config(const std::vector<Assignment>& file,
                                                   const std::vector<Assignment>& overrides = {}) {
  std::map<std::string, Assignment> kv;
  for (const auto& a : file) kv[a.key] = a;
  const auto& keys = detail::known_keys();
  for (const auto& a : overrides) {
    if (std::find(keys.begin(), keys.end(), a.key) == keys.end())
      throw ConfigError("unknown flag --" + a.key);
    kv[a.key] = a;
  }
  const auto get = [&](const std::string& key) -> const Assignment* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  const auto num = [&](const std::string& key, double fallback) {
    const Assignment* a = get(key);
    return a ? detail::to_double(*a) : fallback;
  };
  const auto fail = [&](const std::string& key, const std::string& msg) -> ConfigError {
    const Assignment* a = get(key);
    return ConfigError((a ? detail::where(*a) : std::string()) + key + ": " + msg);
  };

  ExperimentConfig cfg;
  const Assignment* task = get("task");
  if (!task) throw ConfigError("missing 'task'");
  const auto parsed = parse_task(task->value);
  if (!parsed) throw ConfigError(detail::where(*task) + "unknown task '" + task->value + "'");
  cfg.task = *parsed;

  if (const Assignment* a = get("n")) {
    cfg.n = detail::to_int(*a);
    if (cfg.n < 2) throw fail("n", "must be >= 2");
    cfg.n_min = cfg.n_max = cfg.n;
  }
  if (const Assignment* a = get("n_min")) cfg.n_min = detail::to_int(*a);
  if (const Assignment* a = get("n_max")) cfg.n_max = detail::to_int(*a);
  if (cfg.n_min < 2) throw fail("n_min", "must be >= 2");
  if (cfg.n_max < cfg.n_min) throw fail("n_max", "must be >= n_min");
  if (cfg.n_max > 200) throw fail("n_max", "must be <= 200");

  if (const Assignment* a = get("q")) cfg.q = detail::to_list(*a);
  const bool two_dimensional_task = cfg.task != Task::Constants;
  if (two_dimensional_task && cfg.n != 2)
    throw fail("n", "task '" + to_string(cfg.task) + "' supports n = 2 only");
  const double q_hi = critical_exponent(cfg.n);
  for (double q : cfg.q)
    if (!(q > 0.0) || !(q < q_hi))
      throw fail("q", "must lie in (0, n/(n-1)) = (0, " + std::to_string(q_hi) + ")");

  if (const Assignment* a = get("h")) {
    cfg.h = detail::to_double(*a);
    if (!(cfg.h > 0.0) || cfg.h > 0.1) throw fail("h", "must lie in (0, 0.1]");
  }
  if (get("eps_min")) cfg.eps_min = num("eps_min", 0.0);
  if (get("eps_max")) cfg.eps_max = num("eps_max", 0.0);
  if (cfg.eps_min && !(*cfg.eps_min > 0.0)) throw fail("eps_min", "must be > 0");
  if (cfg.eps_max && !(*cfg.eps_max > 0.0)) throw fail("eps_max", "must be > 0");
  if (cfg.eps_min && cfg.eps_max && !(*cfg.eps_max > *cfg.eps_min))
    throw fail("eps_max", "must exceed eps_min");
  if (const Assignment* a = get("eps_count")) {
    cfg.eps_count = detail::to_int(*a);
    if (cfg.eps_count < 2 || cfg.eps_count > 10000) throw fail("eps_count", "must lie in [2, 10000]");
  }
  if (const Assignment* a = get("eps")) {
    cfg.eps = detail::to_list(*a);
    for (double e : cfg.eps)
      if (!(e > 0.0)) throw fail("eps", "entries must be > 0");
    if (cfg.eps.size() < 2) throw fail("eps", "needs at least two entries");
  }

  // Target: a planar domain or a surface, never both.
  const bool has_shape = get("shape") != nullptr;
  const bool has_surface = get("surface") != nullptr;
  if (has_shape && has_surface) throw fail("surface", "'shape' and 'surface' are exclusive");
  const Vec2 center{num("center_x", 0.0), num("center_y", 0.0)};
  if (has_shape) {
    const std::string& shape = get("shape")->value;
    if (shape == "disk") {
      cfg.domain = DomainSpec::disk(num("radius", 1.0), center);
    } else if (shape == "ellipse") {
      cfg.domain = DomainSpec::ellipse(num("a", 2.0), num("b", 1.0), center);
    } else if (shape == "fourier") {
      std::vector<double> cs, sn;
      if (const Assignment* a = get("cos")) cs = detail::to_list(*a);
      if (const Assignment* a = get("sin")) sn = detail::to_list(*a);
      cfg.domain = DomainSpec::fourier(num("r0", 1.0), cs, sn, center);
    } else {
      throw fail("shape", "must be disk, ellipse or fourier, got '" + shape + "'");
    }
    try {
      (void)BoundaryCurve(*cfg.domain);
    } catch (const std::exception& e) {
      throw fail("shape", e.what());
    }
  }
  if (has_surface) {
    const std::string& kind = get("surface")->value;
    SurfaceSpec s;
    if (kind == "sphere") {
      s = {SurfaceKind::RoundSphere, num("radius", 1.0), num("radius", 1.0)};
    } else if (kind == "spheroid") {
      s = {SurfaceKind::Spheroid, num("a", 1.0), num("c", 1.3)};
    } else if (kind == "torus") {
      s = {SurfaceKind::FlatTorus, num("a", 1.0), num("c", 1.0)};
    } else {
      throw fail("surface", "must be sphere, spheroid or torus, got '" + kind + "'");
    }
    try {
      (void)s.build();
    } catch (const std::exception& e) {
      throw fail("surface", e.what());
    }
    cfg.surface = s;
  }

  if (const Assignment* a = get("iterations")) cfg.solver.iterations = detail::to_int(*a);
  cfg.solver.initial_step = num("initial_step", cfg.solver.initial_step);
  cfg.solver.step_decay = num("step_decay", cfg.solver.step_decay);
  if (const Assignment* a = get("restarts")) cfg.solver.restarts = detail::to_int(*a);
  if (const Assignment* a = get("seed")) {
    const long long s = detail::to_integer(*a);
    if (s < 0) throw fail("seed", "must be >= 0");
    cfg.solver.seed = static_cast<std::uint64_t>(s);
  }
  cfg.solver.smoothing_width = num("smoothing_width", cfg.solver.smoothing_width);
  cfg.solver.tolerance = num("tolerance", cfg.solver.tolerance);
  if (const Assignment* a = get("stall_window")) cfg.solver.stall_window = detail::to_int(*a);
  if (const Assignment* a = get("backtracking")) cfg.solver.backtracking = detail::to_int(*a);
  cfg.solver.perturbation = num("perturbation", cfg.solver.perturbation);
  try {
    cfg.solver.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (const Assignment* a = get("use_solver")) cfg.use_solver = detail::to_bool(*a);
  if (const Assignment* a = get("out")) {
    if (a->value.empty()) throw fail("out", "must not be empty");
    cfg.out = a->value;
  }

  switch (cfg.task) {
    case Task::DomainCertificate:
    case Task::DomainSweep:
    case Task::Solve:
      if (!cfg.domain) throw ConfigError("task '" + to_string(cfg.task) + "' requires 'shape'");
      break;
    case Task::SurfaceClassify:
      if (!cfg.surface) throw ConfigError("task 'surface-classify' requires 'surface'");
      break;
    case Task::ExpansionAudit:
      if (!cfg.domain && !cfg.surface)
        throw ConfigError("task 'expansion-audit' requires 'shape' or 'surface'");
      break;
    case Task::Constants:
    case Task::SphereCertificate: break;
  }
  return cfg;
}

/// Parses config text and applies overrides.
[[nodiscard]] inline ExperimentConfig parse_config(std::string_view text,
                                                   const std::vector<Assignment>& overrides = {}) {
  return build_config(parse_assignments(text), overrides);
}

/// Finished report: JSON summary and CSV detail.
struct Report {
  Json summary;
  std::string csv;
};

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row(header); }

  template <typename... Cells>
  void add(const Cells&... cells) {
    std::vector<std::string> r;
    (r.push_back(cell(cells)), ...);
    if (r.size() != columns_) throw std::logic_error("CsvWriter: column count mismatch");
    row(r);
  }
  [[nodiscard]] std::string str() const { return out_.str(); }

private:
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "true" : "false"; }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  void row(const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) out_ << (i ? "," : "") << r[i];
    out_ << '\n';
  }

  std::size_t columns_;
  std::ostringstream out_;
};

inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

/// Slope of log|diff| against log eps; NaN when some difference vanishes.
inline double fitted_order(const std::vector<double>& eps, const std::vector<double>& diff) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(std::abs(diff[i]) > 0.0)) return std::nan("");
    x.push_back(std::log(eps[i]));
    y.push_back(std::log(std::abs(diff[i])));
  }
  return fit_line(x, y).slope;
}

inline Json header(const ExperimentConfig& cfg) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["task"] = to_string(cfg.task);
  return j;
}

inline Json domain_json(const DomainSpec& s, double h) {
  Json j;
  j["shape"] = to_string(s.kind);
  j["center"] = {s.center.x, s.center.y};
  switch (s.kind) {
    case ShapeKind::Disk: j["radius"] = s.radius; break;
    case ShapeKind::Ellipse:
      j["a"] = s.semi_a;
      j["b"] = s.semi_b;
      break;
    case ShapeKind::Fourier:
      j["r0"] = s.r0;
      j["cos"] = s.cos_coeffs;
      j["sin"] = s.sin_coeffs;
      break;
    case ShapeKind::Rectangle:
      j["width"] = s.width;
      j["height"] = s.height;
      break;
  }
  j["h"] = h;
  return j;
}

inline Json surface_json(const SurfaceSpec& s) {
  Json j;
  j["surface"] = to_string(s.kind);
  if (s.kind == SurfaceKind::RoundSphere) {
    j["radius"] = s.a;
  } else {
    j["a"] = s.a;
    j["c"] = s.c;
  }
  return j;
}

inline Json quotient_json(const QuotientValue& v) {
  return Json{{"numerator", v.numerator}, {"denominator", v.denominator}, {"value", v.value},
              {"threshold", v.threshold}, {"gap", v.gap}};
}

inline Json witness_json(const CapWitness& w) {
  Json j;
  j["center"] = {w.center.x, w.center.y};
  j["eps"] = w.eps;
  j["q"] = w.q;
  j["balanced_for"] = w.balanced_for;
  j["quotient"] = quotient_json(w.quotient);
  return j;
}

inline Report run_constants(const ExperimentConfig& cfg) {
  Report r{header(cfg), {}};
  CsvWriter csv({"n", "c_star", "c_half", "omega_n", "dual_formula_residual"});
  Json rows = Json::array();
  for (int n = cfg.n_min; n <= cfg.n_max; ++n) {
    const SharpConstants c = sharp_constants(n);
    const double dual = n * std::pow(c.omega_n, 1.0 / n);
    const double resid = std::abs(c.c_star - dual);
    rows.push_back(Json{{"n", n}, {"c_star", c.c_star}, {"c_half", c.c_half},
                        {"omega_n", c.omega_n}, {"dual_formula_residual", resid}});
    csv.add(n, c.c_star, c.c_half, c.omega_n, resid);
  }
  r.summary["rows"] = rows;
  r.csv = csv.str();
  return r;
}

inline Report run_sphere_certificate(const ExperimentConfig& cfg) {
  Report r{header(cfg), {}};
  CsvWriter csv({"q", "value", "residual", "c_star", "equals_c_star"});
  Json results = Json::array();
  const double c_star = sharp_sobolev_constant(2);
  for (double q : cfg.q) {
    const auto cert = hemisphere_certificate(q);
    const bool equal = std::abs(cert.quotient.value - c_star) <= 1e-12 * c_star;
    Json j{{"q", q}, {"value", cert.quotient.value}, {"residual", cert.constraint_residual},
           {"c_star", c_star}, {"equals_c_star", equal}};
    if (equal) j["theorem"] = "Thm8";
    results.push_back(j);
    csv.add(q, cert.quotient.value, cert.constraint_residual, c_star, equal);
  }
  r.summary["results"] = results;
  r.csv = csv.str();
  return r;
}

inline Report run_domain_certificate(const ExperimentConfig& cfg) {
  Report r{header(cfg), {}};
  r.summary["domain"] = domain_json(*cfg.domain, cfg.h);
  const GridDomain domain = build_domain(*cfg.domain, cfg.h);
  CsvWriter csv({"q", "center_x", "center_y", "eps", "balanced_for", "best_quotient", "solver_estimate",
                 "threshold", "gap", "achieved"});
  Json results = Json::array();
  for (double q : cfg.q) {
    const auto cert = achievability_certificate(
        domain, q, cfg.use_solver ? std::optional<SolverConfig>(cfg.solver) : std::nullopt);
    Json j{{"q", q}, {"best_quotient", cert.best_two_valued}, {"threshold", cert.threshold},
           {"gap", cert.gap}, {"achieved", cert.achieved}};
    j["solver_estimate"] = cert.solver_estimate ? Json(*cert.solver_estimate) : Json(nullptr);
    if (cert.achieved) j["theorem"] = "Prop 3.1";
    j["witness"] = witness_json(cert.witness);
    results.push_back(j);
    csv.add(q, cert.witness.center.x, cert.witness.center.y, cert.witness.eps,
            cert.witness.balanced_for, cert.best_two_valued,
            cert.solver_estimate ? *cert.solver_estimate : std::nan(""), cert.threshold, cert.gap,
            cert.achieved);
  }
  r.summary["results"] = results;
  r.csv = csv.str();
  return r;
}

inline Report run_domain_sweep(const ExperimentConfig& cfg) {
  Report r{header(cfg), {}};
  r.summary["domain"] = domain_json(*cfg.domain, cfg.h);
  const GridDomain domain = build_domain(*cfg.domain, cfg.h);
  const CurvatureSeed seed = max_curvature_seed(domain);
  const EpsRange dflt = default_eps_range(domain);
  const double lo = cfg.eps_min.value_or(dflt.lo), hi = cfg.eps_max.value_or(dflt.hi);
  if (!(hi > lo)) throw ConfigError("eps_max: must exceed eps_min");
  if (hi > domain.diameter()) throw ConfigError("eps_max: exceeds the domain diameter");
  r.summary["center"] = {seed.point.x, seed.point.y};
  r.summary["mean_curvature"] = seed.curvature;

  CsvWriter csv({"q", "eps", "numerator", "denominator", "quotient", "threshold", "gap"});
  Json results = Json::array();
  for (double q : cfg.q) {
    double best_value = std::numeric_limits<double>::infinity(), best_eps = lo;
    for (int k = 0; k < cfg.eps_count; ++k) {
      const double eps = lo * std::pow(hi / lo, static_cast<double>(k) / (cfg.eps_count - 1));
      const QuotientValue v = two_valued_quotient_exact(domain, seed.point, eps, q);
      csv.add(q, eps, v.numerator, v.denominator, v.value, v.threshold, v.gap);
      if (v.value < best_value) {
        best_value = v.value;
        best_eps = eps;
      }
    }
    results.push_back(Json{{"q", q}, {"best_eps", best_eps}, {"best_quotient", best_value},
                           {"threshold", half_space_constant(2)},
                           {"gap", half_space_constant(2) - best_value}});
  }
  r.summary["eps_min"] = lo;
  r.summary["eps_max"] = hi;
  r.summary["eps_count"] = cfg.eps_count;
  r.summary["results"] = results;
  r.csv = csv.str();
  return r;
}

inline Report run_solve(const ExperimentConfig& cfg) {
  Report r{header(cfg), {}};
  r.summary["domain"] = domain_json(*cfg.domain, cfg.h);
  const GridDomain domain = build_domain(*cfg.domain, cfg.h);
  const SolverConfig& sc = cfg.solver;
  r.summary["solver"] = Json{{"iterations", sc.iterations}, {"initial_step", sc.initial_step},
                             {"step_decay", sc.step_decay}, {"restarts", sc.restarts},
                             {"seed", sc.seed}, {"smoothing_width", sc.smoothing_width},
                             {"tolerance", sc.tolerance}, {"stall_window", sc.stall_window},
                             {"backtracking", sc.backtracking}, {"perturbation", sc.perturbation}};

  // q = 1 first: its optimum, re-shifted, warm-starts every other exponent.
  std::vector<double> order;
  for (double q : cfg.q)
    if (q == 1.0) order.push_back(q);
  for (double q : cfg.q)
    if (q != 1.0) order.push_back(q);

  CsvWriter csv({"q", "iter", "quotient", "residual", "tv", "norm"});
  std::map<double, Json> by_q;
  std::optional<GridFunction> base;
  for (double q : order) {
    std::vector<GridFunction> warm;
    if (base) warm.push_back(*base);
    const ConstantEstimate est = minimize_quotient(domain, q, sc, warm);
    if (q == 1.0) base = est.snapshot;
    Json j{{"q", q}, {"value", est.value}, {"residual", est.residual},
           {"threshold", est.threshold}, {"certificate_gap", est.certificate_gap},
           {"below_threshold", est.below_threshold}, {"best_start", est.best_start},
           {"seed_value", est.seed_value}, {"seed_eps", est.seed_eps},
           {"iterations", static_cast<int>(est.history.size()) - 1}};
    by_q[q] = j;
    for (const auto& row : est.history) csv.add(q, row.iter, row.quotient, row.residual, row.tv, row.norm);
  }
  Json results = Json::array();
  for (double q : cfg.q) results.push_back(by_q.at(q));
  r.summary["results"] = results;
  r.csv = csv.str();
  return r;
}

inline Report run_surface_classify(const ExperimentConfig& cfg) {
  Report r{header(cfg), {}};
  r.summary["target"] = surface_json(*cfg.surface);
  const SurfaceModel surface = cfg.surface->build();
  const ManifoldSummary m = summarize(surface);
  const GaussBonnet gb = gauss_bonnet_check(surface);
  r.summary["manifold"] = Json{{"dimension", m.dimension},
                               {"area", m.area},
                               {"euler_characteristic", m.euler_characteristic},
                               {"round_sphere", m.round_sphere},
                               {"constant_curvature", m.constant_curvature},
                               {"max_point", {m.max_point.u, m.max_point.v}},
                               {"max_scalar_curvature", m.max_scalar_curvature},
                               {"critical_threshold", critical_curvature_threshold(2, m.area)},
                               {"gauss_bonnet_integral", gb.integral},
                               {"gauss_bonnet_target", gb.target}};
  CsvWriter csv({"q", "verdict", "justification", "scalar_curvature", "threshold"});
  Json results = Json::array();
  for (double q : cfg.q) {
    const auto v = classify_achievability(m, q);
    Json j{{"q", q}, {"verdict", to_string(v.verdict)},
           {"achieved", v.verdict == Verdict::Achieved},
           {"justification", to_string(v.justification)}};
    if (v.verdict == Verdict::Achieved) {
      j["witness"] = Json{{"point", {v.witness.point.u, v.witness.point.v}},
                          {"scalar_curvature", v.witness.scalar_curvature},
                          {"threshold", v.witness.threshold}};
    }
    results.push_back(j);
    csv.add(q, to_string(v.verdict), to_string(v.justification), v.witness.scalar_curvature,
            v.witness.threshold);
  }
  r.summary["results"] = results;
  r.csv = csv.str();
  return r;
}

inline Report run_expansion_audit(const ExperimentConfig& cfg) {
  Report r{header(cfg), {}};
  CsvWriter csv({"quantity", "eps", "exact", "expansion", "difference"});
  const double q = cfg.q.front();
  r.summary["q"] = q;
  r.summary["eps"] = cfg.eps;
  Json quantities = Json::object();

  const auto record = [&](const std::string& name, const std::vector<double>& exact,
                          const std::vector<double>& approx) {
    std::vector<double> diff;
    for (std::size_t i = 0; i < exact.size(); ++i) {
      diff.push_back(exact[i] - approx[i]);
      csv.add(name, cfg.eps[i], exact[i], approx[i], diff.back());
    }
    double worst = 0.0;
    for (double d : diff) worst = std::max(worst, std::abs(d));
    Json j{{"max_abs_difference", worst},
           {"fitted_remainder_order", number(fitted_order(cfg.eps, diff))}};
    quantities[name] = j;
  };

  if (cfg.domain) {
    r.summary["target"] = domain_json(*cfg.domain, cfg.h);
    const GridDomain domain = build_domain(*cfg.domain, cfg.h);
    const CurvatureSeed seed = max_curvature_seed(domain);
    const double c_half = half_space_constant(2);
    std::vector<double> exact, approx, scaled;
    for (double eps : cfg.eps) {
      if (eps >= domain.diameter()) throw ConfigError("eps: entries must be below the diameter");
      exact.push_back(two_valued_quotient_exact(domain, seed.point, eps, q).value);
      approx.push_back(domain_quotient_expansion(seed.curvature, eps, 2));
      scaled.push_back((exact.back() - c_half) / eps);
    }
    record("quotient", exact, approx);
    const LineFit fit = fit_line(cfg.eps, scaled);
    r.summary["center"] = {seed.point.x, seed.point.y};
    r.summary["mean_curvature"] = seed.curvature;
    r.summary["linear_coefficient"] = fit.intercept;
    r.summary["expected_linear_coefficient"] =
        -c_half * 2.0 * seed.curvature / (3.0 * euler_beta(0.5, 0.5));
  } else {
    r.summary["target"] = surface_json(*cfg.surface);
    const SurfaceModel surface = cfg.surface->build();
    const SurfacePoint p = surface.max_curvature_point();
    const double S = scalar_curvature(surface, p);
    std::vector<double> area, area_x, len, len_x, quot, quot_x;
    for (double eps : cfg.eps) {
      area.push_back(geodesic_ball_area(surface, p, eps));
      area_x.push_back(gray_expansion(S, eps, 2));
      len.push_back(geodesic_circle_length(surface, p, eps));
      len_x.push_back(geodesic_sphere_expansion(S, eps, 2));
      quot.push_back(surface_two_valued_quotient(surface, p, eps, q).value);
      quot_x.push_back(surface_quotient_expansion(S, eps, 2));
    }
    record("ball_area", area, area_x);
    record("circle_length", len, len_x);
    record("quotient", quot, quot_x);
    r.summary["center"] = {p.u, p.v};
    r.summary["scalar_curvature"] = S;
  }
  r.summary["quantities"] = quantities;
  r.csv = csv.str();
  return r;
}

}  // namespace detail

/// Executes the configured task and returns the report (no files written).
[[nodiscard]] inline Report run(const ExperimentConfig& cfg) {
  switch (cfg.task) {
    case Task::Constants: return detail::run_constants(cfg);
    case Task::DomainCertificate: return detail::run_domain_certificate(cfg);
    case Task::DomainSweep: return detail::run_domain_sweep(cfg);
    case Task::Solve: return detail::run_solve(cfg);
    case Task::SurfaceClassify: return detail::run_surface_classify(cfg);
    case Task::SphereCertificate: return detail::run_sphere_certificate(cfg);
    case Task::ExpansionAudit: return detail::run_expansion_audit(cfg);
  }
  throw ConfigError("unknown task");
}

/// Writes `<dir>/summary.json` and `<dir>/detail.csv`.
inline void write_report(const Report& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
  const auto put = [&](const std::filesystem::path& file, const std::string& text) {
    std::ofstream os(file, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write '" + file.string() + "'");
    os << text;
    if (!os) throw std::runtime_error("write failed for '" + file.string() + "'");
  };
  put(dir / "summary.json", report.summary.dump(2) + "\n");
  put(dir / "detail.csv", report.csv);
}

/// CSV column documentation for --help.
[[nodiscard]] inline std::string csv_help() {
  return R"(detail.csv columns by task:
  constants           n, c_star, c_half, omega_n, dual_formula_residual
  sphere-certificate  q, value, residual, c_star, equals_c_star
  domain-certificate  q, center_x, center_y, eps, balanced_for, best_quotient,
                      solver_estimate, threshold, gap, achieved
  domain-sweep        q, eps, numerator, denominator, quotient, threshold, gap
  solve               q, iter, quotient, residual, tv, norm
                      (best iterate so far at each iteration)
  surface-classify    q, verdict, justification, scalar_curvature, threshold
  expansion-audit     quantity, eps, exact, expansion, difference
                      (quantity: quotient; surfaces add ball_area, circle_length)

Config keys (key = value, '#' starts a comment; --key value overrides):
  task, n, n_min, n_max, shape (disk|ellipse|fourier), radius, a, b, c,
  center_x, center_y, r0, cos, sin, surface (sphere|spheroid|torus), q,
  h, eps_min, eps_max, eps_count, eps, iterations, initial_step, step_decay,
  restarts, seed, smoothing_width, tolerance, stall_window, backtracking,
  perturbation, use_solver, out
Lists (q, eps, cos, sin) are comma-separated.
Environment: BV_SHARP_THREADS caps the number of solver threads.
)";
}

}  // namespace bvsharp::cli
