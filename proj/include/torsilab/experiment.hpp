#pragma once

// Declarative experiment runner: JSON config -> domain, flow path, sampled
// rigidity series, envelopes, verdicts, and CSV/JSON reports.
//
// Needs nlohmann/json on the include path.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "torsilab/certificates.hpp"
#include "torsilab/errors.hpp"
#include "torsilab/flow.hpp"
#include "torsilab/mesh.hpp"
#include "torsilab/poisson.hpp"
#include "torsilab/radial.hpp"
#include "torsilab/variational.hpp"

#ifndef TORSILAB_VERSION
#define TORSILAB_VERSION "0.0.0"
#endif

namespace torsilab {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = TORSILAB_VERSION;

// ---------------------------------------------------------------------------
// Configuration.

struct FlowSpec {
  FlowKind kind = FlowKind::EinsteinScaling;
  double lambda = 0.0;
  int n = 2;
  HomogeneousParams3 params{};
  double r0 = 1.0;
  double dt = 0.0;
  std::string base = "space_form";  // Einstein base chart: space_form | euclidean
  std::vector<double> t_grid;
};

enum class DomainType { Disk, Ball, Box, Radial, MeshFile };

struct DomainSpec {
  DomainType type = DomainType::Disk;
  double radius = 1.0;
  int level = 3;
  std::vector<Interval> bounds;
  std::string mesh_path;
};

struct IdentitySpec {
  std::vector<double> t;
  std::vector<double> h{0.02, 0.01, 0.005};
  int points = 8;
};

struct ExperimentConfig {
  FlowSpec flow;
  DomainSpec domain;
  SolverOptions solver;
  bool budget = true;       // estimate discretization error from one coarser level
  bool variational = true;  // per-sample Pólya / divergence-field sandwich
  IdentitySpec identities;
  std::string csv;
  std::string json;
  Json echo;  // the config as read
};

namespace detail {

inline std::string ptr_join(const std::string& base, const std::string& key) { return base + "/" + key; }

inline const Json& require_key(const Json& j, const std::string& ptr, const char* key) {
  if (!j.is_object()) throw ConfigError(ptr, "expected an object");
  if (!j.contains(key)) throw ConfigError(ptr_join(ptr, key), "required key missing");
  return j.at(key);
}

inline double get_number(const Json& j, const std::string& ptr) {
  if (!j.is_number()) throw ConfigError(ptr, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(ptr, "expected a finite number");
  return v;
}

inline int get_int(const Json& j, const std::string& ptr) {
  if (!j.is_number_integer()) throw ConfigError(ptr, "expected an integer");
  return j.get<int>();
}

inline std::string get_string(const Json& j, const std::string& ptr) {
  if (!j.is_string()) throw ConfigError(ptr, "expected a string");
  return j.get<std::string>();
}

inline bool get_bool(const Json& j, const std::string& ptr) {
  if (!j.is_boolean()) throw ConfigError(ptr, "expected a boolean");
  return j.get<bool>();
}

inline std::vector<double> get_numbers(const Json& j, const std::string& ptr) {
  if (!j.is_array()) throw ConfigError(ptr, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(get_number(j[i], ptr + "/" + std::to_string(i)));
  return out;
}

inline void reject_unknown(const Json& j, const std::string& ptr,
                           std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(ptr_join(ptr, it.key()), "unknown key");
  }
}

inline FlowKind parse_kind(const std::string& s, const std::string& ptr) {
  if (s == "einstein") return FlowKind::EinsteinScaling;
  if (s == "nil3") return FlowKind::Nil3Closed;
  if (s == "su2") return FlowKind::SU2Ode;
  if (s == "imcf_sphere") return FlowKind::ImcfSphere;
  throw ConfigError(ptr, "unknown flow kind '" + s + "' (einstein, nil3, su2, imcf_sphere)");
}

inline DomainType parse_domain_type(const std::string& s, const std::string& ptr) {
  if (s == "disk") return DomainType::Disk;
  if (s == "ball") return DomainType::Ball;
  if (s == "box") return DomainType::Box;
  if (s == "radial") return DomainType::Radial;
  if (s == "mesh_file") return DomainType::MeshFile;
  throw ConfigError(ptr, "unknown domain type '" + s + "' (disk, ball, box, radial, mesh_file)");
}

inline void check_grid_values(const std::vector<double>& g, const std::string& ptr) {
  if (g.empty()) throw ConfigError(ptr, "t_grid is empty");
  if (g.front() != 0.0) throw ConfigError(ptr + "/0", "t_grid must start at 0");
  for (std::size_t i = 1; i < g.size(); ++i)
    if (!(g[i] > g[i - 1]))
      throw ConfigError(ptr + "/" + std::to_string(i), "t_grid must be strictly increasing");
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  reject_unknown(j, "", {"flow", "domain", "solver", "identities", "outputs"});
  ExperimentConfig cfg;
  cfg.echo = j;

  const Json& f = require_key(j, "", "flow");
  if (!f.is_object()) throw ConfigError("/flow", "expected an object");
  reject_unknown(f, "/flow", {"kind", "lambda", "n", "params", "r0", "dt", "base", "t_grid"});
  FlowSpec& fs = cfg.flow;
  fs.kind = parse_kind(get_string(require_key(f, "/flow", "kind"), "/flow/kind"), "/flow/kind");
  if (f.contains("lambda")) fs.lambda = get_number(f["lambda"], "/flow/lambda");
  if (f.contains("n")) fs.n = get_int(f["n"], "/flow/n");
  if (f.contains("r0")) fs.r0 = get_number(f["r0"], "/flow/r0");
  if (f.contains("dt")) fs.dt = get_number(f["dt"], "/flow/dt");
  if (f.contains("base")) fs.base = get_string(f["base"], "/flow/base");
  if (fs.base != "space_form" && fs.base != "euclidean")
    throw ConfigError("/flow/base", "expected 'space_form' or 'euclidean'");
  if (fs.kind == FlowKind::Nil3Closed || fs.kind == FlowKind::SU2Ode) {
    fs.n = 3;
    fs.params.group = fs.kind == FlowKind::Nil3Closed ? Group::Nil3 : Group::SU2;
    const Json& p = require_key(f, "/flow", "params");
    if (!p.is_object()) throw ConfigError("/flow/params", "expected an object");
    reject_unknown(p, "/flow/params", {"D", "B", "C"});
    fs.params.D = get_number(require_key(p, "/flow/params", "D"), "/flow/params/D");
    fs.params.B = get_number(require_key(p, "/flow/params", "B"), "/flow/params/B");
    fs.params.C = get_number(require_key(p, "/flow/params", "C"), "/flow/params/C");
    if (!fs.params.valid()) throw ConfigError("/flow/params", "coefficients must be positive");
  }
  if (fs.n < 1 || fs.n > kMaxDim) throw ConfigError("/flow/n", "dimension must be 1, 2 or 3");
  if (fs.kind == FlowKind::ImcfSphere && !(fs.r0 > 0.0))
    throw ConfigError("/flow/r0", "sphere radius must be positive");
  if (fs.kind == FlowKind::SU2Ode && fs.dt != 0.0 &&
      !(fs.dt > 0.0 && fs.dt <= 1e-3 * fs.params.B))
    throw ConfigError("/flow/dt", "need 0 < dt <= 1e-3 B0 (0 selects the default)");
  fs.t_grid = get_numbers(require_key(f, "/flow", "t_grid"), "/flow/t_grid");
  check_grid_values(fs.t_grid, "/flow/t_grid");

  const Json& d = require_key(j, "", "domain");
  if (!d.is_object()) throw ConfigError("/domain", "expected an object");
  reject_unknown(d, "/domain", {"type", "radius", "level", "bounds", "path"});
  DomainSpec& ds = cfg.domain;
  ds.type = parse_domain_type(get_string(require_key(d, "/domain", "type"), "/domain/type"),
                              "/domain/type");
  if (d.contains("radius")) ds.radius = get_number(d["radius"], "/domain/radius");
  if (d.contains("level")) ds.level = get_int(d["level"], "/domain/level");
  if (!(ds.radius > 0.0)) throw ConfigError("/domain/radius", "radius must be positive");
  if (ds.level < 0 || ds.level > 8) throw ConfigError("/domain/level", "level must be in [0, 8]");
  const int n = fs.n;
  switch (ds.type) {
    case DomainType::Disk:
      if (n != 2) throw ConfigError("/domain/type", "disk meshes are two-dimensional");
      break;
    case DomainType::Ball:
      if (n < 2) throw ConfigError("/domain/type", "ball meshes need dimension 2 or 3");
      break;
    case DomainType::Box: {
      const Json& b = require_key(d, "/domain", "bounds");
      if (!b.is_array() || static_cast<int>(b.size()) != n)
        throw ConfigError("/domain/bounds", "expected one [lo, hi] pair per dimension");
      for (std::size_t a = 0; a < b.size(); ++a) {
        const std::string p = "/domain/bounds/" + std::to_string(a);
        const auto iv = get_numbers(b[a], p);
        if (iv.size() != 2 || !(iv[1] > iv[0])) throw ConfigError(p, "expected [lo, hi] with lo < hi");
        ds.bounds.push_back({iv[0], iv[1]});
      }
      break;
    }
    case DomainType::Radial:
      if (fs.kind == FlowKind::Nil3Closed)
        throw ConfigError("/domain/type", "nil3 geometry is not rotationally symmetric");
      if (fs.kind == FlowKind::SU2Ode &&
          !(fs.params.B == fs.params.C && fs.params.C == fs.params.D))
        throw ConfigError("/domain/type", "radial su2 domains need the round case B = C = D");
      break;
    case DomainType::MeshFile:
      ds.mesh_path = get_string(require_key(d, "/domain", "path"), "/domain/path");
      break;
  }

  if (j.contains("solver")) {
    const Json& s = j["solver"];
    if (!s.is_object()) throw ConfigError("/solver", "expected an object");
    reject_unknown(s, "/solver", {"tol", "max_iter_factor", "budget", "variational"});
    if (s.contains("tol")) cfg.solver.tol = get_number(s["tol"], "/solver/tol");
    if (s.contains("max_iter_factor"))
      cfg.solver.max_iter_factor = get_int(s["max_iter_factor"], "/solver/max_iter_factor");
    if (s.contains("budget")) cfg.budget = get_bool(s["budget"], "/solver/budget");
    if (s.contains("variational")) cfg.variational = get_bool(s["variational"], "/solver/variational");
    if (!(cfg.solver.tol > 0.0 && cfg.solver.tol < 1.0))
      throw ConfigError("/solver/tol", "tolerance must lie in (0, 1)");
    if (cfg.solver.max_iter_factor < 1)
      throw ConfigError("/solver/max_iter_factor", "must be a positive integer");
  }

  if (j.contains("identities")) {
    const Json& s = j["identities"];
    if (!s.is_object()) throw ConfigError("/identities", "expected an object");
    reject_unknown(s, "/identities", {"t", "h", "points"});
    if (s.contains("t")) cfg.identities.t = get_numbers(s["t"], "/identities/t");
    if (s.contains("h")) cfg.identities.h = get_numbers(s["h"], "/identities/h");
    if (s.contains("points")) cfg.identities.points = get_int(s["points"], "/identities/points");
    for (std::size_t i = 0; i < cfg.identities.h.size(); ++i)
      if (!(cfg.identities.h[i] > 0.0))
        throw ConfigError("/identities/h/" + std::to_string(i), "step must be positive");
    if (cfg.identities.points < 1) throw ConfigError("/identities/points", "need at least one point");
  }

  if (j.contains("outputs")) {
    const Json& o = j["outputs"];
    if (!o.is_object()) throw ConfigError("/outputs", "expected an object");
    reject_unknown(o, "/outputs", {"csv", "json"});
    if (o.contains("csv")) cfg.csv = get_string(o["csv"], "/outputs/csv");
    if (o.contains("json")) cfg.json = get_string(o["json"], "/outputs/json");
  }
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Path and domain construction.

inline FlowPath make_path(const FlowSpec& fs) {
  switch (fs.kind) {
    case FlowKind::EinsteinScaling:
      return fs.base == "euclidean" ? FlowPath::einstein(fs.lambda, fs.n, euclidean(fs.n))
                                    : FlowPath::einstein(fs.lambda, fs.n);
    case FlowKind::Nil3Closed: return FlowPath::nil3(fs.params);
    case FlowKind::SU2Ode: return FlowPath::su2(fs.params, fs.dt);
    case FlowKind::ImcfSphere: return FlowPath::imcf_sphere(fs.r0, fs.n);
  }
  throw UsageError("make_path: unknown kind");
}

/// Largest time up to which the path's envelopes are certified.
inline double certified_horizon(const FlowPath& path) {
  double h = path.t_max();
  if (path.kind() == FlowKind::SU2Ode) {
    const auto& p = path.params0();
    if (p.ordered() && p.delta() < 1.0) h = std::min(h, su2_delta_horizon(p.B, p.delta()));
  }
  return h;
}

inline void check_horizon(const ExperimentConfig& cfg, const FlowPath& path) {
  const double h = certified_horizon(path);
  const auto& g = cfg.flow.t_grid;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(g[i] < h))
      throw ConfigError("/flow/t_grid/" + std::to_string(i),
                        "time beyond the certified horizon " + std::to_string(h));
}

/// Warp of the rotationally symmetric model at t = 0, for radial domains.
inline RadialWarp radial_warp0(const ExperimentConfig& cfg) {
  const auto& fs = cfg.flow;
  const double R = cfg.domain.radius;
  switch (fs.kind) {
    case FlowKind::EinsteinScaling: {
      if (fs.base == "euclidean" || fs.lambda == 0.0 || fs.n == 1) return flat_warp(fs.n, R);
      const double rho = std::sqrt((fs.n - 1) / std::abs(fs.lambda));
      return fs.lambda > 0.0 ? sphere_warp(fs.n, rho, R) : hyperbolic_warp(fs.n, rho, R);
    }
    case FlowKind::ImcfSphere:
      return fs.n == 1 ? flat_warp(1, R) : sphere_warp(fs.n, fs.r0, R);
    case FlowKind::SU2Ode: return sphere_warp(3, std::sqrt(fs.params.B), R);
    case FlowKind::Nil3Closed: break;
  }
  throw ConfigError("/domain/type", "no rotationally symmetric model for this flow");
}

/// Metric factor relative to t = 0 for paths that act by pure scaling on their model.
inline double radial_scale(const FlowPath& path, double t) {
  if (path.kind() == FlowKind::SU2Ode) return path.params(t).B / path.params0().B;
  return path.scale(t);
}

inline SimplicialMesh build_domain_mesh(const DomainSpec& ds, int n, int level) {
  switch (ds.type) {
    case DomainType::Disk: return build_disk_mesh(ds.radius, level);
    case DomainType::Ball: return build_ball_mesh(n, ds.radius, level);
    case DomainType::Box: return build_box_mesh(ds.bounds, level);
    case DomainType::MeshFile: {
      SimplicialMesh m = read_mesh_file(ds.mesh_path);
      if (m.dim != n) throw ConfigError("/domain/path", "mesh dimension differs from the flow");
      return m;
    }
    case DomainType::Radial: break;
  }
  throw UsageError("build_domain_mesh: radial domains have no mesh");
}

inline std::optional<DomainShape> domain_shape(const DomainSpec& ds, int n) {
  switch (ds.type) {
    case DomainType::Disk: return DomainShape::ball(2, ds.radius);
    case DomainType::Ball: return DomainShape::ball(n, ds.radius);
    case DomainType::Box: return DomainShape::box(ds.bounds);
    default: return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Reports.

struct SampleRecord {
  double t = 0.0;
  double T = 0.0;
  double V = 0.0;
  double T_energy = 0.0;
  double residual = 0.0;
  int iterations = 0;
  double budget = 0.0;
  double T_coarse = std::numeric_limits<double>::quiet_NaN();
  // Sandwich bounds on the discrete T at this sample (NaN when not computed).
  double polya_best = std::numeric_limits<double>::quiet_NaN();
  double field_best = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<std::string, double>> polya;
  std::vector<std::pair<std::string, double>> fields;
  double transported_lower = std::numeric_limits<double>::quiet_NaN();
  double transported_upper = std::numeric_limits<double>::quiet_NaN();
};

struct ContainmentSummary {
  std::string tag;
  bool inside = true;
  double worst_excess = 0.0;  // relative to T; positive means outside
  double worst_t = 0.0;
};

struct RunReport {
  ExperimentConfig config;
  FlowKind kind{};
  int n = 2;
  double t_max = kInf;
  double mesh_h = 0.0;
  std::size_t vertices = 0;
  std::size_t cells = 0;
  std::size_t interior = 0;
  bool radial = false;
  std::vector<SampleRecord> samples;
  RigiditySeries series;
  std::vector<BoundEnvelope> envelopes;
  std::optional<FunctionalVerdicts> verdicts;
  std::vector<ContainmentSummary> containment;

  /// False when a certified verdict or an envelope containment failed.
  bool certified_ok() const {
    if (verdicts && !verdicts->all_certified_pass()) return false;
    for (const auto& c : containment)
      if (!c.inside) return false;
    return true;
  }
};

struct RunOptions {
  bool envelopes = false;
  bool verdicts = false;
  bool only_first = false;  // single solve at the first grid time
  int threads = 1;
  std::function<void(const std::string&)> log;
};

namespace detail {

template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, count));
  std::vector<std::exception_ptr> errors(count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Discretization budget from one coarser level, assuming second order:
// |T_h - T_2h| / 3, plus the solver's share.
inline double fem_budget(double T, double T_coarse, double residual) {
  double b = 10.0 * residual * std::abs(T);
  if (std::isfinite(T_coarse)) b += std::abs(T - T_coarse) / 3.0;
  return b;
}

inline void add_sandwich(SampleRecord& rec, const SimplicialMesh& mesh,
                         const MetricField& m, const DomainShape& shape, const SolverOptions& opt) {
  rec.polya_best = -kInf;
  for (const auto& [name, fn] : standard_trial_functions(shape)) {
    const double lb = polya_lower_bound(interpolate_trial(mesh, fn), mesh, m);
    rec.polya.emplace_back(name, lb);
    rec.polya_best = std::max(rec.polya_best, lb);
  }
  rec.field_best = kInf;
  for (const auto& [name, X] : admissible_fields(shape, mesh, m, opt)) {
    const double ub = field_upper_bound(X, mesh, m, kDefaultDivergenceTol);
    rec.fields.emplace_back(name, ub);
    rec.field_best = std::min(rec.field_best, ub);
  }
}

}  // namespace detail

/// Build the domain, evolve the flow, sample T and V on the time grid, and
/// attach envelopes and verdicts as requested.
inline RunReport run(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  auto log = [&](const std::string& s) {
    if (opt.log) opt.log(s);
  };
  const FlowPath path = make_path(cfg.flow);
  if (opt.envelopes || opt.verdicts) check_horizon(cfg, path);
  for (std::size_t i = 0; i < cfg.flow.t_grid.size(); ++i)
    if (!(cfg.flow.t_grid[i] < path.t_max()))
      throw ConfigError("/flow/t_grid/" + std::to_string(i), "time beyond the flow's existence interval");

  std::vector<double> grid = cfg.flow.t_grid;
  if (opt.only_first) grid.resize(1);

  RunReport rep;
  rep.config = cfg;
  rep.kind = path.kind();
  rep.n = path.dim();
  rep.t_max = path.t_max();
  rep.samples.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) rep.samples[i].t = grid[i];

  if (cfg.domain.type == DomainType::Radial) {
    rep.radial = true;
    const RadialWarp w0 = radial_warp0(cfg);
    log("radial oracle, " + std::to_string(grid.size()) + " samples");
    detail::parallel_for(grid.size(), opt.threads, [&](std::size_t i) {
      const RadialRigidity rr = radial_rigidity(scaled_warp(w0, radial_scale(path, grid[i])));
      SampleRecord& s = rep.samples[i];
      s.T = rr.T;
      s.T_energy = rr.T;
      s.V = rr.V;
      s.budget = 1e-12 * rr.T;
    });
  } else {
    const SimplicialMesh mesh = build_domain_mesh(cfg.domain, path.dim(), cfg.domain.level);
    validate(mesh);
    rep.mesh_h = mesh.h;
    rep.vertices = mesh.num_vertices();
    rep.cells = mesh.num_cells();
    rep.interior = mesh.num_interior();
    std::optional<SimplicialMesh> coarse;
    if (cfg.budget && cfg.domain.type != DomainType::MeshFile && cfg.domain.level > 0)
      coarse = build_domain_mesh(cfg.domain, path.dim(), cfg.domain.level - 1);
    const auto shape = domain_shape(cfg.domain, path.dim());
    log("mesh: " + std::to_string(rep.vertices) + " vertices, " + std::to_string(rep.interior) +
        " interior, h = " + std::to_string(rep.mesh_h));

    std::vector<ScalarFieldOnMesh> E(grid.size());
    detail::parallel_for(grid.size(), opt.threads, [&](std::size_t i) {
      const MetricField m = path.metric(grid[i]);
      ExitTimeSolution sol = solve_exit_time(mesh, m, cfg.solver);
      SampleRecord& s = rep.samples[i];
      s.T = sol.report.T_integral;
      s.T_energy = sol.report.T_energy;
      s.V = sol.report.V;
      s.residual = sol.report.residual;
      s.iterations = sol.report.iterations;
      if (coarse) s.T_coarse = solve_exit_time(*coarse, m, cfg.solver).report.T_integral;
      s.budget = detail::fem_budget(s.T, s.T_coarse, s.residual);
      if (cfg.variational && shape) detail::add_sandwich(s, mesh, m, *shape, cfg.solver);
      E[i] = std::move(sol.E);
    });
    // Transported bounds reuse the t = 0 exit time on the evolved metric.
    if (grid.front() == 0.0) {
      const MetricField m0 = path.metric(0.0);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const MetricField mt = path.metric(grid[i]);
        rep.samples[i].transported_lower = transported_lower_bound(E[0], mesh, mt);
        // Every supported path has √g_t / √g_0 constant in space.
        rep.samples[i].transported_upper = transported_upper_bound(E[0], mesh, m0, mt, true);
      }
    }
    for (const auto& s : rep.samples)
      log("t = " + std::to_string(s.t) + ": T = " + std::to_string(s.T) +
          ", iterations = " + std::to_string(s.iterations));
  }

  rep.series.n = path.dim();
  for (const auto& s : rep.samples) rep.series.entries.push_back({s.t, s.T, s.V, s.budget});

  if (opt.envelopes && grid.size() >= 1) {
    const double T0 = rep.samples.front().T;
    switch (path.kind()) {
      case FlowKind::EinsteinScaling:
      case FlowKind::Nil3Closed:
        rep.envelopes.push_back(ricci_envelope(curvature_bounds(path), T0, grid));
        break;
      case FlowKind::SU2Ode: {
        rep.envelopes.push_back(ricci_envelope(curvature_bounds(path), T0, grid));
        const auto& p = path.params0();
        if (p.ordered() && p.delta() < 1.0)
          rep.envelopes.push_back(su2_delta_envelope(p.B, p.delta(), T0, grid));
        break;
      }
      case FlowKind::ImcfSphere:
        rep.envelopes.push_back(imcf_envelope(T0, grid));
        break;
    }
    for (const auto& env : rep.envelopes) {
      ContainmentSummary cs{env.tag, true, -kInf, 0.0};
      for (const auto& c : envelope_containment(rep.series, env)) {
        const double excess = std::max(c.lower - c.T, c.T - c.upper) - c.slack;
        if (excess / c.T > cs.worst_excess) {
          cs.worst_excess = excess / c.T;
          cs.worst_t = c.t;
        }
        cs.inside = cs.inside && c.inside;
      }
      rep.containment.push_back(cs);
    }
  }
  if (opt.verdicts && grid.size() >= 3)
    rep.verdicts = functional_checks(rep.series, path.kind(), path.lambda());
  return rep;
}

// ---------------------------------------------------------------------------
// Convergence sweep.

struct SweepReport {
  std::vector<int> levels;
  std::vector<double> h;
  std::vector<double> T;
  std::vector<double> V;
  std::vector<double> residual;
  double extrapolated = std::numeric_limits<double>::quiet_NaN();
  double order = std::numeric_limits<double>::quiet_NaN();
  double reference = std::numeric_limits<double>::quiet_NaN();  // radial oracle when available
};

/// Richardson extrapolation of the last three values with order
/// log2((T1 - T2) / (T2 - T3)); with two values order 2 is assumed.
inline void richardson(SweepReport& s) {
  const std::size_t k = s.T.size();
  if (k >= 3) {
    const double d1 = s.T[k - 3] - s.T[k - 2], d2 = s.T[k - 2] - s.T[k - 1];
    s.order = std::log2(d1 / d2);
    const double p = std::isfinite(s.order) && s.order > 0.0 ? s.order : 2.0;
    s.extrapolated = s.T[k - 1] + (s.T[k - 1] - s.T[k - 2]) / (std::pow(2.0, p) - 1.0);
  } else if (k == 2) {
    s.extrapolated = s.T[1] + (s.T[1] - s.T[0]) / 3.0;
  }
}

/// Solves at t = 0 on `levels` successive refinements starting from the
/// configured level.
inline SweepReport convergence_sweep(const ExperimentConfig& cfg, int levels, const RunOptions& opt = {}) {
  if (levels < 2) throw UsageError("convergence_sweep: need at least 2 levels");
  if (cfg.domain.type == DomainType::Radial || cfg.domain.type == DomainType::MeshFile)
    throw ConfigError("/domain/type", "sweeps need a generated mesh (disk, ball or box)");
  if (cfg.domain.level + levels - 1 > 8)
    throw ConfigError("/domain/level", "sweep would exceed refinement level 8");
  const FlowPath path = make_path(cfg.flow);
  const MetricField m = path.metric(0.0);
  SweepReport s;
  s.levels.resize(levels);
  s.h.resize(levels);
  s.T.resize(levels);
  s.V.resize(levels);
  s.residual.resize(levels);
  detail::parallel_for(static_cast<std::size_t>(levels), opt.threads, [&](std::size_t i) {
    const int level = cfg.domain.level + static_cast<int>(i);
    const SimplicialMesh mesh = build_domain_mesh(cfg.domain, path.dim(), level);
    const ExitTimeSolution sol = solve_exit_time(mesh, m, cfg.solver);
    s.levels[i] = level;
    s.h[i] = mesh.h;
    s.T[i] = sol.report.T_integral;
    s.V[i] = sol.report.V;
    s.residual[i] = sol.report.residual;
  });
  richardson(s);
  const bool round_domain =
      cfg.domain.type == DomainType::Disk || cfg.domain.type == DomainType::Ball;
  if (round_domain && path.kind() != FlowKind::Nil3Closed &&
      !(path.kind() == FlowKind::SU2Ode &&
        !(cfg.flow.params.B == cfg.flow.params.C && cfg.flow.params.C == cfg.flow.params.D)))
    s.reference = radial_rigidity(radial_warp0(cfg)).T;
  return s;
}

// ---------------------------------------------------------------------------
// Identity residual table.

// Residuals at or below this level are roundoff: the identity is exact for
// the path (e.g. a density linear in t) and carries no convergence order.
inline constexpr double kResidualFloor = 1e-9;

struct IdentityTable {
  std::vector<IdentityResiduals> rows;  // ordered by t, then h as given
  std::vector<double> t;
  std::vector<double> h;

  const IdentityResiduals& at(std::size_t ti, std::size_t hi) const { return rows[ti * h.size() + hi]; }

  /// Observed order between consecutive h levels for one residual, or NaN
  /// when both values sit at the roundoff floor.
  static double order(double coarse, double fine, double ratio) {
    if (coarse <= kResidualFloor && fine <= kResidualFloor) return std::numeric_limits<double>::quiet_NaN();
    return std::log(coarse / fine) / std::log(ratio);
  }
};

inline std::array<double, 4> residual_values(const IdentityResiduals& r) {
  return {r.volume, r.gradient, r.field, r.divergence};
}

inline constexpr std::array<const char*, 4> kResidualNames{"volume", "gradient", "field", "divergence"};

inline IdentityTable check_identities(const FlowPath& path, const std::vector<double>& ts,
                                      const std::vector<double>& hs, std::uint64_t seed,
                                      int points = 8) {
  if (ts.empty() || hs.empty()) throw UsageError("check_identities: need times and steps");
  IdentityTable tab{{}, ts, hs};
  const auto pts = identity_sample_points(path, seed, points);
  for (double t : ts)
    for (double h : hs) tab.rows.push_back(flow_identity_residuals(path, t, h, pts));
  return tab;
}

/// Worst observed order over all samples, residuals and consecutive h pairs;
/// NaN when every residual is at the roundoff floor.
inline double worst_order(const IdentityTable& tab) {
  double worst = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t ti = 0; ti < tab.t.size(); ++ti)
    for (std::size_t hi = 0; hi + 1 < tab.h.size(); ++hi) {
      const auto a = residual_values(tab.at(ti, hi));
      const auto b = residual_values(tab.at(ti, hi + 1));
      for (int k = 0; k < 4; ++k) {
        const double p = IdentityTable::order(a[k], b[k], tab.h[hi] / tab.h[hi + 1]);
        if (!std::isnan(p) && (std::isnan(worst) || p < worst)) worst = p;
      }
    }
  return worst;
}

// ---------------------------------------------------------------------------
// Serialization.

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// JSON numbers, with non-finite values encoded as null.
inline Json jnum(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json jarray(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(jnum(x));
  return a;
}

/// Bound pairs emitted per sample, in column order.
inline std::vector<std::tuple<std::string, std::vector<double>, std::vector<double>>> bound_columns(
    const RunReport& rep) {
  std::vector<std::tuple<std::string, std::vector<double>, std::vector<double>>> cols;
  for (const auto& env : rep.envelopes) cols.emplace_back(env.tag, env.lower, env.upper);
  if (!rep.radial) {
    std::vector<double> lo, up, tlo, tup;
    for (const auto& s : rep.samples) {
      lo.push_back(s.polya_best);
      up.push_back(s.field_best);
      tlo.push_back(s.transported_lower);
      tup.push_back(s.transported_upper);
    }
    if (rep.config.variational && std::any_of(lo.begin(), lo.end(), [](double x) { return std::isfinite(x); }))
      cols.emplace_back("variational", lo, up);
    if (std::any_of(tlo.begin(), tlo.end(), [](double x) { return std::isfinite(x); }))
      cols.emplace_back("transported", tlo, tup);
  }
  return cols;
}

inline std::string report_csv(const RunReport& rep) {
  const auto cols = bound_columns(rep);
  std::ostringstream os;
  os << "t,T,V,T_energy,residual";
  for (const auto& [tag, lo, up] : cols) os << ",lower_" << tag << ",upper_" << tag;
  os << "\n";
  for (std::size_t i = 0; i < rep.samples.size(); ++i) {
    const auto& s = rep.samples[i];
    os << fmt_double(s.t) << ',' << fmt_double(s.T) << ',' << fmt_double(s.V) << ','
       << fmt_double(s.T_energy) << ',' << fmt_double(s.residual);
    for (const auto& [tag, lo, up] : cols) os << ',' << fmt_double(lo[i]) << ',' << fmt_double(up[i]);
    os << "\n";
  }
  return os.str();
}

inline Json verdicts_json(const FunctionalVerdicts& v, const RigiditySeries& s) {
  Json a = Json::array();
  for (const auto& x : v.verdicts) {
    Json j;
    j["functional"] = x.functional;
    j["expected"] = to_string(x.expected);
    j["certified"] = x.certified;
    j["passed"] = x.passed;
    j["worst_violation"] = jnum(x.worst_violation);
    j["worst_pair"] = {jnum(s.entries[x.worst_from].t), jnum(s.entries[x.worst_to].t)};
    a.push_back(j);
  }
  return a;
}

inline Json report_json(const RunReport& rep) {
  Json j;
  j["tool"] = {{"name", "torsilab"}, {"version", kToolVersion}};
  j["config"] = rep.config.echo;
  j["path"] = {{"kind", to_string(rep.kind)}, {"dim", rep.n}, {"t_max", jnum(rep.t_max)}};
  if (rep.radial)
    j["domain"] = {{"model", "radial"}};
  else
    j["domain"] = {{"model", "mesh"},
                   {"h", rep.mesh_h},
                   {"vertices", rep.vertices},
                   {"cells", rep.cells},
                   {"interior", rep.interior}};
  Json series = Json::array();
  for (const auto& s : rep.samples) {
    Json e;
    e["t"] = s.t;
    e["T"] = jnum(s.T);
    e["V"] = jnum(s.V);
    e["T_energy"] = jnum(s.T_energy);
    e["residual"] = jnum(s.residual);
    e["iterations"] = s.iterations;
    e["budget"] = jnum(s.budget);
    if (std::isfinite(s.T_coarse)) e["T_coarse"] = s.T_coarse;
    if (!s.polya.empty()) {
      Json p = Json::object(), f = Json::object();
      for (const auto& [name, v] : s.polya) p[name] = jnum(v);
      for (const auto& [name, v] : s.fields) f[name] = jnum(v);
      e["polya"] = p;
      e["fields"] = f;
    }
    if (std::isfinite(s.transported_lower))
      e["transported"] = {jnum(s.transported_lower), jnum(s.transported_upper)};
    series.push_back(e);
  }
  j["series"] = series;
  Json envs = Json::array();
  for (const auto& env : rep.envelopes)
    envs.push_back({{"tag", env.tag}, {"lower", jarray(env.lower)}, {"upper", jarray(env.upper)}});
  j["envelopes"] = envs;
  Json cont = Json::array();
  for (const auto& c : rep.containment)
    cont.push_back({{"tag", c.tag},
                    {"inside", c.inside},
                    {"worst_excess", jnum(c.worst_excess)},
                    {"worst_t", c.worst_t}});
  j["containment"] = cont;
  if (rep.verdicts) j["verdicts"] = verdicts_json(*rep.verdicts, rep.series);
  j["status"] = rep.certified_ok() ? "pass" : "violation";
  return j;
}

inline Json sweep_json(const ExperimentConfig& cfg, const SweepReport& s) {
  Json j;
  j["tool"] = {{"name", "torsilab"}, {"version", kToolVersion}};
  j["config"] = cfg.echo;
  Json rows = Json::array();
  for (std::size_t i = 0; i < s.T.size(); ++i)
    rows.push_back({{"level", s.levels[i]},
                    {"h", s.h[i]},
                    {"T", s.T[i]},
                    {"V", s.V[i]},
                    {"residual", s.residual[i]}});
  j["levels"] = rows;
  j["extrapolated"] = jnum(s.extrapolated);
  j["order"] = jnum(s.order);
  j["reference"] = jnum(s.reference);
  return j;
}

inline std::string sweep_csv(const SweepReport& s) {
  std::ostringstream os;
  os << "level,h,T,V,residual\n";
  for (std::size_t i = 0; i < s.T.size(); ++i)
    os << s.levels[i] << ',' << fmt_double(s.h[i]) << ',' << fmt_double(s.T[i]) << ','
       << fmt_double(s.V[i]) << ',' << fmt_double(s.residual[i]) << "\n";
  return os.str();
}

inline std::string identities_csv(const IdentityTable& tab) {
  std::ostringstream os;
  os << "t,h,volume,gradient,field,divergence\n";
  for (const auto& r : tab.rows)
    os << fmt_double(r.t) << ',' << fmt_double(r.h) << ',' << fmt_double(r.volume) << ','
       << fmt_double(r.gradient) << ',' << fmt_double(r.field) << ',' << fmt_double(r.divergence)
       << "\n";
  return os.str();
}

inline Json identities_json(const ExperimentConfig& cfg, const IdentityTable& tab, std::uint64_t seed) {
  Json j;
  j["tool"] = {{"name", "torsilab"}, {"version", kToolVersion}};
  j["config"] = cfg.echo;
  j["seed"] = seed;
  Json rows = Json::array();
  for (const auto& r : tab.rows)
    rows.push_back({{"t", r.t},
                    {"h", r.h},
                    {"volume", r.volume},
                    {"gradient", r.gradient},
                    {"field", r.field},
                    {"divergence", r.divergence}});
  j["rows"] = rows;
  Json orders = Json::array();
  for (std::size_t ti = 0; ti < tab.t.size(); ++ti)
    for (std::size_t hi = 0; hi + 1 < tab.h.size(); ++hi) {
      Json o;
      o["t"] = tab.t[ti];
      o["h"] = {tab.h[hi], tab.h[hi + 1]};
      const auto a = residual_values(tab.at(ti, hi));
      const auto b = residual_values(tab.at(ti, hi + 1));
      for (int k = 0; k < 4; ++k)
        o[kResidualNames[k]] = jnum(IdentityTable::order(a[k], b[k], tab.h[hi] / tab.h[hi + 1]));
      orders.push_back(o);
    }
  j["orders"] = orders;
  j["floor"] = kResidualFloor;
  return j;
}

/// Writes via a sibling temporary file and a rename, so readers never see a
/// partial file.
inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path() && !fs::exists(target.parent_path()))
    fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace torsilab
