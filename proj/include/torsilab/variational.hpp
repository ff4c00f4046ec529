#pragma once

// Certified two-sided bounds for the discrete torsional rigidity:
//   lower: (∫u dV)² / ∫|∇u|² dV for any u vanishing on the boundary,
//   upper: ∫ g(X, X) dV for any X whose weak divergence is -1.
// Gradients are piecewise constant per cell and all cell integrals use the
// barycentre metric, which makes both bounds exact statements about the
// discrete solution.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "torsilab/errors.hpp"
#include "torsilab/mesh.hpp"
#include "torsilab/metric.hpp"
#include "torsilab/poisson.hpp"

namespace torsilab {

inline constexpr double kDefaultDivergenceTol = 1e-8;

struct TrialFunction {
  ScalarFieldOnMesh field;
};

/// Piecewise-constant vector field: one chart vector per cell.
struct DivergenceField {
  std::vector<Point> cell_values;
};

using ScalarFn = std::function<double(const Point&)>;
using VectorFn = std::function<Point(const Point&)>;

inline void check_trial(const TrialFunction& u, const SimplicialMesh& mesh) {
  if (u.field.values.size() != static_cast<Eigen::Index>(mesh.num_vertices()))
    throw UsageError("trial function size does not match mesh");
  bool nonzero = false;
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    const double v = u.field.values(static_cast<Eigen::Index>(i));
    if (mesh.boundary[i] && std::abs(v) > 1e-12)
      throw UsageError("trial function does not vanish on the boundary");
    nonzero = nonzero || v != 0.0;
  }
  if (!nonzero) throw DegenerateTrialError("trial function is identically zero");
}

/// Nodal interpolant of a closed-form trial function; boundary values must be
/// zero to 1e-12 and are then set to exactly zero.
inline TrialFunction interpolate_trial(const SimplicialMesh& mesh, const ScalarFn& fn) {
  TrialFunction u;
  u.field.values.resize(static_cast<Eigen::Index>(mesh.num_vertices()));
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    const double v = fn(mesh.vertices[i]);
    if (mesh.boundary[i]) {
      if (std::abs(v) > 1e-12) throw UsageError("trial function does not vanish on the boundary");
      u.field.values(static_cast<Eigen::Index>(i)) = 0.0;
    } else {
      u.field.values(static_cast<Eigen::Index>(i)) = v;
    }
  }
  check_trial(u, mesh);
  return u;
}

inline TrialFunction as_trial(const ScalarFieldOnMesh& f) { return TrialFunction{f}; }

/// Chart differential of a mesh function on one cell.
inline Point cell_differential(const CellGeometry& cg, const Cell& c, const Vector& u) {
  Point du = Point::Zero(cg.grads.cols());
  for (Eigen::Index a = 0; a < cg.grads.rows(); ++a) du += u(c[a]) * cg.grads.row(a).transpose();
  return du;
}

inline double polya_lower_bound(const TrialFunction& u, const SimplicialMesh& mesh,
                                const MetricField& m) {
  require_compatible(mesh, m);
  check_trial(u, mesh);
  const Vector& vals = u.field.values;
  double mass = 0.0, energy = 0.0;
  for (const Cell& c : mesh.cells) {
    const CellGeometry cg = cell_geometry(mesh, m, c);
    double mean = 0.0;
    for (int a = 0; a <= mesh.dim; ++a) mean += vals(c[a]);
    mean /= (mesh.dim + 1);
    const Point du = cell_differential(cg, c, vals);
    mass += cg.measure() * mean;
    energy += cg.measure() * du.dot(cg.ginv * du);
  }
  if (!(energy > 0.0)) throw DegenerateTrialError("trial function has zero Dirichlet energy");
  return mass * mass / energy;
}

inline DivergenceField sample_field(const SimplicialMesh& mesh, const VectorFn& fn) {
  DivergenceField X;
  X.cell_values.reserve(mesh.num_cells());
  for (const Cell& c : mesh.cells) X.cell_values.push_back(fn(cell_barycenter(mesh, c)));
  return X;
}

/// g-gradient of a mesh function, one vector per cell.
inline DivergenceField metric_gradient_field(const ScalarFieldOnMesh& u, const SimplicialMesh& mesh,
                                             const MetricField& m) {
  require_compatible(mesh, m);
  DivergenceField X;
  X.cell_values.reserve(mesh.num_cells());
  for (const Cell& c : mesh.cells) {
    const CellGeometry cg = cell_geometry(mesh, m, c);
    X.cell_values.push_back(cg.ginv * cell_differential(cg, c, u.values));
  }
  return X;
}

/// Vertex vector ∫ g(X, ∇φ_a) dV - ∫ φ_a dV, zero on boundary vertices.
inline Vector weak_divergence_defect(const DivergenceField& X, const SimplicialMesh& mesh,
                                     const MetricField& m) {
  require_compatible(mesh, m);
  if (X.cell_values.size() != mesh.num_cells()) throw UsageError("field size does not match mesh");
  const auto nv = static_cast<Eigen::Index>(mesh.num_vertices());
  Vector defect = Vector::Zero(nv);
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    const Cell& c = mesh.cells[k];
    const CellGeometry cg = cell_geometry(mesh, m, c);
    const Point& x = X.cell_values[k];
    for (int a = 0; a <= mesh.dim; ++a)
      defect(c[a]) += cg.measure() * (cg.grads.row(a).dot(x) - 1.0 / (mesh.dim + 1));
  }
  for (Eigen::Index i = 0; i < nv; ++i)
    if (mesh.boundary[static_cast<std::size_t>(i)]) defect(i) = 0.0;
  return defect;
}

/// Weak residual of div_g X = -1 over interior hat functions, normalised by
/// the largest load entry ∫ φ_a dV. X = 0 gives exactly 1.
inline double check_divergence(const DivergenceField& X, const SimplicialMesh& mesh,
                               const MetricField& m) {
  const Vector defect = weak_divergence_defect(X, mesh, m);
  const Vector load = assemble(mesh, m).load;
  double lmax = 0.0;
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
    if (!mesh.boundary[i]) lmax = std::max(lmax, load(static_cast<Eigen::Index>(i)));
  if (!(lmax > 0.0)) throw UsageError("check_divergence: mesh has no interior vertex");
  return defect.cwiseAbs().maxCoeff() / lmax;
}

/// ∫ g(X, X) dV, refusing fields whose divergence residual exceeds `tol`.
inline double field_upper_bound(const DivergenceField& X, const SimplicialMesh& mesh,
                                const MetricField& m, double tol = kDefaultDivergenceTol) {
  const double res = check_divergence(X, mesh, m);
  if (!(res <= tol))
    throw InvalidFieldError("divergence residual " + std::to_string(res) + " exceeds tolerance");
  double s = 0.0;
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    const CellGeometry cg = cell_geometry(mesh, m, mesh.cells[k]);
    const Point& x = X.cell_values[k];
    s += cg.measure() * x.dot(cg.g * x);
  }
  return s;
}

/// Turns an arbitrary field Y into one with weak divergence -1 by adding the
/// g-gradient of q, where K q = b - B Y on the interior.
inline DivergenceField divergence_corrected_field(const DivergenceField& Y,
                                                  const SimplicialMesh& mesh, const MetricField& m,
                                                  const SolverOptions& opt = {}) {
  const Vector defect = weak_divergence_defect(Y, mesh, m);
  const InteriorIndex idx(mesh);
  const Assembly sys = assemble(mesh, m);
  const SparseMatrix A = interior_block(sys.stiffness, idx);
  const Vector rhs = -idx.restrict(defect);
  Vector q = Vector::Zero(idx.size());
  const CgResult cg = pcg(A, rhs, q, opt.tol * 1e-2, opt.max_iter_factor * static_cast<int>(idx.size()));
  if (!cg.converged) throw SolverError("divergence correction did not converge", cg.history);
  const ScalarFieldOnMesh qf{idx.extend(q, static_cast<Eigen::Index>(mesh.num_vertices()))};
  DivergenceField grad = metric_gradient_field(qf, mesh, m);
  DivergenceField X = Y;
  for (std::size_t k = 0; k < X.cell_values.size(); ++k) X.cell_values[k] += grad.cell_values[k];
  return X;
}

/// Pólya quotient of the time-0 exit time measured with the time-t metric.
inline double transported_lower_bound(const ScalarFieldOnMesh& E0, const SimplicialMesh& mesh,
                                      const MetricField& m_t) {
  return polya_lower_bound(as_trial(E0), mesh, m_t);
}

/// ∫ g_t(X, X) dV_t for X = ∇^{g_0} E_0. Only certified when tr_g f is
/// spatially constant along the path, which the caller asserts.
inline double transported_upper_bound(const ScalarFieldOnMesh& E0, const SimplicialMesh& mesh,
                                      const MetricField& m0, const MetricField& m_t,
                                      bool tr_f_constant) {
  if (!tr_f_constant)
    throw UncertifiedBoundError("transported upper bound needs spatially constant tr_g f");
  require_compatible(mesh, m0);
  require_compatible(mesh, m_t);
  double s = 0.0;
  for (const Cell& c : mesh.cells) {
    const CellGeometry g0 = cell_geometry(mesh, m0, c);
    const CellGeometry gt = cell_geometry(mesh, m_t, c);
    const Point X = g0.ginv * cell_differential(g0, c, E0.values);
    s += gt.measure() * X.dot(gt.g * X);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Deterministic families used for sandwich checks.

/// Domain shape used to build trial functions and divergence fields.
struct DomainShape {
  enum class Kind { Ball, Box };
  Kind kind = Kind::Ball;
  int dim = 2;
  double radius = 1.0;            // Ball
  std::vector<Interval> bounds;   // Box

  static DomainShape ball(int dim, double R) { return {Kind::Ball, dim, R, {}}; }
  static DomainShape box(std::vector<Interval> b) {
    return {Kind::Box, static_cast<int>(b.size()), 0.0, std::move(b)};
  }

  Point center() const {
    Point c = Point::Zero(dim);
    if (kind == Kind::Box)
      for (int a = 0; a < dim; ++a) c(a) = 0.5 * (bounds[a].lo + bounds[a].hi);
    return c;
  }
  double scale() const {
    if (kind == Kind::Ball) return radius;
    double s = 0.0;
    for (const auto& iv : bounds) s = std::max(s, 0.5 * (iv.hi - iv.lo));
    return s;
  }
  /// Positive inside, zero on the boundary.
  double bubble(const Point& x) const {
    if (kind == Kind::Ball) return std::max(0.0, (radius * radius - x.squaredNorm()) / (radius * radius));
    double p = 1.0;
    for (int a = 0; a < dim; ++a) {
      const auto& iv = bounds[a];
      const double w = 0.5 * (iv.hi - iv.lo);
      p *= std::max(0.0, (x(a) - iv.lo) * (iv.hi - x(a)) / (w * w));
    }
    return p;
  }
};

/// Five closed-form trial functions vanishing on the boundary.
inline std::vector<std::pair<std::string, ScalarFn>> standard_trial_functions(const DomainShape& s) {
  const Point c = s.center();
  const double L = s.scale();
  const int last = s.dim - 1;
  return {
      {"bubble", [s](const Point& x) { return s.bubble(x); }},
      {"bubble^2", [s](const Point& x) { return std::pow(s.bubble(x), 2); }},
      {"tilted", [s, c, L](const Point& x) { return s.bubble(x) * (1.0 + 0.5 * (x(0) - c(0)) / L); }},
      {"wavy", [s, c, L, last](const Point& x) {
         return s.bubble(x) * (2.0 + std::sin(3.0 * (x(last) - c(last)) / L));
       }},
      {"gaussian", [s, c, L](const Point& x) {
         return s.bubble(x) * std::exp(-(x - c).squaredNorm() / (L * L));
       }},
  };
}

/// Three closed-form fields with coordinate divergence -1; valid upper-bound
/// fields whenever the metric has constant density.
inline std::vector<std::pair<std::string, VectorFn>> standard_divergence_fields(const DomainShape& s) {
  const Point c = s.center();
  const double L = s.scale();
  const int n = s.dim;
  return {
      {"radial", [c, n](const Point& x) { return Point((c - x) / n); }},
      {"first_axis", [c](const Point& x) {
         Point X = Point::Zero(x.size());
         X(0) = c(0) - x(0);
         return X;
       }},
      {"last_axis_shifted", [c, L](const Point& x) {
         Point X = Point::Zero(x.size());
         const int k = static_cast<int>(x.size()) - 1;
         X(k) = c(k) - x(k) + 0.1 * L;
         return X;
       }},
  };
}

/// The standard fields made admissible for `m`: sampled directly when the
/// density is constant, otherwise corrected to weak divergence -1.
inline std::vector<std::pair<std::string, DivergenceField>> admissible_fields(
    const DomainShape& s, const SimplicialMesh& mesh, const MetricField& m,
    const SolverOptions& opt = {}) {
  std::vector<std::pair<std::string, DivergenceField>> out;
  for (const auto& [name, fn] : standard_divergence_fields(s)) {
    DivergenceField X = sample_field(mesh, fn);
    if (!m.constant_density()) X = divergence_corrected_field(X, mesh, m, opt);
    out.emplace_back(name, std::move(X));
  }
  return out;
}

}  // namespace torsilab
