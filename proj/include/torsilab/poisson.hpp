#pragma once

// Piecewise-linear Galerkin discretization of Δ_g E = -1, E = 0 on the
// boundary. The metric enters through a one-point (barycentre) rule, so a
// constant rescaling of g rescales the discrete system exactly.

#include <algorithm>
#include <string>
#include <vector>

#include "torsilab/errors.hpp"
#include "torsilab/mesh.hpp"
#include "torsilab/metric.hpp"
#include "torsilab/sparse.hpp"

namespace torsilab {

/// Per-cell data at the barycentre: chart volume, metric, inverse metric,
/// density, and the chart gradients of the d+1 barycentric basis functions (rows).
struct CellGeometry {
  double volume;
  double density;
  Matrix g;
  Matrix ginv;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim + 1, kMaxDim> grads;
  Point barycenter;

  double measure() const { return volume * density; }
};

inline CellGeometry cell_geometry(const SimplicialMesh& mesh, const MetricField& m, const Cell& c) {
  const int d = mesh.dim;
  const Matrix J = cell_jacobian(mesh, c);
  const Matrix Jinv = J.inverse();
  CellGeometry out;
  out.volume = J.determinant() / factorial(d);
  out.barycenter = cell_barycenter(mesh, c);
  out.g = m.at(out.barycenter);
  out.ginv = out.g.inverse();
  out.density = std::sqrt(out.g.determinant());
  out.grads.resize(d + 1, d);
  out.grads.row(0) = -Jinv.colwise().sum();
  for (int k = 0; k < d; ++k) out.grads.row(k + 1) = Jinv.row(k);
  return out;
}

inline void require_compatible(const SimplicialMesh& mesh, const MetricField& m) {
  if (mesh.dim != m.dim()) throw UsageError("mesh and metric dimensions differ");
}

/// Scalar field with one value per mesh vertex.
struct ScalarFieldOnMesh {
  Vector values;
};

/// Global stiffness (all vertices) and load vector.
struct Assembly {
  SparseMatrix stiffness;
  Vector load;
};

inline Assembly assemble(const SimplicialMesh& mesh, const MetricField& m) {
  require_compatible(mesh, m);
  const int d = mesh.dim;
  const auto nv = static_cast<Eigen::Index>(mesh.num_vertices());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.num_cells() * static_cast<std::size_t>((d + 1) * (d + 1)));
  Vector load = Vector::Zero(nv);
  for (const Cell& c : mesh.cells) {
    const CellGeometry cg = cell_geometry(mesh, m, c);
    const double w = cg.measure();
    const auto local = (cg.grads * cg.ginv * cg.grads.transpose()).eval();
    for (int a = 0; a <= d; ++a) {
      load(c[a]) += w / (d + 1);
      for (int b = 0; b <= d; ++b) trip.emplace_back(c[a], c[b], w * local(a, b));
    }
  }
  Assembly out;
  out.stiffness.resize(nv, nv);
  out.stiffness.setFromTriplets(trip.begin(), trip.end());
  out.load = std::move(load);
  return out;
}

/// Maps between all vertices and the interior (non-boundary) unknowns.
struct InteriorIndex {
  std::vector<Eigen::Index> of_vertex;  // -1 on boundary
  std::vector<Eigen::Index> vertex;     // interior id -> vertex id

  explicit InteriorIndex(const SimplicialMesh& mesh) : of_vertex(mesh.num_vertices(), -1) {
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
      if (!mesh.boundary[i]) {
        of_vertex[i] = static_cast<Eigen::Index>(vertex.size());
        vertex.push_back(static_cast<Eigen::Index>(i));
      }
  }
  Eigen::Index size() const { return static_cast<Eigen::Index>(vertex.size()); }

  Vector restrict(const Vector& full) const {
    Vector out(size());
    for (Eigen::Index i = 0; i < size(); ++i) out(i) = full(vertex[static_cast<std::size_t>(i)]);
    return out;
  }
  Vector extend(const Vector& interior, Eigen::Index nv) const {
    Vector out = Vector::Zero(nv);
    for (Eigen::Index i = 0; i < size(); ++i) out(vertex[static_cast<std::size_t>(i)]) = interior(i);
    return out;
  }
};

/// Interior-interior block of the stiffness matrix (strong Dirichlet elimination).
inline SparseMatrix interior_block(const SparseMatrix& K, const InteriorIndex& idx) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(K.nonZeros()));
  for (Eigen::Index row = 0; row < K.outerSize(); ++row) {
    const Eigen::Index ir = idx.of_vertex[static_cast<std::size_t>(row)];
    if (ir < 0) continue;
    for (SparseMatrix::InnerIterator it(K, row); it; ++it) {
      const Eigen::Index ic = idx.of_vertex[static_cast<std::size_t>(it.col())];
      if (ic >= 0) trip.emplace_back(ir, ic, it.value());
    }
  }
  SparseMatrix A(idx.size(), idx.size());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

struct RigidityReport {
  double T_integral = 0.0;  // ∫ E dV
  double T_energy = 0.0;    // ∫ |∇E|² dV
  double V = 0.0;           // ∫ dV
  double residual = 0.0;    // relative residual of the interior solve
  double h = 0.0;
  int iterations = 0;
};

struct SolverOptions {
  double tol = 1e-10;
  int max_iter_factor = 50;  // cap = factor * interior count
};

struct ExitTimeSolution {
  ScalarFieldOnMesh E;
  RigidityReport report;
};

inline double domain_volume(const SimplicialMesh& mesh, const MetricField& m) {
  require_compatible(mesh, m);
  double v = 0.0;
  for (const Cell& c : mesh.cells) v += cell_geometry(mesh, m, c).measure();
  return v;
}

/// Solves the Dirichlet problem for the mean exit time and reports the
/// torsional rigidity computed as ∫E dV and as the Dirichlet energy.
inline ExitTimeSolution solve_exit_time(const SimplicialMesh& mesh, const MetricField& m,
                                        const SolverOptions& opt = {}) {
  require_compatible(mesh, m);
  if (!(opt.tol > 0.0)) throw UsageError("solve_exit_time: tol must be positive");
  const InteriorIndex idx(mesh);
  if (idx.size() == 0) throw UsageError("solve_exit_time: mesh has no interior vertex");
  const Assembly sys = assemble(mesh, m);
  const SparseMatrix A = interior_block(sys.stiffness, idx);
  const Vector b = idx.restrict(sys.load);
  Vector x = Vector::Zero(idx.size());
  const int cap = opt.max_iter_factor * static_cast<int>(idx.size());
  const CgResult cg = pcg(A, b, x, opt.tol, cap);
  if (!cg.converged)
    throw SolverError("solve_exit_time: CG did not converge within " + std::to_string(cap) +
                          " iterations (residual " + std::to_string(cg.relative_residual) + ")",
                      cg.history);
  ExitTimeSolution out;
  out.E.values = idx.extend(x, static_cast<Eigen::Index>(mesh.num_vertices()));
  RigidityReport& rep = out.report;
  rep.T_integral = b.dot(x);
  rep.T_energy = x.dot(A * x);
  rep.V = sys.load.sum();
  rep.residual = cg.relative_residual;
  rep.h = mesh.h;
  rep.iterations = cg.iterations;
  return out;
}

}  // namespace torsilab
