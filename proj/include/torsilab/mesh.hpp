#pragma once

// Simplicial meshes of dimension 1-3: disk (concentric rings), boxes (Kuhn
// split), balls (radially projected cubes), and a plain-text exchange format.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "torsilab/errors.hpp"
#include "torsilab/metric.hpp"

namespace torsilab {

using Cell = std::array<std::int32_t, kMaxDim + 1>;

struct SimplicialMesh {
  int dim = 2;
  std::vector<Point> vertices;
  std::vector<Cell> cells;  // first dim+1 entries used
  std::vector<std::uint8_t> boundary;
  double h = 0.0;  // max cell diameter

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_cells() const { return cells.size(); }
  std::size_t num_interior() const {
    return static_cast<std::size_t>(std::count(boundary.begin(), boundary.end(), 0));
  }
};

/// Edge matrix [v1 - v0, ..., vd - v0] of a cell.
inline Matrix cell_jacobian(const SimplicialMesh& mesh, const Cell& c) {
  const int d = mesh.dim;
  Matrix J(d, d);
  for (int k = 0; k < d; ++k) J.col(k) = mesh.vertices[c[k + 1]] - mesh.vertices[c[0]];
  return J;
}

inline double factorial(int d) { return d == 1 ? 1.0 : d == 2 ? 2.0 : 6.0; }

/// Signed chart volume of a cell.
inline double signed_cell_volume(const SimplicialMesh& mesh, const Cell& c) {
  return cell_jacobian(mesh, c).determinant() / factorial(mesh.dim);
}

inline Point cell_barycenter(const SimplicialMesh& mesh, const Cell& c) {
  Point xc = Point::Zero(mesh.dim);
  for (int k = 0; k <= mesh.dim; ++k) xc += mesh.vertices[c[k]];
  return xc / (mesh.dim + 1);
}

inline double chart_volume(const SimplicialMesh& mesh) {
  double v = 0.0;
  for (const Cell& c : mesh.cells) v += signed_cell_volume(mesh, c);
  return v;
}

inline double cell_diameter(const SimplicialMesh& mesh, const Cell& c) {
  double d = 0.0;
  for (int a = 0; a <= mesh.dim; ++a)
    for (int b = a + 1; b <= mesh.dim; ++b)
      d = std::max(d, (mesh.vertices[c[a]] - mesh.vertices[c[b]]).norm());
  return d;
}

// Orients every cell positively and recomputes h.
inline void finalize(SimplicialMesh& mesh) {
  double h = 0.0;
  for (Cell& c : mesh.cells) {
    if (signed_cell_volume(mesh, c) < 0.0) std::swap(c[0], c[1]);
    h = std::max(h, cell_diameter(mesh, c));
  }
  mesh.h = h;
}

/// Structural checks: index ranges, positive volumes, boundary flag count.
inline void validate(const SimplicialMesh& mesh) {
  if (mesh.dim < 1 || mesh.dim > kMaxDim) throw UsageError("mesh: dimension must be 1, 2 or 3");
  if (mesh.boundary.size() != mesh.vertices.size())
    throw UsageError("mesh: boundary flags must cover every vertex");
  for (const Point& v : mesh.vertices)
    if (v.size() != mesh.dim) throw UsageError("mesh: vertex dimension mismatch");
  const auto nv = static_cast<std::int32_t>(mesh.vertices.size());
  for (const Cell& c : mesh.cells) {
    for (int k = 0; k <= mesh.dim; ++k)
      if (c[k] < 0 || c[k] >= nv) throw UsageError("mesh: cell index out of range");
    if (!(signed_cell_volume(mesh, c) > 0.0)) throw UsageError("mesh: cell with nonpositive volume");
  }
}

inline Point make_point(std::initializer_list<double> xs) {
  Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double v : xs) p(i++) = v;
  return p;
}

/// Disk of radius R from concentric rings: 2^{k+1} rings, ring i has 6i
/// vertices, boundary ring placed exactly on the circle.
inline SimplicialMesh build_disk_mesh(double R, int k) {
  if (!(R > 0.0) || k < 0) throw UsageError("build_disk_mesh: need R > 0 and k >= 0");
  const int rings = 2 << k;
  SimplicialMesh mesh;
  mesh.dim = 2;
  std::vector<std::int32_t> ring_start(rings + 1);
  mesh.vertices.push_back(make_point({0.0, 0.0}));
  mesh.boundary.push_back(0);
  for (int i = 1; i <= rings; ++i) {
    ring_start[i] = static_cast<std::int32_t>(mesh.vertices.size());
    const int m = 6 * i;
    const double rho = (i == rings) ? R : R * i / rings;
    for (int j = 0; j < m; ++j) {
      const double th = 2.0 * std::numbers::pi * j / m;
      mesh.vertices.push_back(make_point({rho * std::cos(th), rho * std::sin(th)}));
      mesh.boundary.push_back(i == rings ? 1 : 0);
    }
  }
  for (int j = 0; j < 6; ++j)
    mesh.cells.push_back({0, ring_start[1] + j, ring_start[1] + (j + 1) % 6, 0});
  // Merge the angular sequences of neighbouring rings; angles are compared as
  // exact fractions j/mi vs l/mo.
  for (int i = 2; i <= rings; ++i) {
    const int mi = 6 * (i - 1), mo = 6 * i;
    const std::int32_t si = ring_start[i - 1], so = ring_start[i];
    int a = 0, b = 0;
    while (a < mi || b < mo) {
      const bool advance_inner =
          b == mo || (a < mi && static_cast<long>(a + 1) * mo < static_cast<long>(b + 1) * mi);
      if (advance_inner) {
        mesh.cells.push_back({si + a % mi, si + (a + 1) % mi, so + b % mo, 0});
        ++a;
      } else {
        mesh.cells.push_back({si + a % mi, so + b % mo, so + (b + 1) % mo, 0});
        ++b;
      }
    }
  }
  finalize(mesh);
  return mesh;
}

struct Interval {
  double lo;
  double hi;
};

namespace detail {

// Kuhn simplices of the unit cube in dimension d: one per axis permutation.
inline std::vector<std::array<int, kMaxDim>> axis_permutations(int d) {
  std::array<int, kMaxDim> p{0, 1, 2};
  std::vector<std::array<int, kMaxDim>> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.begin() + d));
  return out;
}

// Structured grid of 2^k cells per side over `bounds`; cells are Kuhn-split.
inline SimplicialMesh kuhn_grid(const std::vector<Interval>& bounds, int per_side) {
  const int d = static_cast<int>(bounds.size());
  if (d < 1 || d > kMaxDim) throw UsageError("box mesh: dimension must be 1, 2 or 3");
  for (const auto& iv : bounds)
    if (!(iv.hi > iv.lo)) throw UsageError("box mesh: empty interval");
  const int np = per_side + 1;
  SimplicialMesh mesh;
  mesh.dim = d;
  std::array<int, kMaxDim> stride{1, np, np * np};
  const int total = d == 1 ? np : d == 2 ? np * np : np * np * np;
  mesh.vertices.reserve(total);
  for (int id = 0; id < total; ++id) {
    Point x(d);
    bool on_boundary = false;
    for (int a = 0; a < d; ++a) {
      const int ia = (id / stride[a]) % np;
      const auto& iv = bounds[a];
      x(a) = ia == per_side ? iv.hi : iv.lo + (iv.hi - iv.lo) * ia / per_side;
      on_boundary = on_boundary || ia == 0 || ia == per_side;
    }
    mesh.vertices.push_back(x);
    mesh.boundary.push_back(on_boundary ? 1 : 0);
  }
  const auto perms = axis_permutations(d);
  const int cells_total = d == 1 ? per_side : d == 2 ? per_side * per_side
                                                     : per_side * per_side * per_side;
  mesh.cells.reserve(static_cast<std::size_t>(cells_total) * perms.size());
  for (int cid = 0; cid < cells_total; ++cid) {
    int base = 0;
    for (int a = 0, rest = cid; a < d; ++a) {
      base += (rest % per_side) * stride[a];
      rest /= per_side;
    }
    for (const auto& p : perms) {
      Cell c{base, 0, 0, 0};
      int cur = base;
      for (int s = 0; s < d; ++s) {
        cur += stride[p[s]];
        c[s + 1] = cur;
      }
      mesh.cells.push_back(c);
    }
  }
  return mesh;
}

}  // namespace detail

/// Box with 2^k cells per side, each split into d! simplices.
inline SimplicialMesh build_box_mesh(const std::vector<Interval>& bounds, int k) {
  if (k < 0) throw UsageError("build_box_mesh: k must be nonnegative");
  SimplicialMesh mesh = detail::kuhn_grid(bounds, 1 << k);
  finalize(mesh);
  return mesh;
}

/// Ball of radius R: the cube [-R, R]^d with 2^{k+1} cells per side, vertices
/// pushed radially so that each max-norm shell lands on a Euclidean sphere.
inline SimplicialMesh build_ball_mesh(int dim, double R, int k) {
  if (!(R > 0.0) || k < 0) throw UsageError("build_ball_mesh: need R > 0 and k >= 0");
  std::vector<Interval> bounds(static_cast<std::size_t>(dim), Interval{-R, R});
  SimplicialMesh mesh = detail::kuhn_grid(bounds, 2 << k);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    Point& x = mesh.vertices[i];
    const double r2 = x.norm();
    if (r2 == 0.0) continue;
    const double rinf = x.cwiseAbs().maxCoeff();
    x *= rinf / r2;
    if (mesh.boundary[i]) x *= R / x.norm();
  }
  finalize(mesh);
  return mesh;
}

// ---------------------------------------------------------------------------
// Plain-text format:
//   dim nv nc
//   x_1 ... x_dim flag      (nv lines, flag 1 = boundary)
//   i_0 ... i_dim           (nc lines, zero-based vertex indices)

inline void write_mesh(std::ostream& os, const SimplicialMesh& mesh) {
  os << mesh.dim << ' ' << mesh.vertices.size() << ' ' << mesh.cells.size() << '\n';
  os << std::setprecision(17);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    for (int a = 0; a < mesh.dim; ++a) os << mesh.vertices[i](a) << ' ';
    os << static_cast<int>(mesh.boundary[i]) << '\n';
  }
  for (const Cell& c : mesh.cells) {
    for (int a = 0; a <= mesh.dim; ++a) os << c[a] << (a == mesh.dim ? '\n' : ' ');
  }
}

inline SimplicialMesh read_mesh(std::istream& is) {
  SimplicialMesh mesh;
  long nv = 0, nc = 0;
  if (!(is >> mesh.dim >> nv >> nc) || mesh.dim < 1 || mesh.dim > kMaxDim || nv < 0 || nc < 0)
    throw UsageError("read_mesh: bad header, expected 'dim nv nc'");
  mesh.vertices.reserve(static_cast<std::size_t>(nv));
  for (long i = 0; i < nv; ++i) {
    Point x(mesh.dim);
    int flag = 0;
    for (int a = 0; a < mesh.dim; ++a)
      if (!(is >> x(a))) throw UsageError("read_mesh: truncated vertex line " + std::to_string(i));
    if (!(is >> flag) || (flag != 0 && flag != 1))
      throw UsageError("read_mesh: bad boundary flag on vertex " + std::to_string(i));
    mesh.vertices.push_back(x);
    mesh.boundary.push_back(static_cast<std::uint8_t>(flag));
  }
  for (long i = 0; i < nc; ++i) {
    Cell c{0, 0, 0, 0};
    for (int a = 0; a <= mesh.dim; ++a)
      if (!(is >> c[a])) throw UsageError("read_mesh: truncated cell line " + std::to_string(i));
    for (int a = 0; a <= mesh.dim; ++a)
      if (c[a] < 0 || c[a] >= nv) throw UsageError("read_mesh: cell index out of range on line " + std::to_string(i));
    mesh.cells.push_back(c);
  }
  finalize(mesh);
  validate(mesh);
  return mesh;
}

inline SimplicialMesh read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("read_mesh: cannot open " + path);
  return read_mesh(in);
}

inline void write_mesh_file(const std::string& path, const SimplicialMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw UsageError("write_mesh: cannot open " + path);
  write_mesh(out, mesh);
}

}  // namespace torsilab
