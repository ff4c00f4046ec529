#pragma once

// Metrics in coordinate charts: Euclidean, constant scalings, left-invariant
// metrics on the Heisenberg group in a Milnor coframe, and rotationally
// symmetric (warped) metrics. Curvature is available in closed form for the
// homogeneous families and numerically for any chart metric.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "torsilab/errors.hpp"

namespace torsilab {

inline constexpr int kMaxDim = 3;

using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// A symmetric positive-definite matrix field on a chart of dimension 1, 2 or 3.
///
/// `constant_density` marks metrics whose volume density does not vary in
/// space (homogeneous charts, constant scalings of Euclidean space). Code
/// that relies on coordinate divergences being metric divergences checks it.
class MetricField {
 public:
  using Eval = std::function<Matrix(const Point&)>;
  using Contains = std::function<bool(const Point&)>;

  MetricField(int dim, Eval eval, Contains contains = {}, bool constant_density = false,
              std::string name = "metric")
      : dim_(dim),
        eval_(std::move(eval)),
        contains_(std::move(contains)),
        constant_density_(constant_density),
        name_(std::move(name)) {
    if (dim < 1 || dim > kMaxDim) throw UsageError("metric dimension must be 1, 2 or 3");
  }

  int dim() const { return dim_; }
  bool constant_density() const { return constant_density_; }
  const std::string& name() const { return name_; }

  bool contains(const Point& x) const {
    if (x.size() != dim_) return false;
    if (!x.allFinite()) return false;
    return !contains_ || contains_(x);
  }

  Matrix at(const Point& x) const {
    if (!contains(x)) throw DomainError(name_ + ": point outside chart domain");
    return eval_(x);
  }

 private:
  int dim_;
  Eval eval_;
  Contains contains_;
  bool constant_density_;
  std::string name_;
};

inline Matrix metric_at(const MetricField& m, const Point& x) { return m.at(x); }

/// sqrt(det g) at x.
inline double volume_density(const MetricField& m, const Point& x) {
  return std::sqrt(m.at(x).determinant());
}

inline bool is_symmetric(const Matrix& g, double rel_tol = 1e-14) {
  const double scale = g.cwiseAbs().maxCoeff();
  return ((g - g.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale);
}

// Positive definite in the sense that an LL^T factorization has positive pivots.
inline bool is_positive_definite(const Matrix& g) {
  Eigen::LLT<Matrix> llt(g);
  return llt.info() == Eigen::Success;
}

inline MetricField euclidean(int dim) {
  return MetricField(
      dim, [dim](const Point&) { return Matrix(Matrix::Identity(dim, dim)); }, {}, true,
      "euclidean");
}

struct ScalingParams {
  MetricField base;
  double c;
};

/// c * base, for a positive constant c.
inline MetricField make_metric(const ScalingParams& p) {
  if (!(p.c > 0.0)) throw UsageError("scaling factor must be positive");
  const double c = p.c;
  const MetricField base = p.base;
  return MetricField(
      base.dim(), [base, c](const Point& x) { return Matrix(c * base.at(x)); },
      [base](const Point& x) { return base.contains(x); }, base.constant_density(),
      base.name() + "*c");
}

inline MetricField scaled(const MetricField& base, double c) {
  return make_metric(ScalingParams{base, c});
}

// ---------------------------------------------------------------------------
// Homogeneous 3-metrics g = D θ¹⊗θ¹ + B θ²⊗θ² + C θ³⊗θ³ in a Milnor coframe.

enum class Group { Nil3, SU2 };

inline const char* to_string(Group g) { return g == Group::Nil3 ? "Nil3" : "SU2"; }

struct HomogeneousParams3 {
  Group group = Group::Nil3;
  double D = 1.0;
  double B = 1.0;
  double C = 1.0;

  bool valid() const { return D > 0.0 && B > 0.0 && C > 0.0; }
  // Ordering D <= C <= B required for certified SU(2) runs.
  bool ordered() const { return D <= C && C <= B; }
  // Pinching (B - D) / D.
  double delta() const { return (B - D) / D; }
};

inline void require_valid(const HomogeneousParams3& p) {
  if (!p.valid()) throw UsageError("homogeneous metric coefficients must be positive");
}

/// Coframe matrix of the Heisenberg chart on (x, y, z): rows are
/// θ¹ = dz + y dx - x dy, θ² = dx, θ³ = dy, so that dθ¹ = -2 θ²∧θ³.
inline Matrix nil3_coframe(const Point& p) {
  Matrix th(3, 3);
  th << p(1), -p(0), 1.0,  //
      1.0, 0.0, 0.0,       //
      0.0, 1.0, 0.0;
  return th;
}

/// Pulls back a diagonal coframe tensor diag(a1, a2, a3) to chart components.
inline Matrix nil3_pullback(const Point& x, double a1, double a2, double a3) {
  const Matrix th = nil3_coframe(x);
  Eigen::Vector3d d(a1, a2, a3);
  return th.transpose() * d.asDiagonal() * th;
}

inline MetricField nil3_chart_metric(const HomogeneousParams3& p) {
  if (p.group != Group::Nil3) throw UsageError("nil3_chart_metric: group must be Nil3");
  require_valid(p);
  const double D = p.D, B = p.B, C = p.C;
  return MetricField(
      3, [D, B, C](const Point& x) { return nil3_pullback(x, D, B, C); }, {}, true, "nil3");
}

struct Nil3Curvature {
  std::array<double, 3> ric_eigs;  // relative to g, in coframe order
  double scal;
};

inline Nil3Curvature nil3_curvature_closed_form(const HomogeneousParams3& p) {
  if (p.group != Group::Nil3) throw UsageError("nil3_curvature_closed_form: group must be Nil3");
  require_valid(p);
  const double k = 2.0 * p.D / (p.B * p.C);
  Nil3Curvature out{{k, -k, -k}, 0.0};
  out.scal = out.ric_eigs[0] + out.ric_eigs[1] + out.ric_eigs[2];
  return out;
}

struct Su2Ricci {
  double r2;  // along F2 / sqrt(B)
  double r3;  // along F3 / sqrt(C)
  double r4;  // along F1 / sqrt(D)
  double min() const { return std::min({r2, r3, r4}); }
  double max() const { return std::max({r2, r3, r4}); }
  double sum() const { return r2 + r3 + r4; }
};

inline Su2Ricci su2_ricci_eigenvalues(const HomogeneousParams3& p) {
  if (p.group != Group::SU2) throw UsageError("su2_ricci_eigenvalues: group must be SU2");
  require_valid(p);
  const double B = p.B, C = p.C, D = p.D;
  const double k = 2.0 / (B * C * D);
  return {k * (B * B - (D - C) * (D - C)), k * (C * C - (D - B) * (D - B)),
          k * (D * D - (B - C) * (B - C))};
}

/// Left-invariant coframe of SU(2) = S³ in the hemisphere chart
/// q = (√(1 - |x|²), x): rows are the components of Im(q̄ dq), so that the
/// round unit sphere is σ₁² + σ₂² + σ₃².
inline Matrix su2_coframe(const Point& x) {
  const double r2 = x.squaredNorm();
  if (!(r2 < 1.0)) throw DomainError("su2 chart: point outside the unit ball");
  const double w = std::sqrt(1.0 - r2);
  Matrix S(3, 3);
  S << w, x(2), -x(1),  //
      -x(2), w, x(0),   //
      x(1), -x(0), w;
  S += x * x.transpose() / w;
  return S;
}

/// Pulls back diag(a1, a2, a3) in the SU(2) coframe to chart components.
inline Matrix su2_pullback(const Point& x, double a1, double a2, double a3) {
  const Matrix S = su2_coframe(x);
  Eigen::Vector3d d(a1, a2, a3);
  return S.transpose() * d.asDiagonal() * S;
}

/// D σ₁² + B σ₂² + C σ₃² on the open unit chart ball.
inline MetricField su2_chart_metric(const HomogeneousParams3& p) {
  if (p.group != Group::SU2) throw UsageError("su2_chart_metric: group must be SU2");
  require_valid(p);
  const double D = p.D, B = p.B, C = p.C;
  return MetricField(
      3, [D, B, C](const Point& x) { return su2_pullback(x, D, B, C); },
      [](const Point& x) { return x.squaredNorm() < 1.0; }, false, "su2");
}

// ---------------------------------------------------------------------------
// Rotationally symmetric metrics dr² + f(r)² dσ² on a ball of radius R.

struct RadialWarp {
  int n = 2;                        // domain dimension
  std::function<double(double)> f;  // f(0) = 0, f'(0) = 1
  double R = 1.0;                   // domain radius
  // Radius up to which the warped chart is a valid metric (f > 0 on (0, chart_radius)).
  double chart_radius = std::numeric_limits<double>::infinity();
};

inline RadialWarp flat_warp(int n, double R) { return {n, [](double r) { return r; }, R}; }

// Geodesic ball of radius R in the round n-sphere of radius rho.
inline RadialWarp sphere_warp(int n, double rho, double R) {
  return {n, [rho](double r) { return rho * std::sin(r / rho); }, R, std::numbers::pi * rho};
}

// Geodesic ball of radius R in hyperbolic space of curvature -1/rho².
inline RadialWarp hyperbolic_warp(int n, double rho, double R) {
  return {n, [rho](double r) { return rho * std::sinh(r / rho); }, R};
}

/// The same warped ball under the metric c·g: f_c(s) = √c f(s/√c), R_c = √c R.
inline RadialWarp scaled_warp(const RadialWarp& w, double c) {
  if (!(c > 0.0)) throw UsageError("scaling factor must be positive");
  const double s = std::sqrt(c);
  auto f = w.f;
  return {w.n, [f, s](double r) { return s * f(r / s); }, s * w.R, s * w.chart_radius};
}

inline bool valid(const RadialWarp& w) {
  return w.n >= 1 && w.R > 0.0 && w.R <= w.chart_radius && static_cast<bool>(w.f);
}

/// The warped metric written in Cartesian coordinates:
/// g = P + (f(r)/r)² (I - P) with P the radial projector.
inline MetricField radial_chart_metric(const RadialWarp& w) {
  if (w.n < 1 || w.n > kMaxDim) throw UsageError("radial chart dimension must be 1, 2 or 3");
  const int n = w.n;
  const auto f = w.f;
  const double limit = w.chart_radius;
  return MetricField(
      n,
      [n, f](const Point& x) {
        const double r = x.norm();
        Matrix g = Matrix::Identity(n, n);
        if (r == 0.0) return g;
        const double q = f(r) / r;
        const Point u = x / r;
        const Matrix proj = u * u.transpose();
        g = proj + q * q * (Matrix(Matrix::Identity(n, n)) - proj);
        return g;
      },
      [limit](const Point& x) { return x.norm() < limit; }, n == 1, "radial");
}

// ---------------------------------------------------------------------------
// Finite-difference curvature.

namespace detail {

using Christoffel = std::array<Matrix, kMaxDim>;  // gamma[k](i, j) = Γ^k_ij

inline Christoffel christoffel_fd(const MetricField& m, const Point& x, double h) {
  const int n = m.dim();
  std::array<Matrix, kMaxDim> dg;  // dg[l] = ∂_l g
  for (int l = 0; l < n; ++l) {
    Point xp = x, xm = x;
    xp(l) += h;
    xm(l) -= h;
    dg[l] = (m.at(xp) - m.at(xm)) / (2.0 * h);
  }
  const Matrix ginv = m.at(x).inverse();
  Christoffel gam;
  for (int k = 0; k < n; ++k) {
    gam[k] = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += ginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
        gam[k](i, j) = 0.5 * s;
      }
  }
  return gam;
}

}  // namespace detail

/// Ricci tensor (chart components) from nested central differences of g.
inline Matrix ricci_numeric(const MetricField& m, const Point& x, double h = 0.01) {
  if (!(h > 0.0)) throw UsageError("finite-difference step must be positive");
  const int n = m.dim();
  const auto gam = detail::christoffel_fd(m, x, h);
  std::array<detail::Christoffel, kMaxDim> dgam;  // dgam[m][k] = ∂_m Γ^k
  for (int a = 0; a < n; ++a) {
    Point xp = x, xm = x;
    xp(a) += h;
    xm(a) -= h;
    const auto gp = detail::christoffel_fd(m, xp, h);
    const auto gm = detail::christoffel_fd(m, xm, h);
    for (int k = 0; k < n; ++k) dgam[a][k] = (gp[k] - gm[k]) / (2.0 * h);
  }
  Matrix ric = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        s += dgam[k][k](i, j) - dgam[j][k](i, k);
        for (int l = 0; l < n; ++l)
          s += gam[k](k, l) * gam[l](i, j) - gam[k](j, l) * gam[l](i, k);
      }
      ric(i, j) = s;
    }
  return 0.5 * (ric + ric.transpose());
}

/// Scalar curvature at x; requires the chart to contain the box of half-width 2h around x.
inline double scalar_curvature_numeric(const MetricField& m, const Point& x, double h = 0.01) {
  for (int a = 0; a < m.dim(); ++a)
    for (double s : {-2.0 * h, 2.0 * h}) {
      Point y = x;
      y(a) += s;
      if (!m.contains(y)) throw DomainError("curvature stencil leaves the chart domain");
    }
  const Matrix ric = ricci_numeric(m, x, h);
  const Matrix ginv = m.at(x).inverse();
  return (ginv.cwiseProduct(ric)).sum();
}

}  // namespace torsilab
