#pragma once

// Ricci flow and inverse mean curvature flow on the supported families:
// Einstein scaling, closed-form Nil3 flow, RK4-integrated SU(2) flow and
// round-sphere IMCF. Each path exposes its metric in a chart and the metric
// velocity f = ∂g/∂t, which is what the evolution identities are checked on.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "torsilab/errors.hpp"
#include "torsilab/metric.hpp"

namespace torsilab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Closed forms.

/// Metric factor 1 - 2λt of the Einstein family g_t = (1 - 2λt) g_0.
inline double einstein_flow(double lambda, int n, double t) {
  if (n < 1) throw UsageError("dimension must be positive");
  if (!(t >= 0.0)) throw RangeError("einstein_flow: t must be nonnegative");
  if (lambda > 0.0 && t >= 1.0 / (2.0 * lambda))
    throw RangeError("einstein_flow: t beyond maximal time 1/(2λ)");
  return 1.0 - 2.0 * lambda * t;
}

/// Closed-form Ricci flow of a left-invariant metric on Nil3; D plays the
/// role of the coefficient along the centre of the Lie algebra.
inline HomogeneousParams3 nil3_flow(const HomogeneousParams3& p0, double t) {
  if (p0.group != Group::Nil3) throw UsageError("nil3_flow: group must be Nil3");
  require_valid(p0);
  if (!(t >= 0.0)) throw RangeError("nil3_flow: t must be nonnegative");
  const double D0 = p0.D, B0 = p0.B, C0 = p0.C;
  const double s = 12.0 * t + B0 * C0 / D0;
  HomogeneousParams3 p{Group::Nil3, 0.0, 0.0, 0.0};
  p.D = std::cbrt(D0 * D0 * B0 * C0 / s);
  p.B = std::cbrt(D0 * B0 * B0 * s / C0);
  p.C = std::cbrt(D0 * C0 * C0 * s / B0);
  return p;
}

/// Round n-sphere radius under IMCF: dr/dt = r/n.
inline double imcf_sphere_flow(double r0, int n, double t) {
  if (!(r0 > 0.0) || n < 1) throw UsageError("imcf_sphere_flow: need r0 > 0 and n >= 1");
  if (!(t >= 0.0)) throw RangeError("imcf_sphere_flow: t must be nonnegative");
  return r0 * std::exp(t / n);
}

// ---------------------------------------------------------------------------
// SU(2) Ricci flow ODE.

namespace detail {

struct Su2State {
  double B, C, D;
};

inline Su2State su2_rhs(const Su2State& s) {
  const double B = s.B, C = s.C, D = s.D;
  return {-8.0 + 4.0 * (C * C + D * D - B * B) / (C * D),
          -8.0 + 4.0 * (B * B + D * D - C * C) / (B * D),
          -8.0 + 4.0 * (B * B + C * C - D * D) / (B * C)};
}

inline Su2State axpy(const Su2State& y, double a, const Su2State& k) {
  return {y.B + a * k.B, y.C + a * k.C, y.D + a * k.D};
}

inline Su2State rk4_step(const Su2State& y, double dt) {
  const Su2State k1 = su2_rhs(y);
  const Su2State k2 = su2_rhs(axpy(y, 0.5 * dt, k1));
  const Su2State k3 = su2_rhs(axpy(y, 0.5 * dt, k2));
  const Su2State k4 = su2_rhs(axpy(y, dt, k3));
  return {y.B + dt / 6.0 * (k1.B + 2.0 * k2.B + 2.0 * k3.B + k4.B),
          y.C + dt / 6.0 * (k1.C + 2.0 * k2.C + 2.0 * k3.C + k4.C),
          y.D + dt / 6.0 * (k1.D + 2.0 * k2.D + 2.0 * k3.D + k4.D)};
}

inline bool su2_alive(const Su2State& s, const Su2State& s0) {
  constexpr double kFloor = 1e-9;
  return std::isfinite(s.B) && std::isfinite(s.C) && std::isfinite(s.D) &&
         s.B > kFloor * s0.B && s.C > kFloor * s0.C && s.D > kFloor * s0.D;
}

inline Su2State to_state(const HomogeneousParams3& p) { return {p.B, p.C, p.D}; }

inline HomogeneousParams3 to_params(const Su2State& s) {
  return {Group::SU2, s.D, s.B, s.C};
}

inline double default_su2_dt(const HomogeneousParams3& p0) { return 1e-4 * p0.B; }

inline void check_su2_args(const HomogeneousParams3& p0, double dt) {
  if (p0.group != Group::SU2) throw UsageError("su2 flow: group must be SU2");
  require_valid(p0);
  if (!(dt > 0.0) || dt > 1e-3 * p0.B) throw UsageError("su2 flow: need 0 < dt <= 1e-3 B0");
}

}  // namespace detail

/// Fixed-step RK4 integration of the SU(2) system from 0 to t.
inline HomogeneousParams3 su2_flow(const HomogeneousParams3& p0, double t, double dt) {
  detail::check_su2_args(p0, dt);
  if (!(t >= 0.0)) throw RangeError("su2_flow: t must be nonnegative");
  const detail::Su2State s0 = detail::to_state(p0);
  detail::Su2State y = s0;
  const auto full = static_cast<std::int64_t>(std::floor(t / dt));
  for (std::int64_t k = 0; k < full; ++k) {
    y = detail::rk4_step(y, dt);
    if (!detail::su2_alive(y, s0))
      throw BlowupError("su2_flow: coefficient reached zero", k * dt, (k + 1) * dt);
  }
  const double rest = t - full * dt;
  if (rest > 0.0) {
    y = detail::rk4_step(y, rest);
    if (!detail::su2_alive(y, s0))
      throw BlowupError("su2_flow: coefficient reached zero", full * dt, t);
  }
  return detail::to_params(y);
}

// ---------------------------------------------------------------------------
// Flow paths.

enum class FlowKind { EinsteinScaling, Nil3Closed, SU2Ode, ImcfSphere };

inline const char* to_string(FlowKind k) {
  switch (k) {
    case FlowKind::EinsteinScaling: return "einstein";
    case FlowKind::Nil3Closed: return "nil3";
    case FlowKind::SU2Ode: return "su2";
    case FlowKind::ImcfSphere: return "imcf_sphere";
  }
  return "?";
}

/// Constant-curvature model with Ric = λ g in dimension n, as a chart metric.
inline MetricField space_form(double lambda, int n) {
  if (lambda == 0.0) return euclidean(n);
  if (n < 2) throw UsageError("space_form: λ != 0 requires n >= 2");
  const double rho = std::sqrt((n - 1) / std::abs(lambda));
  return radial_chart_metric(lambda > 0.0 ? sphere_warp(n, rho, rho)
                                          : hyperbolic_warp(n, rho, rho));
}

class FlowPath {
 public:
  /// Einstein scaling g_t = (1 - 2λt) g_0 over the given base metric.
  static FlowPath einstein(double lambda, int n, MetricField base) {
    if (base.dim() != n) throw UsageError("einstein path: base dimension mismatch");
    FlowPath p(FlowKind::EinsteinScaling, std::move(base));
    p.lambda_ = lambda;
    p.n_ = n;
    p.t_max_ = lambda > 0.0 ? 1.0 / (2.0 * lambda) : kInf;
    return p;
  }

  static FlowPath einstein(double lambda, int n) { return einstein(lambda, n, space_form(lambda, n)); }

  static FlowPath nil3(const HomogeneousParams3& p0) {
    if (p0.group != Group::Nil3) throw UsageError("nil3 path: group must be Nil3");
    require_valid(p0);
    FlowPath p(FlowKind::Nil3Closed, nil3_chart_metric(p0));
    p.p0_ = p0;
    p.n_ = 3;
    p.t_max_ = kInf;
    return p;
  }

  /// Integrates the SU(2) system once, caching nodes up to blow-up (or up to
  /// `horizon` if that comes first). dt = 0 selects the default 1e-4 B0.
  static FlowPath su2(const HomogeneousParams3& p0, double dt = 0.0, double horizon = kInf) {
    if (dt == 0.0) dt = detail::default_su2_dt(p0);
    detail::check_su2_args(p0, dt);
    FlowPath p(FlowKind::SU2Ode, su2_chart_metric(p0));
    p.p0_ = p0;
    p.n_ = 3;
    p.dt_ = dt;
    auto table = std::make_shared<std::vector<detail::Su2State>>();
    const detail::Su2State s0 = detail::to_state(p0);
    table->push_back(s0);
    double t_max = kInf;
    // T_max <= B0 / 4 because dB/dt <= -4 under the ordering; the loop always
    // terminates through blow-up or the horizon, the cap guards bad input.
    const auto cap = static_cast<std::int64_t>(std::ceil(p0.B / dt)) + 8;
    for (std::int64_t k = 0; k < cap; ++k) {
      if ((k + 1) * dt > horizon + dt) break;
      const detail::Su2State next = detail::rk4_step(table->back(), dt);
      if (!detail::su2_alive(next, s0)) {
        t_max = k * dt;
        p.blowup_lo_ = k * dt;
        p.blowup_hi_ = (k + 1) * dt;
        break;
      }
      table->push_back(next);
    }
    if (t_max == kInf) t_max = (table->size() - 1) * dt;
    p.t_max_ = t_max;
    p.table_ = std::move(table);
    return p;
  }

  /// IMCF of the round n-sphere of radius r0; the base chart is the sphere itself.
  static FlowPath imcf_sphere(double r0, int n) {
    if (!(r0 > 0.0) || n < 1 || n > kMaxDim) throw UsageError("imcf path: need r0 > 0, 1 <= n <= 3");
    FlowPath p(FlowKind::ImcfSphere,
               n == 1 ? euclidean(1) : radial_chart_metric(sphere_warp(n, r0, r0)));
    p.r0_ = r0;
    p.n_ = n;
    p.t_max_ = kInf;
    return p;
  }

  /// IMCF scaling over an explicit base chart (for domains already embedded in a sphere chart).
  static FlowPath imcf_sphere(double r0, int n, MetricField base) {
    FlowPath p = imcf_sphere(r0, n);
    if (base.dim() != n) throw UsageError("imcf path: base dimension mismatch");
    p.base_ = std::move(base);
    return p;
  }

  FlowKind kind() const { return kind_; }
  int dim() const { return n_; }
  double t_max() const { return t_max_; }
  double lambda() const { return lambda_; }
  double r0() const { return r0_; }
  double dt() const { return dt_; }
  const HomogeneousParams3& params0() const { return p0_; }
  const MetricField& base() const { return base_; }
  // Bracket of the detected SU(2) blow-up, NaN when none was found.
  double blowup_lo() const { return blowup_lo_; }
  double blowup_hi() const { return blowup_hi_; }

  void check_time(double t) const {
    if (!(t >= 0.0) || !(t < t_max_))
      throw RangeError(std::string(to_string(kind_)) + " path: t outside [0, t_max)");
  }

  /// Metric factor for the scaling kinds (1 - 2λt, e^{2t/n}).
  double scale(double t) const {
    check_time(t);
    switch (kind_) {
      case FlowKind::EinsteinScaling: return einstein_flow(lambda_, n_, t);
      case FlowKind::ImcfSphere: return std::exp(2.0 * t / n_);
      default: throw UsageError("scale: path is not a scaling family");
    }
  }

  bool is_scaling() const {
    return kind_ == FlowKind::EinsteinScaling || kind_ == FlowKind::ImcfSphere;
  }

  HomogeneousParams3 params(double t) const {
    check_time(t);
    switch (kind_) {
      case FlowKind::Nil3Closed: return nil3_flow(p0_, t);
      case FlowKind::SU2Ode: {
        const auto k = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(t / dt_)),
                                              static_cast<std::int64_t>(table_->size()) - 1);
        const double rest = t - k * dt_;
        const detail::Su2State& node = (*table_)[static_cast<std::size_t>(k)];
        return detail::to_params(rest > 0.0 ? detail::rk4_step(node, rest) : node);
      }
      default: throw UsageError("params: path is not homogeneous");
    }
  }

  double radius(double t) const {
    if (kind_ != FlowKind::ImcfSphere) throw UsageError("radius: path is not IMCF sphere");
    check_time(t);
    return imcf_sphere_flow(r0_, n_, t);
  }

  /// g_t in the path's chart (the hemisphere chart for SU(2)).
  MetricField metric(double t) const {
    check_time(t);
    switch (kind_) {
      case FlowKind::EinsteinScaling:
      case FlowKind::ImcfSphere: return scaled(base_, scale(t));
      case FlowKind::Nil3Closed: return nil3_chart_metric(params(t));
      case FlowKind::SU2Ode: return su2_chart_metric(params(t));
    }
    throw UsageError("metric: unknown path kind");
  }

  /// Metric velocity f = ∂g/∂t at (t, x): -2 Ric for Ricci paths, 2h/H for IMCF.
  Matrix velocity(double t, const Point& x) const {
    check_time(t);
    switch (kind_) {
      case FlowKind::EinsteinScaling: return Matrix(-2.0 * lambda_ * base_.at(x));
      case FlowKind::ImcfSphere: return Matrix((2.0 / n_) * scale(t) * base_.at(x));
      case FlowKind::Nil3Closed: {
        const HomogeneousParams3 p = params(t);
        return nil3_pullback(x, -4.0 * p.D * p.D / (p.B * p.C), 4.0 * p.D / p.C,
                             4.0 * p.D / p.B);
      }
      case FlowKind::SU2Ode: {
        const HomogeneousParams3 p = params(t);
        const Su2Ricci r = su2_ricci_eigenvalues(p);
        return su2_pullback(x, -2.0 * r.r4 * p.D, -2.0 * r.r2 * p.B, -2.0 * r.r3 * p.C);
      }
    }
    throw UsageError("velocity: unknown path kind");
  }

 private:
  FlowPath(FlowKind kind, MetricField base) : kind_(kind), base_(std::move(base)) {}

  FlowKind kind_;
  MetricField base_;
  int n_ = 0;
  double t_max_ = kInf;
  double lambda_ = 0.0;
  double r0_ = 1.0;
  double dt_ = 0.0;
  double blowup_lo_ = std::numeric_limits<double>::quiet_NaN();
  double blowup_hi_ = std::numeric_limits<double>::quiet_NaN();
  HomogeneousParams3 p0_{};
  std::shared_ptr<const std::vector<detail::Su2State>> table_;
};

// ---------------------------------------------------------------------------
// Curvature bounds A(t) g <= Ric <= B(t) g and Scal = b(t).

struct CurvatureBounds {
  std::function<double(double)> A;
  std::function<double(double)> B;
  std::function<double(double)> b;
};

inline CurvatureBounds curvature_bounds(const FlowPath& path) {
  switch (path.kind()) {
    case FlowKind::EinsteinScaling: {
      const double lam = path.lambda();
      const int n = path.dim();
      auto eig = [lam, path](double t) { return lam / path.scale(t); };
      return {eig, eig, [eig, n](double t) { return n * eig(t); }};
    }
    case FlowKind::Nil3Closed: {
      const HomogeneousParams3 p0 = path.params0();
      const double q = p0.B * p0.C / p0.D;
      auto k = [q](double t) {
        if (!(t >= 0.0)) throw RangeError("nil3 bounds: t must be nonnegative");
        return 2.0 / (12.0 * t + q);
      };
      return {[k](double t) { return -k(t); }, k, [k](double t) { return -k(t); }};
    }
    case FlowKind::SU2Ode: {
      return {[path](double t) { return su2_ricci_eigenvalues(path.params(t)).min(); },
              [path](double t) { return su2_ricci_eigenvalues(path.params(t)).max(); },
              [path](double t) { return su2_ricci_eigenvalues(path.params(t)).sum(); }};
    }
    case FlowKind::ImcfSphere:
      throw UnsupportedKindError("curvature_bounds: IMCF paths carry no Ricci bounds");
  }
  throw UnsupportedKindError("curvature_bounds: unknown path kind");
}

// ---------------------------------------------------------------------------
// Evolution identities, checked by central differences in time:
//   ∂_t dV = ½ tr_g(f) dV,  ∂_t |∇u|² = -f(∇u, ∇u),
//   ∂_t g(X, X) = f(X, X),  ∂_t div X = ½ X(tr_g f).

struct IdentityResiduals {
  double t = 0.0;
  double h = 0.0;
  double volume = 0.0;
  double gradient = 0.0;
  double field = 0.0;
  double divergence = 0.0;
};

namespace detail {

// Fixed test data: a scalar u (through its differential) and a vector field X.
inline Point test_covector(const Point& x) {
  Point du(x.size());
  for (int i = 0; i < x.size(); ++i)
    du(i) = std::cos(x(i) + 0.3 * i) + 0.5 * x((i + 1) % x.size());
  return du;
}

inline Point test_field(const Point& x) {
  Point X(x.size());
  for (int i = 0; i < x.size(); ++i) X(i) = 1.0 + 0.3 * std::sin(x((i + 1) % x.size())) + 0.2 * i;
  return X;
}

// Coordinate divergence of test_field: each component avoids its own coordinate
// (for dim >= 2), so ∂_i X^i = 0; in 1D the single component depends on x itself.
inline double test_field_coord_div(const Point& x) {
  return x.size() == 1 ? 0.3 * std::cos(x(0)) : 0.0;
}

inline double log_density(const MetricField& m, const Point& x) {
  return 0.5 * std::log(m.at(x).determinant());
}

inline double trace_velocity(const FlowPath& path, const MetricField& g, double t, const Point& x) {
  return (g.at(x).inverse() * path.velocity(t, x)).trace();
}

// Box from which identity sample points are drawn, per path chart.
inline double sample_half_width(const FlowPath& path) {
  switch (path.kind()) {
    case FlowKind::ImcfSphere: return 0.5 * path.r0();
    case FlowKind::SU2Ode: return 0.5;
    case FlowKind::EinsteinScaling:
      return path.lambda() > 0.0 ? 0.4 * std::sqrt((path.dim() - 1) / path.lambda()) : 0.8;
    default: return 0.8;
  }
}

}  // namespace detail

/// Chart points used by the identity checks, drawn from a seeded generator.
inline std::vector<Point> identity_sample_points(const FlowPath& path, std::uint64_t seed,
                                                 int count = 8) {
  std::mt19937_64 rng(seed);
  const double w = detail::sample_half_width(path);
  std::uniform_real_distribution<double> dist(-w, w);
  std::vector<Point> pts;
  const int n = path.dim();
  while (static_cast<int>(pts.size()) < count) {
    Point x(n);
    for (int i = 0; i < n; ++i) x(i) = dist(rng);
    if (x.norm() <= w) pts.push_back(x);
  }
  return pts;
}

inline IdentityResiduals flow_identity_residuals(const FlowPath& path, double t, double h,
                                                 const std::vector<Point>& points) {
  if (!(h > 0.0) || t - h < 0.0 || !(t + h < path.t_max()))
    throw RangeError("identity residuals: stencil [t-h, t+h] outside [0, t_max)");
  const MetricField gm = path.metric(t - h);
  const MetricField g0 = path.metric(t);
  const MetricField gp = path.metric(t + h);
  constexpr double hs = 1e-3;  // spatial step for density and trace gradients
  IdentityResiduals r{t, h, 0.0, 0.0, 0.0, 0.0};

  for (const Point& x : points) {
    const Matrix f = path.velocity(t, x);
    const Matrix G = g0.at(x);
    const Matrix Ginv = G.inverse();
    const double trf = (Ginv * f).trace();

    auto density = [&x](const MetricField& m) { return std::sqrt(m.at(x).determinant()); };
    const double vol_rate = (density(gp) - density(gm)) / (2.0 * h);
    r.volume = std::max(r.volume, std::abs(vol_rate - 0.5 * trf * density(g0)));

    const Point du = detail::test_covector(x);
    auto grad_norm2 = [&](const MetricField& m) { return du.dot(m.at(x).inverse() * du); };
    const Point grad = Ginv * du;
    const double grad_rate = (grad_norm2(gp) - grad_norm2(gm)) / (2.0 * h);
    r.gradient = std::max(r.gradient, std::abs(grad_rate + grad.dot(f * grad)));

    const Point X = detail::test_field(x);
    auto field_norm2 = [&](const MetricField& m) { return X.dot(m.at(x) * X); };
    const double field_rate = (field_norm2(gp) - field_norm2(gm)) / (2.0 * h);
    r.field = std::max(r.field, std::abs(field_rate - X.dot(f * X)));

    // div X = ∂_j X^j + X^j ∂_j log√det g, with the same spatial difference
    // operator applied to tr_g f on the right-hand side.
    auto divergence = [&](const MetricField& m) {
      double s = detail::test_field_coord_div(x);
      for (int j = 0; j < x.size(); ++j) {
        Point xp = x, xm = x;
        xp(j) += hs;
        xm(j) -= hs;
        s += X(j) * (detail::log_density(m, xp) - detail::log_density(m, xm)) / (2.0 * hs);
      }
      return s;
    };
    double x_trf = 0.0;
    for (int j = 0; j < x.size(); ++j) {
      Point xp = x, xm = x;
      xp(j) += hs;
      xm(j) -= hs;
      x_trf += X(j) * (detail::trace_velocity(path, g0, t, xp) -
                       detail::trace_velocity(path, g0, t, xm)) /
               (2.0 * hs);
    }
    const double div_rate = (divergence(gp) - divergence(gm)) / (2.0 * h);
    r.divergence = std::max(r.divergence, std::abs(div_rate - 0.5 * x_trf));
  }
  return r;
}

inline IdentityResiduals flow_identity_residuals(const FlowPath& path, double t, double h,
                                                 std::uint64_t seed = 0) {
  return flow_identity_residuals(path, t, h, identity_sample_points(path, seed));
}

}  // namespace torsilab
