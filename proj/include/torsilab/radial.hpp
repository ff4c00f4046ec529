#pragma once

// Exact mean exit time of a rotationally symmetric ball, by nested adaptive
// Gauss-Kronrod quadrature of the radial Green-function formula.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <string>

#include "torsilab/errors.hpp"
#include "torsilab/metric.hpp"

namespace torsilab {

/// Volume of the unit (n-1)-sphere, 2π^{n/2}/Γ(n/2).
inline double unit_sphere_volume(int n) {
  if (n < 1) throw UsageError("unit_sphere_volume: n must be positive");
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

namespace detail {

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  if (a == b) return 0.0;
  // The reported error estimate is pessimistic for smooth integrands, so it
  // only guards against outright failure.
  double err = 0.0, l1 = 0.0;
  const double v =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, tol, &err, &l1);
  if (!std::isfinite(v) || err > 1e-8 * std::max(l1, 1e-300))
    throw NumericError("radial quadrature did not converge on [" + std::to_string(a) + ", " +
                       std::to_string(b) + "]");
  return v;
}

}  // namespace detail

struct RadialRigidity {
  std::function<double(double)> E;  // radius -> mean exit time
  double T = 0.0;
  double V = 0.0;
};

/// E(r) = ∫_r^R f^{1-n}(s) ∫_0^s f^{n-1}, T = ω ∫_0^R E f^{n-1}, V = ω ∫_0^R f^{n-1}.
inline RadialRigidity radial_rigidity(const RadialWarp& w, double tol = 1e-13) {
  if (!valid(w)) throw UsageError("radial_rigidity: invalid warp");
  const int n = w.n;
  const double R = w.R;
  const auto f = w.f;
  auto jac = [f, n](double r) { return std::pow(f(r), n - 1); };
  auto enclosed = [jac, tol](double s) { return detail::integrate(jac, 0.0, s, tol); };
  auto flux = [jac, enclosed](double s) { return enclosed(s) / jac(s); };
  auto E = [flux, R, tol](double r) { return detail::integrate(flux, r, R, tol); };
  const double omega = unit_sphere_volume(n);
  RadialRigidity out;
  out.E = E;
  out.T = omega * detail::integrate([E, jac](double r) { return E(r) * jac(r); }, 0.0, R, tol);
  out.V = omega * detail::integrate(jac, 0.0, R, tol);
  return out;
}

}  // namespace torsilab
