#pragma once

// Closed-form envelopes for the evolution of the torsional rigidity and
// monotonicity verdicts for measured series. Nothing here solves a PDE: the
// module consumes (t, T, V) samples produced elsewhere.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "torsilab/errors.hpp"
#include "torsilab/flow.hpp"
#include "torsilab/radial.hpp"

namespace torsilab {

using RateFn = std::function<double(double)>;

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature.

namespace detail {

inline double simpson_step(const RateFn& f, double a, double fa, double b, double fb, double m,
                           double fm, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (!std::isfinite(delta)) throw NumericError("adaptive Simpson: non-finite integrand");
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) throw NumericError("adaptive Simpson: recursion limit reached");
  return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// ∫_a^b f to relative tolerance `rel_tol` (absolute floor 1e-300).
inline double adaptive_simpson(const RateFn& f, double a, double b, double rel_tol = 1e-10) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  // A coarse pass fixes the scale against which the relative tolerance is measured.
  const double scale = std::max({std::abs(whole), (b - a) * std::abs(fa), (b - a) * std::abs(fb),
                                 (b - a) * std::abs(fm), 1e-300});
  return detail::simpson_step(f, a, fa, b, fb, m, fm, whole, rel_tol * scale, 48);
}

// ---------------------------------------------------------------------------
// Envelopes.

struct BoundEnvelope {
  std::vector<double> grid;
  std::vector<double> lower;
  std::vector<double> upper;
  std::string tag;
};

inline void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw UsageError("envelope grid is empty");
  if (grid.front() != 0.0) throw UsageError("envelope grid must start at t = 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw UsageError("envelope grid must be strictly increasing");
}

/// Cumulative ∫_0^{t_i} rate over the grid.
inline std::vector<double> cumulative_exponent(const RateFn& rate, const std::vector<double>& grid,
                                               double rel_tol = 1e-10) {
  check_grid(grid);
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i)
    out[i] = out[i - 1] + adaptive_simpson(rate, grid[i - 1], grid[i], rel_tol);
  return out;
}

inline BoundEnvelope envelope_from_exponents(const RateFn& lower_rate, const RateFn& upper_rate,
                                             double T0, const std::vector<double>& grid,
                                             std::string tag) {
  const auto lo = cumulative_exponent(lower_rate, grid);
  const auto up = cumulative_exponent(upper_rate, grid);
  BoundEnvelope env{grid, {}, {}, std::move(tag)};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    env.lower.push_back(std::exp(lo[i]) * T0);
    env.upper.push_back(std::exp(up[i]) * T0);
  }
  return env;
}

/// Envelope for ∂g/∂t = f with L g <= f <= U g and l <= tr_g f <= u:
/// lower e^{∫(l - u/2 + L)} T0, upper e^{∫(U + u/2)} T0 (the upper side needs tr_g f = u).
inline BoundEnvelope general_envelope(const RateFn& l, const RateFn& u, const RateFn& L,
                                      const RateFn& U, double T0, const std::vector<double>& grid,
                                      std::string tag = "general") {
  return envelope_from_exponents([=](double s) { return l(s) - 0.5 * u(s) + L(s); },
                                 [=](double s) { return U(s) + 0.5 * u(s); }, T0, grid,
                                 std::move(tag));
}

/// Ricci flow with Scal = b(t) and A g <= Ric <= B g.
inline BoundEnvelope ricci_envelope(const CurvatureBounds& cb, double T0,
                                    const std::vector<double>& grid) {
  const RateFn tr = [b = cb.b](double s) { return -2.0 * b(s); };
  const RateFn L = [B = cb.B](double s) { return -2.0 * B(s); };
  const RateFn U = [A = cb.A](double s) { return -2.0 * A(s); };
  return general_envelope(tr, tr, L, U, T0, grid, "ricci");
}

/// Certified horizon of the SU(2) pinching envelope, B0 / (4(1 + 6δ)).
inline double su2_delta_horizon(double B0, double delta) { return B0 / (4.0 * (1.0 + 6.0 * delta)); }

inline BoundEnvelope su2_delta_envelope(double B0, double delta, double T0,
                                        const std::vector<double>& grid) {
  check_grid(grid);
  if (!(B0 > 0.0)) throw UsageError("su2_delta_envelope: B0 must be positive");
  if (!(delta >= 0.0 && delta < 1.0)) throw UsageError("su2_delta_envelope: need 0 <= δ < 1");
  if (!(grid.back() < su2_delta_horizon(B0, delta)))
    throw RangeError("su2_delta_envelope: grid beyond certified time B0/(4(1+6δ))");
  const double lo_exp = 5.0 * std::pow(1.0 + delta, 3) / (2.0 * (1.0 + 6.0 * delta));
  const double up_exp = 5.0 * (1.0 - delta) / (2.0 * (1.0 + delta));
  BoundEnvelope env{grid, {}, {}, "su2_delta"};
  for (double t : grid) {
    env.lower.push_back(std::pow(1.0 - 4.0 * (1.0 + 6.0 * delta) * t / B0, lo_exp) * T0);
    env.upper.push_back(std::pow(1.0 - 4.0 * t / B0, up_exp) * T0);
  }
  return env;
}

inline BoundEnvelope imcf_envelope(double T0, const std::vector<double>& grid) {
  check_grid(grid);
  BoundEnvelope env{grid, {}, {}, "imcf"};
  for (double t : grid) {
    env.lower.push_back(std::exp(t) * T0);
    env.upper.push_back(std::exp(3.0 * t) * T0);
  }
  return env;
}

/// Normalized Ricci flow, with A g <= trace-free Ricci <= B g.
inline BoundEnvelope normalized_ricci_envelope(const RateFn& A, const RateFn& B, double T0,
                                               const std::vector<double>& grid) {
  return envelope_from_exponents([B](double s) { return -2.0 * B(s); },
                                 [A](double s) { return -2.0 * A(s); }, T0, grid,
                                 "normalized_ricci");
}

// ---------------------------------------------------------------------------
// Measured series and monotonicity verdicts.

struct SeriesSample {
  double t;
  double T;
  double V;
  double budget = 0.0;  // absolute discretization/solver budget on T
};

struct RigiditySeries {
  int n = 2;
  std::vector<SeriesSample> entries;

  double T0() const { return entries.front().T; }
  double V0() const { return entries.front().V; }
  std::vector<double> times() const {
    std::vector<double> ts;
    for (const auto& e : entries) ts.push_back(e.t);
    return ts;
  }
};

inline void check_series(const RigiditySeries& s) {
  if (s.entries.empty()) throw UsageError("series is empty");
  if (s.entries.front().t != 0.0) throw UsageError("series must start at t = 0");
  for (std::size_t i = 0; i < s.entries.size(); ++i) {
    const auto& e = s.entries[i];
    if (!(e.T > 0.0) || !(e.V > 0.0)) throw UsageError("series values must be positive");
    if (i > 0 && !(e.t > s.entries[i - 1].t)) throw UsageError("series times must increase");
  }
}

enum class Trend { Nondecreasing, Nonincreasing, Constant, Unspecified };

inline const char* to_string(Trend t) {
  switch (t) {
    case Trend::Nondecreasing: return "nondecreasing";
    case Trend::Nonincreasing: return "nonincreasing";
    case Trend::Constant: return "constant";
    case Trend::Unspecified: return "unspecified";
  }
  return "?";
}

struct Verdict {
  std::string functional;  // "T/V", "T/V^3", "V*T", "T/V^((n+2)/n)"
  Trend expected = Trend::Unspecified;
  bool certified = false;  // backed by a theorem for this flow
  bool passed = true;
  double worst_violation = 0.0;  // relative size of the worst offending step
  std::size_t worst_from = 0;
  std::size_t worst_to = 0;
};

inline constexpr double kVerdictSlack = 1e-8;

struct FunctionalVerdicts {
  std::vector<Verdict> verdicts;

  bool all_certified_pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(),
                       [](const Verdict& v) { return !v.certified || v.passed; });
  }
  const Verdict& get(const std::string& name) const {
    for (const auto& v : verdicts)
      if (v.functional == name) return v;
    throw UsageError("no verdict named " + name);
  }
};

namespace detail {

inline Verdict judge(const RigiditySeries& s, const std::string& name, double v_power,
                     Trend expected, bool certified) {
  Verdict out;
  out.functional = name;
  out.expected = expected;
  out.certified = certified;
  std::vector<double> F, rel_budget;
  for (const auto& e : s.entries) {
    F.push_back(e.T * std::pow(e.V, v_power));
    rel_budget.push_back(e.budget / e.T);
  }
  auto consider = [&](std::size_t i, std::size_t j, double violation) {
    if (violation > out.worst_violation) {
      out.worst_violation = violation;
      out.worst_from = i;
      out.worst_to = j;
    }
  };
  for (std::size_t j = 1; j < F.size(); ++j) {
    const std::size_t i = expected == Trend::Constant ? 0 : j - 1;
    const double scale = std::max(std::abs(F[i]), std::abs(F[j]));
    const double slack = kVerdictSlack + rel_budget[i] + rel_budget[j];
    const double step = (F[j] - F[i]) / scale;
    double violation = 0.0;
    switch (expected) {
      case Trend::Nondecreasing: violation = -step; break;
      case Trend::Nonincreasing: violation = step; break;
      case Trend::Constant: violation = std::abs(step); break;
      case Trend::Unspecified: violation = 0.0; break;
    }
    consider(i, j, violation);
    if (violation > slack) out.passed = false;
  }
  return out;
}

}  // namespace detail

/// Monotonicity verdicts for T/V, T/V³, V·T and the scale-invariant T/V^{(n+2)/n} along a
/// series sampled from the given flow. `lambda` is the Einstein constant for
/// Einstein paths and is ignored otherwise.
inline FunctionalVerdicts functional_checks(const RigiditySeries& s, FlowKind kind,
                                            double lambda = 0.0) {
  check_series(s);
  if (s.entries.size() < 3) throw UsageError("functional_checks: need at least 3 samples");
  Trend tv = Trend::Unspecified, tv3 = Trend::Unspecified, vt = Trend::Unspecified,
        inv = Trend::Unspecified;
  switch (kind) {
    case FlowKind::EinsteinScaling:
      inv = Trend::Constant;
      tv = lambda > 0.0 ? Trend::Nonincreasing : lambda < 0.0 ? Trend::Nondecreasing : Trend::Constant;
      tv3 = lambda > 0.0 ? Trend::Nondecreasing : lambda < 0.0 ? Trend::Nonincreasing : Trend::Constant;
      break;
    case FlowKind::Nil3Closed:
      vt = Trend::Nondecreasing;
      tv3 = Trend::Nonincreasing;
      break;
    case FlowKind::SU2Ode:  // positive Ricci under the pinching assumption
      tv = Trend::Nonincreasing;
      tv3 = Trend::Nondecreasing;
      break;
    case FlowKind::ImcfSphere:
      tv = Trend::Nondecreasing;
      tv3 = Trend::Nonincreasing;
      break;
  }
  auto certified = [](Trend t) { return t != Trend::Unspecified; };
  FunctionalVerdicts out;
  out.verdicts.push_back(detail::judge(s, "T/V", -1.0, tv, certified(tv)));
  out.verdicts.push_back(detail::judge(s, "T/V^3", -3.0, tv3, certified(tv3)));
  out.verdicts.push_back(detail::judge(s, "V*T", 1.0, vt, certified(vt)));
  out.verdicts.push_back(
      detail::judge(s, "T/V^((n+2)/n)", -(s.n + 2.0) / s.n, inv, certified(inv)));
  return out;
}

struct ContainmentSample {
  double t;
  double T;
  double lower;
  double upper;
  double slack;  // allowed absolute excess
  bool inside;
};

/// Checks each measured T against the envelope at the same time, allowing
/// the per-sample budget plus the verdict slack.
inline std::vector<ContainmentSample> envelope_containment(const RigiditySeries& s,
                                                           const BoundEnvelope& env) {
  check_series(s);
  if (env.grid.size() != s.entries.size()) throw UsageError("envelope grid does not match series");
  std::vector<ContainmentSample> out;
  for (std::size_t i = 0; i < s.entries.size(); ++i) {
    const auto& e = s.entries[i];
    if (env.grid[i] != e.t) throw UsageError("envelope grid does not match series times");
    const double slack = e.budget + kVerdictSlack * e.T;
    out.push_back({e.t, e.T, env.lower[i], env.upper[i], slack,
                   e.T >= env.lower[i] - slack && e.T <= env.upper[i] + slack});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flat unit ball reference values.

struct DiskReference {
  double T;
  double V;
};

inline DiskReference disk_reference(int n) {
  const double omega = unit_sphere_volume(n);
  return {omega / (n * n * (2.0 + n)), omega / n};
}

struct DiskComparison {
  bool volume_le;    // V <= V(D)
  bool rigidity_le;  // T <= T(D)
  bool ratio3_ge;    // T/V³ >= T(D)/V(D)³
  bool ratio1_le;    // T/V <= T(D)/V(D)
};

inline DiskComparison disk_comparison(double T, double V, int n, double rel_tol = 1e-12) {
  const DiskReference d = disk_reference(n);
  auto le = [rel_tol](double a, double b) { return a <= b * (1.0 + rel_tol); };
  return {le(V, d.V), le(T, d.T), le(d.T / (d.V * d.V * d.V), T / (V * V * V)),
          le(T / V, d.T / d.V)};
}

}  // namespace torsilab
