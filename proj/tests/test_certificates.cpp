#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "torsilab/certificates.hpp"
#include "torsilab/flow.hpp"
#include "torsilab/poisson.hpp"

using namespace torsilab;

namespace {

std::vector<double> uniform_grid(double t_end, int steps) {
  std::vector<double> g;
  for (int i = 0; i <= steps; ++i) g.push_back(t_end * i / steps);
  return g;
}

RateFn constant(double c) {
  return [c](double) { return c; };
}

void expect_envelope_invariants(const BoundEnvelope& env, double T0) {
  ASSERT_EQ(env.lower.size(), env.grid.size());
  ASSERT_EQ(env.upper.size(), env.grid.size());
  EXPECT_DOUBLE_EQ(env.lower[0], T0);
  EXPECT_DOUBLE_EQ(env.upper[0], T0);
  for (std::size_t i = 0; i < env.grid.size(); ++i) EXPECT_LE(env.lower[i], env.upper[i] * (1 + 1e-14));
}

RigiditySeries scaling_series(int n, const std::vector<double>& ts, const std::function<double(double)>& c) {
  RigiditySeries s;
  s.n = n;
  for (double t : ts) s.entries.push_back({t, 0.3 * std::pow(c(t), 0.5 * n + 1), 2.0 * std::pow(c(t), 0.5 * n)});
  return s;
}

}  // namespace

TEST(Quadrature, AdaptiveSimpson) {
  EXPECT_NEAR(adaptive_simpson([](double x) { return std::exp(x); }, 0.0, 1.0), std::exp(1.0) - 1.0, 1e-11);
  EXPECT_NEAR(adaptive_simpson([](double x) { return 1.0 / (1.0 - x); }, 0.0, 0.99), std::log(100.0), 1e-9);
  EXPECT_EQ(adaptive_simpson([](double) { return 1.0; }, 0.5, 0.5), 0.0);
  EXPECT_THROW(adaptive_simpson([](double x) { return 1.0 / (x - 0.5); }, 0.0, 0.5), NumericError);
}

TEST(GeneralEnvelope, StaticFlowIsConstant) {
  const auto g = uniform_grid(1.0, 4);
  const auto env = general_envelope(constant(0), constant(0), constant(0), constant(0), 2.5, g);
  expect_envelope_invariants(env, 2.5);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(env.lower[i], 2.5);
    EXPECT_EQ(env.upper[i], 2.5);
  }
  EXPECT_EQ(env.tag, "general");
}

TEST(GeneralEnvelope, EinsteinRatesGiveExactLaw) {
  for (int n : {2, 3}) {
    const double lam = 0.7;
    const RateFn tr = [n, lam](double s) { return -2.0 * n * lam / (1.0 - 2.0 * lam * s); };
    const RateFn eig = [lam](double s) { return -2.0 * lam / (1.0 - 2.0 * lam * s); };
    const auto g = uniform_grid(0.6, 6);
    const auto env = general_envelope(tr, tr, eig, eig, 1.0, g);
    expect_envelope_invariants(env, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double exact = std::pow(1.0 - 2.0 * lam * g[i], 0.5 * (n + 2));
      EXPECT_NEAR(env.lower[i], exact, 1e-9 * exact);
      EXPECT_NEAR(env.upper[i], exact, 1e-9 * exact);
    }
  }
}

TEST(GeneralEnvelope, Nil3Rates) {
  const HomogeneousParams3 p{Group::Nil3, 0.5, 2.0, 1.5};
  const double q = p.B * p.C / p.D;
  const RateFn k = [q](double s) { return 2.0 / (12.0 * s + q); };
  // f = -2 Ric with eigenvalues -k (twice) and k: tr f = 2k, -2k <= f <= 2k.
  const RateFn tr = [k](double s) { return 2.0 * k(s); };
  const auto g = uniform_grid(2.0, 8);
  const auto env = general_envelope(tr, tr, [k](double s) { return -2.0 * k(s); }, [k](double s) { return 2.0 * k(s); }, 1.0, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double base = 1.0 + 12.0 * p.D * g[i] / (p.B * p.C);
    EXPECT_NEAR(env.lower[i], std::pow(base, -1.0 / 6.0), 1e-9);
    EXPECT_NEAR(env.upper[i], std::pow(base, 0.5), 1e-9);
  }
}

TEST(GeneralEnvelope, GridChecks) {
  EXPECT_THROW(general_envelope(constant(0), constant(0), constant(0), constant(0), 1.0, {}), UsageError);
  EXPECT_THROW(general_envelope(constant(0), constant(0), constant(0), constant(0), 1.0, {0.1, 0.2}), UsageError);
  EXPECT_THROW(general_envelope(constant(0), constant(0), constant(0), constant(0), 1.0, {0.0, 0.2, 0.2}), UsageError);
}

TEST(RicciEnvelope, EinsteinCollapsesToExactLaw) {
  const auto path = FlowPath::einstein(1.0, 2);
  const auto g = uniform_grid(0.25, 5);
  const auto env = ricci_envelope(curvature_bounds(path), 1.0, g);
  EXPECT_EQ(env.tag, "ricci");
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double exact = std::pow(1.0 - 2.0 * g[i], 2);
    EXPECT_NEAR(env.lower[i], exact, 1e-9 * exact);
    EXPECT_NEAR(env.upper[i], exact, 1e-9 * exact);
  }
  EXPECT_NEAR(env.lower.back(), 0.25, 1e-10);
}

TEST(RicciEnvelope, Nil3UnitInitialData) {
  const auto path = FlowPath::nil3({Group::Nil3, 1.0, 1.0, 1.0});
  const std::vector<double> g{0.0, 0.25, 0.5, 1.0, 2.0};
  const auto env = ricci_envelope(curvature_bounds(path), 3.0, g);
  expect_envelope_invariants(env, 3.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(env.lower[i], 3.0 * std::pow(1.0 + 12.0 * g[i], -1.0 / 6.0), 3e-9);
    EXPECT_NEAR(env.upper[i], 3.0 * std::pow(1.0 + 12.0 * g[i], 0.5), 3e-9);
  }
}

TEST(RicciEnvelope, RoundSu2) {
  const auto path = FlowPath::su2({Group::SU2, 1.0, 1.0, 1.0});
  const auto g = uniform_grid(0.2, 4);
  const auto env = ricci_envelope(curvature_bounds(path), 1.0, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double exact = std::pow(1.0 - 4.0 * g[i], 2.5);
    EXPECT_NEAR(env.lower[i], exact, 1e-8);
    EXPECT_NEAR(env.upper[i], exact, 1e-8);
  }
}

TEST(RicciEnvelope, QuadratureStableUnderGridHalving) {
  const auto path = FlowPath::nil3({Group::Nil3, 0.7, 1.3, 0.9});
  const auto cb = curvature_bounds(path);
  const auto coarse = ricci_envelope(cb, 1.0, uniform_grid(2.0, 8));
  const auto fine = ricci_envelope(cb, 1.0, uniform_grid(2.0, 16));
  for (std::size_t i = 0; i < coarse.grid.size(); ++i) {
    ASSERT_DOUBLE_EQ(fine.grid[2 * i], coarse.grid[i]);
    EXPECT_LE(std::abs(fine.lower[2 * i] - coarse.lower[i]), 1e-9 * coarse.lower[i]);
    EXPECT_LE(std::abs(fine.upper[2 * i] - coarse.upper[i]), 1e-9 * coarse.upper[i]);
  }
}

TEST(Su2DeltaEnvelope, Examples) {
  const auto env = su2_delta_envelope(1.0, 0.0, 1.0, {0.0, 0.125});
  EXPECT_NEAR(env.lower[1], std::pow(0.5, 2.5), 1e-14);
  EXPECT_NEAR(env.upper[1], std::pow(0.5, 2.5), 1e-14);
  EXPECT_NEAR(env.lower[1], 0.17678, 1e-5);

  const auto half = su2_delta_envelope(1.0, 0.5, 2.0, {0.0});
  EXPECT_EQ(half.lower[0], 2.0);
  EXPECT_EQ(half.upper[0], 2.0);
  EXPECT_DOUBLE_EQ(su2_delta_horizon(1.0, 0.5), 1.0 / 16.0);
  EXPECT_NO_THROW(su2_delta_envelope(1.0, 0.5, 1.0, {0.0, 0.06}));
  EXPECT_THROW(su2_delta_envelope(1.0, 0.5, 1.0, {0.0, 1.0 / 16.0}), RangeError);
  EXPECT_THROW(su2_delta_envelope(1.0, 1.0, 1.0, {0.0}), UsageError);
  EXPECT_THROW(su2_delta_envelope(1.0, -0.1, 1.0, {0.0}), UsageError);
}

TEST(Su2DeltaEnvelope, BoundsOrderedAndMatchFormula) {
  const double B0 = 2.0, d = 0.3;
  const auto g = uniform_grid(0.95 * su2_delta_horizon(B0, d), 10);
  const auto env = su2_delta_envelope(B0, d, 1.0, g);
  expect_envelope_invariants(env, 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double lo = std::pow(1.0 - 4.0 * (1.0 + 6.0 * d) * g[i] / B0,
                               5.0 * std::pow(1.0 + d, 3) / (2.0 * (1.0 + 6.0 * d)));
    const double up = std::pow(1.0 - 4.0 * g[i] / B0, 5.0 * (1.0 - d) / (2.0 * (1.0 + d)));
    EXPECT_NEAR(env.lower[i], lo, 1e-14);
    EXPECT_NEAR(env.upper[i], up, 1e-14);
  }
}

TEST(ImcfEnvelope, Examples) {
  const auto env = imcf_envelope(1.5, {0.0, 1.0});
  EXPECT_EQ(env.lower[0], 1.5);
  EXPECT_EQ(env.upper[0], 1.5);
  EXPECT_NEAR(env.lower[1], 1.5 * std::numbers::e, 1e-14);
  EXPECT_NEAR(env.upper[1], 1.5 * std::exp(3.0), 1e-12);
  const auto g = uniform_grid(2.0, 10);
  const auto e2 = imcf_envelope(1.0, g);
  for (int n = 1; n <= 3; ++n) {
    const auto s = scaling_series(n, g, [n](double t) { return std::exp(2.0 * t / n); });
    RigiditySeries unit = s;
    for (auto& e : unit.entries) e.T /= s.T0();
    for (const auto& c : envelope_containment(unit, e2)) EXPECT_TRUE(c.inside) << n << " " << c.t;
  }
}

TEST(NormalizedRicciEnvelope, Examples) {
  const auto g = uniform_grid(1.0, 5);
  const auto fixed = normalized_ricci_envelope(constant(0), constant(0), 2.0, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(fixed.lower[i], 2.0);
    EXPECT_EQ(fixed.upper[i], 2.0);
  }
  const auto same = normalized_ricci_envelope(constant(0.4), constant(0.4), 1.0, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(same.lower[i], std::exp(-0.8 * g[i]), 1e-12);
    EXPECT_NEAR(same.upper[i], std::exp(-0.8 * g[i]), 1e-12);
  }
  const auto split = normalized_ricci_envelope(constant(-0.2), constant(0.3), 1.0, g);
  expect_envelope_invariants(split, 1.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LT(split.lower[i], split.upper[i]);
}

TEST(FunctionalChecks, EinsteinInvariantConstant) {
  const auto g = uniform_grid(0.4, 8);
  for (int n : {1, 2, 3})
  for (double lam : {1.0, -1.0, 0.0}) {
    const auto s = scaling_series(n, g, [lam](double t) { return 1.0 - 2.0 * lam * t; });
    const auto v = functional_checks(s, FlowKind::EinsteinScaling, lam);
    EXPECT_TRUE(v.all_certified_pass()) << n << " " << lam;
    EXPECT_EQ(v.get("T/V^((n+2)/n)").expected, Trend::Constant);
    EXPECT_TRUE(v.get("T/V^((n+2)/n)").certified);
    EXPECT_LT(v.get("T/V^((n+2)/n)").worst_violation, 1e-14);
    EXPECT_FALSE(v.get("V*T").certified);
  }
}

TEST(FunctionalChecks, Nil3MeasuredSeries) {
  const auto path = FlowPath::nil3({Group::Nil3, 1.0, 1.0, 1.0});
  const auto mesh = build_box_mesh(std::vector<Interval>(3, {0.0, 1.0}), 2);
  RigiditySeries s;
  s.n = 3;
  for (double t : {0.0, 0.25, 0.5, 1.0, 2.0}) {
    const auto r = solve_exit_time(mesh, path.metric(t)).report;
    s.entries.push_back({t, r.T_energy, r.V, 10.0 * r.residual * r.T_energy});
  }
  const auto v = functional_checks(s, FlowKind::Nil3Closed);
  EXPECT_TRUE(v.get("V*T").passed);
  EXPECT_TRUE(v.get("T/V^3").passed);
  EXPECT_EQ(v.get("V*T").expected, Trend::Nondecreasing);
  EXPECT_EQ(v.get("T/V^3").expected, Trend::Nonincreasing);
  EXPECT_TRUE(v.all_certified_pass());
  // Unit box: the volume is the homogeneous density √(DBC).
  for (const auto& e : s.entries) {
    const auto p = path.params(e.t);
    EXPECT_NEAR(e.V, std::sqrt(p.D * p.B * p.C), 1e-12);
  }
}

TEST(FunctionalChecks, ImcfSeries) {
  for (int n : {1, 2, 3}) {
    const auto s = scaling_series(n, uniform_grid(1.0, 4), [n](double t) { return std::exp(2.0 * t / n); });
    const auto v = functional_checks(s, FlowKind::ImcfSphere);
    EXPECT_TRUE(v.get("T/V").passed);
    EXPECT_TRUE(v.get("T/V^3").passed);
    EXPECT_TRUE(v.all_certified_pass());
  }
}

TEST(FunctionalChecks, ReportsWorstViolation) {
  RigiditySeries s;
  s.n = 2;
  s.entries = {{0.0, 1.0, 1.0}, {0.1, 1.1, 1.0}, {0.2, 0.9, 1.0}, {0.3, 0.95, 1.0}};
  const auto v = functional_checks(s, FlowKind::ImcfSphere);
  const auto& tv = v.get("T/V");
  EXPECT_FALSE(tv.passed);
  EXPECT_EQ(tv.worst_from, 1u);
  EXPECT_EQ(tv.worst_to, 2u);
  EXPECT_NEAR(tv.worst_violation, 0.2 / 1.1, 1e-14);
  EXPECT_FALSE(v.all_certified_pass());
  // A budget that covers the drop turns it into a pass.
  for (auto& e : s.entries) e.budget = 0.1 * e.T;
  EXPECT_TRUE(functional_checks(s, FlowKind::ImcfSphere).get("T/V").passed);
}

TEST(FunctionalChecks, Preconditions) {
  RigiditySeries s;
  s.entries = {{0.0, 1.0, 1.0}, {0.1, 1.0, 1.0}};
  EXPECT_THROW(functional_checks(s, FlowKind::Nil3Closed), UsageError);
  s.entries.push_back({0.1, 1.0, 1.0});
  EXPECT_THROW(functional_checks(s, FlowKind::Nil3Closed), UsageError);
  s.entries = {{0.1, 1.0, 1.0}, {0.2, 1.0, 1.0}, {0.3, 1.0, 1.0}};
  EXPECT_THROW(functional_checks(s, FlowKind::Nil3Closed), UsageError);
  EXPECT_THROW(FunctionalVerdicts{}.get("T/V"), UsageError);
}

TEST(Containment, BudgetWidensAcceptance) {
  RigiditySeries s;
  s.n = 2;
  s.entries = {{0.0, 1.0, 1.0}, {0.5, 1.001, 1.0}};
  const auto env = imcf_envelope(1.0, {0.0, 0.5});
  s.entries[1].T = 1.0 * std::exp(0.5) - 1e-4;
  EXPECT_FALSE(envelope_containment(s, env)[1].inside);
  s.entries[1].budget = 2e-4;
  EXPECT_TRUE(envelope_containment(s, env)[1].inside);
  EXPECT_THROW(envelope_containment(s, imcf_envelope(1.0, {0.0, 0.4})), UsageError);
  EXPECT_THROW(envelope_containment(s, imcf_envelope(1.0, {0.0})), UsageError);
}

TEST(DiskReference, ClosedForms) {
  const auto d2 = disk_reference(2);
  EXPECT_NEAR(d2.T, std::numbers::pi / 8.0, 1e-15);
  EXPECT_NEAR(d2.V, std::numbers::pi, 1e-15);
  const auto d3 = disk_reference(3);
  EXPECT_NEAR(d3.T, 4.0 * std::numbers::pi / 45.0, 1e-15);
  EXPECT_NEAR(d3.V, 4.0 * std::numbers::pi / 3.0, 1e-15);
  const auto d1 = disk_reference(1);
  EXPECT_NEAR(d1.T, 2.0 / 3.0, 1e-15);  // ∫_{-1}^{1} (1 - x²)/2
  EXPECT_NEAR(d1.V, 2.0, 1e-15);
}

TEST(DiskReference, ComparisonsAtEqualityAndSubdisks) {
  for (int n : {2, 3}) {
    const auto d = disk_reference(n);
    const auto eq = disk_comparison(d.T, d.V, n);
    EXPECT_TRUE(eq.volume_le && eq.rigidity_le && eq.ratio3_ge && eq.ratio1_le);
    for (double rho : {0.5, 0.75, 0.9}) {
      const auto c = disk_comparison(d.T * std::pow(rho, n + 2), d.V * std::pow(rho, n), n);
      EXPECT_TRUE(c.volume_le && c.rigidity_le && c.ratio1_le) << n << " " << rho;
      EXPECT_TRUE(c.ratio3_ge) << n << " " << rho;
    }
    const auto big = disk_comparison(d.T * 1.5, d.V * 1.2, n);
    EXPECT_FALSE(big.volume_le);
    EXPECT_FALSE(big.rigidity_le);
  }
}
