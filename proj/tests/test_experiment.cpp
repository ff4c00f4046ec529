#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "torsilab/experiment.hpp"

using namespace torsilab;

namespace {

std::string config_error_pointer(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.pointer;
  }
  return "<no error>";
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kEinsteinDisk = R"({
  "flow": {"kind": "einstein", "lambda": 1.0, "n": 2, "t_grid": [0.0, 0.1, 0.2, 0.3]},
  "domain": {"type": "disk", "radius": 1.0, "level": 2}
})";

const char* kNil3Box = R"({
  "flow": {"kind": "nil3", "params": {"D": 1.0, "B": 1.0, "C": 1.0}, "t_grid": [0.0, 0.25, 0.5, 1.0, 2.0]},
  "domain": {"type": "box", "bounds": [[0, 1], [0, 1], [0, 1]], "level": 2}
})";

}  // namespace

TEST(Config, ParsesExample) {
  const auto cfg = parse_config_text(kNil3Box);
  EXPECT_EQ(cfg.flow.kind, FlowKind::Nil3Closed);
  EXPECT_EQ(cfg.flow.n, 3);
  EXPECT_EQ(cfg.domain.type, DomainType::Box);
  ASSERT_EQ(cfg.domain.bounds.size(), 3u);
  EXPECT_EQ(cfg.domain.bounds[2].hi, 1.0);
  EXPECT_EQ(cfg.flow.t_grid.size(), 5u);
  EXPECT_EQ(cfg.solver.tol, 1e-10);
  EXPECT_TRUE(cfg.budget);
}

TEST(Config, ErrorsCarryPointers) {
  EXPECT_EQ(config_error_pointer(R"({"flow": {"kind": "einstein", "t_grid": []}, "domain": {"type": "disk"}})"),
            "/flow/t_grid");
  EXPECT_EQ(config_error_pointer(R"({"flow": {"kind": "einstein", "t_grid": [0.1]}, "domain": {"type": "disk"}})"),
            "/flow/t_grid/0");
  EXPECT_EQ(config_error_pointer(R"({"flow": {"kind": "ricci", "t_grid": [0]}, "domain": {"type": "disk"}})"),
            "/flow/kind");
  EXPECT_EQ(config_error_pointer(R"({"flow": {"kind": "einstein", "t_grid": [0]}, "domain": {"type": "disk", "level": 9}})"),
            "/domain/level");
  EXPECT_EQ(config_error_pointer(R"({"flow": {"kind": "einstein", "t_grid": [0]}, "domain": {"type": "disk"}, "extra": 1})"),
            "/extra");
  EXPECT_EQ(config_error_pointer(R"({"flow": {"kind": "einstein", "t_grid": [0]}})"), "/domain");
  EXPECT_EQ(config_error_pointer(R"({"flow": {"kind": "einstein", "t_grid": [0, "a"]}, "domain": {"type": "disk"}})"),
            "/flow/t_grid/1");
  EXPECT_EQ(config_error_pointer("{not json"), "");
}

TEST(Config, HorizonIsEnforced) {
  const auto cfg = parse_config_text(R"({
    "flow": {"kind": "einstein", "lambda": 1.0, "n": 2, "t_grid": [0.0, 0.5]},
    "domain": {"type": "disk", "level": 1}})");
  try {
    run(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.pointer, "/flow/t_grid/1");
  }
}

TEST(Run, EinsteinDiskFollowsExactLaw) {
  const auto cfg = parse_config_text(kEinsteinDisk);
  RunOptions opt;
  opt.envelopes = opt.verdicts = true;
  const auto rep = run(cfg, opt);
  ASSERT_EQ(rep.samples.size(), 4u);
  const double T0 = rep.samples[0].T;
  for (const auto& s : rep.samples) {
    const double law = std::pow(1.0 - 2.0 * s.t, 2);
    EXPECT_NEAR(s.T / T0, law, 1e-10 * law) << s.t;
    EXPECT_LE(s.polya_best, s.T_energy * (1 + 1e-9));
    EXPECT_GE(s.field_best, s.T_energy * (1 - 1e-9));
    EXPECT_GT(s.budget, 0.0);
  }
  EXPECT_TRUE(rep.certified_ok());
  ASSERT_TRUE(rep.verdicts.has_value());
  EXPECT_TRUE(rep.verdicts->get("T/V^((n+2)/n)").passed);
}

TEST(Run, Nil3BoxCertifies) {
  const auto cfg = parse_config_text(kNil3Box);
  RunOptions opt;
  opt.envelopes = opt.verdicts = true;
  const auto rep = run(cfg, opt);
  EXPECT_TRUE(rep.certified_ok());
  ASSERT_FALSE(rep.containment.empty());
  EXPECT_EQ(rep.containment[0].tag, "ricci");
  for (const auto& s : rep.samples) {
    if (s.t == 0.0) continue;
    EXPECT_LE(s.transported_lower, s.T_energy * (1 + 1e-9));
    EXPECT_GE(s.transported_upper, s.T_energy * (1 - 1e-9));
  }
}

TEST(Run, OnlyFirstAndRadial) {
  const auto cfg = parse_config_text(R"({
    "flow": {"kind": "imcf_sphere", "n": 2, "r0": 1.0, "t_grid": [0.0, 0.5, 1.0]},
    "domain": {"type": "radial", "radius": 1.0}})");
  RunOptions opt;
  opt.only_first = true;
  const auto one = run(cfg, opt);
  ASSERT_EQ(one.samples.size(), 1u);
  EXPECT_TRUE(one.radial);
  opt.only_first = false;
  opt.envelopes = opt.verdicts = true;
  const auto all = run(cfg, opt);
  ASSERT_EQ(all.samples.size(), 3u);
  EXPECT_NEAR(all.samples[2].T / all.samples[0].T, std::exp(2.0), 1e-9 * std::exp(2.0));
  EXPECT_TRUE(all.certified_ok());
}

TEST(Run, DeterministicAcrossThreadCounts) {
  const auto cfg = parse_config_text(kEinsteinDisk);
  RunOptions a, b;
  a.envelopes = b.envelopes = true;
  b.threads = 4;
  const auto ra = run(cfg, a), rb = run(cfg, b);
  EXPECT_EQ(report_csv(ra), report_csv(rb));
  EXPECT_EQ(report_json(ra).dump(), report_json(rb).dump());
  EXPECT_EQ(report_csv(ra), report_csv(run(cfg, a)));
}

TEST(Sweep, FlatDiskConvergesToOracle) {
  const auto cfg = parse_config_text(R"({
    "flow": {"kind": "einstein", "lambda": 0.0, "n": 2, "t_grid": [0.0]},
    "domain": {"type": "disk", "radius": 1.0, "level": 1}})");
  const auto s = convergence_sweep(cfg, 4);
  ASSERT_EQ(s.T.size(), 4u);
  EXPECT_GE(s.order, 1.8);
  EXPECT_NEAR(s.extrapolated, std::numbers::pi / 8.0, 1e-4);
  EXPECT_NEAR(s.reference, std::numbers::pi / 8.0, 1e-12);
  for (std::size_t i = 1; i < s.h.size(); ++i) EXPECT_LT(s.h[i], s.h[i - 1]);
  EXPECT_THROW(convergence_sweep(cfg, 1), UsageError);
}

TEST(Sweep, RejectsRadialDomains) {
  const auto cfg = parse_config_text(R"({
    "flow": {"kind": "einstein", "lambda": 0.0, "n": 2, "t_grid": [0.0]},
    "domain": {"type": "radial", "radius": 1.0}})");
  EXPECT_THROW(convergence_sweep(cfg, 3), ConfigError);
}

TEST(Identities, TableOrdersAndFloor) {
  const auto path = FlowPath::nil3({Group::Nil3, 1.0, 1.0, 1.0});
  const auto tab = check_identities(path, {0.5, 1.0}, {0.02, 0.01, 0.005}, 7);
  ASSERT_EQ(tab.rows.size(), 6u);
  EXPECT_GE(worst_order(tab), 1.8);
  const auto again = check_identities(path, {0.5, 1.0}, {0.02, 0.01, 0.005}, 7);
  EXPECT_EQ(identities_csv(tab), identities_csv(again));

  EXPECT_TRUE(std::isnan(IdentityTable::order(1e-12, 1e-13, 2.0)));
  EXPECT_NEAR(IdentityTable::order(4e-4, 1e-4, 2.0), 2.0, 1e-12);

  // A static Einstein path has every residual at the floor.
  const auto flat = check_identities(FlowPath::einstein(0.0, 2), {0.5}, {0.02, 0.01}, 1);
  EXPECT_TRUE(std::isnan(worst_order(flat)));
  EXPECT_THROW(check_identities(path, {}, {0.01}, 1), UsageError);
}

TEST(Output, CsvHeaderAndJsonShape) {
  const auto cfg = parse_config_text(kEinsteinDisk);
  RunOptions opt;
  opt.envelopes = opt.verdicts = true;
  const auto rep = run(cfg, opt);
  const std::string csv = report_csv(rep);
  const std::string header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(header.rfind("t,T,V,T_energy,residual,", 0), 0u) << header;
  EXPECT_NE(header.find("lower_ricci"), std::string::npos);
  EXPECT_NE(header.find("upper_variational"), std::string::npos);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), rep.samples.size() + 1);
  const Json j = report_json(rep);
  for (const char* key : {"tool", "config", "series", "envelopes", "verdicts", "status"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["series"].size(), rep.samples.size());
}

TEST(Output, AtomicWrite) {
  const auto dir = std::filesystem::temp_directory_path() / "torsilab_atomic_test";
  std::filesystem::remove_all(dir);
  const auto target = dir / "sub" / "out.csv";
  write_atomic(target.string(), "a,b\n1,2\n");
  EXPECT_EQ(slurp(target), "a,b\n1,2\n");
  EXPECT_FALSE(std::filesystem::exists(target.string() + ".tmp"));
  write_atomic(target.string(), "x\n");
  EXPECT_EQ(slurp(target), "x\n");
  std::filesystem::remove_all(dir);
}

TEST(Output, FormatsRoundTrip) {
  for (double v : {0.1, std::numbers::pi, 1e-300, -2.5e17}) EXPECT_EQ(std::stod(fmt_double(v)), v);
  EXPECT_TRUE(jnum(std::nan("")).is_null());
}
