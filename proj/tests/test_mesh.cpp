#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "torsilab/mesh.hpp"

using namespace torsilab;

namespace {

std::vector<Interval> unit_box(int d) { return std::vector<Interval>(static_cast<std::size_t>(d), {0.0, 1.0}); }

}  // namespace

TEST(DiskMesh, BoundaryOnCircle) {
  for (double R : {1.0, 2.5}) {
    const auto mesh = build_disk_mesh(R, 0);
    validate(mesh);
    int nb = 0;
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
      if (mesh.boundary[i]) {
        ++nb;
        EXPECT_NEAR(mesh.vertices[i].norm(), R, 1e-12 * R);
      } else {
        EXPECT_LT(mesh.vertices[i].norm(), R * (1 - 1e-3));
      }
    EXPECT_GT(nb, 0);
    EXPECT_GT(mesh.num_interior(), 0u);
  }
}

TEST(DiskMesh, AreaConvergesSecondOrder) {
  std::vector<double> err, h;
  for (int k = 0; k <= 4; ++k) {
    const auto mesh = build_disk_mesh(1.0, k);
    err.push_back(std::numbers::pi - chart_volume(mesh));
    h.push_back(mesh.h);
  }
  for (std::size_t i = 0; i + 1 < err.size(); ++i) {
    EXPECT_GT(err[i], 0.0);
    EXPECT_NEAR(h[i] / h[i + 1], 2.0, 0.25);
    EXPECT_GE(std::log2(err[i] / err[i + 1]), 1.8);
  }
}

TEST(DiskMesh, AreaScalesBySimilarity) {
  for (int k : {0, 2}) EXPECT_NEAR(chart_volume(build_disk_mesh(2.0, k)), 4.0 * chart_volume(build_disk_mesh(1.0, k)), 1e-12);
}

TEST(BoxMesh, Counts) {
  const auto sq = build_box_mesh(unit_box(2), 0);
  EXPECT_EQ(sq.num_cells(), 2u);
  EXPECT_EQ(sq.num_vertices(), 4u);
  EXPECT_EQ(sq.num_interior(), 0u);
  const auto cube = build_box_mesh(unit_box(3), 1);
  EXPECT_EQ(cube.num_cells(), 48u);
  EXPECT_EQ(cube.num_vertices(), 27u);
  EXPECT_EQ(cube.num_interior(), 1u);
  EXPECT_EQ(build_box_mesh(unit_box(1), 3).num_cells(), 8u);
}

TEST(BoxMesh, ExactChartVolume) {
  for (int k = 0; k <= 4; ++k) {
    EXPECT_NEAR(chart_volume(build_box_mesh(unit_box(3), k)), 1.0, 1e-12);
    EXPECT_NEAR(chart_volume(build_box_mesh(unit_box(2), k)), 1.0, 1e-12);
  }
  const auto m = build_box_mesh({{-1.0, 2.0}, {0.5, 1.0}, {0.0, 4.0}}, 2);
  EXPECT_NEAR(chart_volume(m), 6.0, 1e-12);
  validate(m);
}

TEST(BoxMesh, BoundaryFlagsOnFaces) {
  const auto m = build_box_mesh(unit_box(3), 2);
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    const Point& x = m.vertices[i];
    const bool on_face = (x.array() <= 1e-12).any() || (x.array() >= 1.0 - 1e-12).any();
    EXPECT_EQ(static_cast<bool>(m.boundary[i]), on_face);
  }
}

TEST(BallMesh, PositiveCellsAndBoundaryOnSphere) {
  for (int d : {2, 3}) {
    const auto m = build_ball_mesh(d, 1.5, 2);
    validate(m);
    for (std::size_t i = 0; i < m.num_vertices(); ++i)
      if (m.boundary[i]) EXPECT_NEAR(m.vertices[i].norm(), 1.5, 1e-12);
  }
}

TEST(BallMesh, VolumeConverges) {
  const double exact = 4.0 * std::numbers::pi / 3.0;
  double prev = 1.0;
  for (int k = 1; k <= 3; ++k) {
    const double e = exact - chart_volume(build_ball_mesh(3, 1.0, k));
    EXPECT_GT(e, 0.0);
    EXPECT_LT(e, prev);
    prev = e;
  }
  EXPECT_LT(prev, 0.02);
}

TEST(MeshIo, RoundTrip) {
  const auto m = build_disk_mesh(1.0, 1);
  std::stringstream ss;
  write_mesh(ss, m);
  const auto r = read_mesh(ss);
  ASSERT_EQ(r.num_vertices(), m.num_vertices());
  ASSERT_EQ(r.num_cells(), m.num_cells());
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    EXPECT_EQ(r.vertices[i], m.vertices[i]);
    EXPECT_EQ(r.boundary[i], m.boundary[i]);
  }
  for (std::size_t c = 0; c < m.num_cells(); ++c)
    for (int a = 0; a < 3; ++a) EXPECT_EQ(r.cells[c][a], m.cells[c][a]);
  EXPECT_DOUBLE_EQ(r.h, m.h);
}

TEST(MeshIo, ReadOrientsAndRejectsBadInput) {
  // A single clockwise triangle is reoriented on read.
  std::stringstream ok("2 3 1\n0 0 1\n0 1 1\n1 0 1\n0 1 2\n");
  const auto m = read_mesh(ok);
  EXPECT_NEAR(chart_volume(m), 0.5, 1e-15);

  std::stringstream bad_header("4 3 1\n");
  EXPECT_THROW(read_mesh(bad_header), UsageError);
  std::stringstream bad_index("2 3 1\n0 0 1\n1 0 1\n0 1 1\n0 1 7\n");
  EXPECT_THROW(read_mesh(bad_index), UsageError);
  std::stringstream degenerate("2 3 1\n0 0 1\n1 0 1\n2 0 1\n0 1 2\n");
  EXPECT_THROW(read_mesh(degenerate), UsageError);
  std::stringstream bad_flag("2 3 1\n0 0 3\n1 0 1\n0 1 1\n0 1 2\n");
  EXPECT_THROW(read_mesh(bad_flag), UsageError);
}
