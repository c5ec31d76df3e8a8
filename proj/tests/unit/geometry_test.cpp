#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "flowmesh/errors.hpp"
#include "flowmesh/geometry.hpp"
#include "oracles.hpp"

using namespace flowmesh;

namespace {

Mesh two_triangles() {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  m.faces = {{0, 1, 2}, {1, 3, 2}};
  return m;
}

void expect_symmetric(const Adjacency& adj) {
  for (std::size_t i = 0; i < adj.size(); ++i) {
    for (int j : adj.neighbors(static_cast<int>(i))) {
      EXPECT_GE(adj.slot(j, static_cast<int>(i)), 0) << i << " -> " << j;
    }
  }
}

}  // namespace

TEST(Adjacency, SingleTriangleIsComplete) {
  const Mesh m = synth_single_triangle();
  const Adjacency adj = build_adjacency(m);
  EXPECT_EQ(adj.neighbors(0), (std::vector<int>{1, 2}));
  EXPECT_EQ(adj.neighbors(1), (std::vector<int>{0, 2}));
  EXPECT_EQ(adj.neighbors(2), (std::vector<int>{0, 1}));
}

TEST(Adjacency, SharedEdge) {
  const Adjacency adj = build_adjacency(two_triangles());
  EXPECT_EQ(adj.neighbors(1), (std::vector<int>{0, 2, 3}));
  EXPECT_EQ(adj.edge_count(), 5u);
}

TEST(Adjacency, NoFaces) {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}};
  const Adjacency adj = build_adjacency(m);
  EXPECT_TRUE(adj.neighbors(0).empty());
  EXPECT_TRUE(adj.neighbors(1).empty());
}

TEST(Adjacency, OutOfRangeFaceIsStructural) {
  Mesh m = two_triangles();
  m.faces.push_back({0, 1, 7});
  EXPECT_THROW(build_adjacency(m), StructuralError);
}

TEST(Adjacency, SymmetricOnGeneratedMeshes) {
  expect_symmetric(build_adjacency(synth_grid(7, 5)));
  expect_symmetric(build_adjacency(synth_bar(10, 3, 2)));
}

TEST(MeshValidate, RejectsRepeatedIndexAndNonFinite) {
  Mesh m = two_triangles();
  m.faces.push_back({0, 0, 1});
  EXPECT_THROW(m.validate(), StructuralError);
  Mesh n = two_triangles();
  n.vertices[0].x() = std::nan("");
  EXPECT_THROW(n.validate(), StructuralError);
}

TEST(CotangentWeights, RightIsoscelesHypotenuseIsZero) {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  const EdgeWeights w = cotangent_weights(m);
  EXPECT_NEAR(w.at(1, 2), 0.0, 1e-15);
  EXPECT_NEAR(w.at(0, 1), 0.5, 1e-15);
}

TEST(CotangentWeights, EquilateralEdge) {
  const EdgeWeights w = cotangent_weights(synth_single_triangle());
  const double expected = 0.5 / std::tan(M_PI / 3.0);
  EXPECT_NEAR(w.at(0, 1), expected, 1e-12);
  EXPECT_NEAR(w.at(1, 2), expected, 1e-12);
  EXPECT_NEAR(w.at(0, 2), 0.2887, 1e-4);
}

TEST(CotangentWeights, UnitSquareDiagonalAndSides) {
  // Both angles facing the diagonal are right angles; each side faces 45 degrees once.
  const EdgeWeights w = cotangent_weights(two_triangles());
  EXPECT_NEAR(w.at(1, 2), 0.0, 1e-15);
  EXPECT_NEAR(w.at(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(w.at(3, 2), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(w.at(1, 2), w.at(2, 1));
}

TEST(CotangentWeights, ZeroAreaFaceIsDegenerate) {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  m.faces = {{0, 1, 2}};
  EXPECT_THROW(cotangent_weights(m), DegenerateGeometryError);
}

TEST(CotangentWeights, ClampingAndObtuseAngles) {
  // An obtuse apex makes the opposite weight negative.
  Mesh m;
  m.vertices = {{0, 0, 0}, {4, 0, 0}, {2, 0.5, 0}};
  m.faces = {{0, 1, 2}};
  EXPECT_LT(cotangent_weights(m, false).at(0, 1), 0.0);
  EXPECT_EQ(cotangent_weights(m, true).at(0, 1), 0.0);
}

TEST(CotangentWeights, MatchAcosOracleOnBar) {
  const Mesh m = synth_bar(6, 3, 3, 0.7);
  const EdgeWeights w = cotangent_weights(m, false);
  for (const auto& [e, v] : oracle::cotangent_weights(m, false)) {
    EXPECT_NEAR(w.at(e.first, e.second), v, 1e-12);
  }
}

TEST(CotangentWeights, RigidInvariance) {
  Mesh m = synth_grid(6, 5, 1.0);
  for (auto& v : m.vertices) v.z() = 0.3 * std::sin(v.x()) * std::cos(v.y());
  const EdgeWeights w0 = cotangent_weights(m);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto rigid = fixtures::random_rigid(seed);
    Mesh moved = m;
    for (auto& v : moved.vertices) v = rigid(v);
    const EdgeWeights w1 = cotangent_weights(moved);
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
      const auto a = w0.row(static_cast<int>(i));
      const auto b = w1.row(static_cast<int>(i));
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t s = 0; s < a.size(); ++s) EXPECT_NEAR(a[s], b[s], 1e-12);
    }
  }
}

TEST(UniformWeights, AllOne) {
  const EdgeWeights w = uniform_weights(synth_grid(3, 3));
  EXPECT_EQ(w.at(0, 1), 1.0);
  EXPECT_THROW(w.at(0, 8), StructuralError);
}

TEST(Projection, DepthMeshUsesPixelProvenance) {
  Mesh m;
  m.vertices = {{10, 20, 0.5}};
  m.pixels = {{20, 10}};
  m.image_width = 32;
  m.image_height = 32;
  const Projection2D p = project_2d(m);
  EXPECT_EQ(p.points[0], Vec2(10, 20));
  EXPECT_EQ(p.width, 32);
}

TEST(Projection, ViewAxisTranslationIsInvisible) {
  Mesh m = synth_bar(4, 3, 2);
  const Projection2D a = project_2d(m, OrthoCamera{64, 64});
  for (auto& v : m.vertices) v.z() += 17.5;
  const Projection2D b = project_2d(m, OrthoCamera{64, 64});
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i], b.points[i]);
}

TEST(Projection, UnitCubeFrontFaceFillsImage) {
  Mesh m;
  m.vertices = {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  const Projection2D p = project_2d(m, OrthoCamera{512, 512});
  // y flips so that rows grow downward.
  EXPECT_NEAR((p.points[0] - Vec2(0, 511)).norm(), 0.0, 1e-9);
  EXPECT_NEAR((p.points[1] - Vec2(511, 511)).norm(), 0.0, 1e-9);
  EXPECT_NEAR((p.points[2] - Vec2(511, 0)).norm(), 0.0, 1e-9);
  EXPECT_NEAR((p.points[3] - Vec2(0, 0)).norm(), 0.0, 1e-9);
}

TEST(Projection, MissingFrameIsConfigError) {
  EXPECT_THROW(project_2d(synth_grid(2, 2)), ConfigError);
}

TEST(Synth, Counts) {
  const Mesh g = synth_grid(2, 2);
  EXPECT_EQ(g.vertex_count(), 4u);
  EXPECT_EQ(g.face_count(), 2u);
  const Mesh g2 = synth_grid(20, 20);
  EXPECT_EQ(g2.face_count(), 2u * 19 * 19);
  const Mesh bar = synth_bar(10, 2, 2);
  EXPECT_EQ(bar.vertex_count(), 40u);
  EXPECT_EQ(bar.face_count(), 76u);
  EXPECT_NO_THROW(bar.validate());
  const Mesh again = synth_bar(10, 2, 2);
  EXPECT_TRUE(bar.vertices == again.vertices);
  EXPECT_EQ(bar.faces, again.faces);
}

TEST(Synth, SingleTriangleCentroidAtOrigin) {
  const Mesh t = synth_single_triangle(1.0);
  const Vec3 c = (t.vertices[0] + t.vertices[1] + t.vertices[2]) / 3.0;
  EXPECT_NEAR(c.norm(), 0.0, 1e-15);
  EXPECT_NEAR((t.vertices[0] - t.vertices[1]).norm(), 1.0, 1e-15);
  EXPECT_NEAR((t.vertices[1] - t.vertices[2]).norm(), 1.0, 1e-15);
}

TEST(Synth, NonPositiveDimensionsRejected) {
  EXPECT_THROW(synth_grid(0, 3), ConfigError);
  EXPECT_THROW(synth_bar(1, 2, 2), ConfigError);
  EXPECT_THROW(synth_single_triangle(-1.0), ConfigError);
}
