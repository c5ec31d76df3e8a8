#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "flowmesh/errors.hpp"
#include "flowmesh/mesh_io.hpp"

using namespace flowmesh;

namespace {

Mesh awkward_mesh() {
  Mesh m = synth_bar(4, 3, 2, 0.1);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    m.vertices[i] += Vec3(1.0 / 3.0, std::sqrt(2.0) * 1e-9, -1e7 * static_cast<double>(i));
  }
  return m;
}

}  // namespace

TEST(Obj, RoundTripIsBitExact) {
  const Mesh m = awkward_mesh();
  const Mesh back = decode_obj(encode_obj(m));
  EXPECT_TRUE(back.vertices == m.vertices);
  EXPECT_EQ(back.faces, m.faces);
  EXPECT_FALSE(back.has_pixels());
}

TEST(Obj, ProvenanceSurvives) {
  Mesh m;
  m.vertices = {{0, 0, 0.5}, {1, 0, 0.5}, {0, 1, 0.5}};
  m.faces = {{0, 1, 2}};
  m.pixels = {{0, 0}, {0, 1}, {1, 0}};
  m.image_width = 2;
  m.image_height = 2;
  const Mesh back = decode_obj(encode_obj(m));
  EXPECT_EQ(back.pixels, m.pixels);
  EXPECT_EQ(back.image_width, 2);
  EXPECT_EQ(back.image_height, 2);
}

TEST(Obj, ForeignFeatures) {
  const std::string text =
      "# exported elsewhere\n"
      "o quad\n"
      "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
      "vn 0 0 1\n"
      "f 1/1/1 2/2/1 3/3/1 4/4/1\n";
  const Mesh m = decode_obj(text);
  ASSERT_EQ(m.face_count(), 2u);
  EXPECT_EQ(m.faces[0], (Face{0, 1, 2}));
  EXPECT_EQ(m.faces[1], (Face{0, 2, 3}));
}

TEST(Obj, Malformed) {
  EXPECT_THROW(decode_obj("v 0 0\n"), IoError);
  EXPECT_THROW(decode_obj("v 0 0 zero\n"), IoError);
  EXPECT_THROW(decode_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n"), StructuralError);
}

TEST(Ply, RoundTripIsBitExact) {
  const Mesh m = awkward_mesh();
  const std::string bytes = encode_ply(m);
  EXPECT_EQ(bytes.rfind("ply\n", 0), 0u);
  const Mesh back = decode_ply(bytes);
  EXPECT_TRUE(back.vertices == m.vertices);
  EXPECT_EQ(back.faces, m.faces);
}

TEST(Ply, Float32Vertices) {
  std::string ply =
      "ply\nformat binary_little_endian 1.0\n"
      "element vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
      "element face 1\nproperty list uchar uint vertex_indices\nend_header\n";
  const float coords[9] = {0, 0, 0, 1, 0, 0, 0, 2, 0};
  ply.append(reinterpret_cast<const char*>(coords), sizeof(coords));
  ply.push_back(3);
  const std::uint32_t idx[3] = {0, 1, 2};
  ply.append(reinterpret_cast<const char*>(idx), sizeof(idx));
  const Mesh m = decode_ply(ply);
  EXPECT_EQ(m.vertices[2], Vec3(0, 2, 0));
  EXPECT_EQ(m.faces[0], (Face{0, 1, 2}));
}

TEST(Ply, Malformed) {
  EXPECT_THROW(decode_ply("ply\nformat ascii 1.0\nend_header\n"), IoError);
  const std::string bytes = encode_ply(synth_grid(3, 3));
  EXPECT_THROW(decode_ply(bytes.substr(0, bytes.size() - 5)), IoError);
  EXPECT_THROW(decode_ply("OFF\n"), IoError);
}

TEST(MeshFiles, ExtensionDispatchAndSniffing) {
  fixtures::TempDir dir("meshio");
  const Mesh m = synth_grid(4, 3);
  write_mesh(dir / "a.obj", m);
  write_mesh(dir / "a.ply", m);
  EXPECT_TRUE(read_mesh(dir / "a.obj").vertices == m.vertices);
  EXPECT_TRUE(read_mesh(dir / "a.ply").vertices == m.vertices);
  EXPECT_TRUE(decode_mesh(encode_ply(m)).vertices == m.vertices);
  EXPECT_TRUE(decode_mesh(encode_obj(m)).vertices == m.vertices);
  EXPECT_THROW(read_mesh(dir / "absent.obj"), IoError);
}
