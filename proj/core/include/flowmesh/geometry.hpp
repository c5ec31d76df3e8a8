#pragma once

// Triangle mesh container, one-ring adjacency, edge weights and the
// image-plane projection shared by the deformation and flow stages.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace flowmesh {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Positions = std::vector<Vec3>;
using Face = std::array<int, 3>;

/// Source pixel of a depth-derived vertex.
struct PixelCoord {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

struct Mesh {
  Positions vertices;
  std::vector<Face> faces;
  // Either empty or one entry per vertex.
  std::vector<PixelCoord> pixels;
  // Size of the source image; zero when the mesh was not built from pixels.
  int image_width = 0;
  int image_height = 0;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
  bool has_pixels() const { return !pixels.empty(); }

  /// Throws StructuralError on out-of-range or repeated face indices,
  /// mismatched provenance size or non-finite coordinates.
  void validate() const;
};

/// Sorted, symmetric one-ring neighbor lists.
class Adjacency {
 public:
  Adjacency() = default;
  explicit Adjacency(std::vector<std::vector<int>> neighbors);

  std::size_t size() const { return neighbors_.size(); }
  const std::vector<int>& neighbors(int i) const { return neighbors_[static_cast<std::size_t>(i)]; }
  /// Position of j inside neighbors(i), or -1.
  int slot(int i, int j) const;
  std::size_t edge_count() const;

 private:
  std::vector<std::vector<int>> neighbors_;
};

Adjacency build_adjacency(const Mesh& mesh);

enum class WeightMode { Cotangent, Uniform };

/// Per-edge weights stored alongside the adjacency lists; w(i,j) == w(j,i).
class EdgeWeights {
 public:
  EdgeWeights() = default;
  EdgeWeights(Adjacency adjacency, std::vector<std::vector<double>> weights);

  const Adjacency& adjacency() const { return adjacency_; }
  std::span<const double> row(int i) const { return weights_[static_cast<std::size_t>(i)]; }
  /// Weight of edge (i,j). Throws StructuralError when the edge does not exist.
  double at(int i, int j) const;

 private:
  Adjacency adjacency_;
  std::vector<std::vector<double>> weights_;
};

/// Half-sum of the cotangents of the angles opposite each edge; boundary edges
/// use their single opposite angle. Zero-area faces raise DegenerateGeometryError.
EdgeWeights cotangent_weights(const Mesh& mesh, bool clamp_negative = true);
EdgeWeights uniform_weights(const Mesh& mesh);
EdgeWeights edge_weights(const Mesh& mesh, WeightMode mode, bool clamp_negative = true);

/// Image rectangle used when a mesh carries no pixel provenance.
struct OrthoCamera {
  int width = 512;
  int height = 512;
};

/// Maps scene coordinates to image pixels by dropping the view (z) axis.
/// Pixel-aligned frames are the identity on (x, y); orthographic frames fit the
/// reference bounding box into the image with a uniform scale and flip y so that
/// rows grow downward.
struct ProjectionFrame {
  enum class Kind { PixelAligned, Orthographic };
  Kind kind = Kind::PixelAligned;
  int width = 0;
  int height = 0;
  double scale = 1.0;
  Vec2 center{0.0, 0.0};  // bounding-box center in scene (x, y)

  Vec2 apply(const Vec3& p) const;
};

/// Pixel-aligned when the mesh has provenance, otherwise orthographic through
/// `camera`. Throws ConfigError when neither is available.
ProjectionFrame make_projection_frame(const Mesh& mesh, std::optional<OrthoCamera> camera = std::nullopt);

struct Projection2D {
  std::vector<Vec2> points;
  int width = 0;
  int height = 0;
};

Projection2D project_positions(std::span<const Vec3> positions, const ProjectionFrame& frame);
Projection2D project_2d(const Mesh& mesh, std::optional<OrthoCamera> camera = std::nullopt);

// Synthetic meshes for tests, benchmarks and the rigidity sweeps.

/// width x height vertex lattice in the z=0 plane, two triangles per cell.
Mesh synth_grid(int width, int height, double spacing = 1.0);
/// Closed surface of an nx x ny x nz vertex lattice box (each dimension >= 2),
/// long axis along x. Vertices are the lattice boundary points in x-fastest order.
Mesh synth_bar(int nx, int ny, int nz, double spacing = 1.0);
/// Equilateral triangle in the z=0 plane, centroid at the origin.
Mesh synth_single_triangle(double side = 1.0);

enum class SynthKind { Grid, Bar, SingleTriangle };

struct SynthParams {
  std::array<int, 3> dims{2, 2, 2};  // grid uses dims[0..1]
  double spacing = 1.0;              // side length for SingleTriangle
};

Mesh synth_mesh(SynthKind kind, const SynthParams& params);

}  // namespace flowmesh
