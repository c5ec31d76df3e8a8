#pragma once

#include <optional>
#include <vector>

#include "flowmesh/geometry.hpp"
#include "flowmesh/raster.hpp"

namespace flowmesh {

/// One user drag in pixel coordinates (x = column, y = row).
struct DragPair {
  Vec2 handle{0.0, 0.0};
  Vec2 target{0.0, 0.0};
};

struct DragSpec2D {
  std::vector<DragPair> drags;
  BinaryMask mask;  // editable region

  /// Throws ConfigError unless there is at least one drag, every point lies in
  /// the width x height image, and the mask is image-sized and nonempty.
  void validate(int width, int height) const;
};

/// Vertex partition for a deformation. Every vertex is exactly one of movable,
/// fixed or handle.
struct ConstraintSet {
  std::vector<int> movable;
  std::vector<int> fixed;
  Positions fixed_positions;  // parallel to `fixed`
  std::vector<int> handles;
  Positions targets;  // parallel to `handles`

  /// Throws StructuralError when the sets overlap, miss a vertex, or are
  /// out of range for a mesh with `vertex_count` vertices.
  void validate(std::size_t vertex_count) const;
};

struct DepthMeshOptions {
  double tau_d = 0.1;
  std::optional<double> tau_b;  // nullopt: mean depth + 0.3
  double reduction_ratio = 1.0;
  std::optional<double> depth_scale;  // nullopt: max(width, height) / 4
};

double auto_background_threshold(const DepthMap& depth);
/// Pixel stride realizing a reduction ratio: ceil(1 / sqrt(ratio)).
int reduction_stride(double reduction_ratio);

/// Builds the foreground mesh of a depth map. One vertex per retained pixel at
/// (col, row, depth * depth_scale); each grid cell contributes two triangles,
/// kept only when all pairwise depth differences are below tau_d and no corner
/// is below tau_b. Vertices without faces are dropped. Throws EmptyResultError
/// when nothing survives.
Mesh depth_to_mesh(const DepthMap& depth, const DepthMeshOptions& options = {});

struct LiftOptions {
  double snap_radius = 5.0;  // pixels
};

/// Snap radius for a mesh built at `reduction_ratio`: 5 px, or the vertex
/// spacing when that is larger.
LiftOptions lift_options_for(double reduction_ratio);

/// Maps handles to their nearest projected vertex (lowest index wins ties),
/// places each target at the handle's depth under the target pixel, and marks
/// vertices projecting inside the mask as movable; the rest are fixed in place.
ConstraintSet lift_drag_spec(const DragSpec2D& spec, const Mesh& mesh, const ProjectionFrame& frame,
                             const LiftOptions& options = {});

/// Inverse of ProjectionFrame::apply for a given scene depth.
Vec3 unproject(const ProjectionFrame& frame, const Vec2& pixel, double z);

}  // namespace flowmesh
