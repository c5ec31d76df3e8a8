#pragma once

// Rigidity diagnostics: mean edge-length ratio over the optimized region and
// the mean per-face residual after a best-fit rotation.

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "flowmesh/geometry.hpp"

namespace flowmesh {

using Triangle = std::array<Vec3, 3>;

/// Optimal rotation R with R * P[k] ~ Q[k] for centered triples (SVD, reflection
/// corrected on the smallest singular direction). Throws ConfigError when either
/// triple's centroid is not at the origin.
Eigen::Matrix3d kabsch_rotation(const Triangle& p, const Triangle& q);

struct FaceError {
  double error = 0.0;
  bool degenerate = false;  // zero-area rest face, aligned with the identity
};

/// sum_k |R (p_k - c) - (q_k - c')|^2 with c, c' the centroids.
FaceError face_arap_error(const Triangle& rest, const Triangle& deformed);

/// Mean over unique edges with both endpoints in `movable` of the deformed to
/// rest length ratio. Throws EmptyResultError without such edges and
/// DegenerateGeometryError for a zero-length rest edge.
double melr(const Mesh& mesh, std::span<const Vec3> deformed, std::span<const int> movable);

double mean_arap_error(const Mesh& mesh, std::span<const Vec3> deformed);

struct RigidityReport {
  double melr = 0.0;
  double m_arap_error = 0.0;
  std::vector<double> face_errors;
  std::vector<int> degenerate_faces;
  std::size_t movable_edges = 0;
  std::size_t faces = 0;
};

RigidityReport rigidity_report(const Mesh& mesh, std::span<const Vec3> deformed, std::span<const int> movable);

}  // namespace flowmesh
