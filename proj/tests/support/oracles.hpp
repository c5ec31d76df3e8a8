#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls the library routine it checks.

#include <cstddef>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "flowmesh/arap.hpp"
#include "flowmesh/depth_mesh.hpp"
#include "flowmesh/flow.hpp"
#include "flowmesh/geometry.hpp"
#include "flowmesh/rigidity.hpp"

namespace oracle {

using flowmesh::ConstraintSet;
using flowmesh::FlowVector;
using flowmesh::Mesh;
using flowmesh::Positions;
using flowmesh::RotationField;
using flowmesh::Triangle;
using flowmesh::Vec2;
using flowmesh::Vec3;

using EdgeKey = std::pair<int, int>;  // (min, max)
using WeightMap = std::map<EdgeKey, double>;

/// Undirected edges collected straight from the face list.
std::vector<EdgeKey> edges_from_faces(const Mesh& mesh);

/// Half-sum of cotangents of the opposite angles, angles taken with acos.
WeightMap cotangent_weights(const Mesh& mesh, bool clamp_negative = true);
WeightMap uniform_weights(const Mesh& mesh);

/// Energy summed edge by edge, each undirected edge once from each side.
double arap_energy(const Mesh& mesh, std::span<const Vec3> deformed, const WeightMap& w, const RotationField& r);

/// Dense weighted least squares over the movable vertices: one residual row per
/// directed edge plus sqrt(beta) (x - prev) rows.
Positions global_step_lsq(const Mesh& mesh, const ConstraintSet& cs, const RotationField& r, const WeightMap& w,
                          double beta, std::span<const Vec3> prev);

/// Rotation from Horn's unit-quaternion method (largest eigenvector of the
/// 4x4 profile matrix) for centered triples, mapping p onto q.
Eigen::Matrix3d horn_rotation(const Triangle& p, const Triangle& q);
/// Centers both triangles, aligns with horn_rotation and sums the residuals.
double face_error(const Triangle& rest, const Triangle& deformed);
/// Planar triangles only: scans rotations about z on a fine grid, then refines
/// by golden-section search. Returns the smallest residual found.
double planar_face_error_scan(const Triangle& rest, const Triangle& deformed, int samples = 20000);

double melr(const Mesh& mesh, std::span<const Vec3> deformed, std::span<const int> movable);
double mean_face_error(const Mesh& mesh, std::span<const Vec3> deformed);

/// Inversion step evaluated on scalars.
double ddim_invert_scalar(double z_prev, double a_t, double a_prev, double eps);
/// Its algebraic inverse when eps does not depend on z.
double ddim_sample_scalar(double z_t, double a_t, double a_prev, double eps);

/// All candidates sorted by magnitude (descending, stable), truncated to k.
std::vector<FlowVector> top_k(const std::vector<FlowVector>& candidates, int k);
/// Indices 0, s, 2s, ... below n with s = ceil(n / k).
std::vector<std::size_t> stride_indices(std::size_t n, int k);

// Single-channel drag loop with identity features and finite-difference
// gradients, written without the library's sampler, loss or tracker.
struct DragSetup {
  int height = 0;
  int width = 0;
  std::vector<double> latent;  // row-major
  std::vector<unsigned char> edit_mask;  // empty: everything editable
  std::vector<Vec2> handles;
  std::vector<Vec2> targets;
  int r_sup = 1;
  int r_track = 3;
  double lambda_reg = 0.1;
  double eta = 0.2;
  int alternations = 80;
  double stop_distance = 0.5;
  double fd_step = 1e-7;
};

struct DragOutcome {
  std::vector<Vec2> handles;
  int alternations = 0;
  double mean_distance = 0.0;
};

double bilinear(const std::vector<double>& z, int height, int width, const Vec2& p);
DragOutcome brute_force_drag(const DragSetup& setup);

}  // namespace oracle
