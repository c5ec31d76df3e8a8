#pragma once

// As-rigid-as-possible energies and the progressive local-global deformation.
//
// Energy convention: the per-vertex rotation R_i maps the *deformed* edge onto
// the rest edge,
//
//   E = sum_i sum_{j in N(i)} w_ij | R_i (p'_i - p'_j) - (p_i - p_j) |^2,
//
// so a global rotation Q of the mesh is absorbed by R_i = Q^T. Every undirected
// edge is visited from both endpoints.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "flowmesh/depth_mesh.hpp"
#include "flowmesh/geometry.hpp"

namespace flowmesh {

using Rotation = Eigen::Matrix3d;
using RotationField = std::vector<Rotation>;

struct DeformParams {
  double alpha = 0.3;   // rotation-smoothness weight
  double beta = 0.8;    // inter-step displacement weight
  double lambda = 0.5;  // fraction of the remaining handle distance per step
  int steps = 10;       // K
  int max_lg_iters = 50;
  double rel_tol = 1e-6;
  WeightMode weight_mode = WeightMode::Cotangent;
  bool clamp_negative = true;

  /// Throws ConfigError when alpha/beta < 0, lambda outside (0, 1], steps < 1,
  /// max_lg_iters < 1 or rel_tol <= 0.
  void validate() const;
};

double arap_energy(const Mesh& mesh, std::span<const Vec3> deformed, const EdgeWeights& weights,
                   const RotationField& rotations);
/// sum_i sum_{j in N(i)} |R_i - R_j|_F^2
double rotation_smoothness(const EdgeWeights& weights, const RotationField& rotations);
double srarap_energy(const Mesh& mesh, std::span<const Vec3> deformed, const EdgeWeights& weights,
                     const RotationField& rotations, double alpha);

/// Closest proper rotation to `m` in the Frobenius sense (SVD, sign-corrected).
Rotation nearest_rotation(const Eigen::Matrix3d& m);

/// Local step. R_i is the nearest rotation to
///   S_i = sum_j w_ij (p_i - p_j)(p'_i - p'_j)^T  [+ 2 alpha sum_j prev_R_j].
/// The neighbor term is used only when alpha > 0 and `previous` is given.
RotationField fit_rotations(const Mesh& mesh, std::span<const Vec3> deformed, const EdgeWeights& weights,
                            double alpha, const RotationField* previous = nullptr);

/// Global step with a cached factorization. Minimizes
///   E(R fixed) + beta * sum_{movable} |p'_i - prev_i|^2
/// over movable vertices, i.e. solves (2L + beta I) x = b with fixed and handle
/// vertices as boundary values. Throws RankError when beta == 0 and some
/// movable component touches no pinned vertex.
class GlobalSolver {
 public:
  GlobalSolver(const Mesh& mesh, const ConstraintSet& constraints, const EdgeWeights& weights, double beta);
  ~GlobalSolver();
  GlobalSolver(GlobalSolver&&) noexcept;
  GlobalSolver& operator=(GlobalSolver&&) noexcept;

  /// `handle_positions` parallels constraints.handles.
  Positions solve(const RotationField& rotations, std::span<const Vec3> prev_positions,
                  std::span<const Vec3> handle_positions) const;

  std::size_t unknowns() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One-shot global step with handles at constraints.targets.
Positions global_step(const Mesh& mesh, const ConstraintSet& constraints, const RotationField& rotations,
                      const EdgeWeights& weights, double beta, std::span<const Vec3> prev_positions);

struct StepRecord {
  double arap_energy = 0.0;    // at the converged positions and rotations
  double srarap_energy = 0.0;  // plus alpha * rotation smoothness
  double total_energy = 0.0;   // plus beta * inter-step displacement
  double initial_energy = 0.0;  // total energy of the step's starting guess
  std::vector<double> iteration_energies;  // total energy after each local-global pass
  int iterations = 0;
  bool converged = false;
  RotationField rotations;
  Positions handle_positions;
};

struct DeformationTrace {
  DeformParams params;
  std::vector<int> handles;
  std::vector<Positions> snapshots;        // K + 1 entries; [0] is the input
  std::vector<StepRecord> steps;           // K entries; steps[k] produced snapshots[k + 1]
  std::vector<Positions> handle_path;      // K + 1 entries
  bool converged = true;                   // false when any step hit max_lg_iters

  std::size_t step_count() const { return steps.size(); }
  const Positions& final_positions() const { return snapshots.back(); }
};

struct StepProgress {
  int step = 0;  // 1-based index of the finished step
  int total = 0;
  double energy = 0.0;
};
using StepObserver = std::function<void(const StepProgress&)>;

/// Progressive deformation: the handles advance by lambda of their remaining
/// distance per step and land exactly on the targets at step K; each step runs
/// local-global passes until the relative energy change drops below rel_tol.
DeformationTrace deform_progressive(const Mesh& mesh, const ConstraintSet& constraints, const DeformParams& params,
                                    const StepObserver& observer = {});

/// Handle schedule alone: positions after each of the K steps (K + 1 entries).
std::vector<Positions> handle_schedule(const Positions& start, const Positions& targets, double lambda, int steps);

}  // namespace flowmesh
