#include "flowmesh/arap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "flowmesh/errors.hpp"

namespace flowmesh {

void DeformParams::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("lambda must satisfy 0 < lambda <= 1");
  if (steps < 1) throw ConfigError("step count K must be >= 1");
  if (max_lg_iters < 1) throw ConfigError("max_lg_iters must be >= 1");
  if (!(rel_tol > 0.0)) throw ConfigError("rel_tol must be > 0");
}

namespace {

void check_sizes(const Mesh& mesh, std::size_t deformed, std::size_t rotations) {
  if (deformed != mesh.vertices.size()) {
    throw StructuralError("deformed positions have " + std::to_string(deformed) + " entries for " +
                          std::to_string(mesh.vertices.size()) + " vertices");
  }
  if (rotations != mesh.vertices.size()) {
    throw StructuralError("rotation field has " + std::to_string(rotations) + " entries for " +
                          std::to_string(mesh.vertices.size()) + " vertices");
  }
}

}  // namespace

double arap_energy(const Mesh& mesh, std::span<const Vec3> deformed, const EdgeWeights& weights,
                   const RotationField& rotations) {
  check_sizes(mesh, deformed.size(), rotations.size());
  const Adjacency& adj = weights.adjacency();
  double energy = 0.0;
  for (std::size_t i = 0; i < adj.size(); ++i) {
    const auto& nbrs = adj.neighbors(static_cast<int>(i));
    const auto w = weights.row(static_cast<int>(i));
    for (std::size_t s = 0; s < nbrs.size(); ++s) {
      const auto j = static_cast<std::size_t>(nbrs[s]);
      const Vec3 r = rotations[i] * (deformed[i] - deformed[j]) - (mesh.vertices[i] - mesh.vertices[j]);
      energy += w[s] * r.squaredNorm();
    }
  }
  return energy;
}

double rotation_smoothness(const EdgeWeights& weights, const RotationField& rotations) {
  const Adjacency& adj = weights.adjacency();
  if (rotations.size() != adj.size()) throw StructuralError("rotation field does not match the adjacency size");
  double total = 0.0;
  for (std::size_t i = 0; i < adj.size(); ++i) {
    for (int j : adj.neighbors(static_cast<int>(i))) {
      total += (rotations[i] - rotations[static_cast<std::size_t>(j)]).squaredNorm();
    }
  }
  return total;
}

double srarap_energy(const Mesh& mesh, std::span<const Vec3> deformed, const EdgeWeights& weights,
                     const RotationField& rotations, double alpha) {
  const double base = arap_energy(mesh, deformed, weights, rotations);
  return alpha == 0.0 ? base : base + alpha * rotation_smoothness(weights, rotations);
}

Rotation nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;  // smallest singular value
  return u * v.transpose();
}

RotationField fit_rotations(const Mesh& mesh, std::span<const Vec3> deformed, const EdgeWeights& weights,
                            double alpha, const RotationField* previous) {
  check_sizes(mesh, deformed.size(), mesh.vertices.size());
  const Adjacency& adj = weights.adjacency();
  const bool smooth = alpha > 0.0 && previous != nullptr;
  if (smooth && previous->size() != mesh.vertices.size()) {
    throw StructuralError("previous rotation field does not match the mesh");
  }
  RotationField out(mesh.vertices.size());
  for (std::size_t i = 0; i < adj.size(); ++i) {
    const auto& nbrs = adj.neighbors(static_cast<int>(i));
    const auto w = weights.row(static_cast<int>(i));
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t s = 0; s < nbrs.size(); ++s) {
      const auto j = static_cast<std::size_t>(nbrs[s]);
      cov += w[s] * (mesh.vertices[i] - mesh.vertices[j]) * (deformed[i] - deformed[j]).transpose();
      if (smooth) cov += 2.0 * alpha * (*previous)[j];
    }
    if (!cov.allFinite()) {
      throw NumericalError("non-finite rotation covariance at vertex " + std::to_string(i));
    }
    out[i] = nearest_rotation(cov);
  }
  return out;
}

struct GlobalSolver::Impl {
  const Mesh* mesh = nullptr;
  const EdgeWeights* weights = nullptr;
  double beta = 0.0;
  std::vector<int> unknown;  // vertex -> unknown index, -1 when pinned
  std::vector<int> movable;
  std::vector<int> fixed;
  Positions fixed_positions;
  std::vector<int> handles;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

namespace {

// Movable components (through positive-weight edges) that touch no pinned vertex.
void check_anchored(const Mesh& mesh, const EdgeWeights& weights, const std::vector<int>& unknown) {
  const Adjacency& adj = weights.adjacency();
  std::vector<int> component(mesh.vertices.size(), -1);
  std::vector<int> stack;
  int next_id = 0;
  for (std::size_t seed = 0; seed < mesh.vertices.size(); ++seed) {
    if (unknown[seed] < 0 || component[seed] >= 0) continue;
    bool anchored = false;
    std::size_t size = 0;
    component[seed] = next_id;
    stack.assign(1, static_cast<int>(seed));
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      ++size;
      const auto& nbrs = adj.neighbors(v);
      const auto w = weights.row(v);
      for (std::size_t s = 0; s < nbrs.size(); ++s) {
        if (!(w[s] > 0.0)) continue;
        const int u = nbrs[s];
        if (unknown[static_cast<std::size_t>(u)] < 0) {
          anchored = true;
        } else if (component[static_cast<std::size_t>(u)] < 0) {
          component[static_cast<std::size_t>(u)] = next_id;
          stack.push_back(u);
        }
      }
    }
    if (!anchored) {
      throw RankError("movable component containing vertex " + std::to_string(seed) + " (" + std::to_string(size) +
                      " vertices) is not connected to any fixed or handle vertex; the global system is singular");
    }
    ++next_id;
  }
}

}  // namespace

GlobalSolver::GlobalSolver(const Mesh& mesh, const ConstraintSet& constraints, const EdgeWeights& weights,
                           double beta)
    : impl_(std::make_unique<Impl>()) {
  constraints.validate(mesh.vertices.size());
  if (weights.adjacency().size() != mesh.vertices.size()) {
    throw StructuralError("edge weights were computed for a different mesh");
  }
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  Impl& s = *impl_;
  s.mesh = &mesh;
  s.weights = &weights;
  s.beta = beta;
  s.movable = constraints.movable;
  std::sort(s.movable.begin(), s.movable.end());
  s.fixed = constraints.fixed;
  s.fixed_positions = constraints.fixed_positions;
  s.handles = constraints.handles;
  s.unknown.assign(mesh.vertices.size(), -1);
  for (std::size_t k = 0; k < s.movable.size(); ++k) s.unknown[static_cast<std::size_t>(s.movable[k])] = static_cast<int>(k);
  if (s.movable.empty()) return;
  if (beta == 0.0) check_anchored(mesh, weights, s.unknown);

  const Adjacency& adj = weights.adjacency();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(s.movable.size() * 7);
  for (std::size_t k = 0; k < s.movable.size(); ++k) {
    const int i = s.movable[k];
    const auto& nbrs = adj.neighbors(i);
    const auto w = weights.row(i);
    double diag = beta;
    for (std::size_t e = 0; e < nbrs.size(); ++e) {
      diag += 2.0 * w[e];
      const int col = s.unknown[static_cast<std::size_t>(nbrs[e])];
      if (col >= 0 && w[e] != 0.0) triplets.emplace_back(static_cast<int>(k), col, -2.0 * w[e]);
    }
    triplets.emplace_back(static_cast<int>(k), static_cast<int>(k), diag);
  }
  const auto n = static_cast<Eigen::Index>(s.movable.size());
  Eigen::SparseMatrix<double> system(n, n);
  system.setFromTriplets(triplets.begin(), triplets.end());
  s.ldlt.compute(system);
  if (s.ldlt.info() != Eigen::Success) {
    throw RankError("global system factorization failed (matrix not positive definite)");
  }
  const auto& d = s.ldlt.vectorD();
  if (d.minCoeff() <= 0.0) throw RankError("global system is singular or indefinite");
}

GlobalSolver::~GlobalSolver() = default;
GlobalSolver::GlobalSolver(GlobalSolver&&) noexcept = default;
GlobalSolver& GlobalSolver::operator=(GlobalSolver&&) noexcept = default;

std::size_t GlobalSolver::unknowns() const { return impl_->movable.size(); }

Positions GlobalSolver::solve(const RotationField& rotations, std::span<const Vec3> prev_positions,
                              std::span<const Vec3> handle_positions) const {
  const Impl& s = *impl_;
  const Mesh& mesh = *s.mesh;
  const std::size_t n = mesh.vertices.size();
  if (rotations.size() != n) throw StructuralError("rotation field does not match the mesh");
  if (prev_positions.size() != n) throw StructuralError("previous positions do not match the mesh");
  if (handle_positions.size() != s.handles.size()) throw StructuralError("one position per handle is required");

  Positions out(n);
  for (std::size_t k = 0; k < s.fixed.size(); ++k) out[static_cast<std::size_t>(s.fixed[k])] = s.fixed_positions[k];
  for (std::size_t k = 0; k < s.handles.size(); ++k) out[static_cast<std::size_t>(s.handles[k])] = handle_positions[k];
  if (s.movable.empty()) return out;

  const Adjacency& adj = s.weights->adjacency();
  Eigen::MatrixX3d rhs(static_cast<Eigen::Index>(s.movable.size()), 3);
  for (std::size_t k = 0; k < s.movable.size(); ++k) {
    const auto i = static_cast<std::size_t>(s.movable[k]);
    const auto& nbrs = adj.neighbors(static_cast<int>(i));
    const auto w = s.weights->row(static_cast<int>(i));
    Vec3 b = s.beta * prev_positions[i];
    for (std::size_t e = 0; e < nbrs.size(); ++e) {
      const auto j = static_cast<std::size_t>(nbrs[e]);
      b += w[e] * (rotations[i].transpose() + rotations[j].transpose()) * (mesh.vertices[i] - mesh.vertices[j]);
      if (s.unknown[j] < 0) b += 2.0 * w[e] * out[j];
    }
    rhs.row(static_cast<Eigen::Index>(k)) = b.transpose();
  }
  const Eigen::MatrixX3d x = s.ldlt.solve(rhs);
  if (!x.allFinite()) throw NumericalError("global solve produced non-finite positions");
  for (std::size_t k = 0; k < s.movable.size(); ++k) {
    out[static_cast<std::size_t>(s.movable[k])] = x.row(static_cast<Eigen::Index>(k)).transpose();
  }
  return out;
}

Positions global_step(const Mesh& mesh, const ConstraintSet& constraints, const RotationField& rotations,
                      const EdgeWeights& weights, double beta, std::span<const Vec3> prev_positions) {
  const GlobalSolver solver(mesh, constraints, weights, beta);
  return solver.solve(rotations, prev_positions, constraints.targets);
}

std::vector<Positions> handle_schedule(const Positions& start, const Positions& targets, double lambda, int steps) {
  if (start.size() != targets.size()) throw StructuralError("handle start and target counts differ");
  std::vector<Positions> path;
  path.reserve(static_cast<std::size_t>(steps) + 1);
  path.push_back(start);
  for (int k = 0; k < steps; ++k) {
    if (k + 1 == steps) {
      path.push_back(targets);
      break;
    }
    Positions next = path.back();
    for (std::size_t h = 0; h < next.size(); ++h) next[h] += lambda * (targets[h] - next[h]);
    path.push_back(std::move(next));
  }
  return path;
}

namespace {

double displacement_penalty(std::span<const Vec3> positions, std::span<const Vec3> prev, const std::vector<int>& movable) {
  double total = 0.0;
  for (int i : movable) {
    total += (positions[static_cast<std::size_t>(i)] - prev[static_cast<std::size_t>(i)]).squaredNorm();
  }
  return total;
}

// Natural energy scale of the mesh; used as the floor for relative convergence.
double rest_energy_scale(const Mesh& mesh, const EdgeWeights& weights) {
  const Adjacency& adj = weights.adjacency();
  double total = 0.0;
  for (std::size_t i = 0; i < adj.size(); ++i) {
    const auto& nbrs = adj.neighbors(static_cast<int>(i));
    const auto w = weights.row(static_cast<int>(i));
    for (std::size_t s = 0; s < nbrs.size(); ++s) {
      total += w[s] * (mesh.vertices[i] - mesh.vertices[static_cast<std::size_t>(nbrs[s])]).squaredNorm();
    }
  }
  return total;
}

}  // namespace

DeformationTrace deform_progressive(const Mesh& mesh, const ConstraintSet& constraints, const DeformParams& params,
                                    const StepObserver& observer) {
  params.validate();
  mesh.validate();
  constraints.validate(mesh.vertices.size());

  const EdgeWeights weights = edge_weights(mesh, params.weight_mode, params.clamp_negative);
  const GlobalSolver solver(mesh, constraints, weights, params.beta);
  // Energies this far below the rest-shape scale count as converged outright.
  const double floor = 1e-14 * rest_energy_scale(mesh, weights);
  const bool smooth = params.alpha > 0.0;

  DeformationTrace trace;
  trace.params = params;
  trace.handles = constraints.handles;
  trace.snapshots.reserve(static_cast<std::size_t>(params.steps) + 1);
  trace.snapshots.push_back(mesh.vertices);

  Positions start;
  for (int h : constraints.handles) start.push_back(mesh.vertices[static_cast<std::size_t>(h)]);
  trace.handle_path = handle_schedule(start, constraints.targets, params.lambda, params.steps);

  RotationField rotations(mesh.vertices.size(), Rotation::Identity());
  for (int k = 0; k < params.steps; ++k) {
    const Positions& prev = trace.snapshots.back();
    const Positions& handle_pos = trace.handle_path[static_cast<std::size_t>(k) + 1];

    Positions current = prev;
    for (std::size_t f = 0; f < constraints.fixed.size(); ++f) {
      current[static_cast<std::size_t>(constraints.fixed[f])] = constraints.fixed_positions[f];
    }
    for (std::size_t h = 0; h < constraints.handles.size(); ++h) {
      current[static_cast<std::size_t>(constraints.handles[h])] = handle_pos[h];
    }

    auto objective = [&](const Positions& v, const RotationField& r) {
      return srarap_energy(mesh, v, weights, r, params.alpha) +
             params.beta * displacement_penalty(v, prev, constraints.movable);
    };

    StepRecord record;
    RotationField active = fit_rotations(mesh, current, weights, params.alpha, smooth ? &rotations : nullptr);
    record.initial_energy = objective(current, active);
    double last = record.initial_energy;
    for (int it = 0; it < params.max_lg_iters; ++it) {
      current = solver.solve(active, prev, handle_pos);
      const double energy = objective(current, active);
      if (!std::isfinite(energy)) throw NumericalError("energy became non-finite at step " + std::to_string(k + 1));
      record.iteration_energies.push_back(energy);
      record.iterations = it + 1;
      record.total_energy = energy;
      if (std::abs(last - energy) <= std::max(params.rel_tol * std::abs(last), floor)) {
        record.converged = true;
        break;
      }
      last = energy;
      if (it + 1 < params.max_lg_iters) {
        active = fit_rotations(mesh, current, weights, params.alpha, smooth ? &active : nullptr);
      }
    }
    record.arap_energy = arap_energy(mesh, current, weights, active);
    record.srarap_energy = smooth ? record.arap_energy + params.alpha * rotation_smoothness(weights, active)
                                  : record.arap_energy;
    record.rotations = active;
    record.handle_positions = handle_pos;
    trace.converged = trace.converged && record.converged;
    rotations = active;
    trace.steps.push_back(std::move(record));
    trace.snapshots.push_back(std::move(current));
    if (observer) observer({k + 1, params.steps, trace.steps.back().total_energy});
  }
  return trace;
}

}  // namespace flowmesh
