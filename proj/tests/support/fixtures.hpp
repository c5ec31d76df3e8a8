#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "flowmesh/depth_mesh.hpp"
#include "flowmesh/geometry.hpp"

namespace fixtures {

using flowmesh::ConstraintSet;
using flowmesh::Mesh;
using flowmesh::Vec3;

/// Rigid map x -> q x + t.
struct Rigid {
  Eigen::Matrix3d q = Eigen::Matrix3d::Identity();
  Vec3 t = Vec3::Zero();
  Vec3 operator()(const Vec3& x) const { return q * x + t; }
};

inline Rigid random_rigid(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3 axis(u(rng), u(rng), u(rng));
  if (axis.norm() < 1e-3) axis = Vec3::UnitZ();
  Rigid r;
  r.q = Eigen::AngleAxisd(3.0 * u(rng), axis.normalized()).toRotationMatrix();
  r.t = Vec3(5 * u(rng), 5 * u(rng), 5 * u(rng));
  return r;
}

/// Vertices on the mesh's bounding-box boundary in x (and y for flat meshes)
/// become handles carried by `motion`; everything else is movable.
inline ConstraintSet boundary_handles(const Mesh& mesh, const std::function<Vec3(const Vec3&)>& motion) {
  Vec3 lo = mesh.vertices.front();
  Vec3 hi = lo;
  for (const Vec3& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const bool flat = hi.z() == lo.z();
  ConstraintSet cs;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    bool h = v.x() == lo.x() || v.x() == hi.x();
    if (flat) h = h || v.y() == lo.y() || v.y() == hi.y();
    if (h) {
      cs.handles.push_back(static_cast<int>(i));
      cs.targets.push_back(motion(v));
    } else {
      cs.movable.push_back(static_cast<int>(i));
    }
  }
  return cs;
}

/// Left column fixed, right column lifted in z and pulled along x; a simple
/// non-rigid bend for grids and bars.
inline ConstraintSet lift_right_end(const Mesh& mesh, double lift) {
  double xmax = mesh.vertices.front().x();
  for (const Vec3& v : mesh.vertices) xmax = std::max(xmax, v.x());
  ConstraintSet cs;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    if (v.x() == 0.0) {
      cs.fixed.push_back(static_cast<int>(i));
      cs.fixed_positions.push_back(v);
    } else if (v.x() == xmax) {
      cs.handles.push_back(static_cast<int>(i));
      cs.targets.push_back(v + Vec3(-0.2 * lift, 0.0, lift));
    } else {
      cs.movable.push_back(static_cast<int>(i));
    }
  }
  return cs;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("flowmesh-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

template <typename F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace fixtures
