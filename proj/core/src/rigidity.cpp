#include "flowmesh/rigidity.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

#include "flowmesh/errors.hpp"

namespace flowmesh {

namespace {

Vec3 centroid(const Triangle& t) { return (t[0] + t[1] + t[2]) / 3.0; }

Triangle centered(const Triangle& t) {
  const Vec3 c = centroid(t);
  return {t[0] - c, t[1] - c, t[2] - c};
}

void require_centered(const Triangle& t, const char* name) {
  const double scale = std::max({t[0].norm(), t[1].norm(), t[2].norm(), 1.0});
  if (centroid(t).norm() > 1e-9 * scale) {
    throw ConfigError(std::string("kabsch input ") + name + " is not centered");
  }
}

bool zero_area(const Triangle& t) {
  const Vec3 u = t[1] - t[0];
  const Vec3 v = t[2] - t[0];
  return u.cross(v).norm() <= 1e-14 * std::max(u.norm() * v.norm(), 1e-300);
}

// Unique undirected edges of the mesh as (i < j).
std::vector<std::pair<int, int>> unique_edges(const Mesh& mesh) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = f[static_cast<std::size_t>(k)];
      const int b = f[static_cast<std::size_t>((k + 1) % 3)];
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

void check_deformed(const Mesh& mesh, std::span<const Vec3> deformed) {
  if (deformed.size() != mesh.vertices.size()) {
    throw StructuralError("deformed positions have " + std::to_string(deformed.size()) + " entries for " +
                          std::to_string(mesh.vertices.size()) + " vertices");
  }
}

}  // namespace

Eigen::Matrix3d kabsch_rotation(const Triangle& p, const Triangle& q) {
  require_centered(p, "P");
  require_centered(q, "P_hat");
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (int k = 0; k < 3; ++k) h += p[static_cast<std::size_t>(k)] * q[static_cast<std::size_t>(k)].transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  const double d = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return v * Eigen::Vector3d(1.0, 1.0, d).asDiagonal() * u.transpose();
}

FaceError face_arap_error(const Triangle& rest, const Triangle& deformed) {
  const Triangle p = centered(rest);
  const Triangle q = centered(deformed);
  FaceError out;
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  if (zero_area(rest)) {
    out.degenerate = true;
  } else {
    r = kabsch_rotation(p, q);
  }
  for (int k = 0; k < 3; ++k) {
    out.error += (r * p[static_cast<std::size_t>(k)] - q[static_cast<std::size_t>(k)]).squaredNorm();
  }
  return out;
}

double melr(const Mesh& mesh, std::span<const Vec3> deformed, std::span<const int> movable) {
  check_deformed(mesh, deformed);
  std::vector<char> is_movable(mesh.vertices.size(), 0);
  for (int v : movable) {
    if (v < 0 || static_cast<std::size_t>(v) >= mesh.vertices.size()) {
      throw StructuralError("movable vertex " + std::to_string(v) + " is out of range");
    }
    is_movable[static_cast<std::size_t>(v)] = 1;
  }
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& [i, j] : unique_edges(mesh)) {
    if (!is_movable[static_cast<std::size_t>(i)] || !is_movable[static_cast<std::size_t>(j)]) continue;
    const double rest = (mesh.vertices[static_cast<std::size_t>(j)] - mesh.vertices[static_cast<std::size_t>(i)]).norm();
    if (rest == 0.0) {
      throw DegenerateGeometryError("edge (" + std::to_string(i) + ", " + std::to_string(j) + ") has zero rest length");
    }
    total += (deformed[static_cast<std::size_t>(j)] - deformed[static_cast<std::size_t>(i)]).norm() / rest;
    ++count;
  }
  if (count == 0) throw EmptyResultError("MELR is undefined: no edge joins two movable vertices");
  return total / static_cast<double>(count);
}

namespace {

std::vector<FaceError> all_face_errors(const Mesh& mesh, std::span<const Vec3> deformed) {
  check_deformed(mesh, deformed);
  if (mesh.faces.empty()) throw EmptyResultError("mean ARAP error is undefined for a mesh without faces");
  std::vector<FaceError> errors;
  errors.reserve(mesh.faces.size());
  for (const Face& f : mesh.faces) {
    Triangle rest;
    Triangle moved;
    for (int k = 0; k < 3; ++k) {
      rest[static_cast<std::size_t>(k)] = mesh.vertices[static_cast<std::size_t>(f[static_cast<std::size_t>(k)])];
      moved[static_cast<std::size_t>(k)] = deformed[static_cast<std::size_t>(f[static_cast<std::size_t>(k)])];
    }
    errors.push_back(face_arap_error(rest, moved));
  }
  return errors;
}

}  // namespace

double mean_arap_error(const Mesh& mesh, std::span<const Vec3> deformed) {
  double total = 0.0;
  const auto errors = all_face_errors(mesh, deformed);
  for (const FaceError& e : errors) total += e.error;
  return total / static_cast<double>(errors.size());
}

RigidityReport rigidity_report(const Mesh& mesh, std::span<const Vec3> deformed, std::span<const int> movable) {
  RigidityReport report;
  report.melr = melr(mesh, deformed, movable);
  const auto errors = all_face_errors(mesh, deformed);
  double total = 0.0;
  for (std::size_t f = 0; f < errors.size(); ++f) {
    report.face_errors.push_back(errors[f].error);
    if (errors[f].degenerate) report.degenerate_faces.push_back(static_cast<int>(f));
    total += errors[f].error;
  }
  report.faces = errors.size();
  report.m_arap_error = total / static_cast<double>(errors.size());
  std::vector<char> is_movable(mesh.vertices.size(), 0);
  for (int v : movable) is_movable[static_cast<std::size_t>(v)] = 1;
  for (const auto& [i, j] : unique_edges(mesh)) {
    if (is_movable[static_cast<std::size_t>(i)] && is_movable[static_cast<std::size_t>(j)]) ++report.movable_edges;
  }
  return report;
}

}  // namespace flowmesh
