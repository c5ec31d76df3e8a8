#include "flowmesh/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "flowmesh/errors.hpp"

namespace flowmesh {

void Mesh::validate() const {
  const auto n = static_cast<long long>(vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& face = faces[f];
    for (int idx : face) {
      if (idx < 0 || idx >= n) {
        throw StructuralError("face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                              " but the mesh has " + std::to_string(n) + " vertices");
      }
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
      throw StructuralError("face " + std::to_string(f) + " repeats a vertex index");
    }
  }
  if (!pixels.empty() && pixels.size() != vertices.size()) {
    throw StructuralError("pixel provenance has " + std::to_string(pixels.size()) + " entries for " +
                          std::to_string(vertices.size()) + " vertices");
  }
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (!vertices[i].allFinite()) {
      throw StructuralError("vertex " + std::to_string(i) + " has non-finite coordinates");
    }
  }
}

Adjacency::Adjacency(std::vector<std::vector<int>> neighbors) : neighbors_(std::move(neighbors)) {}

int Adjacency::slot(int i, int j) const {
  const auto& row = neighbors(i);
  auto it = std::lower_bound(row.begin(), row.end(), j);
  if (it == row.end() || *it != j) return -1;
  return static_cast<int>(it - row.begin());
}

std::size_t Adjacency::edge_count() const {
  std::size_t total = 0;
  for (const auto& row : neighbors_) total += row.size();
  return total / 2;
}

Adjacency build_adjacency(const Mesh& mesh) {
  const auto n = static_cast<long long>(mesh.vertices.size());
  std::vector<std::vector<int>> nbrs(mesh.vertices.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& face = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      const int a = face[k];
      const int b = face[(k + 1) % 3];
      if (a < 0 || a >= n || b < 0 || b >= n) {
        throw StructuralError("face " + std::to_string(f) + " has an index outside [0, " + std::to_string(n) + ")");
      }
      nbrs[a].push_back(b);
      nbrs[b].push_back(a);
    }
  }
  for (auto& row : nbrs) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return Adjacency(std::move(nbrs));
}

EdgeWeights::EdgeWeights(Adjacency adjacency, std::vector<std::vector<double>> weights)
    : adjacency_(std::move(adjacency)), weights_(std::move(weights)) {}

double EdgeWeights::at(int i, int j) const {
  const int s = adjacency_.slot(i, j);
  if (s < 0) {
    throw StructuralError("no edge (" + std::to_string(i) + ", " + std::to_string(j) + ")");
  }
  return weights_[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
}

namespace {

std::vector<std::vector<double>> zero_rows(const Adjacency& adj) {
  std::vector<std::vector<double>> rows(adj.size());
  for (std::size_t i = 0; i < adj.size(); ++i) rows[i].assign(adj.neighbors(static_cast<int>(i)).size(), 0.0);
  return rows;
}

}  // namespace

EdgeWeights cotangent_weights(const Mesh& mesh, bool clamp_negative) {
  Adjacency adj = build_adjacency(mesh);
  auto rows = zero_rows(adj);

  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& face = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      const int apex = face[k];
      const int i = face[(k + 1) % 3];
      const int j = face[(k + 2) % 3];
      const Vec3 u = mesh.vertices[i] - mesh.vertices[apex];
      const Vec3 v = mesh.vertices[j] - mesh.vertices[apex];
      const double cross = u.cross(v).norm();
      const double scale = u.norm() * v.norm();
      if (!(cross > 1e-14 * scale) || scale == 0.0) {
        throw DegenerateGeometryError("face " + std::to_string(f) + " (" + std::to_string(face[0]) + ", " +
                                      std::to_string(face[1]) + ", " + std::to_string(face[2]) +
                                      ") has zero area; cotangent weights are undefined");
      }
      const double half_cot = 0.5 * u.dot(v) / cross;
      rows[i][adj.slot(i, j)] += half_cot;
      rows[j][adj.slot(j, i)] += half_cot;
    }
  }
  if (clamp_negative) {
    for (auto& row : rows) {
      for (double& w : row) w = std::max(w, 0.0);
    }
  }
  return EdgeWeights(std::move(adj), std::move(rows));
}

EdgeWeights uniform_weights(const Mesh& mesh) {
  Adjacency adj = build_adjacency(mesh);
  auto rows = zero_rows(adj);
  for (auto& row : rows) std::fill(row.begin(), row.end(), 1.0);
  return EdgeWeights(std::move(adj), std::move(rows));
}

EdgeWeights edge_weights(const Mesh& mesh, WeightMode mode, bool clamp_negative) {
  return mode == WeightMode::Uniform ? uniform_weights(mesh) : cotangent_weights(mesh, clamp_negative);
}

Vec2 ProjectionFrame::apply(const Vec3& p) const {
  if (kind == Kind::PixelAligned) return {p.x(), p.y()};
  const double cx = 0.5 * (width - 1);
  const double cy = 0.5 * (height - 1);
  return {cx + (p.x() - center.x()) * scale, cy - (p.y() - center.y()) * scale};
}

ProjectionFrame make_projection_frame(const Mesh& mesh, std::optional<OrthoCamera> camera) {
  ProjectionFrame frame;
  if (mesh.has_pixels()) {
    frame.kind = ProjectionFrame::Kind::PixelAligned;
    frame.width = mesh.image_width;
    frame.height = mesh.image_height;
    if (frame.width <= 0 || frame.height <= 0) {
      int max_row = 0;
      int max_col = 0;
      for (const auto& px : mesh.pixels) {
        max_row = std::max(max_row, px.row);
        max_col = std::max(max_col, px.col);
      }
      frame.width = max_col + 1;
      frame.height = max_row + 1;
    }
    return frame;
  }
  if (!camera) {
    throw ConfigError("mesh has no pixel provenance and no orthographic camera was supplied");
  }
  if (camera->width < 2 || camera->height < 2) {
    throw ConfigError("orthographic camera needs an image of at least 2x2 pixels");
  }
  frame.kind = ProjectionFrame::Kind::Orthographic;
  frame.width = camera->width;
  frame.height = camera->height;
  if (mesh.vertices.empty()) return frame;

  Vec2 lo(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  for (const Vec3& p : mesh.vertices) {
    lo = lo.cwiseMin(p.head<2>());
    hi = hi.cwiseMax(p.head<2>());
  }
  frame.center = 0.5 * (lo + hi);
  const double dx = hi.x() - lo.x();
  const double dy = hi.y() - lo.y();
  double s = std::numeric_limits<double>::infinity();
  if (dx > 0) s = std::min(s, (camera->width - 1) / dx);
  if (dy > 0) s = std::min(s, (camera->height - 1) / dy);
  frame.scale = std::isfinite(s) ? s : 1.0;
  return frame;
}

Projection2D project_positions(std::span<const Vec3> positions, const ProjectionFrame& frame) {
  Projection2D out;
  out.width = frame.width;
  out.height = frame.height;
  out.points.reserve(positions.size());
  for (const Vec3& p : positions) out.points.push_back(frame.apply(p));
  return out;
}

Projection2D project_2d(const Mesh& mesh, std::optional<OrthoCamera> camera) {
  return project_positions(mesh.vertices, make_projection_frame(mesh, camera));
}

Mesh synth_grid(int width, int height, double spacing) {
  if (width <= 0 || height <= 0 || !(spacing > 0)) {
    throw ConfigError("grid dimensions and spacing must be positive");
  }
  Mesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(width) * height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) mesh.vertices.emplace_back(c * spacing, r * spacing, 0.0);
  }
  for (int r = 0; r + 1 < height; ++r) {
    for (int c = 0; c + 1 < width; ++c) {
      const int a = r * width + c;
      const int b = a + 1;
      const int d = a + width;
      const int e = d + 1;
      mesh.faces.push_back({a, d, b});
      mesh.faces.push_back({b, d, e});
    }
  }
  return mesh;
}

Mesh synth_bar(int nx, int ny, int nz, double spacing) {
  if (nx < 2 || ny < 2 || nz < 2 || !(spacing > 0)) {
    throw ConfigError("bar lattice needs at least 2 vertices per axis and positive spacing");
  }
  Mesh mesh;
  std::vector<int> index(static_cast<std::size_t>(nx) * ny * nz, -1);
  auto lattice = [&](int i, int j, int k) { return (static_cast<std::size_t>(k) * ny + j) * nx + i; };
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const bool boundary = i == 0 || i == nx - 1 || j == 0 || j == ny - 1 || k == 0 || k == nz - 1;
        if (!boundary) continue;
        index[lattice(i, j, k)] = static_cast<int>(mesh.vertices.size());
        mesh.vertices.emplace_back(i * spacing, j * spacing, k * spacing);
      }
    }
  }
  const Vec3 center = 0.5 * spacing * Vec3(nx - 1, ny - 1, nz - 1);

  auto add_quad = [&](int a, int b, int c, int d) {
    for (Face tri : {Face{a, b, c}, Face{a, c, d}}) {
      const Vec3& p0 = mesh.vertices[tri[0]];
      const Vec3 normal = (mesh.vertices[tri[1]] - p0).cross(mesh.vertices[tri[2]] - p0);
      const Vec3 centroid = (p0 + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
      if (normal.dot(centroid - center) < 0) std::swap(tri[1], tri[2]);
      mesh.faces.push_back(tri);
    }
  };

  // Two sides per axis; (u, v) walk the face lattice.
  for (int side : {0, 1}) {
    const int k = side ? nz - 1 : 0;
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        add_quad(index[lattice(i, j, k)], index[lattice(i + 1, j, k)], index[lattice(i + 1, j + 1, k)],
                 index[lattice(i, j + 1, k)]);
      }
    }
  }
  for (int side : {0, 1}) {
    const int j = side ? ny - 1 : 0;
    for (int k = 0; k + 1 < nz; ++k) {
      for (int i = 0; i + 1 < nx; ++i) {
        add_quad(index[lattice(i, j, k)], index[lattice(i + 1, j, k)], index[lattice(i + 1, j, k + 1)],
                 index[lattice(i, j, k + 1)]);
      }
    }
  }
  for (int side : {0, 1}) {
    const int i = side ? nx - 1 : 0;
    for (int k = 0; k + 1 < nz; ++k) {
      for (int j = 0; j + 1 < ny; ++j) {
        add_quad(index[lattice(i, j, k)], index[lattice(i, j + 1, k)], index[lattice(i, j + 1, k + 1)],
                 index[lattice(i, j, k + 1)]);
      }
    }
  }
  return mesh;
}

Mesh synth_single_triangle(double side) {
  if (!(side > 0)) throw ConfigError("triangle side must be positive");
  Mesh mesh;
  const double radius = side / std::sqrt(3.0);
  for (double deg : {90.0, 210.0, 330.0}) {
    const double a = deg * std::numbers::pi / 180.0;
    mesh.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
  }
  mesh.faces.push_back({0, 1, 2});
  return mesh;
}

Mesh synth_mesh(SynthKind kind, const SynthParams& params) {
  switch (kind) {
    case SynthKind::Grid:
      return synth_grid(params.dims[0], params.dims[1], params.spacing);
    case SynthKind::Bar:
      return synth_bar(params.dims[0], params.dims[1], params.dims[2], params.spacing);
    case SynthKind::SingleTriangle:
      return synth_single_triangle(params.spacing);
  }
  throw ConfigError("unknown synthetic mesh kind");
}

}  // namespace flowmesh
