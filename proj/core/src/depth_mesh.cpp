#include "flowmesh/depth_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "flowmesh/errors.hpp"

namespace flowmesh {

void DragSpec2D::validate(int width, int height) const {
  if (drags.empty()) throw ConfigError("drag spec needs at least one handle/target pair");
  auto inside = [&](const Vec2& p) {
    return p.allFinite() && p.x() >= 0 && p.y() >= 0 && p.x() <= width - 1 && p.y() <= height - 1;
  };
  for (std::size_t i = 0; i < drags.size(); ++i) {
    if (!inside(drags[i].handle) || !inside(drags[i].target)) {
      throw ConfigError("drag " + std::to_string(i) + " lies outside the " + std::to_string(width) + "x" +
                        std::to_string(height) + " image");
    }
  }
  if (mask.width != width || mask.height != height) {
    throw ConfigError("mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                      " but the image is " + std::to_string(width) + "x" + std::to_string(height));
  }
  if (mask.empty()) throw ConfigError("edit mask is empty");
}

void ConstraintSet::validate(std::size_t vertex_count) const {
  if (fixed.size() != fixed_positions.size()) throw StructuralError("fixed vertices and positions differ in length");
  if (handles.size() != targets.size()) throw StructuralError("each handle needs exactly one target");
  std::vector<int> role(vertex_count, 0);
  auto mark = [&](const std::vector<int>& ids, const char* name) {
    for (int v : ids) {
      if (v < 0 || static_cast<std::size_t>(v) >= vertex_count) {
        throw StructuralError(std::string(name) + " vertex " + std::to_string(v) + " is out of range");
      }
      if (role[static_cast<std::size_t>(v)]++ != 0) {
        throw StructuralError("vertex " + std::to_string(v) + " appears in more than one constraint role");
      }
    }
  };
  mark(movable, "movable");
  mark(fixed, "fixed");
  mark(handles, "handle");
  for (std::size_t i = 0; i < vertex_count; ++i) {
    if (role[i] == 0) throw StructuralError("vertex " + std::to_string(i) + " has no constraint role");
  }
}

double auto_background_threshold(const DepthMap& depth) { return depth.mean() + 0.3; }

int reduction_stride(double reduction_ratio) {
  if (!(reduction_ratio > 0.0 && reduction_ratio <= 1.0)) {
    throw ConfigError("reduction ratio must be in (0, 1], got " + std::to_string(reduction_ratio));
  }
  // The epsilon keeps exact squares (0.01 -> 10) from rounding up.
  return std::max(1, static_cast<int>(std::ceil(1.0 / std::sqrt(reduction_ratio) - 1e-9)));
}

Mesh depth_to_mesh(const DepthMap& depth, const DepthMeshOptions& options) {
  depth.validate();
  if (!(options.tau_d > 0.0)) throw ConfigError("tau_d must be positive");
  const int stride = reduction_stride(options.reduction_ratio);
  const double tau_b = options.tau_b.value_or(auto_background_threshold(depth));
  const double scale = options.depth_scale.value_or(0.25 * std::max(depth.width, depth.height));

  const int rows = (depth.height - 1) / stride + 1;
  const int cols = (depth.width - 1) / stride + 1;
  auto sample = [&](int r, int c) { return depth.at(r * stride, c * stride); };

  std::vector<Face> faces;
  auto keep = [&](const std::array<double, 3>& d) {
    for (double v : d) {
      if (v < tau_b) return false;
    }
    return std::abs(d[0] - d[1]) < options.tau_d && std::abs(d[1] - d[2]) < options.tau_d &&
           std::abs(d[0] - d[2]) < options.tau_d;
  };
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const int a = r * cols + c;
      const int b = a + 1;
      const int d = a + cols;
      const int e = d + 1;
      const double da = sample(r, c);
      const double db = sample(r, c + 1);
      const double dd = sample(r + 1, c);
      const double de = sample(r + 1, c + 1);
      if (keep({da, dd, db})) faces.push_back({a, d, b});
      if (keep({db, dd, de})) faces.push_back({b, d, e});
    }
  }
  if (faces.empty()) {
    std::ostringstream msg;
    msg << "depth meshing removed every face (tau_d=" << options.tau_d << ", tau_b=" << tau_b
        << ", reduction=" << options.reduction_ratio << ")";
    throw EmptyResultError(msg.str());
  }

  std::vector<int> remap(static_cast<std::size_t>(rows) * cols, -1);
  for (const Face& f : faces) {
    for (int v : f) remap[static_cast<std::size_t>(v)] = 0;
  }
  Mesh mesh;
  mesh.image_width = depth.width;
  mesh.image_height = depth.height;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      int& slot = remap[static_cast<std::size_t>(r) * cols + c];
      if (slot < 0) continue;
      slot = static_cast<int>(mesh.vertices.size());
      const int row = r * stride;
      const int col = c * stride;
      mesh.vertices.emplace_back(col, row, depth.at(row, col) * scale);
      mesh.pixels.push_back({row, col});
    }
  }
  mesh.faces.reserve(faces.size());
  for (const Face& f : faces) mesh.faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});
  return mesh;
}

LiftOptions lift_options_for(double reduction_ratio) {
  return {std::max(5.0, static_cast<double>(reduction_stride(reduction_ratio)))};
}

Vec3 unproject(const ProjectionFrame& frame, const Vec2& pixel, double z) {
  if (frame.kind == ProjectionFrame::Kind::PixelAligned) return {pixel.x(), pixel.y(), z};
  const double cx = 0.5 * (frame.width - 1);
  const double cy = 0.5 * (frame.height - 1);
  return {frame.center.x() + (pixel.x() - cx) / frame.scale, frame.center.y() - (pixel.y() - cy) / frame.scale, z};
}

ConstraintSet lift_drag_spec(const DragSpec2D& spec, const Mesh& mesh, const ProjectionFrame& frame,
                             const LiftOptions& options) {
  if (mesh.vertices.empty()) throw ConfigError("cannot lift a drag spec onto an empty mesh");
  spec.validate(frame.width, frame.height);
  const Projection2D proj = project_positions(mesh.vertices, frame);

  ConstraintSet cs;
  std::vector<char> is_handle(mesh.vertices.size(), 0);
  for (std::size_t d = 0; d < spec.drags.size(); ++d) {
    const Vec2& h = spec.drags[d].handle;
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < proj.points.size(); ++i) {
      const double dist = (proj.points[i] - h).norm();
      if (dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(i);
      }
    }
    if (best_dist > options.snap_radius) {
      std::ostringstream msg;
      msg << "handle " << d << " at (" << h.x() << ", " << h.y() << ") is " << best_dist
          << " px from the nearest vertex (snap radius " << options.snap_radius << ")";
      throw ConfigError(msg.str());
    }
    if (is_handle[static_cast<std::size_t>(best)]) {
      throw ConfigError("drag " + std::to_string(d) + " snaps to vertex " + std::to_string(best) +
                        ", which an earlier drag already uses");
    }
    is_handle[static_cast<std::size_t>(best)] = 1;
    cs.handles.push_back(best);
    cs.targets.push_back(unproject(frame, spec.drags[d].target, mesh.vertices[static_cast<std::size_t>(best)].z()));
  }
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    if (is_handle[i]) continue;
    if (spec.mask.contains(proj.points[i].x(), proj.points[i].y())) {
      cs.movable.push_back(static_cast<int>(i));
    } else {
      cs.fixed.push_back(static_cast<int>(i));
      cs.fixed_positions.push_back(mesh.vertices[i]);
    }
  }
  return cs;
}

}  // namespace flowmesh
