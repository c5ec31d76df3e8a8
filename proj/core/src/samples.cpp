#include "flowmesh/samples.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "flowmesh/errors.hpp"

namespace flowmesh {

DepthMap dome_depth(int size, double radius_fraction) {
  if (size < 2) throw ConfigError("dome size must be >= 2");
  DepthMap d{size, size, std::vector<double>(static_cast<std::size_t>(size) * size, 0.0)};
  const double c = 0.5 * (size - 1);
  const double radius = radius_fraction * size;
  for (int r = 0; r < size; ++r) {
    for (int col = 0; col < size; ++col) {
      const double rho2 = ((r - c) * (r - c) + (col - c) * (col - c)) / (radius * radius);
      if (rho2 < 1.0) d.values[static_cast<std::size_t>(r) * size + col] = 0.7 + 0.2 * (1.0 - rho2);
    }
  }
  return d;
}

DepthMap step_depth(int width, int height, double left, double right) {
  if (width < 2 || height < 2) throw ConfigError("step map needs at least 2x2 pixels");
  DepthMap d{width, height, std::vector<double>(static_cast<std::size_t>(width) * height)};
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) d.values[static_cast<std::size_t>(r) * width + c] = c < width / 2 ? left : right;
  }
  return d;
}

BinaryMask disk_mask(int width, int height, double cx, double cy, double radius) {
  BinaryMask m(width, height, false);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if ((c - cx) * (c - cx) + (r - cy) * (r - cy) <= radius * radius) m.set(r, c);
    }
  }
  return m;
}

DomeScene dome_scene(int size, int handle, int drag_length, double mask_radius) {
  DomeScene s;
  s.depth = dome_depth(size);
  s.spec.drags.push_back({Vec2(handle, handle), Vec2(handle + drag_length, handle)});
  s.spec.mask = disk_mask(size, size, handle, handle, mask_radius);
  s.spec.validate(size, size);
  return s;
}

LatentGrid gaussian_blob(int height, int width, const Vec2& center, double sigma) {
  LatentGrid g(height, width, 1);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double d2 = (c - center.x()) * (c - center.x()) + (r - center.y()) * (r - center.y());
      g.at(r, c) = std::exp(-d2 / (2.0 * sigma * sigma));
    }
  }
  return g;
}

DragScenario gaussian_drag_scenario(int size, double sigma, double drag_length, double eta) {
  if (size < 4) throw ConfigError("drag scenario needs a grid of at least 4x4");
  const double row = std::floor(0.5 * size);
  const Vec2 handle(std::round(0.5 * size - 0.5 * drag_length), row);
  const Vec2 target(std::round(0.5 * size + 0.5 * drag_length), row);
  if (handle.x() < 0 || target.x() > size - 1) throw ConfigError("drag does not fit in the grid");
  DragScenario s;
  s.state = DragState::start(gaussian_blob(size, size, handle, sigma), {handle}, {target});
  s.state.eta = eta;
  return s;
}

DragScenario fixpoint_drag_scenario(int size, double sigma) {
  DragScenario s = gaussian_drag_scenario(size, sigma, 0.0);
  s.state.targets = s.state.handles;
  return s;
}

SampledFlow translation_flow(int width, int height, const BinaryMask& mask, const Vec2& displacement,
                             const GridOptions& grid, SamplingStrategy strategy, int count) {
  FlowField field;
  field.width = width;
  field.height = height;
  field.vectors.reserve(static_cast<std::size_t>(width) * height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) field.vectors.push_back({double(c), double(r), displacement.x(), displacement.y()});
  }
  SampledFlow sampled = sample_flow(grid_candidates(field, mask, grid), strategy, count);
  sampled.grid_n = grid.n;
  return sampled;
}

BarBendScene bar_bend_scene(int nx, int ny, int nz, double angle_deg) {
  if (!(angle_deg > 0.0)) throw ConfigError("bend angle must be positive");
  BarBendScene s;
  s.mesh = synth_bar(nx, ny, nz, 1.0);
  const double length = nx - 1;
  const double angle = angle_deg * std::numbers::pi / 180.0;
  const Vec3 pivot(0.0, 0.5 * (ny - 1) + length / angle, 0.0);
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
  for (std::size_t i = 0; i < s.mesh.vertices.size(); ++i) {
    const Vec3& v = s.mesh.vertices[i];
    const int id = static_cast<int>(i);
    if (v.x() == 0.0) {
      s.constraints.fixed.push_back(id);
      s.constraints.fixed_positions.push_back(v);
    } else if (v.x() == length) {
      s.constraints.handles.push_back(id);
      const Vec3 folded = v - Vec3(length, 0.0, 0.0);
      s.constraints.targets.push_back(pivot + rot * (folded - pivot));
    } else {
      s.constraints.movable.push_back(id);
    }
  }
  return s;
}

}  // namespace flowmesh
