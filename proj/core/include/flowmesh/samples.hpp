#pragma once

// Deterministic synthetic inputs: depth maps, drag specs and latent grids used
// by the bundled samples, the tests and the benchmarks.

#include "flowmesh/arap.hpp"
#include "flowmesh/depth_mesh.hpp"
#include "flowmesh/drag.hpp"
#include "flowmesh/raster.hpp"

namespace flowmesh {

/// Smooth cap on an empty background: 0.7 + 0.2 (1 - (r/R)^2) inside radius R,
/// 0 outside. The cap covers under half the image, so the automatic background
/// threshold (mean + 0.3) stays below 0.7 and keeps the whole cap.
DepthMap dome_depth(int size, double radius_fraction = 0.38);

/// Left half `left`, right half `right`.
DepthMap step_depth(int width, int height, double left = 0.9, double right = 0.2);

/// Disk of the given radius around (cx, cy).
BinaryMask disk_mask(int width, int height, double cx, double cy, double radius);

struct DomeScene {
  DepthMap depth;
  DragSpec2D spec;
};

/// The bundled drag scene: a dome of side `size` with one horizontal drag of
/// `drag_length` pixels from (handle, handle) and a disk mask around it.
DomeScene dome_scene(int size = 257, int handle = 160, int drag_length = 30, double mask_radius = 64.0);

/// Single-channel grid holding exp(-|p - center|^2 / (2 sigma^2)).
LatentGrid gaussian_blob(int height, int width, const Vec2& center, double sigma);

struct DragScenario {
  DragState state;
  DragParams params;
};

/// A Gaussian blob on a size x size single-channel grid, dragged horizontally
/// by `drag_length` pixels through the middle row. Handle and target sit on
/// integer pixels.
DragScenario gaussian_drag_scenario(int size = 48, double sigma = 3.0, double drag_length = 12.0, double eta = 0.2);

/// Same grid with the handle already on its target.
DragScenario fixpoint_drag_scenario(int size = 48, double sigma = 3.0);

/// Flow of a rigid translation: every pixel of the image moves by
/// `displacement`, sampled on the grid over `mask`.
SampledFlow translation_flow(int width, int height, const BinaryMask& mask, const Vec2& displacement,
                             const GridOptions& grid = {}, SamplingStrategy strategy = SamplingStrategy::Uniform,
                             int count = 10);

struct BarBendScene {
  Mesh mesh;
  ConstraintSet constraints;
};

/// synth_bar(nx, ny, nz) with the x = 0 cap fixed and the far cap carried onto
/// a circular arc: the cap turns by `angle_deg` about z around the center of
/// curvature that keeps the bar's center line at its rest length.
BarBendScene bar_bend_scene(int nx = 10, int ny = 2, int nz = 2, double angle_deg = 90.0);

}  // namespace flowmesh
