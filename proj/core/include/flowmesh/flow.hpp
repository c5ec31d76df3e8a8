#pragma once

// Image-plane deformation flow and the sparse supervision subsets drawn from it.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowmesh/geometry.hpp"
#include "flowmesh/raster.hpp"

namespace flowmesh {

/// Anchor (x, y) in pixels and its displacement (dx, dy).
struct FlowVector {
  double x = 0.0;
  double y = 0.0;
  double dx = 0.0;
  double dy = 0.0;

  double magnitude() const;
  friend bool operator==(const FlowVector&, const FlowVector&) = default;
};

/// One record per vertex: the vertex's projection before the deformation and
/// its projected displacement.
struct FlowField {
  std::vector<FlowVector> vectors;
  int width = 0;
  int height = 0;

  friend bool operator==(const FlowField&, const FlowField&) = default;
};

FlowField compute_flow(const Projection2D& before, const Projection2D& after);

enum class SamplingStrategy { Magnitude, Uniform };

std::string_view to_string(SamplingStrategy strategy);
/// Accepts "magnitude" and "uniform"; anything else is a ConfigError.
SamplingStrategy parse_sampling_strategy(std::string_view text);

struct SampledFlow {
  std::vector<FlowVector> vectors;
  SamplingStrategy strategy = SamplingStrategy::Magnitude;
  int requested = 0;
  int grid_n = 0;

  friend bool operator==(const SampledFlow&, const SampledFlow&) = default;
};

struct GridOptions {
  int n = 20;
  double capture_radius = 3.0;  // pixels
};

/// Lays an n x n probe lattice over the mask's bounding box (row-major). Each
/// probe inside the mask takes the displacement of the nearest flow anchor
/// within the capture radius, lowest index on ties; the probe point itself
/// becomes the candidate's anchor. Probes outside the mask or without a nearby
/// anchor are dropped. Throws ConfigError for an empty mask or n < 1.
std::vector<FlowVector> grid_candidates(const FlowField& flow, const BinaryMask& mask, const GridOptions& options = {});

/// The k largest displacements, largest first; equal magnitudes keep their
/// candidate order.
SampledFlow sample_magnitude(const std::vector<FlowVector>& candidates, int k);
/// Every ceil(n / k)-th candidate starting with the first.
SampledFlow sample_uniform(const std::vector<FlowVector>& candidates, int k);
SampledFlow sample_flow(const std::vector<FlowVector>& candidates, SamplingStrategy strategy, int k);

/// Displacement at an arbitrary pixel, interpolated barycentrically inside the
/// projected faces of `mesh` (whose vertices parallel flow.vectors). Points
/// outside every face fall back to the nearest anchor within `fallback_radius`;
/// nullopt when there is none.
std::optional<Vec2> interpolate_flow(const Mesh& mesh, const FlowField& flow, const Vec2& point,
                                     double fallback_radius = 3.0);

}  // namespace flowmesh
