#pragma once

// End-to-end batch pipeline: depth -> mesh -> lift -> deform -> flow -> metrics,
// with a manifest whose hashed section is reproducible byte for byte.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowmesh/arap.hpp"
#include "flowmesh/codecs.hpp"
#include "flowmesh/depth_mesh.hpp"
#include "flowmesh/flow.hpp"

namespace flowmesh {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);

struct PipelineConfig {
  std::filesystem::path depth;
  std::filesystem::path spec;
  std::optional<std::filesystem::path> mask;  // overrides the drag spec's mask
  std::filesystem::path out_dir;
  DepthMeshOptions mesh;
  DeformParams deform;
  GridOptions grid;
  SamplingStrategy strategy = SamplingStrategy::Magnitude;
  int count = 10;
  bool write_csv = false;
  std::vector<double> sweep;  // extra reduction ratios compared against ratio 1

  /// Throws ConfigError for missing inputs or invalid parameters.
  void validate() const;
};

/// Missing keys keep the defaults of `base`; relative paths resolve against `base_dir`.
PipelineConfig pipeline_config_from_json(const Json& j, const std::filesystem::path& base_dir, PipelineConfig base = {});

/// Result of one meshing + deformation + flow pass on an in-memory input.
struct FlowRun {
  Mesh mesh;
  ProjectionFrame frame;
  ConstraintSet constraints;
  DeformationTrace trace;
  FlowField field;
  std::vector<FlowVector> candidates;
  SampledFlow sampled;
};

FlowRun run_flow_stage(const DepthMap& depth, const DragSpec2D& spec, const DepthMeshOptions& mesh_options,
                       const DeformParams& params, const GridOptions& grid, SamplingStrategy strategy, int count,
                       const StepObserver& observer = {});

struct SweepEntry {
  double ratio = 1.0;
  int stride = 1;
  std::size_t vertices = 0;
  std::size_t faces = 0;
  std::vector<std::optional<Vec2>> flow_at_anchors;  // parallel to the reference sample
  double max_deviation = 0.0;  // largest |flow - reference| over anchors, in drag lengths
  bool covered = true;         // every anchor received a value
};

struct SweepResult {
  SampledFlow reference;  // ratio 1 sample
  double drag_length = 0.0;
  std::vector<SweepEntry> entries;  // ratio 1 first
};

/// Re-runs the flow stage at each reduction ratio and reads the resulting flow
/// at the ratio-1 sample anchors (barycentric inside projected faces), comparing
/// against the same reading on the ratio-1 mesh.
SweepResult reduction_sweep(const DepthMap& depth, const DragSpec2D& spec, const DepthMeshOptions& mesh_options,
                            const DeformParams& params, const GridOptions& grid, SamplingStrategy strategy, int count,
                            std::span<const double> ratios);

Json sweep_to_json(const SweepResult& sweep);

struct PipelineResult {
  Json manifest;  // {"hashed": {...}, "hashed_sha256": "...", "timings_ms": {...}}
  FlowRun run;
  RigidityReport report;
  std::optional<SweepResult> sweep;
};

/// Runs every stage and writes mesh.obj, trace/, flow.json (flow.csv),
/// report.json, optional sweep.json and manifest.json under out_dir.
PipelineResult run_pipeline(const PipelineConfig& config, const StepObserver& observer = {});

}  // namespace flowmesh
