#pragma once

// JSON/CSV/binary codecs for drag specs, parameters, traces, flows, reports and
// latent grids. Every encoder has a matching decoder that reproduces its input.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowmesh/arap.hpp"
#include "flowmesh/depth_mesh.hpp"
#include "flowmesh/drag.hpp"
#include "flowmesh/flow.hpp"
#include "flowmesh/rigidity.hpp"

namespace flowmesh {

using Json = nlohmann::json;

/// Parses JSON text, rethrowing syntax errors as ConfigError.
Json parse_json(std::string_view text, std::string_view what = "JSON");
/// Two-space indented dump with a trailing newline.
std::string dump_json(const Json& j);

// Drag spec: {"drags":[{"handle":[x,y],"target":[x,y]}],"mask":"path-or-inline-RLE"}.
// Relative mask paths resolve against `base_dir`.
DragSpec2D drag_spec_from_json(const Json& j, const std::filesystem::path& base_dir = {});
DragSpec2D read_drag_spec(const std::filesystem::path& path);
/// Always writes the mask inline.
Json drag_spec_to_json(const DragSpec2D& spec);

// Deformation parameters; missing keys keep their defaults, unknown keys are errors.
DeformParams deform_params_from_json(const Json& j, DeformParams base = {});
Json deform_params_to_json(const DeformParams& params);

Json projection_frame_to_json(const ProjectionFrame& frame);
ProjectionFrame projection_frame_from_json(const Json& j);
Json constraints_to_json(const ConstraintSet& constraints);
ConstraintSet constraints_from_json(const Json& j);

// Trace directory: step_0000.obj ... step_<K>.obj plus trace.json with the
// energies, handle path, parameters, projection frame and constraints.
struct TraceBundle {
  Mesh rest;  // faces and provenance of the input mesh, positions of snapshot 0
  ProjectionFrame frame;
  ConstraintSet constraints;
  DeformationTrace trace;  // rotations are not persisted
};

std::string snapshot_name(std::size_t k);
Json trace_to_json(const DeformationTrace& trace, const ProjectionFrame& frame, const ConstraintSet& constraints);
void write_trace_dir(const std::filesystem::path& dir, const Mesh& mesh, const DeformationTrace& trace,
                     const ProjectionFrame& frame, const ConstraintSet& constraints);
TraceBundle read_trace_dir(const std::filesystem::path& dir);

// Flows. JSON: {"grid_n":N,"strategy":"magnitude","vectors":[{"x","y","dx","dy"}]};
// CSV: header x,y,dx,dy.
Json sampled_flow_to_json(const SampledFlow& flow);
SampledFlow sampled_flow_from_json(const Json& j);
Json flow_field_to_json(const FlowField& flow);
FlowField flow_field_from_json(const Json& j);
std::string flow_to_csv(const std::vector<FlowVector>& vectors);
std::vector<FlowVector> flow_from_csv(std::string_view text);

/// {"melr","m_arap_error","faces","movable_edges"}
Json rigidity_report_to_json(const RigidityReport& report);

Json drag_trace_to_json(const DragTrace& trace);

// Latent grid: 16-byte header (magic "FMLT", H, W, C as little-endian uint32)
// followed by H*W*C little-endian float32 values.
std::string encode_latent(const LatentGrid& grid);
LatentGrid decode_latent(std::string_view bytes);

}  // namespace flowmesh
