#include "flowmesh/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

#include "flowmesh/errors.hpp"
#include "flowmesh/mesh_io.hpp"
#include "flowmesh/raster.hpp"
#include "flowmesh/rigidity.hpp"

namespace flowmesh {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw IoError("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

void PipelineConfig::validate() const {
  if (depth.empty()) throw ConfigError("pipeline needs a depth map");
  if (spec.empty()) throw ConfigError("pipeline needs a drag spec");
  if (out_dir.empty()) throw ConfigError("pipeline needs an output directory");
  for (const fs::path& p : {depth, spec}) {
    if (!fs::exists(p)) throw IoError("input file not found: " + p.string());
  }
  if (mask && !fs::exists(*mask)) throw IoError("input file not found: " + mask->string());
  deform.validate();
  if (count < 1) throw ConfigError("count must be >= 1");
  if (grid.n < 1) throw ConfigError("grid must be >= 1");
  for (double r : sweep) reduction_stride(r);
}

PipelineConfig pipeline_config_from_json(const Json& j, const fs::path& base_dir, PipelineConfig c) {
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  auto path = [&](const char* key) {
    const fs::path p = j.at(key).get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  };
  try {
    if (j.contains("depth")) c.depth = path("depth");
    if (j.contains("spec")) c.spec = path("spec");
    if (j.contains("mask")) c.mask = path("mask");
    if (j.contains("out")) c.out_dir = path("out");
    if (j.contains("tau_d")) c.mesh.tau_d = j["tau_d"].get<double>();
    if (j.contains("tau_b")) {
      if (j["tau_b"].is_string()) {
        if (j["tau_b"] != "auto") throw ConfigError("tau_b must be a number or \"auto\"");
        c.mesh.tau_b.reset();
      } else {
        c.mesh.tau_b = j["tau_b"].get<double>();
      }
    }
    if (j.contains("reduction")) c.mesh.reduction_ratio = j["reduction"].get<double>();
    if (j.contains("deform")) c.deform = deform_params_from_json(j["deform"], c.deform);
    if (j.contains("grid")) c.grid.n = j["grid"].get<int>();
    if (j.contains("strategy")) c.strategy = parse_sampling_strategy(j["strategy"].get<std::string>());
    if (j.contains("count")) c.count = j["count"].get<int>();
    if (j.contains("csv")) c.write_csv = j["csv"].get<bool>();
    if (j.contains("sweep")) c.sweep = j["sweep"].get<std::vector<double>>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  return c;
}

FlowRun run_flow_stage(const DepthMap& depth, const DragSpec2D& spec, const DepthMeshOptions& mesh_options,
                       const DeformParams& params, const GridOptions& grid, SamplingStrategy strategy, int count,
                       const StepObserver& observer) {
  FlowRun run;
  run.mesh = depth_to_mesh(depth, mesh_options);
  run.frame = make_projection_frame(run.mesh);
  run.constraints = lift_drag_spec(spec, run.mesh, run.frame, lift_options_for(mesh_options.reduction_ratio));
  run.trace = deform_progressive(run.mesh, run.constraints, params, observer);
  run.field = compute_flow(project_positions(run.trace.snapshots.front(), run.frame),
                           project_positions(run.trace.final_positions(), run.frame));
  run.candidates = grid_candidates(run.field, spec.mask, grid);
  run.sampled = sample_flow(run.candidates, strategy, count);
  run.sampled.grid_n = grid.n;
  return run;
}

SweepResult reduction_sweep(const DepthMap& depth, const DragSpec2D& spec, const DepthMeshOptions& mesh_options,
                            const DeformParams& params, const GridOptions& grid, SamplingStrategy strategy, int count,
                            std::span<const double> ratios) {
  std::vector<double> all{1.0};
  for (double r : ratios) {
    if (r != 1.0) all.push_back(r);
  }
  SweepResult result;
  for (const DragPair& d : spec.drags) result.drag_length += (d.target - d.handle).norm();
  result.drag_length /= static_cast<double>(spec.drags.size());
  if (!(result.drag_length > 0.0)) throw ConfigError("reduction sweep needs a nonzero drag");

  // Reference values are read off the ratio-1 mesh the same way as every
  // other ratio, so ratio 1 compares equal to itself.
  std::vector<Vec2> reference;
  for (double ratio : all) {
    DepthMeshOptions opts = mesh_options;
    opts.reduction_ratio = ratio;
    const FlowRun run = run_flow_stage(depth, spec, opts, params, grid, strategy, count);
    if (ratio == 1.0) {
      result.reference = run.sampled;
      for (const FlowVector& anchor : run.sampled.vectors) {
        reference.push_back(interpolate_flow(run.mesh, run.field, Vec2(anchor.x, anchor.y))
                                .value_or(Vec2(anchor.dx, anchor.dy)));
      }
    }
    SweepEntry e;
    e.ratio = ratio;
    e.stride = reduction_stride(ratio);
    e.vertices = run.mesh.vertices.size();
    e.faces = run.mesh.faces.size();
    for (std::size_t a = 0; a < reference.size(); ++a) {
      const FlowVector& anchor = result.reference.vectors[a];
      const auto f = interpolate_flow(run.mesh, run.field, Vec2(anchor.x, anchor.y));
      e.flow_at_anchors.push_back(f);
      if (!f) {
        e.covered = false;
        continue;
      }
      const double dev = (*f - reference[a]).norm() / result.drag_length;
      e.max_deviation = std::max(e.max_deviation, dev);
    }
    result.entries.push_back(std::move(e));
  }
  return result;
}

Json sweep_to_json(const SweepResult& s) {
  Json entries = Json::array();
  for (const SweepEntry& e : s.entries) {
    Json flows = Json::array();
    for (const auto& f : e.flow_at_anchors) flows.push_back(f ? Json::array({f->x(), f->y()}) : Json(nullptr));
    entries.push_back({{"ratio", e.ratio},
                       {"stride", e.stride},
                       {"vertices", e.vertices},
                       {"faces", e.faces},
                       {"covered", e.covered},
                       {"max_deviation", e.max_deviation},
                       {"flow_at_anchors", flows}});
  }
  return {{"drag_length", s.drag_length}, {"reference", sampled_flow_to_json(s.reference)}, {"entries", entries}};
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, const StepObserver& observer) {
  config.validate();
  PipelineResult result;
  Json timings = Json::object();
  Json artifacts = Json::object();
  const fs::path& out = config.out_dir;

  auto t0 = Clock::now();
  const std::string depth_bytes = read_file_bytes(config.depth);
  const DepthMap depth = decode_depth(depth_bytes);
  const std::string spec_bytes = read_file_bytes(config.spec);
  DragSpec2D spec = drag_spec_from_json(parse_json(spec_bytes, config.spec.string()), config.spec.parent_path());
  std::string mask_hash;
  if (config.mask) {
    const std::string mask_bytes = read_file_bytes(*config.mask);
    spec.mask = decode_mask(mask_bytes);
    mask_hash = sha256_hex(mask_bytes);
  }
  timings["load"] = ms_since(t0);

  FlowRun& run = result.run;
  t0 = Clock::now();
  run.mesh = depth_to_mesh(depth, config.mesh);
  timings["mesh"] = ms_since(t0);
  const std::string mesh_obj = encode_obj(run.mesh);
  write_file_bytes(out / "mesh.obj", mesh_obj);
  artifacts["mesh.obj"] = sha256_hex(mesh_obj);

  t0 = Clock::now();
  run.frame = make_projection_frame(run.mesh);
  run.constraints = lift_drag_spec(spec, run.mesh, run.frame, lift_options_for(config.mesh.reduction_ratio));
  timings["lift"] = ms_since(t0);

  t0 = Clock::now();
  run.trace = deform_progressive(run.mesh, run.constraints, config.deform, observer);
  timings["deform"] = ms_since(t0);
  write_trace_dir(out / "trace", run.mesh, run.trace, run.frame, run.constraints);
  for (std::size_t k = 0; k < run.trace.snapshots.size(); ++k) {
    const std::string name = snapshot_name(k);
    artifacts["trace/" + name] = sha256_hex(read_file_bytes(out / "trace" / name));
  }
  artifacts["trace/trace.json"] = sha256_hex(read_file_bytes(out / "trace" / "trace.json"));

  t0 = Clock::now();
  run.field = compute_flow(project_positions(run.trace.snapshots.front(), run.frame),
                           project_positions(run.trace.final_positions(), run.frame));
  run.candidates = grid_candidates(run.field, spec.mask, config.grid);
  run.sampled = sample_flow(run.candidates, config.strategy, config.count);
  run.sampled.grid_n = config.grid.n;
  timings["flow"] = ms_since(t0);
  const std::string flow_json = dump_json(sampled_flow_to_json(run.sampled));
  write_file_bytes(out / "flow.json", flow_json);
  artifacts["flow.json"] = sha256_hex(flow_json);
  if (config.write_csv) {
    const std::string csv = flow_to_csv(run.sampled.vectors);
    write_file_bytes(out / "flow.csv", csv);
    artifacts["flow.csv"] = sha256_hex(csv);
  }

  t0 = Clock::now();
  result.report = rigidity_report(run.mesh, run.trace.final_positions(), run.constraints.movable);
  timings["metrics"] = ms_since(t0);
  const std::string report_json = dump_json(rigidity_report_to_json(result.report));
  write_file_bytes(out / "report.json", report_json);
  artifacts["report.json"] = sha256_hex(report_json);

  if (!config.sweep.empty()) {
    t0 = Clock::now();
    result.sweep = reduction_sweep(depth, spec, config.mesh, config.deform, config.grid, config.strategy, config.count,
                                   config.sweep);
    timings["sweep"] = ms_since(t0);
    const std::string sweep_json = dump_json(sweep_to_json(*result.sweep));
    write_file_bytes(out / "sweep.json", sweep_json);
    artifacts["sweep.json"] = sha256_hex(sweep_json);
  }

  Json inputs = {{"depth", sha256_hex(depth_bytes)}, {"spec", sha256_hex(spec_bytes)}};
  if (!mask_hash.empty()) inputs["mask"] = mask_hash;
  Json hashed = {
      {"inputs", inputs},
      {"config",
       {{"tau_d", config.mesh.tau_d},
        {"tau_b", config.mesh.tau_b ? Json(*config.mesh.tau_b) : Json("auto")},
        {"tau_b_value", config.mesh.tau_b.value_or(auto_background_threshold(depth))},
        {"reduction", config.mesh.reduction_ratio},
        {"deform", deform_params_to_json(config.deform)},
        {"grid", config.grid.n},
        {"strategy", std::string(to_string(config.strategy))},
        {"count", config.count},
        {"sweep", config.sweep}}},
      {"summary",
       {{"vertices", run.mesh.vertices.size()},
        {"faces", run.mesh.faces.size()},
        {"movable", run.constraints.movable.size()},
        {"converged", run.trace.converged},
        {"final_energy", run.trace.steps.back().total_energy},
        {"melr", result.report.melr},
        {"m_arap_error", result.report.m_arap_error},
        {"candidates", run.candidates.size()},
        {"sampled", run.sampled.vectors.size()}}},
      {"artifacts", artifacts}};
  result.manifest = {{"hashed", hashed}, {"hashed_sha256", sha256_hex(hashed.dump())}, {"timings_ms", timings}};
  write_file_bytes(out / "manifest.json", dump_json(result.manifest));
  return result;
}

}  // namespace flowmesh
