#include "commands.hpp"

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "flowmesh/arap.hpp"
#include "flowmesh/codecs.hpp"
#include "flowmesh/depth_mesh.hpp"
#include "flowmesh/drag.hpp"
#include "flowmesh/errors.hpp"
#include "flowmesh/flow.hpp"
#include "flowmesh/mesh_io.hpp"
#include "flowmesh/pipeline.hpp"
#include "flowmesh/raster.hpp"
#include "flowmesh/rigidity.hpp"
#include "flowmesh/samples.hpp"
#include "flowmesh/service.hpp"

namespace fs = std::filesystem;

namespace flowmesh::cli {
namespace {

std::optional<double> parse_tau_b(const std::string& text) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("--tau-b must be a number or \"auto\", got \"" + text + "\"");
}

Vec2 parse_point(const std::string& text, const char* flag) {
  double x = 0.0;
  double y = 0.0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf,%lf%c", &x, &y, &tail) != 2) {
    throw ConfigError(std::string(flag) + " expects x,y, got \"" + text + "\"");
  }
  return {x, y};
}

OrthoCamera parse_camera(const std::string& text) {
  OrthoCamera cam;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%dx%d%c", &cam.width, &cam.height, &tail) != 2 || cam.width < 1 || cam.height < 1) {
    throw ConfigError("--camera expects WxH, got \"" + text + "\"");
  }
  return cam;
}

/// A mask argument is either inline RLE text or an image path.
BinaryMask load_mask(const std::string& arg) {
  if (is_inline_rle(arg)) return decode_mask_rle(arg);
  return read_mask(arg);
}

void write_output(const std::string& out, const std::string& bytes) {
  if (out == "-") {
    std::fwrite(bytes.data(), 1, bytes.size(), stdout);
  } else {
    write_file_bytes(out, bytes);
  }
}

// ---------------------------------------------------------------- depth2mesh

struct Depth2MeshArgs {
  std::string depth;
  double tau_d = 0.1;
  std::string tau_b = "auto";
  double reduction = 1.0;
  std::optional<double> depth_scale;
  std::string out;
};

void run_depth2mesh(const Depth2MeshArgs& a) {
  const DepthMap depth = read_depth(a.depth);
  DepthMeshOptions opts;
  opts.tau_d = a.tau_d;
  opts.tau_b = parse_tau_b(a.tau_b);
  opts.reduction_ratio = a.reduction;
  opts.depth_scale = a.depth_scale;
  const double tau_b = opts.tau_b.value_or(auto_background_threshold(depth));
  std::printf("tau_d=%g tau_b=%g%s\n", opts.tau_d, tau_b, opts.tau_b ? "" : " (auto: mean+0.3)");
  std::printf("reduction=%g stride=%d\n", opts.reduction_ratio, reduction_stride(opts.reduction_ratio));
  const Mesh mesh = depth_to_mesh(depth, opts);
  write_mesh(a.out, mesh);
  std::printf("vertices=%zu faces=%zu\n", mesh.vertex_count(), mesh.face_count());
}

// -------------------------------------------------------------------- deform

struct DeformArgs {
  std::string mesh;
  std::string spec;
  std::string params;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> lambda;
  std::optional<int> steps;
  std::optional<int> max_iters;
  std::optional<double> rel_tol;
  std::string weights;
  std::string camera;
  double snap_radius = 5.0;
  std::string out;
};

void run_deform(const DeformArgs& a) {
  const Mesh mesh = read_mesh(a.mesh);
  const DragSpec2D spec = read_drag_spec(a.spec);
  DeformParams params;
  if (!a.params.empty()) params = deform_params_from_json(parse_json(read_file_bytes(a.params), a.params));
  if (a.alpha) params.alpha = *a.alpha;
  if (a.beta) params.beta = *a.beta;
  if (a.lambda) params.lambda = *a.lambda;
  if (a.steps) params.steps = *a.steps;
  if (a.max_iters) params.max_lg_iters = *a.max_iters;
  if (a.rel_tol) params.rel_tol = *a.rel_tol;
  if (!a.weights.empty()) {
    if (a.weights == "cotangent") {
      params.weight_mode = WeightMode::Cotangent;
    } else if (a.weights == "uniform") {
      params.weight_mode = WeightMode::Uniform;
    } else {
      throw ConfigError("--weights must be cotangent or uniform");
    }
  }
  params.validate();

  std::optional<OrthoCamera> camera;
  if (!a.camera.empty()) camera = parse_camera(a.camera);
  const ProjectionFrame frame = make_projection_frame(mesh, camera);
  const ConstraintSet constraints = lift_drag_spec(spec, mesh, frame, LiftOptions{a.snap_radius});
  spdlog::info("{} movable, {} fixed, {} handles", constraints.movable.size(), constraints.fixed.size(),
               constraints.handles.size());

  const DeformationTrace trace = deform_progressive(mesh, constraints, params, [](const StepProgress& p) {
    spdlog::info("step {}/{} energy {:.6g}", p.step, p.total, p.energy);
  });
  write_trace_dir(a.out, mesh, trace, frame, constraints);

  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const StepRecord& s = trace.steps[k];
    std::printf("step %zu/%zu energy=%.9g arap=%.9g iterations=%d%s\n", k + 1, trace.steps.size(), s.total_energy,
                s.arap_energy, s.iterations, s.converged ? "" : " (not converged)");
  }
  if (!trace.converged) spdlog::warn("some steps stopped at max_lg_iters={}", params.max_lg_iters);
  try {
    const RigidityReport r = rigidity_report(mesh, trace.final_positions(), constraints.movable);
    std::printf("melr=%.6f m_arap_error=%.6g\n", r.melr, r.m_arap_error);
  } catch (const EmptyResultError&) {
    std::printf("melr=n/a m_arap_error=%.6g\n", mean_arap_error(mesh, trace.final_positions()));
  }
}

// ---------------------------------------------------------------------- flow

struct FlowArgs {
  std::string trace;
  std::string mask;
  int grid = 20;
  double capture_radius = 3.0;
  std::string strategy = "magnitude";
  int count = 10;
  std::string format;
  bool field = false;
  std::string out;
};

void run_flow(const FlowArgs& a) {
  const TraceBundle bundle = read_trace_dir(a.trace);
  const FlowField field = compute_flow(project_positions(bundle.trace.snapshots.front(), bundle.frame),
                                       project_positions(bundle.trace.final_positions(), bundle.frame));
  std::string format = a.format;
  if (format.empty()) format = fs::path(a.out).extension() == ".csv" ? "csv" : "json";
  if (format != "json" && format != "csv") throw ConfigError("--format must be json or csv");

  std::vector<FlowVector> vectors;
  Json json;
  if (a.field) {
    vectors = field.vectors;
    json = flow_field_to_json(field);
  } else {
    if (a.count < 1) throw ConfigError("--count must be >= 1");
    const BinaryMask mask = load_mask(a.mask);
    if (mask.width != bundle.frame.width || mask.height != bundle.frame.height) {
      throw ConfigError("mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                        " but the trace projects onto " + std::to_string(bundle.frame.width) + "x" +
                        std::to_string(bundle.frame.height));
    }
    const auto candidates = grid_candidates(field, mask, GridOptions{a.grid, a.capture_radius});
    SampledFlow sampled = sample_flow(candidates, parse_sampling_strategy(a.strategy), a.count);
    sampled.grid_n = a.grid;
    spdlog::info("{} candidates, {} sampled", candidates.size(), sampled.vectors.size());
    vectors = sampled.vectors;
    json = sampled_flow_to_json(sampled);
  }
  write_output(a.out, format == "csv" ? flow_to_csv(vectors) : dump_json(json));
  if (a.out != "-") std::printf("vectors=%zu\n", vectors.size());
}

// ------------------------------------------------------------------- dragsim

struct DragsimArgs {
  std::string scenario = "gaussian";
  int size = 48;
  double sigma = 3.0;
  double drag = 12.0;
  std::string latent;
  std::vector<std::string> handles;
  std::vector<std::string> targets;
  std::string mask;
  std::string feature = "identity";
  int alternations = 80;
  int iters = 1;
  std::optional<double> eta;
  double lambda_reg = 0.1;
  int r_sup = 1;
  int r_track = 3;
  double stop_distance = 0.5;
  std::string flow;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string save_latent;
};

void run_dragsim(const DragsimArgs& a) {
  DragState state;
  if (!a.latent.empty()) {
    if (a.handles.empty() || a.handles.size() != a.targets.size()) {
      throw ConfigError("--latent needs matching --handle and --target points");
    }
    std::vector<Vec2> handles;
    std::vector<Vec2> targets;
    for (const auto& h : a.handles) handles.push_back(parse_point(h, "--handle"));
    for (const auto& t : a.targets) targets.push_back(parse_point(t, "--target"));
    std::optional<BinaryMask> mask;
    if (!a.mask.empty()) mask = load_mask(a.mask);
    state = DragState::start(decode_latent(read_file_bytes(a.latent)), handles, targets, mask);
    state.eta = a.eta.value_or(0.01);
  } else if (a.scenario == "gaussian") {
    state = gaussian_drag_scenario(a.size, a.sigma, a.drag, a.eta.value_or(0.2)).state;
  } else if (a.scenario == "fixpoint") {
    state = fixpoint_drag_scenario(a.size, a.sigma).state;
    if (a.eta) state.eta = *a.eta;
  } else {
    throw ConfigError("--scenario must be gaussian or fixpoint");
  }
  if (a.noise > 0.0) {
    std::mt19937_64 rng(a.seed);
    std::normal_distribution<double> normal(0.0, a.noise);
    for (double& v : state.latent.data) v += normal(rng);
    state.reference = state.latent;
  }
  state.lambda_reg = a.lambda_reg;
  state.r_sup = a.r_sup;
  state.r_track = a.r_track;
  state.validate();

  DragParams params;
  params.alternations = a.alternations;
  params.ms_iters_per_alt = a.iters;
  params.stop_distance = a.stop_distance;
  if (!a.flow.empty()) params.use_flow = sampled_flow_from_json(parse_json(read_file_bytes(a.flow), a.flow));
  const auto feature = make_feature(a.feature);
  const DragTrace trace = run_drag(state, *feature, params);

  if (!a.out.empty()) write_output(a.out, dump_json(drag_trace_to_json(trace)));
  if (!a.save_latent.empty()) write_file_bytes(a.save_latent, encode_latent(trace.final_state.latent));
  if (trace.clipped) spdlog::warn("supervision samples were clamped at the grid border");
  if (a.out != "-") {
    std::printf("md=%.6f alternations=%d reached=%s\n", trace.mean_distance, trace.alternations,
                trace.reached ? "true" : "false");
  }
}

// ------------------------------------------------------------------ pipeline

struct PipelineArgs {
  std::string config;
  std::string depth;
  std::string spec;
  std::string mask;
  std::string out;
  std::optional<double> tau_d;
  std::string tau_b;
  std::optional<double> reduction;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> lambda;
  std::optional<int> steps;
  std::optional<int> grid;
  std::string strategy;
  std::optional<int> count;
  bool csv = false;
  std::vector<double> sweep;
};

void run_pipeline_cmd(const PipelineArgs& a) {
  PipelineConfig cfg;
  if (!a.config.empty()) {
    const fs::path path(a.config);
    cfg = pipeline_config_from_json(parse_json(read_file_bytes(path), a.config), path.parent_path());
  }
  if (!a.depth.empty()) cfg.depth = a.depth;
  if (!a.spec.empty()) cfg.spec = a.spec;
  if (!a.mask.empty()) cfg.mask = fs::path(a.mask);
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (a.tau_d) cfg.mesh.tau_d = *a.tau_d;
  if (!a.tau_b.empty()) cfg.mesh.tau_b = parse_tau_b(a.tau_b);
  if (a.reduction) cfg.mesh.reduction_ratio = *a.reduction;
  if (a.alpha) cfg.deform.alpha = *a.alpha;
  if (a.beta) cfg.deform.beta = *a.beta;
  if (a.lambda) cfg.deform.lambda = *a.lambda;
  if (a.steps) cfg.deform.steps = *a.steps;
  if (a.grid) cfg.grid.n = *a.grid;
  if (!a.strategy.empty()) cfg.strategy = parse_sampling_strategy(a.strategy);
  if (a.count) cfg.count = *a.count;
  if (a.csv) cfg.write_csv = true;
  if (!a.sweep.empty()) cfg.sweep = a.sweep;

  const PipelineResult r = run_pipeline(cfg, [](const StepProgress& p) {
    spdlog::info("deform step {}/{} energy {:.6g}", p.step, p.total, p.energy);
  });
  const Json& summary = r.manifest["hashed"]["summary"];
  std::printf("vertices=%zu faces=%zu steps=%zu\n", r.run.mesh.vertex_count(), r.run.mesh.face_count(),
              r.run.trace.step_count());
  std::printf("melr=%.6f m_arap_error=%.6g sampled=%zu\n", r.report.melr, r.report.m_arap_error,
              r.run.sampled.vectors.size());
  if (r.sweep) {
    for (const SweepEntry& e : r.sweep->entries) {
      std::printf("sweep ratio=%g vertices=%zu max_deviation=%.4f%s\n", e.ratio, e.vertices, e.max_deviation,
                  e.covered ? "" : " (uncovered anchors)");
    }
  }
  if (!summary.value("converged", true)) spdlog::warn("some deformation steps stopped at max_lg_iters");
  for (const auto& [stage, ms] : r.manifest["timings_ms"].items()) spdlog::info("{}: {:.1f} ms", stage, ms.get<double>());
  std::printf("manifest=%s sha256=%s\n", (cfg.out_dir / "manifest.json").string().c_str(),
              r.manifest["hashed_sha256"].get<std::string>().c_str());
}

// --------------------------------------------------------------------- serve

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8787;
  std::string state_dir;
  std::string cors_origin = "*";
};

std::atomic<Service*> g_service{nullptr};

void on_signal(int) {
  if (Service* s = g_service.load()) s->stop();
}

void run_serve(const ServeArgs& a) {
  ServiceOptions opts;
  if (!a.state_dir.empty()) opts.state_dir = fs::path(a.state_dir);
  opts.cors_origin = a.cors_origin;
  Service service(opts);
  const int port = service.bind(a.host, a.port);
  if (port < 0) throw IoError("cannot bind " + a.host + ":" + std::to_string(a.port));
  g_service.store(&service);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::printf("listening on http://%s:%d\n", a.host.c_str(), port);
  std::fflush(stdout);
  service.serve();
  g_service.store(nullptr);
  service.join_jobs();
}

// --------------------------------------------------------------------- synth

struct SynthDomeArgs {
  int size = 129;
  int handle = 80;
  int drag = 15;
  double mask_radius = 32.0;
  std::string out;
};

void run_synth_dome(const SynthDomeArgs& a) {
  const DomeScene scene = dome_scene(a.size, a.handle, a.drag, a.mask_radius);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_file_bytes(dir / "depth.png", encode_depth_png(scene.depth));
  write_file_bytes(dir / "mask.png", encode_mask_png(scene.spec.mask));
  Json spec = drag_spec_to_json(scene.spec);
  spec["mask"] = "mask.png";
  write_file_bytes(dir / "spec.json", dump_json(spec));
  const Json config = {{"depth", "depth.png"}, {"spec", "spec.json"}, {"out", "out"}};
  write_file_bytes(dir / "pipeline.json", dump_json(config));
  std::printf("wrote depth.png mask.png spec.json pipeline.json to %s\n", dir.string().c_str());
}

struct SynthMeshArgs {
  std::string kind = "grid";
  std::vector<int> dims{20, 20};
  double spacing = 1.0;
  std::string out;
};

void run_synth_mesh(const SynthMeshArgs& a) {
  SynthParams p;
  p.spacing = a.spacing;
  for (std::size_t i = 0; i < a.dims.size() && i < 3; ++i) p.dims[i] = a.dims[i];
  SynthKind kind = SynthKind::Grid;
  if (a.kind == "bar") {
    kind = SynthKind::Bar;
  } else if (a.kind == "triangle") {
    kind = SynthKind::SingleTriangle;
  } else if (a.kind != "grid") {
    throw ConfigError("--kind must be grid, bar or triangle");
  }
  const Mesh mesh = synth_mesh(kind, p);
  write_mesh(a.out, mesh);
  std::printf("vertices=%zu faces=%zu\n", mesh.vertex_count(), mesh.face_count());
}

struct SynthLatentArgs {
  int size = 48;
  double sigma = 3.0;
  std::string center;
  std::string out;
};

void run_synth_latent(const SynthLatentArgs& a) {
  const Vec2 c = a.center.empty() ? Vec2(0.5 * a.size, 0.5 * a.size) : parse_point(a.center, "--center");
  write_file_bytes(a.out, encode_latent(gaussian_blob(a.size, a.size, c, a.sigma)));
}

}  // namespace

void add_depth2mesh(CLI::App& app) {
  auto a = std::make_shared<Depth2MeshArgs>();
  auto* cmd = app.add_subcommand("depth2mesh", "Build a triangle mesh from a depth map (PNG16 or PGM)");
  cmd->add_option("--depth", a->depth, "Depth map file")->required();
  cmd->add_option("--tau-d", a->tau_d, "Depth-discontinuity threshold")->capture_default_str();
  cmd->add_option("--tau-b", a->tau_b, "Background threshold: a value or auto (mean depth + 0.3)")
      ->capture_default_str();
  cmd->add_option("--reduction", a->reduction, "Fraction of pixels kept, in (0, 1]")->capture_default_str();
  cmd->add_option("--depth-scale", a->depth_scale, "z scale applied to depth (default max(W, H) / 4)");
  cmd->add_option("-o,--out", a->out, "Output mesh (.obj or .ply)")->required();
  cmd->callback([a] { run_depth2mesh(*a); });
}

void add_deform(CLI::App& app) {
  auto a = std::make_shared<DeformArgs>();
  auto* cmd = app.add_subcommand("deform", "Progressive SR-ARAP deformation of a mesh under a drag spec");
  cmd->add_option("--mesh", a->mesh, "Input mesh (.obj or .ply)")->required();
  cmd->add_option("--spec", a->spec, "Drag spec JSON")->required();
  cmd->add_option("--params", a->params, "DeformParams JSON; flags below override it");
  cmd->add_option("--alpha", a->alpha, "Rotation-smoothness weight (default 0.3)");
  cmd->add_option("--beta", a->beta, "Inter-step displacement weight (default 0.8)");
  cmd->add_option("--lambda", a->lambda, "Progressive fraction in (0, 1] (default 0.5)");
  cmd->add_option("--steps", a->steps, "Number of progressive steps K (default 10)");
  cmd->add_option("--max-iters", a->max_iters, "Local-global passes per step (default 50)");
  cmd->add_option("--rel-tol", a->rel_tol, "Relative energy change that ends a step (default 1e-6)");
  cmd->add_option("--weights", a->weights, "Edge weights: cotangent or uniform (default cotangent)");
  cmd->add_option("--camera", a->camera, "Image size WxH for meshes without pixel provenance");
  cmd->add_option("--snap-radius", a->snap_radius, "Largest handle-to-vertex distance in pixels")
      ->capture_default_str();
  cmd->add_option("-o,--out", a->out, "Output trace directory")->required();
  cmd->callback([a] { run_deform(*a); });
}

void add_flow(CLI::App& app) {
  auto a = std::make_shared<FlowArgs>();
  auto* cmd = app.add_subcommand("flow", "Project a deformation trace to a 2D flow and sample it");
  cmd->add_option("--trace", a->trace, "Trace directory written by deform")->required();
  cmd->add_option("--mask", a->mask, "Edit mask: image file or inline rle:WxH:runs");
  cmd->add_option("--grid", a->grid, "Probe lattice size N (N x N)")->capture_default_str();
  cmd->add_option("--capture-radius", a->capture_radius, "Probe-to-anchor capture radius in pixels")
      ->capture_default_str();
  cmd->add_option("--strategy", a->strategy, "Sampling strategy: magnitude or uniform")->capture_default_str();
  cmd->add_option("--count", a->count, "Number of sampled vectors")->capture_default_str();
  cmd->add_option("--format", a->format, "json or csv (default: from the output extension)");
  cmd->add_flag("--field", a->field, "Write the full per-vertex flow field instead of a sample");
  cmd->add_option("-o,--out", a->out, "Output file, or - for stdout")->required();
  cmd->callback([a] {
    if (!a->field && a->mask.empty()) throw ConfigError("flow sampling needs --mask");
    run_flow(*a);
  });
}

void add_dragsim(CLI::App& app) {
  auto a = std::make_shared<DragsimArgs>();
  auto* cmd = app.add_subcommand("dragsim", "Run the drag loop on a synthetic or loaded latent grid");
  cmd->add_option("--scenario", a->scenario, "Generated scenario: gaussian or fixpoint")->capture_default_str();
  cmd->add_option("--size", a->size, "Grid side of the generated scenario")->capture_default_str();
  cmd->add_option("--sigma", a->sigma, "Blob width of the generated scenario")->capture_default_str();
  cmd->add_option("--drag", a->drag, "Drag length of the gaussian scenario in pixels")->capture_default_str();
  cmd->add_option("--latent", a->latent, "Latent grid file (FMLT); replaces the scenario");
  cmd->add_option("--handle", a->handles, "Handle x,y for --latent (repeatable)");
  cmd->add_option("--target", a->targets, "Target x,y for --latent (repeatable)");
  cmd->add_option("--mask", a->mask, "Edit mask for --latent: image file or inline RLE");
  cmd->add_option("--feature", a->feature, "Feature map: identity or gaussian")->capture_default_str();
  cmd->add_option("--alternations", a->alternations, "Supervision/tracking alternations")->capture_default_str();
  cmd->add_option("--iters", a->iters, "Latent updates per alternation")->capture_default_str();
  cmd->add_option("--eta", a->eta, "Learning rate (default 0.2 for the scenarios, 0.01 for --latent)");
  cmd->add_option("--lambda-reg", a->lambda_reg, "Mask regularization weight")->capture_default_str();
  cmd->add_option("--r-sup", a->r_sup, "Supervision patch radius")->capture_default_str();
  cmd->add_option("--r-track", a->r_track, "Tracking window radius")->capture_default_str();
  cmd->add_option("--stop-distance", a->stop_distance, "Early-stop distance in pixels")->capture_default_str();
  cmd->add_option("--flow", a->flow, "Sampled flow JSON that restricts supervision");
  cmd->add_option("--noise", a->noise, "Std-dev of Gaussian noise added to the latent")->capture_default_str();
  cmd->add_option("--seed", a->seed, "Seed for --noise")->capture_default_str();
  cmd->add_option("-o,--out", a->out, "Drag-trace JSON output, or - for stdout");
  cmd->add_option("--save-latent", a->save_latent, "Write the final latent grid (FMLT)");
  cmd->callback([a] { run_dragsim(*a); });
}

void add_pipeline(CLI::App& app) {
  auto a = std::make_shared<PipelineArgs>();
  auto* cmd = app.add_subcommand("pipeline", "depth -> mesh -> deform -> flow -> metrics with a manifest");
  cmd->add_option("--config", a->config, "Pipeline config JSON; flags below override it");
  cmd->add_option("--depth", a->depth, "Depth map file");
  cmd->add_option("--spec", a->spec, "Drag spec JSON");
  cmd->add_option("--mask", a->mask, "Mask image overriding the drag spec's mask");
  cmd->add_option("-o,--out", a->out, "Output directory");
  cmd->add_option("--tau-d", a->tau_d, "Depth-discontinuity threshold (default 0.1)");
  cmd->add_option("--tau-b", a->tau_b, "Background threshold: a value or auto");
  cmd->add_option("--reduction", a->reduction, "Mesh reduction ratio (default 1.0)");
  cmd->add_option("--alpha", a->alpha, "Rotation-smoothness weight (default 0.3)");
  cmd->add_option("--beta", a->beta, "Inter-step displacement weight (default 0.8)");
  cmd->add_option("--lambda", a->lambda, "Progressive fraction (default 0.5)");
  cmd->add_option("--steps", a->steps, "Progressive steps K (default 10)");
  cmd->add_option("--grid", a->grid, "Probe lattice size N (default 20)");
  cmd->add_option("--strategy", a->strategy, "magnitude or uniform (default magnitude)");
  cmd->add_option("--count", a->count, "Sampled vectors (default 10)");
  cmd->add_flag("--csv", a->csv, "Also write flow.csv");
  cmd->add_option("--sweep", a->sweep, "Reduction ratios compared against ratio 1")->delimiter(',');
  cmd->callback([a] { run_pipeline_cmd(*a); });
}

void add_serve(CLI::App& app) {
  auto a = std::make_shared<ServeArgs>();
  auto* cmd = app.add_subcommand("serve", "Run the REST service");
  cmd->add_option("--host", a->host, "Listen address")->capture_default_str();
  cmd->add_option("--port", a->port, "Listen port (0 picks a free one)")->capture_default_str();
  cmd->add_option("--state-dir", a->state_dir, "Persist sessions under this directory");
  cmd->add_option("--cors-origin", a->cors_origin, "Access-Control-Allow-Origin value")->capture_default_str();
  cmd->callback([a] { run_serve(*a); });
}

void add_synth(CLI::App& app) {
  auto* cmd = app.add_subcommand("synth", "Write synthetic inputs");
  cmd->require_subcommand(1);

  auto dome = std::make_shared<SynthDomeArgs>();
  auto* d = cmd->add_subcommand("dome", "Dome depth map, mask, drag spec and pipeline config");
  d->add_option("--size", dome->size, "Image side in pixels")->capture_default_str();
  d->add_option("--handle", dome->handle, "Handle pixel (x = y)")->capture_default_str();
  d->add_option("--drag", dome->drag, "Horizontal drag length in pixels")->capture_default_str();
  d->add_option("--mask-radius", dome->mask_radius, "Edit-mask disk radius")->capture_default_str();
  d->add_option("-o,--out", dome->out, "Output directory")->required();
  d->callback([dome] { run_synth_dome(*dome); });

  auto mesh = std::make_shared<SynthMeshArgs>();
  auto* m = cmd->add_subcommand("mesh", "Synthetic grid, bar or triangle mesh");
  m->add_option("--kind", mesh->kind, "grid, bar or triangle")->capture_default_str();
  m->add_option("--dims", mesh->dims, "Lattice dimensions, e.g. 20,20 or 10,2,2")->delimiter(',');
  m->add_option("--spacing", mesh->spacing, "Lattice spacing or triangle side")->capture_default_str();
  m->add_option("-o,--out", mesh->out, "Output mesh (.obj or .ply)")->required();
  m->callback([mesh] { run_synth_mesh(*mesh); });

  auto latent = std::make_shared<SynthLatentArgs>();
  auto* l = cmd->add_subcommand("latent", "Gaussian-blob latent grid");
  l->add_option("--size", latent->size, "Grid side")->capture_default_str();
  l->add_option("--sigma", latent->sigma, "Blob width")->capture_default_str();
  l->add_option("--center", latent->center, "Blob center x,y (default: grid center)");
  l->add_option("-o,--out", latent->out, "Output latent file (FMLT)")->required();
  l->callback([latent] { run_synth_latent(*latent); });
}

}  // namespace flowmesh::cli
