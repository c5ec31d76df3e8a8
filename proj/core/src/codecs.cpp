#include "flowmesh/codecs.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <set>

#include "flowmesh/errors.hpp"
#include "flowmesh/mesh_io.hpp"
#include "flowmesh/raster.hpp"

namespace flowmesh {

namespace fs = std::filesystem;

Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

namespace {

const Json& require(const Json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(std::string(where) + " is missing \"" + key + "\"");
  }
  return j.at(key);
}

double number(const Json& j, const char* where) {
  if (!j.is_number()) throw ConfigError(std::string(where) + " must be a number");
  return j.get<double>();
}

int integer(const Json& j, const char* where) {
  if (!j.is_number_integer()) throw ConfigError(std::string(where) + " must be an integer");
  return j.get<int>();
}

Vec2 vec2(const Json& j, const char* where) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(std::string(where) + " must be [x, y]");
  return {number(j[0], where), number(j[1], where)};
}

Vec3 vec3(const Json& j, const char* where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(where) + " must be [x, y, z]");
  return {number(j[0], where), number(j[1], where), number(j[2], where)};
}

Json to_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }
Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json positions_json(const Positions& ps) {
  Json a = Json::array();
  for (const Vec3& p : ps) a.push_back(to_json(p));
  return a;
}

Positions positions_from(const Json& j, const char* where) {
  if (!j.is_array()) throw ConfigError(std::string(where) + " must be an array");
  Positions out;
  for (const Json& e : j) out.push_back(vec3(e, where));
  return out;
}

std::vector<int> ints_from(const Json& j, const char* where) {
  if (!j.is_array()) throw ConfigError(std::string(where) + " must be an array");
  std::vector<int> out;
  for (const Json& e : j) out.push_back(integer(e, where));
  return out;
}

void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const char* where) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ConfigError(std::string(where) + ": unknown key \"" + key + "\"");
  }
}

}  // namespace

DragSpec2D drag_spec_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("drag spec must be a JSON object");
  DragSpec2D spec;
  const Json& drags = require(j, "drags", "drag spec");
  if (!drags.is_array()) throw ConfigError("drag spec \"drags\" must be an array");
  for (const Json& d : drags) {
    spec.drags.push_back({vec2(require(d, "handle", "drag"), "drag handle"), vec2(require(d, "target", "drag"), "drag target")});
  }
  const Json& mask = require(j, "mask", "drag spec");
  if (!mask.is_string()) throw ConfigError("drag spec \"mask\" must be a path or inline RLE string");
  const std::string text = mask.get<std::string>();
  if (is_inline_rle(text)) {
    spec.mask = decode_mask_rle(text);
  } else {
    const fs::path p = fs::path(text).is_absolute() || base_dir.empty() ? fs::path(text) : base_dir / text;
    spec.mask = read_mask(p);
  }
  return spec;
}

DragSpec2D read_drag_spec(const fs::path& path) {
  const std::string text = read_file_bytes(path);
  return drag_spec_from_json(parse_json(text, path.string()), path.parent_path());
}

Json drag_spec_to_json(const DragSpec2D& spec) {
  Json drags = Json::array();
  for (const DragPair& d : spec.drags) drags.push_back({{"handle", to_json(d.handle)}, {"target", to_json(d.target)}});
  return {{"drags", drags}, {"mask", encode_mask_rle(spec.mask)}};
}

DeformParams deform_params_from_json(const Json& j, DeformParams p) {
  if (j.is_null()) return p;
  if (!j.is_object()) throw ConfigError("deformation parameters must be a JSON object");
  reject_unknown(j, {"alpha", "beta", "lambda", "steps", "K", "max_lg_iters", "rel_tol", "weight_mode", "clamp_negative"},
                 "deformation parameters");
  if (j.contains("alpha")) p.alpha = number(j["alpha"], "alpha");
  if (j.contains("beta")) p.beta = number(j["beta"], "beta");
  if (j.contains("lambda")) p.lambda = number(j["lambda"], "lambda");
  if (j.contains("steps")) p.steps = integer(j["steps"], "steps");
  if (j.contains("K")) p.steps = integer(j["K"], "K");
  if (j.contains("max_lg_iters")) p.max_lg_iters = integer(j["max_lg_iters"], "max_lg_iters");
  if (j.contains("rel_tol")) p.rel_tol = number(j["rel_tol"], "rel_tol");
  if (j.contains("weight_mode")) {
    const Json& m = j["weight_mode"];
    if (m == "cotangent") {
      p.weight_mode = WeightMode::Cotangent;
    } else if (m == "uniform") {
      p.weight_mode = WeightMode::Uniform;
    } else {
      throw ConfigError("weight_mode must be \"cotangent\" or \"uniform\"");
    }
  }
  if (j.contains("clamp_negative")) {
    if (!j["clamp_negative"].is_boolean()) throw ConfigError("clamp_negative must be a boolean");
    p.clamp_negative = j["clamp_negative"].get<bool>();
  }
  return p;
}

Json deform_params_to_json(const DeformParams& p) {
  return {{"alpha", p.alpha},
          {"beta", p.beta},
          {"lambda", p.lambda},
          {"steps", p.steps},
          {"max_lg_iters", p.max_lg_iters},
          {"rel_tol", p.rel_tol},
          {"weight_mode", p.weight_mode == WeightMode::Cotangent ? "cotangent" : "uniform"},
          {"clamp_negative", p.clamp_negative}};
}

Json projection_frame_to_json(const ProjectionFrame& f) {
  return {{"kind", f.kind == ProjectionFrame::Kind::PixelAligned ? "pixel" : "orthographic"},
          {"width", f.width},
          {"height", f.height},
          {"scale", f.scale},
          {"center", to_json(f.center)}};
}

ProjectionFrame projection_frame_from_json(const Json& j) {
  ProjectionFrame f;
  const Json& kind = require(j, "kind", "projection frame");
  if (kind == "pixel") {
    f.kind = ProjectionFrame::Kind::PixelAligned;
  } else if (kind == "orthographic") {
    f.kind = ProjectionFrame::Kind::Orthographic;
  } else {
    throw ConfigError("projection frame kind must be \"pixel\" or \"orthographic\"");
  }
  f.width = integer(require(j, "width", "projection frame"), "width");
  f.height = integer(require(j, "height", "projection frame"), "height");
  f.scale = number(require(j, "scale", "projection frame"), "scale");
  f.center = vec2(require(j, "center", "projection frame"), "center");
  return f;
}

Json constraints_to_json(const ConstraintSet& c) {
  return {{"movable", c.movable},
          {"fixed", c.fixed},
          {"fixed_positions", positions_json(c.fixed_positions)},
          {"handles", c.handles},
          {"targets", positions_json(c.targets)}};
}

ConstraintSet constraints_from_json(const Json& j) {
  ConstraintSet c;
  c.movable = ints_from(require(j, "movable", "constraints"), "movable");
  c.fixed = ints_from(require(j, "fixed", "constraints"), "fixed");
  c.fixed_positions = positions_from(require(j, "fixed_positions", "constraints"), "fixed_positions");
  c.handles = ints_from(require(j, "handles", "constraints"), "handles");
  c.targets = positions_from(require(j, "targets", "constraints"), "targets");
  return c;
}

std::string snapshot_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%04zu.obj", k);
  return buf;
}

Json trace_to_json(const DeformationTrace& trace, const ProjectionFrame& frame, const ConstraintSet& constraints) {
  Json energies = Json::array();
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const StepRecord& s = trace.steps[k];
    energies.push_back({{"step", k + 1},
                        {"arap", s.arap_energy},
                        {"srarap", s.srarap_energy},
                        {"total", s.total_energy},
                        {"initial", s.initial_energy},
                        {"iterations", s.iterations},
                        {"converged", s.converged},
                        {"history", s.iteration_energies}});
  }
  Json path = Json::array();
  for (const Positions& p : trace.handle_path) path.push_back(positions_json(p));
  Json snapshots = Json::array();
  for (std::size_t k = 0; k < trace.snapshots.size(); ++k) snapshots.push_back(snapshot_name(k));
  return {{"params", deform_params_to_json(trace.params)},
          {"steps", trace.steps.size()},
          {"converged", trace.converged},
          {"handles", trace.handles},
          {"handle_path", path},
          {"energies", energies},
          {"frame", projection_frame_to_json(frame)},
          {"constraints", constraints_to_json(constraints)},
          {"snapshots", snapshots}};
}

void write_trace_dir(const fs::path& dir, const Mesh& mesh, const DeformationTrace& trace, const ProjectionFrame& frame,
                     const ConstraintSet& constraints) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create trace directory " + dir.string() + ": " + ec.message());
  Mesh snap = mesh;
  for (std::size_t k = 0; k < trace.snapshots.size(); ++k) {
    snap.vertices = trace.snapshots[k];
    write_file_bytes(dir / snapshot_name(k), encode_obj(snap));
  }
  write_file_bytes(dir / "trace.json", dump_json(trace_to_json(trace, frame, constraints)));
}

TraceBundle read_trace_dir(const fs::path& dir) {
  const Json j = parse_json(read_file_bytes(dir / "trace.json"), (dir / "trace.json").string());
  TraceBundle b;
  b.frame = projection_frame_from_json(require(j, "frame", "trace.json"));
  b.constraints = constraints_from_json(require(j, "constraints", "trace.json"));
  DeformationTrace& t = b.trace;
  t.params = deform_params_from_json(require(j, "params", "trace.json"));
  t.converged = require(j, "converged", "trace.json").get<bool>();
  t.handles = ints_from(require(j, "handles", "trace.json"), "handles");
  for (const Json& p : require(j, "handle_path", "trace.json")) t.handle_path.push_back(positions_from(p, "handle_path"));
  for (const Json& e : require(j, "energies", "trace.json")) {
    StepRecord s;
    s.arap_energy = number(require(e, "arap", "energy record"), "arap");
    s.srarap_energy = number(require(e, "srarap", "energy record"), "srarap");
    s.total_energy = number(require(e, "total", "energy record"), "total");
    s.initial_energy = number(require(e, "initial", "energy record"), "initial");
    s.iterations = integer(require(e, "iterations", "energy record"), "iterations");
    s.converged = require(e, "converged", "energy record").get<bool>();
    for (const Json& v : require(e, "history", "energy record")) s.iteration_energies.push_back(number(v, "history"));
    s.handle_positions = t.handle_path.size() > t.steps.size() + 1 ? t.handle_path[t.steps.size() + 1] : Positions{};
    t.steps.push_back(std::move(s));
  }
  const Json& names = require(j, "snapshots", "trace.json");
  if (!names.is_array() || names.empty()) throw IoError("trace.json lists no snapshots");
  for (std::size_t k = 0; k < names.size(); ++k) {
    Mesh m = read_mesh(dir / names[k].get<std::string>());
    if (k == 0) {
      b.rest = m;
    } else if (m.vertices.size() != b.rest.vertices.size()) {
      throw IoError("snapshot " + names[k].get<std::string>() + " has a different vertex count");
    }
    t.snapshots.push_back(std::move(m.vertices));
  }
  if (t.snapshots.size() != t.steps.size() + 1) throw IoError("trace.json snapshot and step counts disagree");
  return b;
}

namespace {

Json vectors_json(const std::vector<FlowVector>& vs) {
  Json a = Json::array();
  for (const FlowVector& v : vs) a.push_back({{"x", v.x}, {"y", v.y}, {"dx", v.dx}, {"dy", v.dy}});
  return a;
}

std::vector<FlowVector> vectors_from(const Json& j) {
  if (!j.is_array()) throw ConfigError("flow \"vectors\" must be an array");
  std::vector<FlowVector> out;
  for (const Json& v : j) {
    out.push_back({number(require(v, "x", "flow vector"), "x"), number(require(v, "y", "flow vector"), "y"),
                   number(require(v, "dx", "flow vector"), "dx"), number(require(v, "dy", "flow vector"), "dy")});
  }
  return out;
}

}  // namespace

Json sampled_flow_to_json(const SampledFlow& flow) {
  return {{"grid_n", flow.grid_n},
          {"strategy", std::string(to_string(flow.strategy))},
          {"count", flow.requested},
          {"vectors", vectors_json(flow.vectors)}};
}

SampledFlow sampled_flow_from_json(const Json& j) {
  SampledFlow f;
  f.grid_n = integer(require(j, "grid_n", "flow"), "grid_n");
  f.strategy = parse_sampling_strategy(require(j, "strategy", "flow").get<std::string>());
  f.vectors = vectors_from(require(j, "vectors", "flow"));
  f.requested = j.contains("count") ? integer(j["count"], "count") : static_cast<int>(f.vectors.size());
  return f;
}

Json flow_field_to_json(const FlowField& flow) {
  return {{"width", flow.width}, {"height", flow.height}, {"vectors", vectors_json(flow.vectors)}};
}

FlowField flow_field_from_json(const Json& j) {
  FlowField f;
  f.width = integer(require(j, "width", "flow field"), "width");
  f.height = integer(require(j, "height", "flow field"), "height");
  f.vectors = vectors_from(require(j, "vectors", "flow field"));
  return f;
}

std::string flow_to_csv(const std::vector<FlowVector>& vectors) {
  std::string out = "x,y,dx,dy\n";
  char buf[32];
  for (const FlowVector& v : vectors) {
    const double vals[4] = {v.x, v.y, v.dx, v.dy};
    for (int k = 0; k < 4; ++k) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, vals[k]);
      out.append(buf, ptr);
      out.push_back(k == 3 ? '\n' : ',');
    }
  }
  return out;
}

std::vector<FlowVector> flow_from_csv(std::string_view text) {
  std::vector<FlowVector> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "x,y,dx,dy") throw IoError("flow CSV must start with the header x,y,dx,dy");
      continue;
    }
    double vals[4];
    std::size_t start = 0;
    for (int k = 0; k < 4; ++k) {
      const std::size_t comma = k == 3 ? line.size() : line.find(',', start);
      if (comma == std::string_view::npos) throw IoError("flow CSV line " + std::to_string(line_no) + " has too few fields");
      const std::string_view field = line.substr(start, comma - start);
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), vals[k]);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw IoError("flow CSV line " + std::to_string(line_no) + ": bad number '" + std::string(field) + "'");
      }
      start = comma + 1;
    }
    out.push_back({vals[0], vals[1], vals[2], vals[3]});
  }
  if (line_no == 0) throw IoError("flow CSV is empty");
  return out;
}

Json rigidity_report_to_json(const RigidityReport& r) {
  return {{"melr", r.melr}, {"m_arap_error", r.m_arap_error}, {"faces", r.faces}, {"movable_edges", r.movable_edges}};
}

Json drag_trace_to_json(const DragTrace& t) {
  Json paths = Json::array();
  for (const auto& step : t.handle_paths) {
    Json s = Json::array();
    for (const Vec2& p : step) s.push_back(to_json(p));
    paths.push_back(s);
  }
  return {{"alternations", t.alternations},
          {"losses", t.losses},
          {"handle_paths", paths},
          {"reached", t.reached},
          {"clipped", t.clipped},
          {"mean_distance", t.mean_distance}};
}

namespace {

constexpr std::uint32_t kLatentMagic = 0x544C4D46;  // "FMLT" read little-endian

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[k])) << (8 * k);
  return v;
}

}  // namespace

std::string encode_latent(const LatentGrid& grid) {
  std::string out;
  out.reserve(16 + grid.size() * 4);
  put_u32(out, kLatentMagic);
  put_u32(out, static_cast<std::uint32_t>(grid.height));
  put_u32(out, static_cast<std::uint32_t>(grid.width));
  put_u32(out, static_cast<std::uint32_t>(grid.channels));
  for (double v : grid.data) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

LatentGrid decode_latent(std::string_view bytes) {
  if (bytes.size() < 16) throw IoError("latent file is shorter than its 16-byte header");
  if (get_u32(bytes.data()) != kLatentMagic) throw IoError("latent file has the wrong magic");
  const std::uint32_t h = get_u32(bytes.data() + 4);
  const std::uint32_t w = get_u32(bytes.data() + 8);
  const std::uint32_t c = get_u32(bytes.data() + 12);
  if (h == 0 || w == 0 || c == 0 || h > 1u << 15 || w > 1u << 15 || c > 1u << 12) {
    throw IoError("latent header has invalid dimensions");
  }
  const std::size_t n = static_cast<std::size_t>(h) * w * c;
  if (bytes.size() != 16 + n * 4) {
    throw IoError("latent payload has " + std::to_string(bytes.size() - 16) + " bytes, expected " + std::to_string(n * 4));
  }
  LatentGrid g(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  for (std::size_t i = 0; i < n; ++i) {
    const float f = std::bit_cast<float>(get_u32(bytes.data() + 16 + 4 * i));
    if (!std::isfinite(f)) throw IoError("latent contains a non-finite value");
    g.data[i] = f;
  }
  return g;
}

}  // namespace flowmesh
