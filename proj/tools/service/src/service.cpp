#include "flowmesh/service.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <thread>

#include "flowmesh/arap.hpp"
#include "flowmesh/codecs.hpp"
#include "flowmesh/depth_mesh.hpp"
#include "flowmesh/errors.hpp"
#include "flowmesh/flow.hpp"
#include "flowmesh/mesh_io.hpp"
#include "flowmesh/raster.hpp"
#include "flowmesh/rigidity.hpp"

// After Eigen: httplib pulls in system headers whose macros clash with it.
#include <httplib.h>

namespace flowmesh {

namespace fs = std::filesystem;

namespace {

enum class Status { Idle, Deforming, Done, Error };

const char* status_name(Status s) {
  switch (s) {
    case Status::Idle:
      return "idle";
    case Status::Deforming:
      return "deforming";
    case Status::Done:
      return "done";
    case Status::Error:
      return "error";
  }
  return "idle";
}

// Thrown inside handlers to produce a specific status code.
struct HttpError {
  int status;
  std::string message;
};

struct Session {
  std::string id;
  mutable std::mutex mutex;
  std::map<std::string, std::string> uploads;
  std::optional<DepthMap> depth;
  std::shared_ptr<const Mesh> mesh;
  ProjectionFrame frame;
  std::optional<DragSpec2D> spec;
  std::shared_ptr<const ConstraintSet> constraints;
  std::shared_ptr<const DeformationTrace> trace;
  Status status = Status::Idle;
  int step_k = 0;
  int total_k = 0;
  double energy = 0.0;
  int job_counter = 0;
  std::string job;
  std::string error;
  std::thread worker;
};

int status_for(const Error& e) { return e.kind() == ErrorKind::Numerical ? 500 : 422; }

Json error_body(int status, const std::string& message) {
  return {{"error", message}, {"status", status}};
}

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;
  mutable std::shared_mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::mt19937_64 rng{std::random_device{}()};
  std::mutex rng_mutex;

  explicit Impl(ServiceOptions o) : options(std::move(o)) {
    restore();
    routes();
  }

  std::string new_id() {
    std::lock_guard lock(rng_mutex);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id;
    const std::uint64_t v = rng();
    for (int i = 0; i < 16; ++i) id.push_back(kHex[(v >> (4 * i)) & 0xF]);
    return id;
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::shared_lock lock(sessions_mutex);
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw HttpError{404, "unknown session '" + id + "'"};
    return it->second;
  }

  static Json body_json(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    try {
      return Json::parse(req.body);
    } catch (const Json::parse_error& e) {
      throw HttpError{422, std::string("request body is not valid JSON: ") + e.what()};
    }
  }

  static void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  // Runs a handler and maps failures onto status codes.
  template <class F>
  httplib::Server::Handler wrap(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const HttpError& e) {
        reply(res, e.status, error_body(e.status, e.message));
      } catch (const Error& e) {
        reply(res, status_for(e), error_body(status_for(e), e.what()));
      } catch (const Json::exception& e) {
        reply(res, 422, error_body(422, e.what()));
      } catch (const std::exception& e) {
        reply(res, 500, error_body(500, e.what()));
      }
    };
  }

  // Persistence

  fs::path session_dir(const Session& s) const { return *options.state_dir / s.id; }

  void persist_inputs(const Session& s) const {
    if (!options.state_dir) return;
    const fs::path dir = session_dir(s);
    if (s.depth) write_file_bytes(dir / "depth.pgm", encode_depth_pgm(*s.depth));
    if (s.mesh) write_file_bytes(dir / "mesh.obj", encode_obj(*s.mesh));
    if (s.spec) write_file_bytes(dir / "spec.json", dump_json(drag_spec_to_json(*s.spec)));
    if (!s.depth && !s.mesh && !s.spec) fs::create_directories(dir);
  }

  void persist_trace(const Session& s) const {
    if (!options.state_dir || !s.trace || !s.mesh || !s.constraints) return;
    const fs::path dir = session_dir(s) / "trace";
    fs::remove_all(dir);
    write_trace_dir(dir, *s.mesh, *s.trace, s.frame, *s.constraints);
  }

  void restore() {
    if (!options.state_dir || !fs::exists(*options.state_dir)) return;
    for (const auto& entry : fs::directory_iterator(*options.state_dir)) {
      if (!entry.is_directory()) continue;
      auto s = std::make_shared<Session>();
      s->id = entry.path().filename().string();
      const fs::path dir = entry.path();
      try {
        if (fs::exists(dir / "depth.pgm")) s->depth = read_depth(dir / "depth.pgm");
        if (fs::exists(dir / "mesh.obj")) {
          s->mesh = std::make_shared<const Mesh>(read_mesh(dir / "mesh.obj"));
          s->frame = frame_for(*s->mesh, s->depth);
        }
        if (fs::exists(dir / "spec.json")) s->spec = read_drag_spec(dir / "spec.json");
        if (fs::exists(dir / "trace" / "trace.json")) {
          TraceBundle b = read_trace_dir(dir / "trace");
          s->frame = b.frame;
          s->constraints = std::make_shared<const ConstraintSet>(std::move(b.constraints));
          s->trace = std::make_shared<const DeformationTrace>(std::move(b.trace));
          s->status = Status::Done;
          s->total_k = static_cast<int>(s->trace->step_count());
          s->step_k = s->total_k;
          s->energy = s->trace->steps.empty() ? 0.0 : s->trace->steps.back().total_energy;
        }
      } catch (const std::exception&) {
        continue;  // unreadable state is skipped rather than aborting startup
      }
      sessions.emplace(s->id, std::move(s));
    }
  }

  static ProjectionFrame frame_for(const Mesh& mesh, const std::optional<DepthMap>& depth) {
    if (mesh.has_pixels()) return make_projection_frame(mesh);
    OrthoCamera cam;
    if (depth) cam = {depth->width, depth->height};
    return make_projection_frame(mesh, cam);
  }

  static std::pair<int, int> image_size(const Session& s) {
    if (s.depth) return {s.depth->width, s.depth->height};
    if (s.mesh) return {s.frame.width, s.frame.height};
    throw HttpError{422, "upload a depth map or create a mesh before the drag spec"};
  }

  static void require_idle(const Session& s) {
    if (s.status == Status::Deforming) throw HttpError{409, "a deformation job is already running for this session"};
  }

  // Routes

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/openapi.json", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(openapi_document(), "application/json");
    });

    server.Post("/sessions", wrap([this](const httplib::Request&, httplib::Response& res) {
      auto s = std::make_shared<Session>();
      {
        std::unique_lock lock(sessions_mutex);
        do {
          s->id = new_id();
        } while (sessions.count(s->id));
        sessions.emplace(s->id, s);
      }
      persist_inputs(*s);
      reply(res, 201, {{"id", s->id}});
    }));

    server.Put(R"(/sessions/([^/]+)/uploads/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find(req.matches[1]);
      std::lock_guard lock(s->mutex);
      s->uploads[req.matches[2]] = req.body;
      res.status = 204;
    }));

    server.Put(R"(/sessions/([^/]+)/depth)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find(req.matches[1]);
      DepthMap depth = decode_depth(req.body);
      std::lock_guard lock(s->mutex);
      require_idle(*s);
      s->depth = std::move(depth);
      persist_inputs(*s);
      res.status = 204;
    }));

    server.Post(R"(/sessions/([^/]+)/mesh)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find(req.matches[1]);
      const Json body = body_json(req);
      std::lock_guard lock(s->mutex);
      require_idle(*s);
      Mesh mesh;
      if (body.contains("import")) {
        const std::string ref = body["import"].get<std::string>();
        const auto it = s->uploads.find(ref);
        if (it == s->uploads.end()) throw HttpError{422, "no upload named '" + ref + "' in this session"};
        mesh = decode_mesh(it->second);
        mesh.validate();
      } else {
        if (!s->depth) throw HttpError{422, "upload a depth map before requesting a depth mesh"};
        DepthMeshOptions opts;
        if (body.contains("tau_d")) opts.tau_d = body["tau_d"].get<double>();
        if (body.contains("tau_b") && !(body["tau_b"].is_string() && body["tau_b"] == "auto")) {
          opts.tau_b = body["tau_b"].get<double>();
        }
        if (body.contains("reduction")) opts.reduction_ratio = body["reduction"].get<double>();
        mesh = depth_to_mesh(*s->depth, opts);
      }
      s->frame = frame_for(mesh, s->depth);
      s->mesh = std::make_shared<const Mesh>(std::move(mesh));
      s->trace.reset();
      s->constraints.reset();
      s->status = Status::Idle;
      persist_inputs(*s);
      reply(res, 200, {{"vertices", s->mesh->vertices.size()}, {"faces", s->mesh->faces.size()}});
    }));

    server.Put(R"(/sessions/([^/]+)/drag-spec)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find(req.matches[1]);
      Json body = body_json(req);
      std::lock_guard lock(s->mutex);
      require_idle(*s);
      if (body.is_object() && body.contains("mask") && body["mask"].is_string()) {
        const std::string ref = body["mask"].get<std::string>();
        if (!is_inline_rle(ref)) {
          const auto it = s->uploads.find(ref);
          if (it == s->uploads.end()) {
            throw HttpError{422, "mask must be inline RLE or the name of an upload in this session"};
          }
          body["mask"] = encode_mask_rle(decode_mask(it->second));
        }
      }
      DragSpec2D spec = drag_spec_from_json(body);
      const auto [w, h] = image_size(*s);
      spec.validate(w, h);
      s->spec = std::move(spec);
      persist_inputs(*s);
      res.status = 204;
    }));

    server.Post(R"(/sessions/([^/]+)/deform)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find(req.matches[1]);
      const DeformParams params = deform_params_from_json(body_json(req));
      params.validate();
      std::lock_guard lock(s->mutex);
      require_idle(*s);
      if (!s->mesh) throw HttpError{422, "create a mesh before deforming"};
      if (!s->spec) throw HttpError{422, "upload a drag spec before deforming"};
      auto constraints = std::make_shared<const ConstraintSet>(lift_drag_spec(*s->spec, *s->mesh, s->frame));
      if (s->worker.joinable()) s->worker.join();
      s->constraints = constraints;
      s->trace.reset();
      s->status = Status::Deforming;
      s->step_k = 0;
      s->total_k = params.steps;
      s->energy = 0.0;
      s->error.clear();
      s->job = s->id + "-" + std::to_string(++s->job_counter);
      auto mesh = s->mesh;
      s->worker = std::thread([this, s, mesh, constraints, params] { run_job(s, mesh, constraints, params); });
      reply(res, 202, {{"job", s->job}});
    }));

    server.Get(R"(/sessions/([^/]+)/deform/status)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find(req.matches[1]);
      std::lock_guard lock(s->mutex);
      Json body = {{"status", status_name(s->status)}, {"step_k", s->step_k}, {"K", s->total_k}, {"energy", s->energy}};
      if (!s->job.empty()) body["job"] = s->job;
      if (s->status == Status::Error) body["error"] = s->error;
      if (s->trace) body["converged"] = s->trace->converged;
      reply(res, 200, body);
    }));

    server.Get(R"(/sessions/([^/]+)/deform/steps/(\d+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find(req.matches[1]);
      std::shared_ptr<const DeformationTrace> trace;
      std::shared_ptr<const ConstraintSet> constraints;
      {
        std::lock_guard lock(s->mutex);
        trace = s->trace;
        constraints = s->constraints;
      }
      if (!trace) throw HttpError{404, "no completed deformation in this session"};
      std::size_t k = 0;
      try {
        k = std::stoul(req.matches[2]);
      } catch (const std::exception&) {
        throw HttpError{404, "step index out of range"};
      }
      if (k >= trace->snapshots.size()) {
        throw HttpError{404, "step " + std::string(req.matches[2]) + " does not exist (K=" +
                                 std::to_string(trace->step_count()) + ")"};
      }
      Json vertices = Json::array();
      for (const Vec3& p : trace->snapshots[k]) vertices.push_back({p.x(), p.y(), p.z()});
      Json handles = Json::array();
      for (std::size_t h = 0; h < trace->handles.size(); ++h) {
        const Vec3& p = trace->snapshots[k][static_cast<std::size_t>(trace->handles[h])];
        const Vec3& t = constraints->targets[h];
        handles.push_back({{"vertex", trace->handles[h]}, {"position", {p.x(), p.y(), p.z()}}, {"target", {t.x(), t.y(), t.z()}}});
      }
      const double energy = k == 0 ? 0.0 : trace->steps[k - 1].total_energy;
      reply(res, 200, {{"k", k}, {"K", trace->step_count()}, {"vertices", vertices}, {"energy", energy}, {"handles", handles}});
    }));

    server.Get(R"(/sessions/([^/]+)/flow)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find(req.matches[1]);
      auto [trace, mesh, frame, spec] = completed(*s);
      GridOptions grid;
      int count = 10;
      SamplingStrategy strategy = SamplingStrategy::Magnitude;
      try {
        if (req.has_param("grid")) grid.n = std::stoi(req.get_param_value("grid"));
        if (req.has_param("count")) count = std::stoi(req.get_param_value("count"));
      } catch (const std::exception&) {
        throw HttpError{422, "grid and count must be integers"};
      }
      if (req.has_param("strategy")) strategy = parse_sampling_strategy(req.get_param_value("strategy"));
      const FlowField field =
          compute_flow(project_positions(trace->snapshots.front(), frame), project_positions(trace->final_positions(), frame));
      SampledFlow sampled = sample_flow(grid_candidates(field, spec.mask, grid), strategy, count);
      sampled.grid_n = grid.n;
      reply(res, 200, sampled_flow_to_json(sampled));
    }));

    server.Get(R"(/sessions/([^/]+)/metrics)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find(req.matches[1]);
      auto [trace, mesh, frame, spec] = completed(*s);
      std::shared_ptr<const ConstraintSet> constraints;
      {
        std::lock_guard lock(s->mutex);
        constraints = s->constraints;
      }
      const RigidityReport report = rigidity_report(*mesh, trace->final_positions(), constraints->movable);
      reply(res, 200, rigidity_report_to_json(report));
    }));
  }

  std::tuple<std::shared_ptr<const DeformationTrace>, std::shared_ptr<const Mesh>, ProjectionFrame, DragSpec2D>
  completed(Session& s) const {
    std::lock_guard lock(s.mutex);
    if (s.status == Status::Deforming) throw HttpError{409, "the deformation job is still running"};
    if (!s.trace || !s.mesh || !s.spec) throw HttpError{422, "no completed deformation in this session"};
    return {s.trace, s.mesh, s.frame, *s.spec};
  }

  void run_job(const std::shared_ptr<Session>& s, const std::shared_ptr<const Mesh>& mesh,
               const std::shared_ptr<const ConstraintSet>& constraints, const DeformParams& params) {
    try {
      auto observer = [&s](const StepProgress& p) {
        std::lock_guard lock(s->mutex);
        s->step_k = p.step;
        s->total_k = p.total;
        s->energy = p.energy;
      };
      auto trace = std::make_shared<const DeformationTrace>(deform_progressive(*mesh, *constraints, params, observer));
      std::lock_guard lock(s->mutex);
      s->trace = std::move(trace);
      s->status = Status::Done;
      try {
        persist_trace(*s);
      } catch (const std::exception& e) {
        s->error = std::string("trace persistence failed: ") + e.what();
      }
    } catch (const std::exception& e) {
      std::lock_guard lock(s->mutex);
      s->status = Status::Error;
      s->error = e.what();
    }
  }

  void join_jobs() {
    std::vector<std::shared_ptr<Session>> all;
    {
      std::shared_lock lock(sessions_mutex);
      for (const auto& [id, s] : sessions) all.push_back(s);
    }
    for (const auto& s : all) {
      std::thread t;
      {
        std::lock_guard lock(s->mutex);
        t = std::move(s->worker);
      }
      if (t.joinable()) t.join();
    }
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() {
  stop();
  impl_->join_jobs();
}

int Service::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool Service::serve() { return impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

void Service::join_jobs() { impl_->join_jobs(); }

std::size_t Service::session_count() const {
  std::shared_lock lock(impl_->sessions_mutex);
  return impl_->sessions.size();
}

}  // namespace flowmesh
