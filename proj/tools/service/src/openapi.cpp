#include "flowmesh/codecs.hpp"
#include "flowmesh/service.hpp"

namespace flowmesh {

namespace {

Json op(const char* summary, std::initializer_list<std::pair<const char*, const char*>> responses,
        const char* body_type = nullptr) {
  Json r = Json::object();
  for (const auto& [code, text] : responses) r[code] = {{"description", text}};
  Json o = {{"summary", summary}, {"responses", r}};
  if (body_type) o["requestBody"] = {{"content", {{body_type, Json::object()}}}};
  return o;
}

}  // namespace

std::string openapi_document() {
  Json paths = {
      {"/sessions", {{"post", op("Create a session", {{"201", "{id}"}})}}},
      {"/sessions/{id}/uploads/{name}",
       {{"put", op("Store raw bytes under a name (mesh imports, mask files)", {{"204", "stored"}, {"404", "unknown session"}},
                   "application/octet-stream")}}},
      {"/sessions/{id}/depth",
       {{"put", op("Upload a 16-bit PNG or P5 PGM depth map", {{"204", "stored"}, {"404", "unknown session"}, {"422", "bad image"}},
                   "application/octet-stream")}}},
      {"/sessions/{id}/mesh",
       {{"post", op("Build the depth mesh ({tau_d, tau_b, reduction}) or import an upload ({import})",
                    {{"200", "{vertices, faces}"}, {"409", "job running"}, {"422", "invalid input"}}, "application/json")}}},
      {"/sessions/{id}/drag-spec",
       {{"put", op("Set the drag spec; mask is inline RLE or an upload name",
                   {{"204", "stored"}, {"409", "job running"}, {"422", "invalid spec"}}, "application/json")}}},
      {"/sessions/{id}/deform",
       {{"post", op("Start a progressive deformation with the given parameters",
                    {{"202", "{job}"}, {"409", "job already running"}, {"422", "invalid parameters"}}, "application/json")}}},
      {"/sessions/{id}/deform/status", {{"get", op("Job progress", {{"200", "{status, step_k, K, energy}"}})}}},
      {"/sessions/{id}/deform/steps/{k}",
       {{"get", op("Snapshot k of the latest trace", {{"200", "{vertices, energy, handles}"}, {"404", "unknown step"}})}}},
      {"/sessions/{id}/flow",
       {{"get", op("Sampled flow; query strategy, count, grid", {{"200", "flow JSON"}, {"409", "job running"}, {"422", "no trace"}})}}},
      {"/sessions/{id}/metrics",
       {{"get", op("Rigidity report of the final snapshot", {{"200", "{melr, m_arap_error, faces, movable_edges}"}})}}},
  };
  const Json doc = {{"openapi", "3.0.3"},
                    {"info", {{"title", "flowmesh service"}, {"version", "0.3.0"}}},
                    {"paths", paths}};
  return doc.dump(2);
}

}  // namespace flowmesh
