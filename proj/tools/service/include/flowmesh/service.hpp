#pragma once

// Session-oriented REST front end over the pipeline stages.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace flowmesh {

struct ServiceOptions {
  std::optional<std::filesystem::path> state_dir;  // persist sessions in the CLI file formats
  std::string cors_origin = "*";
};

class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds `host:port` (port 0 picks a free port) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool serve();
  void stop();
  void wait_until_ready() const;

  /// Waits for every running deformation job.
  void join_jobs();

  std::size_t session_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// The OpenAPI document served at /openapi.json.
std::string openapi_document();

}  // namespace flowmesh
