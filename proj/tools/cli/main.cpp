#include <cstdio>
#include <cstdlib>
#include <string>

#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "flowmesh/errors.hpp"

namespace {

// FLOWMESH_LOG takes a spdlog level name (trace, debug, info, warn, error, off).
void init_logging() {
  auto logger = spdlog::stderr_color_mt("flowmesh");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("FLOWMESH_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("FLOWMESH_LOG={} is not a log level; keeping warn", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Mesh-guided deformation flow toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "flowmesh 0.3.0");
  flowmesh::cli::add_depth2mesh(app);
  flowmesh::cli::add_deform(app);
  flowmesh::cli::add_flow(app);
  flowmesh::cli::add_dragsim(app);
  flowmesh::cli::add_pipeline(app);
  flowmesh::cli::add_serve(app);
  flowmesh::cli::add_synth(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const flowmesh::Error& e) {
    spdlog::error("{}", e.what());
    return flowmesh::exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("malformed JSON input: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("internal failure: {}", e.what());
    return 4;
  }
  return 0;
}
