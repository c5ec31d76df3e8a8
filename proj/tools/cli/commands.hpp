#pragma once

#include <CLI11.hpp>

namespace flowmesh::cli {

// Each call registers one subcommand whose callback does the work and throws
// flowmesh::Error on failure.
void add_depth2mesh(CLI::App& app);
void add_deform(CLI::App& app);
void add_flow(CLI::App& app);
void add_dragsim(CLI::App& app);
void add_pipeline(CLI::App& app);
void add_serve(CLI::App& app);
void add_synth(CLI::App& app);

}  // namespace flowmesh::cli
