#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "flowmesh/geometry.hpp"

namespace flowmesh {

// Wavefront OBJ: `v x y z` and `f a b c` records with 1-based indices. Pixel
// provenance travels as a comment block, one `# pix <row> <col>` line per
// vertex in vertex order, preceded by `# image <width> <height>`. Other readers
// ignore the comments. Polygons with more than three corners are fan-split.
std::string encode_obj(const Mesh& mesh);
Mesh decode_obj(std::string_view text);

// PLY, binary little-endian: float64 x/y/z vertices, uchar-count int32 faces.
// The reader also accepts float32 vertices and uint/int/ushort/uchar indices.
std::string encode_ply(const Mesh& mesh);
Mesh decode_ply(std::string_view bytes);

/// Dispatches on the file extension (.obj / .ply).
Mesh read_mesh(const std::filesystem::path& path);
void write_mesh(const std::filesystem::path& path, const Mesh& mesh);

/// Sniffs the content (PLY magic or OBJ text).
Mesh decode_mesh(std::string_view bytes);

}  // namespace flowmesh
