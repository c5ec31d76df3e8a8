#include "flowmesh/mesh_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <vector>

#include "flowmesh/errors.hpp"
#include "flowmesh/raster.hpp"

namespace flowmesh {

namespace {

void append_double(std::string& out, double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

double parse_double(std::string_view token, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw IoError("OBJ line " + std::to_string(line_no) + ": cannot parse number '" + std::string(token) + "'");
  }
  return v;
}

long parse_long(std::string_view token, std::size_t line_no) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc()) {
    throw IoError("OBJ line " + std::to_string(line_no) + ": cannot parse index '" + std::string(token) + "'");
  }
  return v;
}

}  // namespace

std::string encode_obj(const Mesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 64 + mesh.faces.size() * 24);
  if (mesh.has_pixels()) {
    out += "# image " + std::to_string(mesh.image_width) + " " + std::to_string(mesh.image_height) + "\n";
    for (const PixelCoord& px : mesh.pixels) {
      out += "# pix " + std::to_string(px.row) + " " + std::to_string(px.col) + "\n";
    }
  }
  for (const Vec3& v : mesh.vertices) {
    out += "v ";
    append_double(out, v.x());
    out += ' ';
    append_double(out, v.y());
    out += ' ';
    append_double(out, v.z());
    out += '\n';
  }
  for (const Face& f : mesh.faces) {
    out += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " + std::to_string(f[2] + 1) + "\n";
  }
  return out;
}

Mesh decode_obj(std::string_view text) {
  Mesh mesh;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (tokens[0] == "v") {
      if (tokens.size() < 4) throw IoError("OBJ line " + std::to_string(line_no) + ": vertex needs 3 coordinates");
      mesh.vertices.emplace_back(parse_double(tokens[1], line_no), parse_double(tokens[2], line_no),
                                 parse_double(tokens[3], line_no));
    } else if (tokens[0] == "f") {
      if (tokens.size() < 4) throw IoError("OBJ line " + std::to_string(line_no) + ": face needs 3 corners");
      std::vector<int> corners;
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        // v, v/vt, v//vn, v/vt/vn
        const std::string_view idx = tokens[k].substr(0, tokens[k].find('/'));
        long v = parse_long(idx, line_no);
        if (v < 0) v = static_cast<long>(mesh.vertices.size()) + v + 1;
        if (v < 1) throw IoError("OBJ line " + std::to_string(line_no) + ": face index must be positive");
        corners.push_back(static_cast<int>(v - 1));
      }
      for (std::size_t k = 1; k + 1 < corners.size(); ++k) mesh.faces.push_back({corners[0], corners[k], corners[k + 1]});
    } else if (tokens[0] == "#" && tokens.size() >= 4 && tokens[1] == "pix") {
      mesh.pixels.push_back({static_cast<int>(parse_long(tokens[2], line_no)),
                             static_cast<int>(parse_long(tokens[3], line_no))});
    } else if (tokens[0] == "#" && tokens.size() >= 4 && tokens[1] == "image") {
      mesh.image_width = static_cast<int>(parse_long(tokens[2], line_no));
      mesh.image_height = static_cast<int>(parse_long(tokens[3], line_no));
    }
    if (end == text.size()) break;
  }
  mesh.validate();
  return mesh;
}

namespace {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

PlyType parse_ply_type(std::string_view name) {
  if (name == "char" || name == "int8") return PlyType::Int8;
  if (name == "uchar" || name == "uint8") return PlyType::UInt8;
  if (name == "short" || name == "int16") return PlyType::Int16;
  if (name == "ushort" || name == "uint16") return PlyType::UInt16;
  if (name == "int" || name == "int32") return PlyType::Int32;
  if (name == "uint" || name == "uint32") return PlyType::UInt32;
  if (name == "float" || name == "float32") return PlyType::Float32;
  if (name == "double" || name == "float64") return PlyType::Float64;
  throw IoError("unsupported PLY property type '" + std::string(name) + "'");
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8:
      return 1;
    case PlyType::Int16:
    case PlyType::UInt16:
      return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32:
      return 4;
    case PlyType::Float64:
      return 8;
  }
  return 0;
}

template <typename T>
T load_le(const unsigned char* p) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double read_ply_value(PlyType t, const unsigned char* p) {
  switch (t) {
    case PlyType::Int8:
      return load_le<std::int8_t>(p);
    case PlyType::UInt8:
      return load_le<std::uint8_t>(p);
    case PlyType::Int16:
      return load_le<std::int16_t>(p);
    case PlyType::UInt16:
      return load_le<std::uint16_t>(p);
    case PlyType::Int32:
      return load_le<std::int32_t>(p);
    case PlyType::UInt32:
      return load_le<std::uint32_t>(p);
    case PlyType::Float32:
      return load_le<float>(p);
    case PlyType::Float64:
      return load_le<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  bool is_list = false;
  PlyType type = PlyType::Float32;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

}  // namespace

std::string encode_ply(const Mesh& mesh) {
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\n"
         << "element vertex " << mesh.vertices.size() << "\n"
         << "property double x\nproperty double y\nproperty double z\n"
         << "element face " << mesh.faces.size() << "\n"
         << "property list uchar int vertex_indices\nend_header\n";
  std::string out = header.str();
  out.reserve(out.size() + mesh.vertices.size() * 24 + mesh.faces.size() * 13);
  auto put = [&out](const auto& value) {
    char buf[sizeof(value)];
    std::memcpy(buf, &value, sizeof(value));
    out.append(buf, sizeof(value));
  };
  for (const Vec3& v : mesh.vertices) {
    put(v.x());
    put(v.y());
    put(v.z());
  }
  for (const Face& f : mesh.faces) {
    put(static_cast<std::uint8_t>(3));
    for (int idx : f) put(static_cast<std::int32_t>(idx));
  }
  return out;
}

Mesh decode_ply(std::string_view bytes) {
  const std::size_t header_end = bytes.find("end_header");
  if (bytes.substr(0, 3) != "ply" || header_end == std::string_view::npos) throw IoError("not a PLY stream");
  std::size_t body = bytes.find('\n', header_end);
  if (body == std::string_view::npos) throw IoError("PLY header is not terminated");
  ++body;

  std::vector<PlyElement> elements;
  bool little_endian = false;
  std::size_t pos = 0;
  while (pos < header_end) {
    std::size_t end = bytes.find('\n', pos);
    const auto tokens = split_ws(bytes.substr(pos, end - pos));
    pos = end + 1;
    if (tokens.empty()) continue;
    if (tokens[0] == "format") {
      little_endian = tokens.size() >= 2 && tokens[1] == "binary_little_endian";
    } else if (tokens[0] == "element" && tokens.size() >= 3) {
      PlyElement e;
      e.name = std::string(tokens[1]);
      std::from_chars(tokens[2].data(), tokens[2].data() + tokens[2].size(), e.count);
      elements.push_back(std::move(e));
    } else if (tokens[0] == "property" && !elements.empty()) {
      PlyProperty p;
      if (tokens.size() >= 5 && tokens[1] == "list") {
        p.is_list = true;
        p.count_type = parse_ply_type(tokens[2]);
        p.type = parse_ply_type(tokens[3]);
        p.name = std::string(tokens[4]);
      } else if (tokens.size() >= 3) {
        p.type = parse_ply_type(tokens[1]);
        p.name = std::string(tokens[2]);
      }
      elements.back().properties.push_back(std::move(p));
    }
  }
  if (!little_endian) throw IoError("only binary_little_endian PLY is supported");

  Mesh mesh;
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  std::size_t cursor = body;
  auto need = [&](std::size_t n) {
    if (cursor + n > bytes.size()) throw IoError("truncated PLY body");
  };
  for (const PlyElement& e : elements) {
    for (std::size_t item = 0; item < e.count; ++item) {
      Vec3 p = Vec3::Zero();
      for (const PlyProperty& prop : e.properties) {
        if (prop.is_list) {
          need(ply_size(prop.count_type));
          const auto n = static_cast<std::size_t>(read_ply_value(prop.count_type, data + cursor));
          cursor += ply_size(prop.count_type);
          need(n * ply_size(prop.type));
          if (e.name == "face" && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
            std::vector<int> corners(n);
            for (std::size_t k = 0; k < n; ++k) {
              corners[k] = static_cast<int>(read_ply_value(prop.type, data + cursor + k * ply_size(prop.type)));
            }
            for (std::size_t k = 1; k + 1 < n; ++k) mesh.faces.push_back({corners[0], corners[k], corners[k + 1]});
          }
          cursor += n * ply_size(prop.type);
        } else {
          need(ply_size(prop.type));
          const double v = read_ply_value(prop.type, data + cursor);
          cursor += ply_size(prop.type);
          if (e.name == "vertex") {
            if (prop.name == "x") p.x() = v;
            if (prop.name == "y") p.y() = v;
            if (prop.name == "z") p.z() = v;
          }
        }
      }
      if (e.name == "vertex") mesh.vertices.push_back(p);
    }
  }
  mesh.validate();
  return mesh;
}

Mesh decode_mesh(std::string_view bytes) {
  if (bytes.substr(0, 3) == "ply") return decode_ply(bytes);
  return decode_obj(bytes);
}

Mesh read_mesh(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".ply") return decode_ply(bytes);
  if (ext == ".obj") return decode_obj(bytes);
  return decode_mesh(bytes);
}

void write_mesh(const std::filesystem::path& path, const Mesh& mesh) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  write_file_bytes(path, ext == ".ply" ? encode_ply(mesh) : encode_obj(mesh));
}

}  // namespace flowmesh
