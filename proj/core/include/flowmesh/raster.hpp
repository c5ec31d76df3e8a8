#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace flowmesh {

/// Row-major depth samples normalized to [0, 1]; larger values are nearer.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
  double mean() const;
  /// Throws ConfigError on size mismatch or values outside [0, 1].
  void validate() const;
};

struct PixelBox {
  int row_min = 0;
  int row_max = -1;
  int col_min = 0;
  int col_max = -1;
  bool empty() const { return row_max < row_min || col_max < col_min; }
};

/// Image-sized binary mask; nonzero means set.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h, bool value = false);

  bool at(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col] != 0; }
  void set(int row, int col, bool value = true) {
    bits[static_cast<std::size_t>(row) * width + col] = value ? 1 : 0;
  }
  /// Out-of-image coordinates read as unset.
  bool contains(double x, double y) const;
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  PixelBox bounding_box() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// 8-bit image with interleaved channels.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int row, int col, int ch = 0) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
};

// Codecs. Depth: 16-bit grayscale PNG or binary PGM (P5, 8- or 16-bit big-endian),
// linearly normalized by the format maximum. Masks: 8-bit PNG or PGM, nonzero set.

DepthMap decode_depth(std::string_view bytes);
DepthMap read_depth(const std::filesystem::path& path);
BinaryMask decode_mask(std::string_view bytes);
BinaryMask read_mask(const std::filesystem::path& path);

/// Depth quantized to 16 bits (value * 65535, rounded) as P5.
std::string encode_depth_pgm(const DepthMap& depth);
std::string encode_depth_png(const DepthMap& depth);
std::string encode_mask_png(const BinaryMask& mask);
std::string encode_mask_pgm(const BinaryMask& mask);

/// Inline run-length mask text: "rle:<W>x<H>:<n0>,<n1>,..." with alternating
/// runs in row-major order, starting with an unset run (which may be 0).
std::string encode_mask_rle(const BinaryMask& mask);
BinaryMask decode_mask_rle(std::string_view text);
bool is_inline_rle(std::string_view text);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace flowmesh
