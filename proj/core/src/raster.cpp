#include "flowmesh/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "flowmesh/errors.hpp"

namespace flowmesh {

double DepthMap::mean() const {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

void DepthMap::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("depth map must have positive width and height");
  if (values.size() != static_cast<std::size_t>(width) * height) {
    throw ConfigError("depth map holds " + std::to_string(values.size()) + " values for " + std::to_string(width) +
                      "x" + std::to_string(height) + " pixels");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0 && values[i] <= 1.0)) {
      throw ConfigError("depth value at index " + std::to_string(i) + " is outside [0, 1]");
    }
  }
}

BinaryMask::BinaryMask(int w, int h, bool value)
    : width(w), height(h), bits(static_cast<std::size_t>(w) * h, value ? 1 : 0) {}

bool BinaryMask::contains(double x, double y) const {
  const long col = std::lround(x);
  const long row = std::lround(y);
  if (col < 0 || row < 0 || col >= width || row >= height) return false;
  return at(static_cast<int>(row), static_cast<int>(col));
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

PixelBox BinaryMask::bounding_box() const {
  PixelBox box{height, -1, width, -1};
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (!at(r, c)) continue;
      box.row_min = std::min(box.row_min, r);
      box.row_max = std::max(box.row_max, r);
      box.col_min = std::min(box.col_min, c);
      box.col_max = std::max(box.col_max, c);
    }
  }
  return box;
}

namespace {

struct GrayRaster {
  int width = 0;
  int height = 0;
  int max_value = 255;
  std::vector<std::uint16_t> samples;
};

bool has_png_signature(std::string_view bytes) {
  return bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0;
}

struct MemoryReader {
  std::string_view bytes;
  std::size_t offset = 0;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t length) {
  auto* reader = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (reader->offset + length > reader->bytes.size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, reader->bytes.data() + reader->offset, length);
  reader->offset += length;
}

void write_to_string(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), length);
}

void flush_noop(png_structp) {}

// libpng reports errors via longjmp, so everything touched after setjmp lives
// on the heap behind a pointer that is never reassigned.
struct PngReadContext {
  MemoryReader reader;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  GrayRaster raster;
};

GrayRaster decode_png_gray(std::string_view bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng: cannot allocate info struct");
  }
  auto ctx = std::make_unique<PngReadContext>();
  ctx->reader.bytes = bytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("malformed PNG data");
  }
  png_set_read_fn(png, &ctx->reader, read_from_memory);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const png_size_t stride = png_get_rowbytes(png, info);
  ctx->buffer.resize(stride * height);
  ctx->rows.resize(height);
  for (png_uint_32 r = 0; r < height; ++r) ctx->rows[r] = ctx->buffer.data() + r * stride;
  png_read_image(png, ctx->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  GrayRaster& raster = ctx->raster;
  raster.width = static_cast<int>(width);
  raster.height = static_cast<int>(height);
  raster.max_value = depth == 16 ? 65535 : 255;
  raster.samples.resize(static_cast<std::size_t>(width) * height);
  for (png_uint_32 r = 0; r < height; ++r) {
    const png_byte* row = ctx->rows[r];
    for (png_uint_32 c = 0; c < width; ++c) {
      raster.samples[static_cast<std::size_t>(r) * width + c] =
          depth == 16 ? static_cast<std::uint16_t>((row[2 * c] << 8) | row[2 * c + 1]) : row[c];
    }
  }
  return std::move(ctx->raster);
}

struct PngWriteContext {
  std::string out;
  std::vector<png_byte> row;
};

std::string encode_png_gray(const GrayRaster& raster, int bit_depth) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng: cannot allocate write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng: cannot allocate info struct");
  }
  auto ctx = std::make_unique<PngWriteContext>();
  const int bytes_per_sample = bit_depth / 8;
  ctx->row.resize(static_cast<std::size_t>(raster.width) * bytes_per_sample);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed");
  }
  png_set_write_fn(png, &ctx->out, write_to_string, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height), bit_depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < raster.height; ++r) {
    for (int c = 0; c < raster.width; ++c) {
      const std::uint16_t v = raster.samples[static_cast<std::size_t>(r) * raster.width + c];
      if (bit_depth == 16) {
        ctx->row[2 * c] = static_cast<png_byte>(v >> 8);
        ctx->row[2 * c + 1] = static_cast<png_byte>(v & 0xff);
      } else {
        ctx->row[c] = static_cast<png_byte>(v);
      }
    }
    png_write_row(png, ctx->row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(ctx->out);
}

// Netpbm header token reader; skips whitespace and '#' comments.
std::string_view next_token(std::string_view bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char ch = bytes[pos];
    if (ch == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(ch))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  return bytes.substr(start, pos - start);
}

int parse_header_int(std::string_view token) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || value <= 0) {
    throw IoError("malformed PGM header field '" + std::string(token) + "'");
  }
  return value;
}

GrayRaster decode_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P5") throw IoError("not a binary PGM (P5) stream");
  GrayRaster raster;
  raster.width = parse_header_int(next_token(bytes, pos));
  raster.height = parse_header_int(next_token(bytes, pos));
  raster.max_value = parse_header_int(next_token(bytes, pos));
  if (raster.max_value > 65535) throw IoError("PGM maxval exceeds 65535");
  ++pos;  // single whitespace byte after maxval
  const int bps = raster.max_value < 256 ? 1 : 2;
  const std::size_t count = static_cast<std::size_t>(raster.width) * raster.height;
  if (bytes.size() < pos + count * bps) throw IoError("truncated PGM pixel data");
  raster.samples.resize(count);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < count; ++i) {
    raster.samples[i] =
        bps == 2 ? static_cast<std::uint16_t>((data[2 * i] << 8) | data[2 * i + 1]) : static_cast<std::uint16_t>(data[i]);
  }
  return raster;
}

std::string encode_pgm(const GrayRaster& raster) {
  std::string out = "P5\n" + std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n" +
                    std::to_string(raster.max_value) + "\n";
  const bool wide = raster.max_value >= 256;
  for (std::uint16_t v : raster.samples) {
    if (wide) out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

GrayRaster decode_gray(std::string_view bytes) {
  if (has_png_signature(bytes)) return decode_png_gray(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
  throw IoError("unsupported image format (expected PNG or binary PGM)");
}

GrayRaster quantize_depth(const DepthMap& depth) {
  depth.validate();
  GrayRaster raster{depth.width, depth.height, 65535, {}};
  raster.samples.reserve(depth.values.size());
  for (double v : depth.values) raster.samples.push_back(static_cast<std::uint16_t>(std::lround(v * 65535.0)));
  return raster;
}

GrayRaster mask_raster(const BinaryMask& mask) {
  GrayRaster raster{mask.width, mask.height, 255, {}};
  raster.samples.reserve(mask.bits.size());
  for (auto b : mask.bits) raster.samples.push_back(b ? 255 : 0);
  return raster;
}

}  // namespace

DepthMap decode_depth(std::string_view bytes) {
  const GrayRaster raster = decode_gray(bytes);
  DepthMap depth{raster.width, raster.height, {}};
  depth.values.reserve(raster.samples.size());
  const double scale = 1.0 / raster.max_value;
  for (auto s : raster.samples) depth.values.push_back(std::min(1.0, s * scale));
  return depth;
}

DepthMap read_depth(const std::filesystem::path& path) { return decode_depth(read_file_bytes(path)); }

BinaryMask decode_mask(std::string_view bytes) {
  if (is_inline_rle(bytes)) return decode_mask_rle(bytes);
  const GrayRaster raster = decode_gray(bytes);
  BinaryMask mask(raster.width, raster.height);
  for (std::size_t i = 0; i < raster.samples.size(); ++i) mask.bits[i] = raster.samples[i] != 0 ? 1 : 0;
  return mask;
}

BinaryMask read_mask(const std::filesystem::path& path) { return decode_mask(read_file_bytes(path)); }

std::string encode_depth_pgm(const DepthMap& depth) { return encode_pgm(quantize_depth(depth)); }
std::string encode_depth_png(const DepthMap& depth) { return encode_png_gray(quantize_depth(depth), 16); }
std::string encode_mask_png(const BinaryMask& mask) { return encode_png_gray(mask_raster(mask), 8); }
std::string encode_mask_pgm(const BinaryMask& mask) { return encode_pgm(mask_raster(mask)); }

bool is_inline_rle(std::string_view text) { return text.substr(0, 4) == "rle:"; }

std::string encode_mask_rle(const BinaryMask& mask) {
  std::ostringstream out;
  out << "rle:" << mask.width << "x" << mask.height << ":";
  bool current = false;
  std::size_t run = 0;
  bool first = true;
  for (auto b : mask.bits) {
    const bool set = b != 0;
    if (set == current) {
      ++run;
      continue;
    }
    out << (first ? "" : ",") << run;
    first = false;
    current = set;
    run = 1;
  }
  out << (first ? "" : ",") << run;
  return out.str();
}

BinaryMask decode_mask_rle(std::string_view text) {
  if (!is_inline_rle(text)) throw IoError("inline mask must start with 'rle:'");
  text.remove_prefix(4);
  const auto x = text.find('x');
  const auto colon = text.find(':');
  if (x == std::string_view::npos || colon == std::string_view::npos || x > colon) {
    throw IoError("inline mask header must look like rle:<W>x<H>:");
  }
  const int width = parse_header_int(text.substr(0, x));
  const int height = parse_header_int(text.substr(x + 1, colon - x - 1));
  BinaryMask mask(width, height);
  std::string_view runs = text.substr(colon + 1);
  std::size_t offset = 0;
  bool set = false;
  while (!runs.empty()) {
    const auto comma = runs.find(',');
    const std::string_view token = runs.substr(0, comma);
    std::size_t run = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), run);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw IoError("malformed run length '" + std::string(token) + "' in inline mask");
    }
    if (offset + run > mask.bits.size()) throw IoError("inline mask runs exceed the declared image size");
    std::fill_n(mask.bits.begin() + static_cast<std::ptrdiff_t>(offset), run, set ? 1 : 0);
    offset += run;
    set = !set;
    if (comma == std::string_view::npos) break;
    runs.remove_prefix(comma + 1);
  }
  if (offset != mask.bits.size()) throw IoError("inline mask runs do not cover the declared image size");
  return mask;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace flowmesh
