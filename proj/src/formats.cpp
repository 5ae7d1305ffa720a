#include "da/formats.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <csetjmp>
#include <limits>
#include <memory>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "file readers assume a little-endian host");

namespace da {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path + "'");
  return f;
}

// --- PNM helpers -----------------------------------------------------------

// Reads one whitespace/comment-separated token from a PNM header.
std::string pnm_token(std::FILE* f, const std::string& path) {
  std::string tok;
  int c = 0;
  while ((c = std::fgetc(f)) != EOF) {
    if (c == '#') {
      while ((c = std::fgetc(f)) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw IoError("truncated header in '" + path + "'");
  return tok;
}

int pnm_int(std::FILE* f, const std::string& path) {
  const std::string tok = pnm_token(f, path);
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw FormatError("bad header field '" + tok + "' in '" + path + "'");
  }
}

Image read_pgm(std::FILE* f, const std::string& path) {
  // "P5" magic already consumed by the caller.
  const int width = pnm_int(f, path);
  const int height = pnm_int(f, path);
  const int maxval = pnm_int(f, path);
  if (width <= 0 || height <= 0)
    throw FormatError("bad dimensions in '" + path + "'");
  if (maxval != 255)
    throw FormatError("only 8-bit PGM supported, maxval=" +
                      std::to_string(maxval) + " in '" + path + "'");
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(width) * height);
  if (std::fread(raw.data(), 1, raw.size(), f) != raw.size())
    throw IoError("truncated pixel data in '" + path + "'");
  Image img(width, height);
  for (std::size_t i = 0; i < raw.size(); ++i)
    img.data[i] = static_cast<float>(raw[i]) / 255.0f;
  return img;
}

void write_pgm(const Image& img, const std::string& path) {
  FilePtr f = open_file(path, "wb");
  const std::string header = "P5\n" + std::to_string(img.width) + " " +
                             std::to_string(img.height) + "\n255\n";
  if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size())
    throw IoError("write failure on '" + path + "'");
  std::vector<std::uint8_t> raw(img.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const float v = img.data[i];
    const int q = static_cast<int>(std::lround(v * 255.0f));
    raw[i] = static_cast<std::uint8_t>(q < 0 ? 0 : (q > 255 ? 255 : q));
  }
  if (std::fwrite(raw.data(), 1, raw.size(), f.get()) != raw.size())
    throw IoError("write failure on '" + path + "'");
}

// --- PNG helpers -----------------------------------------------------------

// libpng reports errors via longjmp; the guarded helpers below keep only
// trivially-destructible locals between setjmp and the png calls, and the
// C++ wrappers turn a failed phase into an exception afterwards.

void png_warn_fn(png_structp, png_const_charp) {}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngReader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                 png_warn_fn);
    if (png) info = png_create_info_struct(png);
    if (!png || !info) throw IoError("libpng allocation failure");
  }
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngWriter() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                  png_warn_fn);
    if (png) info = png_create_info_struct(png);
    if (!png || !info) throw IoError("libpng allocation failure");
  }
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

struct PngHeader {
  int width = 0, height = 0, bit_depth = 0, channels = 0;
};

bool png_read_header_guarded(png_structp png, png_infop info, std::FILE* f,
                             PngHeader* out) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, f);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  png_set_swap(png);  // file payload is big-endian; host is little-endian
  png_read_update_info(png, info);
  out->width = static_cast<int>(png_get_image_width(png, info));
  out->height = static_cast<int>(png_get_image_height(png, info));
  out->bit_depth = png_get_bit_depth(png, info);
  out->channels = png_get_channels(png, info);
  return true;
}

bool png_read_rows_guarded(png_structp png, png_bytep* rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  return true;
}

bool png_write_guarded(png_structp png, png_infop info, std::FILE* f,
                       int width, int height, int bit_depth, png_bytep* rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, f);
  png_set_IHDR(png, info, width, height, bit_depth, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  return true;
}

// Decodes a PNG into 16-bit-per-sample rows; reports original bit depth and
// channel count after palette/alpha normalization.
struct PngPixels {
  int width = 0, height = 0, bit_depth = 0, channels = 0;
  std::vector<std::uint16_t> samples;  // row-major, interleaved channels
};

PngPixels read_png_pixels(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  std::uint8_t sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8)
    throw IoError("truncated file '" + path + "'");
  if (png_sig_cmp(sig, 0, 8) != 0)
    throw FormatError("not a PNG file: '" + path + "'");

  PngReader r;
  PngHeader hdr;
  if (!png_read_header_guarded(r.png, r.info, f.get(), &hdr))
    throw FormatError("malformed PNG header in '" + path + "'");
  if (hdr.width <= 0 || hdr.height <= 0)
    throw FormatError("bad dimensions in '" + path + "'");
  if (hdr.bit_depth != 8 && hdr.bit_depth != 16)
    throw FormatError("unsupported PNG bit depth " +
                      std::to_string(hdr.bit_depth) + " in '" + path + "'");

  PngPixels out;
  out.width = hdr.width;
  out.height = hdr.height;
  out.bit_depth = hdr.bit_depth;
  out.channels = hdr.channels;
  const std::size_t row_samples =
      static_cast<std::size_t>(out.width) * out.channels;
  out.samples.resize(row_samples * out.height);

  bool ok = false;
  if (out.bit_depth == 16) {
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y)
      rows[y] = reinterpret_cast<png_bytep>(&out.samples[y * row_samples]);
    ok = png_read_rows_guarded(r.png, rows.data());
  } else {
    std::vector<std::uint8_t> raw(row_samples * out.height);
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = &raw[y * row_samples];
    ok = png_read_rows_guarded(r.png, rows.data());
    for (std::size_t i = 0; i < raw.size(); ++i) out.samples[i] = raw[i];
  }
  if (!ok) throw IoError("failed to decode PNG pixel data in '" + path + "'");
  return out;
}

bool has_png_signature(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  std::uint8_t sig[8];
  const std::size_t n = std::fread(sig, 1, 8, f.get());
  return n == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

void write_png_gray(const std::string& path, int width, int height,
                    int bit_depth, const void* rows_base,
                    std::size_t row_bytes) {
  FilePtr f = open_file(path, "wb");
  PngWriter w;
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(
        static_cast<const std::uint8_t*>(rows_base) + y * row_bytes);
  if (!png_write_guarded(w.png, w.info, f.get(), width, height, bit_depth,
                         rows.data()))
    throw IoError("failed to encode PNG '" + path + "'");
}

// --- PFM helpers -----------------------------------------------------------

// Middlebury Pf: grayscale float32, bottom-up scanlines, negative scale
// factor means little-endian payload.
void write_pfm_grid(const std::vector<float>& data, int width, int height,
                    const std::string& path) {
  FilePtr f = open_file(path, "wb");
  const std::string header =
      "Pf\n" + std::to_string(width) + " " + std::to_string(height) + "\n-1.0\n";
  if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size())
    throw IoError("write failure on '" + path + "'");
  for (int y = height - 1; y >= 0; --y) {
    const float* row = &data[static_cast<std::size_t>(y) * width];
    if (std::fwrite(row, sizeof(float), width, f.get()) !=
        static_cast<std::size_t>(width))
      throw IoError("write failure on '" + path + "'");
  }
}

std::vector<float> read_pfm_grid(const std::string& path, int* out_w,
                                 int* out_h) {
  FilePtr f = open_file(path, "rb");
  const std::string magic = pnm_token(f.get(), path);
  if (magic == "PF")
    throw FormatError("color PFM not supported: '" + path + "'");
  if (magic != "Pf") throw FormatError("not a PFM file: '" + path + "'");
  const int width = pnm_int(f.get(), path);
  const int height = pnm_int(f.get(), path);
  if (width <= 0 || height <= 0)
    throw FormatError("bad dimensions in '" + path + "'");
  double scale = 0.0;
  try {
    scale = std::stod(pnm_token(f.get(), path));
  } catch (const std::exception&) {
    throw FormatError("bad scale factor in '" + path + "'");
  }
  if (scale == 0.0) throw FormatError("zero scale factor in '" + path + "'");
  const bool little_endian = scale < 0.0;

  std::vector<float> data(static_cast<std::size_t>(width) * height);
  std::vector<float> row(width);
  for (int y = height - 1; y >= 0; --y) {
    if (std::fread(row.data(), sizeof(float), width, f.get()) !=
        static_cast<std::size_t>(width))
      throw IoError("truncated pixel data in '" + path + "'");
    if (!little_endian) {
      for (float& v : row) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        bits = __builtin_bswap32(bits);
        std::memcpy(&v, &bits, 4);
      }
    }
    std::memcpy(&data[static_cast<std::size_t>(y) * width], row.data(),
                static_cast<std::size_t>(width) * sizeof(float));
  }
  *out_w = width;
  *out_h = height;
  return data;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

// ---------------------------------------------------------------------------

Image read_image(const std::string& path) {
  {
    FilePtr probe = open_file(path, "rb");
    char magic[2] = {0, 0};
    if (std::fread(magic, 1, 2, probe.get()) != 2)
      throw IoError("truncated file '" + path + "'");
    if (magic[0] == 'P' && magic[1] == '5')
      return read_pgm(probe.get(), path);
  }
  if (!has_png_signature(path))
    throw FormatError("unsupported image encoding in '" + path + "'");

  PngPixels px = read_png_pixels(path);
  if (px.bit_depth != 8)
    throw FormatError("images must be 8-bit, got " +
                      std::to_string(px.bit_depth) + "-bit in '" + path + "'");
  Image img(px.width, px.height);
  const std::size_t n = img.size();
  if (px.channels == 1) {
    for (std::size_t i = 0; i < n; ++i)
      img.data[i] = static_cast<float>(px.samples[i]) / 255.0f;
  } else if (px.channels == 3) {
    for (std::size_t i = 0; i < n; ++i) {
      const float sum = static_cast<float>(px.samples[3 * i]) +
                        static_cast<float>(px.samples[3 * i + 1]) +
                        static_cast<float>(px.samples[3 * i + 2]);
      img.data[i] = sum / (3.0f * 255.0f);
    }
  } else {
    throw FormatError("unsupported channel count " +
                      std::to_string(px.channels) + " in '" + path + "'");
  }
  return img;
}

void write_image(const Image& img, const std::string& path) {
  if (ends_with(path, ".pgm")) {
    write_pgm(img, path);
    return;
  }
  if (!ends_with(path, ".png"))
    throw ArgumentError("write_image: unsupported extension on '" + path +
                        "'");
  std::vector<std::uint8_t> raw(img.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const int q = static_cast<int>(std::lround(img.data[i] * 255.0f));
    raw[i] = static_cast<std::uint8_t>(q < 0 ? 0 : (q > 255 ? 255 : q));
  }
  write_png_gray(path, img.width, img.height, 8, raw.data(),
                 static_cast<std::size_t>(img.width));
}

DisparityMap read_disparity(const std::string& path, DisparityFormat format) {
  if (format == DisparityFormat::kitti_png16) {
    PngPixels px = read_png_pixels(path);
    if (px.bit_depth != 16 || px.channels != 1)
      throw FormatError("kitti-png16 expects 16-bit grayscale: '" + path +
                        "'");
    DisparityMap map(px.width, px.height);
    for (std::size_t i = 0; i < map.size(); ++i) {
      const std::uint16_t stored = px.samples[i];
      map.data[i] = stored == 0 ? kInvalidDisparity
                                : static_cast<float>(stored) / 256.0f;
    }
    return map;
  }

  int w = 0, h = 0;
  std::vector<float> grid = read_pfm_grid(path, &w, &h);
  DisparityMap map(w, h);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const float v = grid[i];
    if (!std::isfinite(v) || v < 0.0f) {
      map.data[i] = kInvalidDisparity;
    } else {
      if (v > 32768.0f)
        throw RangeError("disparity " + std::to_string(v) +
                         " exceeds 2^15 in '" + path + "'");
      map.data[i] = v;
    }
  }
  return map;
}

void write_disparity(const DisparityMap& map, const std::string& path,
                     DisparityFormat format) {
  if (format == DisparityFormat::kitti_png16) {
    std::vector<std::uint16_t> raw(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
      const float d = map.data[i];
      if (d < 0.0f) {
        raw[i] = 0;
        continue;
      }
      const long q = std::lround(static_cast<double>(d) * 256.0);
      if (q > 65535)
        throw RangeError("disparity " + std::to_string(d) +
                         " not encodable as kitti-png16");
      raw[i] = static_cast<std::uint16_t>(q);
    }
    write_png_gray(path, map.width, map.height, 16, raw.data(),
                   static_cast<std::size_t>(map.width) * 2);
    return;
  }

  std::vector<float> grid(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const float d = map.data[i];
    grid[i] = d < 0.0f ? std::numeric_limits<float>::infinity() : d;
  }
  write_pfm_grid(grid, map.width, map.height, path);
}

void write_pfm(const std::vector<float>& data, int width, int height,
               const std::string& path) {
  if (data.size() != static_cast<std::size_t>(width) * height)
    throw ShapeMismatch("write_pfm: data size does not match dimensions");
  write_pfm_grid(data, width, height, path);
}

ConfidenceMap read_confidence(const std::string& path) {
  int w = 0, h = 0;
  std::vector<float> grid = read_pfm_grid(path, &w, &h);
  ConfidenceMap conf(w, h);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    float v = grid[i];
    if (!std::isfinite(v)) v = 0.0f;
    conf.data[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  }
  return conf;
}

void write_confidence(const ConfidenceMap& conf, const std::string& path) {
  write_pfm_grid(conf.data, conf.width, conf.height, path);
}

void write_mask(const std::vector<std::uint8_t>& mask, int width, int height,
                const std::string& path) {
  if (mask.size() != static_cast<std::size_t>(width) * height)
    throw ShapeMismatch("write_mask: data size does not match dimensions");
  Image img(width, height);
  for (std::size_t i = 0; i < mask.size(); ++i)
    img.data[i] = mask[i] ? 1.0f : 0.0f;
  write_pgm(img, path);
}

std::vector<std::uint8_t> read_mask(const std::string& path, int* width,
                                    int* height) {
  FilePtr f = open_file(path, "rb");
  char magic[2] = {0, 0};
  if (std::fread(magic, 1, 2, f.get()) != 2 || magic[0] != 'P' ||
      magic[1] != '5')
    throw FormatError("mask must be a P5 PGM: '" + path + "'");
  Image img = read_pgm(f.get(), path);
  std::vector<std::uint8_t> mask(img.size());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = img.data[i] > 0.5f ? 1 : 0;
  if (width) *width = img.width;
  if (height) *height = img.height;
  return mask;
}

}  // namespace da
