#pragma once

#include <png.h>

#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mondepth/camera.hpp"
#include "mondepth/errors.hpp"
#include "mondepth/grid.hpp"

namespace mondepth {

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

// ---------------------------------------------------------------------------
// PFM. Header is "Pf" (grayscale) or "PF" (3-channel), a dimensions line, and
// a scale line whose sign encodes endianness (negative = little-endian).
// Samples are 32-bit floats, rows stored bottom-up.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string pfm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF && std::isspace(ch)) {
  }
  if (ch == EOF) throw io_error("pfm: truncated header");
  do {
    tok.push_back(char(ch));
  } while ((ch = in.get()) != EOF && !std::isspace(ch));
  return tok;
}

inline float swap_float(float f) {
  uint32_t u = std::bit_cast<uint32_t>(f);
  u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
  return std::bit_cast<float>(u);
}

inline void read_pfm_payload(const std::string& path, std::istream& in, int channels, int& w,
                             int& h, std::vector<float>& samples) {
  std::string magic = pfm_token(in);
  const char* want = channels == 1 ? "Pf" : "PF";
  if (magic != want)
    throw io_error("pfm: " + path + ": expected " + want + " header, got '" + magic + "'");
  int width, height;
  double scale;
  try {
    width = std::stoi(pfm_token(in));
    height = std::stoi(pfm_token(in));
    scale = std::stod(pfm_token(in));
  } catch (const std::exception&) {
    throw io_error("pfm: " + path + ": malformed header");
  }
  if (width <= 0 || height <= 0) throw io_error("pfm: " + path + ": bad dimensions");
  if (scale == 0.0) throw io_error("pfm: " + path + ": zero scale");
  samples.resize(size_t(width) * height * channels);
  in.read(reinterpret_cast<char*>(samples.data()), std::streamsize(samples.size() * 4));
  if (size_t(in.gcount()) != samples.size() * 4) throw io_error("pfm: " + path + ": truncated data");
  if (scale > 0.0)
    for (float& f : samples) f = swap_float(f);
  for (float f : samples)
    if (!std::isfinite(f)) throw io_error("pfm: " + path + ": non-finite sample");
  w = width;
  h = height;
}

inline void write_pfm_payload(const std::string& path, int w, int h, int channels,
                              const std::vector<float>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("pfm: cannot open " + path + " for writing");
  out << (channels == 1 ? "Pf" : "PF") << "\n" << w << " " << h << "\n-1.0\n";
  out.write(reinterpret_cast<const char*>(samples.data()), std::streamsize(samples.size() * 4));
  if (!out) throw io_error("pfm: write failed: " + path);
}

}  // namespace detail

inline ScalarGrid read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("pfm: cannot open " + path);
  int w, h;
  std::vector<float> samples;
  detail::read_pfm_payload(path, in, 1, w, h, samples);
  ScalarGrid g(w, h);
  for (int r = 0; r < h; ++r) {
    const float* row = samples.data() + size_t(h - 1 - r) * w;
    for (int c = 0; c < w; ++c) g.at(r, c) = double(row[c]);
  }
  return g;
}

inline void write_pfm(const std::string& path, const ScalarGrid& g) {
  if (!g.all_finite()) throw invalid_input("pfm: refusing to write non-finite values");
  std::vector<float> samples(g.size());
  for (int r = 0; r < g.height; ++r) {
    float* row = samples.data() + size_t(g.height - 1 - r) * g.width;
    for (int c = 0; c < g.width; ++c) row[c] = float(g.at(r, c));
  }
  detail::write_pfm_payload(path, g.width, g.height, 1, samples);
}

inline ImageGrid read_pfm3(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("pfm: cannot open " + path);
  int w, h;
  std::vector<float> samples;
  detail::read_pfm_payload(path, in, 3, w, h, samples);
  ImageGrid img(w, h, 3);
  for (int r = 0; r < h; ++r) {
    const float* row = samples.data() + size_t(h - 1 - r) * w * 3;
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < 3; ++ch) img.at(ch, r, c) = double(row[3 * c + ch]);
  }
  return img;
}

inline void write_pfm3(const std::string& path, const ImageGrid& img) {
  if (img.channel_count() != 3) throw invalid_input("pfm: 3-channel image required");
  std::vector<float> samples(size_t(img.width) * img.height * 3);
  for (int r = 0; r < img.height; ++r) {
    float* row = samples.data() + size_t(img.height - 1 - r) * img.width * 3;
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        double v = img.at(ch, r, c);
        if (!std::isfinite(v)) throw invalid_input("pfm: refusing to write non-finite values");
        row[3 * c + ch] = float(v);
      }
  }
  detail::write_pfm_payload(path, img.width, img.height, 3, samples);
}

inline void write_pfm_normals(const std::string& path, const NormalGrid& n) {
  ImageGrid img(n.width, n.height, 3);
  img.channels[0] = n.x;
  img.channels[1] = n.y;
  img.channels[2] = n.z;
  write_pfm3(path, img);
}

// Flips any vector with positive z to the camera-facing convention (z <= 0).
inline NormalGrid read_pfm_normals(const std::string& path) {
  ImageGrid img = read_pfm3(path);
  NormalGrid n(img.width, img.height);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      Vec3 v{img.at(0, r, c), img.at(1, r, c), img.at(2, r, c)};
      if (v.z > 0.0) v = -v;
      n.x.at(r, c) = v.x;
      n.y.at(r, c) = v.y;
      n.z.at(r, c) = v.z;
    }
  return n;
}

// ---------------------------------------------------------------------------
// PNG via libpng. 16-bit grayscale carries quantized depth (value = raw *
// value_scale), 8-bit grayscale carries masks (valid = nonzero), 8-bit RGB
// carries color in [0, 1].
// ---------------------------------------------------------------------------

namespace detail {

struct PngFile {
  std::FILE* fp = nullptr;
  ~PngFile() {
    if (fp) std::fclose(fp);
  }
};

struct PngRead {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngRead() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWrite {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWrite() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

// Decodes any grayscale/RGB/palette PNG to deinterlaced 16-bit RGB rows.
// Returns bit depth actually stored in the file (8 or 16 after expansion).
inline int read_png_rgb16(const std::string& path, int& width, int& height,
                          std::vector<uint16_t>& pixels) {
  PngFile file;
  file.fp = std::fopen(path.c_str(), "rb");
  if (!file.fp) throw io_error("png: cannot open " + path);
  PngRead ctx;
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw io_error("png: out of memory");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw io_error("png: out of memory");
  std::vector<png_bytep> rows;
  std::vector<uint8_t> buf;
  if (setjmp(png_jmpbuf(ctx.png))) throw io_error("png: failed to read " + path);
  png_init_io(ctx.png, file.fp);
  png_read_info(ctx.png, ctx.info);
  width = int(png_get_image_width(ctx.png, ctx.info));
  height = int(png_get_image_height(ctx.png, ctx.info));
  int bit_depth = png_get_bit_depth(ctx.png, ctx.info);
  int color_type = png_get_color_type(ctx.png, ctx.info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
  png_set_strip_alpha(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(ctx.png);
  if (bit_depth == 16) png_set_swap(ctx.png);
  png_set_interlace_handling(ctx.png);
  png_read_update_info(ctx.png, ctx.info);
  size_t rowbytes = png_get_rowbytes(ctx.png, ctx.info);
  buf.resize(rowbytes * size_t(height));
  rows.resize(size_t(height));
  for (int r = 0; r < height; ++r) rows[size_t(r)] = buf.data() + rowbytes * size_t(r);
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);

  pixels.resize(size_t(width) * height * 3);
  int out_depth = bit_depth == 16 ? 16 : 8;
  for (int r = 0; r < height; ++r) {
    if (out_depth == 16) {
      const uint16_t* src = reinterpret_cast<const uint16_t*>(rows[size_t(r)]);
      std::memcpy(pixels.data() + size_t(r) * width * 3, src, size_t(width) * 3 * 2);
    } else {
      const uint8_t* src = rows[size_t(r)];
      uint16_t* dst = pixels.data() + size_t(r) * width * 3;
      for (int i = 0; i < width * 3; ++i) dst[i] = src[i];
    }
  }
  return out_depth;
}

inline void write_png(const std::string& path, int width, int height, int color_type,
                      int bit_depth, const std::vector<uint8_t>& buf, size_t rowbytes) {
  PngFile file;
  file.fp = std::fopen(path.c_str(), "wb");
  if (!file.fp) throw io_error("png: cannot open " + path + " for writing");
  PngWrite ctx;
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw io_error("png: out of memory");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw io_error("png: out of memory");
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (int r = 0; r < height; ++r)
    rows[size_t(r)] = const_cast<uint8_t*>(buf.data()) + rowbytes * size_t(r);
  if (setjmp(png_jmpbuf(ctx.png))) throw io_error("png: failed to write " + path);
  png_init_io(ctx.png, file.fp);
  png_set_IHDR(ctx.png, ctx.info, png_uint_32(width), png_uint_32(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
  if (bit_depth == 16) png_set_swap(ctx.png);
  png_write_image(ctx.png, rows.data());
  png_write_end(ctx.png, nullptr);
}

}  // namespace detail

// Reads an 8- or 16-bit grayscale PNG as depth: value = raw * value_scale.
inline ScalarGrid read_png_gray(const std::string& path, double value_scale) {
  int w, h;
  std::vector<uint16_t> px;
  detail::read_png_rgb16(path, w, h, px);
  ScalarGrid g(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) g.at(r, c) = double(px[(size_t(r) * w + c) * 3]) * value_scale;
  return g;
}

inline void write_png_gray16(const std::string& path, const ScalarGrid& g, double value_scale) {
  if (value_scale <= 0.0) throw invalid_input("png: value_scale must be positive");
  std::vector<uint8_t> buf(size_t(g.width) * g.height * 2);
  uint16_t* out = reinterpret_cast<uint16_t*>(buf.data());
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) {
      double q = std::round(g.at(r, c) / value_scale);
      q = std::min(65535.0, std::max(0.0, q));
      out[size_t(r) * g.width + c] = uint16_t(q);
    }
  detail::write_png(path, g.width, g.height, PNG_COLOR_TYPE_GRAY, 16, buf, size_t(g.width) * 2);
}

inline ValidMask read_png_mask(const std::string& path) {
  int w, h;
  std::vector<uint16_t> px;
  detail::read_png_rgb16(path, w, h, px);
  ValidMask m(w, h, false);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) m.set(r, c, px[(size_t(r) * w + c) * 3] > 0);
  return m;
}

inline void write_png_mask(const std::string& path, const ValidMask& m) {
  std::vector<uint8_t> buf(size_t(m.width) * m.height);
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c) buf[size_t(r) * m.width + c] = m.at(r, c) ? 255 : 0;
  detail::write_png(path, m.width, m.height, PNG_COLOR_TYPE_GRAY, 8, buf, size_t(m.width));
}

inline ImageGrid read_png_rgb(const std::string& path) {
  int w, h;
  std::vector<uint16_t> px;
  int depth = detail::read_png_rgb16(path, w, h, px);
  double denom = depth == 16 ? 65535.0 : 255.0;
  ImageGrid img(w, h, 3);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < 3; ++ch)
        img.at(ch, r, c) = double(px[(size_t(r) * w + c) * 3 + ch]) / denom;
  return img;
}

inline void write_png_rgb(const std::string& path, const ImageGrid& img) {
  if (img.channel_count() != 3) throw invalid_input("png: 3-channel image required");
  std::vector<uint8_t> buf(size_t(img.width) * img.height * 3);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        double q = std::round(img.at(ch, r, c) * 255.0);
        buf[(size_t(r) * img.width + c) * 3 + ch] = uint8_t(std::min(255.0, std::max(0.0, q)));
      }
  detail::write_png(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 8, buf,
                    size_t(img.width) * 3);
}

// ---------------------------------------------------------------------------
// ASCII PLY point clouds, with optional per-vertex color.
// ---------------------------------------------------------------------------

inline void write_ply(const std::string& path, const PointCloud& cloud) {
  bool with_color = !cloud.colors.empty();
  if (with_color && cloud.colors.size() != cloud.points.size())
    throw invalid_input("ply: color count does not match point count");
  std::ofstream out(path);
  if (!out) throw io_error("ply: cannot open " + path + " for writing");
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << cloud.points.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (with_color)
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  char line[256];
  for (size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    if (with_color) {
      const Vec3& col = cloud.colors[i];
      auto q = [](double v) {
        return int(std::min(255.0, std::max(0.0, std::round(v * 255.0))));
      };
      std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %d %d %d\n", p.x, p.y, p.z, q(col.x),
                    q(col.y), q(col.z));
    } else {
      std::snprintf(line, sizeof(line), "%.9g %.9g %.9g\n", p.x, p.y, p.z);
    }
    out << line;
  }
  if (!out) throw io_error("ply: write failed: " + path);
}

}  // namespace mondepth
