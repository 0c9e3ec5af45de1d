#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mondepth/errors.hpp"

namespace mondepth {

// Row-major 2D grid of doubles. Row 0 is the top image row.
struct ScalarGrid {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  ScalarGrid() = default;
  ScalarGrid(int w, int h, double fill = 0.0) : width(w), height(h) {
    if (w <= 0 || h <= 0) throw invalid_input("grid dimensions must be positive");
    data.assign(size_t(w) * size_t(h), fill);
  }

  double& at(int r, int c) { return data[size_t(r) * width + c]; }
  double at(int r, int c) const { return data[size_t(r) * width + c]; }
  size_t size() const { return data.size(); }
  bool same_shape(const ScalarGrid& o) const { return width == o.width && height == o.height; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

struct ValidMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> flags;  // nonzero = valid

  ValidMask() = default;
  ValidMask(int w, int h, bool valid = true) : width(w), height(h) {
    if (w <= 0 || h <= 0) throw invalid_input("mask dimensions must be positive");
    flags.assign(size_t(w) * size_t(h), valid ? 1 : 0);
  }

  bool at(int r, int c) const { return flags[size_t(r) * width + c] != 0; }
  void set(int r, int c, bool v) { flags[size_t(r) * width + c] = v ? 1 : 0; }
  size_t size() const { return flags.size(); }

  int count_valid() const {
    int n = 0;
    for (uint8_t f : flags) n += f != 0;
    return n;
  }
};

// Planar multi-channel image, each channel a ScalarGrid of identical shape.
struct ImageGrid {
  int width = 0;
  int height = 0;
  std::vector<ScalarGrid> channels;

  ImageGrid() = default;
  ImageGrid(int w, int h, int ch, double fill = 0.0) : width(w), height(h) {
    if (ch <= 0) throw invalid_input("channel count must be positive");
    channels.assign(size_t(ch), ScalarGrid(w, h, fill));
  }

  int channel_count() const { return int(channels.size()); }
  double& at(int ch, int r, int c) { return channels[size_t(ch)].at(r, c); }
  double at(int ch, int r, int c) const { return channels[size_t(ch)].at(r, c); }
};

// Per-pixel unit normals in camera space, stored as 3 channels (x, y, z).
// Orientation convention: z <= 0 (facing the camera).
struct NormalGrid {
  int width = 0;
  int height = 0;
  ScalarGrid x, y, z;

  NormalGrid() = default;
  NormalGrid(int w, int h) : width(w), height(h), x(w, h), y(w, h), z(w, h) {}
};

inline void require_same_shape(const ScalarGrid& a, const ScalarGrid& b, const char* what) {
  if (!a.same_shape(b))
    throw invalid_input(std::string(what) + ": shape mismatch " + std::to_string(a.width) + "x" +
                        std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                        std::to_string(b.height));
}

inline void require_mask_shape(const ScalarGrid& g, const ValidMask& m, const char* what) {
  if (g.width != m.width || g.height != m.height)
    throw invalid_input(std::string(what) + ": mask shape mismatch");
}

// Bilinear resize with corner alignment: output corners sample input corners
// exactly, so resizing to the same dimensions is the identity.
inline ScalarGrid resize_bilinear(const ScalarGrid& in, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw invalid_input("resize: output dimensions must be positive");
  if (in.width < 1 || in.height < 1) throw invalid_input("resize: empty input");
  ScalarGrid out(out_w, out_h);
  double sx = out_w > 1 ? double(in.width - 1) / double(out_w - 1) : 0.0;
  double sy = out_h > 1 ? double(in.height - 1) / double(out_h - 1) : 0.0;
  for (int r = 0; r < out_h; ++r) {
    double fy = r * sy;
    int y0 = int(fy);
    if (y0 > in.height - 2) y0 = in.height - 2;
    if (y0 < 0) y0 = 0;
    double wy = in.height > 1 ? fy - y0 : 0.0;
    for (int c = 0; c < out_w; ++c) {
      double fx = c * sx;
      int x0 = int(fx);
      if (x0 > in.width - 2) x0 = in.width - 2;
      if (x0 < 0) x0 = 0;
      double wx = in.width > 1 ? fx - x0 : 0.0;
      int x1 = in.width > 1 ? x0 + 1 : x0;
      int y1 = in.height > 1 ? y0 + 1 : y0;
      double top = in.at(y0, x0) * (1.0 - wx) + in.at(y0, x1) * wx;
      double bot = in.at(y1, x0) * (1.0 - wx) + in.at(y1, x1) * wx;
      out.at(r, c) = top * (1.0 - wy) + bot * wy;
    }
  }
  return out;
}

inline ImageGrid resize_bilinear(const ImageGrid& in, int out_w, int out_h) {
  ImageGrid out;
  out.width = out_w;
  out.height = out_h;
  for (const auto& ch : in.channels) out.channels.push_back(resize_bilinear(ch, out_w, out_h));
  return out;
}

// Area (box) resample: each output pixel averages the source rectangle it
// covers, with fractional edge weights. Meant for downscaling.
inline ScalarGrid resize_area(const ScalarGrid& in, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw invalid_input("resize: output dimensions must be positive");
  ScalarGrid out(out_w, out_h);
  double rx = double(in.width) / out_w;
  double ry = double(in.height) / out_h;
  for (int r = 0; r < out_h; ++r) {
    double y0 = r * ry, y1 = (r + 1) * ry;
    int iy0 = int(y0), iy1 = std::min(in.height - 1, int(std::ceil(y1)) - 1);
    for (int c = 0; c < out_w; ++c) {
      double x0 = c * rx, x1 = (c + 1) * rx;
      int ix0 = int(x0), ix1 = std::min(in.width - 1, int(std::ceil(x1)) - 1);
      double acc = 0.0, wsum = 0.0;
      for (int y = iy0; y <= iy1; ++y) {
        double wy = std::min(y1, double(y + 1)) - std::max(y0, double(y));
        for (int x = ix0; x <= ix1; ++x) {
          double wx = std::min(x1, double(x + 1)) - std::max(x0, double(x));
          acc += wy * wx * in.at(y, x);
          wsum += wy * wx;
        }
      }
      out.at(r, c) = wsum > 0.0 ? acc / wsum : 0.0;
    }
  }
  return out;
}

struct DownsampleResult {
  ScalarGrid grid;
  ValidMask mask;
};

// Mask-aware 2x2 box downsample. Output pixel = mean of the valid pixels in
// its block; blocks with no valid pixel become invalid. Odd trailing rows or
// columns form partial blocks. Output dims are ceil(dim / 2).
inline DownsampleResult downsample_by_2(const ScalarGrid& in, const ValidMask& mask) {
  require_mask_shape(in, mask, "downsample_by_2");
  if (in.width < 2 || in.height < 2) throw invalid_input("downsample_by_2: dimensions must be >= 2");
  int ow = (in.width + 1) / 2;
  int oh = (in.height + 1) / 2;
  DownsampleResult out{ScalarGrid(ow, oh), ValidMask(ow, oh, false)};
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      int n = 0;
      for (int dr = 0; dr < 2; ++dr) {
        int y = 2 * r + dr;
        if (y >= in.height) continue;
        for (int dc = 0; dc < 2; ++dc) {
          int x = 2 * c + dc;
          if (x >= in.width) continue;
          if (!mask.at(y, x)) continue;
          acc += in.at(y, x);
          ++n;
        }
      }
      if (n > 0) {
        out.grid.at(r, c) = acc / n;
        out.mask.set(r, c, true);
      }
    }
  }
  return out;
}

inline ScalarGrid downsample_by_2(const ScalarGrid& in) {
  return downsample_by_2(in, ValidMask(in.width, in.height, true)).grid;
}

// Backward pass of the mask-aware downsample: routes a gradient at the coarse
// level to the fine level through the same averaging weights.
inline ScalarGrid downsample_by_2_backward(const ScalarGrid& coarse_grad, const ValidMask& fine_mask) {
  int w = fine_mask.width, h = fine_mask.height;
  ScalarGrid out(w, h, 0.0);
  int ow = coarse_grad.width;
  for (int r = 0; r < coarse_grad.height; ++r) {
    for (int c = 0; c < ow; ++c) {
      int n = 0;
      for (int dr = 0; dr < 2; ++dr)
        for (int dc = 0; dc < 2; ++dc) {
          int y = 2 * r + dr, x = 2 * c + dc;
          if (y < h && x < w && fine_mask.at(y, x)) ++n;
        }
      if (n == 0) continue;
      double g = coarse_grad.at(r, c) / n;
      for (int dr = 0; dr < 2; ++dr)
        for (int dc = 0; dc < 2; ++dc) {
          int y = 2 * r + dr, x = 2 * c + dc;
          if (y < h && x < w && fine_mask.at(y, x)) out.at(y, x) += g;
        }
    }
  }
  return out;
}

// Min-propagates a per-pixel bound from the coarse level to every fine pixel
// feeding it. Averaging weights are <= 1, so the bound stays conservative.
inline void downsample_min_splat(const ScalarGrid& coarse_bound, const ValidMask& fine_mask,
                                 ScalarGrid& fine_bound) {
  int w = fine_mask.width, h = fine_mask.height;
  for (int r = 0; r < coarse_bound.height; ++r) {
    for (int c = 0; c < coarse_bound.width; ++c) {
      double b = coarse_bound.at(r, c);
      if (!std::isfinite(b)) continue;
      for (int dr = 0; dr < 2; ++dr)
        for (int dc = 0; dc < 2; ++dc) {
          int y = 2 * r + dr, x = 2 * c + dc;
          if (y < h && x < w && fine_mask.at(y, x))
            fine_bound.at(y, x) = std::min(fine_bound.at(y, x), b);
        }
    }
  }
}

// Separable Gaussian blur with renormalized truncation at the borders.
inline ScalarGrid gaussian_blur(const ScalarGrid& in, double sigma) {
  if (sigma <= 0.0) return in;
  int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> k(size_t(radius) + 1);
  for (int i = 0; i <= radius; ++i) k[size_t(i)] = std::exp(-0.5 * (double(i) * i) / (sigma * sigma));
  ScalarGrid tmp(in.width, in.height);
  for (int r = 0; r < in.height; ++r)
    for (int c = 0; c < in.width; ++c) {
      double acc = 0.0, wsum = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        int x = c + d;
        if (x < 0 || x >= in.width) continue;
        double w = k[size_t(std::abs(d))];
        acc += w * in.at(r, x);
        wsum += w;
      }
      tmp.at(r, c) = acc / wsum;
    }
  ScalarGrid out(in.width, in.height);
  for (int r = 0; r < in.height; ++r)
    for (int c = 0; c < in.width; ++c) {
      double acc = 0.0, wsum = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        int y = r + d;
        if (y < 0 || y >= in.height) continue;
        double w = k[size_t(std::abs(d))];
        acc += w * tmp.at(y, c);
        wsum += w;
      }
      out.at(r, c) = acc / wsum;
    }
  return out;
}

}  // namespace mondepth
