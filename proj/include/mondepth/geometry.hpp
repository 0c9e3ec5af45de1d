#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mondepth/camera.hpp"
#include "mondepth/errors.hpp"
#include "mondepth/grid.hpp"

namespace mondepth {

enum class StencilKind { Central, Sobel };

namespace detail {

// Per-axis finite-difference mode, packed per pixel (x in bits 0-1, y in 2-3).
enum : uint8_t {
  kTapCentral = 0,
  kTapForward = 1,
  kTapBackward = 2,
  kTapSobel = 3,
};

struct Tap {
  int index = 0;
  double weight = 0.0;
};

inline int flat(int r, int c, int w) { return r * w + c; }

// Builds the weighted point taps realizing one tangent direction. axis 0 = x.
inline int make_taps(int r, int c, int w, uint8_t mode, int axis, Tap taps[6]) {
  int dr = axis == 0 ? 0 : 1;
  int dc = axis == 0 ? 1 : 0;
  switch (mode) {
    case kTapCentral:
      taps[0] = {flat(r + dr, c + dc, w), 0.5};
      taps[1] = {flat(r - dr, c - dc, w), -0.5};
      return 2;
    case kTapForward:
      taps[0] = {flat(r + dr, c + dc, w), 1.0};
      taps[1] = {flat(r, c, w), -1.0};
      return 2;
    case kTapBackward:
      taps[0] = {flat(r, c, w), 1.0};
      taps[1] = {flat(r - dr, c - dc, w), -1.0};
      return 2;
    case kTapSobel: {
      // 3x3 Sobel rows/columns; scale is irrelevant after normalization.
      static const double k[3] = {0.125, 0.25, 0.125};
      int n = 0;
      for (int t = -1; t <= 1; ++t) {
        int rr = axis == 0 ? r + t : r + 1;
        int cc = axis == 0 ? c + 1 : c + t;
        taps[n++] = {flat(rr, cc, w), k[t + 1]};
        rr = axis == 0 ? r + t : r - 1;
        cc = axis == 0 ? c - 1 : c + t;
        taps[n++] = {flat(rr, cc, w), -k[t + 1]};
      }
      return n;
    }
    default:
      return 0;
  }
}

}  // namespace detail

struct NormalsResult {
  NormalGrid normals;
  ValidMask valid;                 // pixels where a stencil could be formed
  std::vector<uint8_t> modes;      // per-pixel tap modes (see detail)
  StencilKind kind = StencilKind::Central;
};

namespace detail {

inline bool usable(const ValidMask& m, int r, int c) {
  return r >= 0 && r < m.height && c >= 0 && c < m.width && m.at(r, c);
}

inline uint8_t pick_axis_mode(const ValidMask& m, int r, int c, int axis, bool sobel) {
  int dr = axis == 0 ? 0 : 1;
  int dc = axis == 0 ? 1 : 0;
  if (sobel) {
    bool ok = true;
    for (int t = -1; t <= 1 && ok; ++t) {
      int rr = axis == 0 ? r + t : r + 1;
      int cc = axis == 0 ? c + 1 : c + t;
      ok = usable(m, rr, cc);
      rr = axis == 0 ? r + t : r - 1;
      cc = axis == 0 ? c - 1 : c + t;
      ok = ok && usable(m, rr, cc);
    }
    if (ok) return kTapSobel;
  }
  bool plus = usable(m, r + dr, c + dc);
  bool minus = usable(m, r - dr, c - dc);
  if (plus && minus) return kTapCentral;
  if (plus) return kTapForward;
  if (minus) return kTapBackward;
  return 0xff;
}

struct PixelGeometry {
  Tap tx[6], ty[6];
  int nx = 0, ny = 0;
  Vec3 Tx, Ty, u;
  double len = 0.0;
  double sigma = 1.0;
  bool ok = false;
};

inline PixelGeometry pixel_geometry(const ScalarGrid& depth, const CameraIntrinsics& K, int r,
                                    int c, uint8_t mode) {
  PixelGeometry g;
  g.nx = make_taps(r, c, depth.width, mode & 3u, 0, g.tx);
  g.ny = make_taps(r, c, depth.width, (mode >> 2) & 3u, 1, g.ty);
  auto point = [&](int idx) {
    int rr = idx / depth.width, cc = idx % depth.width;
    return K.ray(double(cc), double(rr)) * depth.data[size_t(idx)];
  };
  for (int k = 0; k < g.nx; ++k) g.Tx = g.Tx + point(g.tx[k].index) * g.tx[k].weight;
  for (int k = 0; k < g.ny; ++k) g.Ty = g.Ty + point(g.ty[k].index) * g.ty[k].weight;
  Vec3 raw = cross(g.Tx, g.Ty);
  g.len = norm(raw);
  double scale = norm(g.Tx) * norm(g.Ty);
  if (!(g.len > 1e-12 * scale) || g.len <= 0.0) return g;
  g.u = raw * (1.0 / g.len);
  g.sigma = g.u.z > 0.0 ? -1.0 : 1.0;
  g.ok = true;
  return g;
}

}  // namespace detail

// Per-pixel surface normals of a depth map. Tangents come from finite
// differences of the back-projected points (central, falling back to
// one-sided at mask and image borders; optionally Sobel where the full 3x3
// neighborhood is valid). Normals are unit length with z <= 0 so they face
// the camera. Pixels with no usable stencil or a degenerate cross product
// are reported invalid.
inline NormalsResult normals_from_depth(const ScalarGrid& depth, const CameraIntrinsics& K,
                                        const ValidMask& mask,
                                        StencilKind kind = StencilKind::Central) {
  require_mask_shape(depth, mask, "normals_from_depth");
  for (size_t i = 0; i < depth.size(); ++i)
    if (mask.flags[i] && !(depth.data[i] > 0.0))
      throw invalid_input("normals_from_depth: non-positive depth at a valid pixel");
  NormalsResult res;
  res.normals = NormalGrid(depth.width, depth.height);
  res.valid = ValidMask(depth.width, depth.height, false);
  res.modes.assign(depth.size(), 0xff);
  res.kind = kind;
  bool sobel = kind == StencilKind::Sobel;
  for (int r = 0; r < depth.height; ++r) {
    for (int c = 0; c < depth.width; ++c) {
      if (!mask.at(r, c)) continue;
      uint8_t mx = detail::pick_axis_mode(mask, r, c, 0, sobel);
      uint8_t my = detail::pick_axis_mode(mask, r, c, 1, sobel);
      if (mx == 0xff || my == 0xff) continue;
      uint8_t mode = uint8_t(mx | (my << 2));
      auto g = detail::pixel_geometry(depth, K, r, c, mode);
      if (!g.ok) continue;
      res.modes[size_t(detail::flat(r, c, depth.width))] = mode;
      res.valid.set(r, c, true);
      Vec3 n = g.u * g.sigma;
      res.normals.x.at(r, c) = n.x;
      res.normals.y.at(r, c) = n.y;
      res.normals.z.at(r, c) = n.z;
    }
  }
  return res;
}

// Chain rule through normals_from_depth: accumulates dL/ddepth given dL/dn at
// every valid output pixel. Optionally reports, per depth pixel, a
// conservative distance (in depth units) to the nearest orientation flip,
// where the normal direction is not differentiable.
inline ScalarGrid normals_backward(const NormalsResult& fwd, const ScalarGrid& depth,
                                   const CameraIntrinsics& K, const std::vector<Vec3>& dL_dn,
                                   ScalarGrid* flip_distance = nullptr) {
  ScalarGrid grad(depth.width, depth.height, 0.0);
  if (flip_distance)
    *flip_distance = ScalarGrid(depth.width, depth.height, std::numeric_limits<double>::infinity());
  for (int r = 0; r < depth.height; ++r) {
    for (int c = 0; c < depth.width; ++c) {
      if (!fwd.valid.at(r, c)) continue;
      int idx = detail::flat(r, c, depth.width);
      auto g = detail::pixel_geometry(depth, K, r, c, fwd.modes[size_t(idx)]);
      if (!g.ok) continue;
      const Vec3& gl = dL_dn[size_t(idx)];
      // d n / d n_raw = sigma * (I - u u^T) / len
      Vec3 h = (gl - g.u * dot(gl, g.u)) * (g.sigma / g.len);
      double raw_z = g.u.z * g.len;
      auto ray_at = [&](int i) { return K.ray(double(i % depth.width), double(i / depth.width)); };
      for (int k = 0; k < g.nx; ++k) {
        Vec3 draw = cross(ray_at(g.tx[k].index) * g.tx[k].weight, g.Ty);
        grad.data[size_t(g.tx[k].index)] += dot(h, draw);
        if (flip_distance && std::abs(draw.z) > 0.0) {
          double d = std::abs(raw_z) / std::abs(draw.z);
          double& slot = flip_distance->data[size_t(g.tx[k].index)];
          slot = std::min(slot, d);
        }
      }
      for (int k = 0; k < g.ny; ++k) {
        Vec3 draw = cross(g.Tx, ray_at(g.ty[k].index) * g.ty[k].weight);
        grad.data[size_t(g.ty[k].index)] += dot(h, draw);
        if (flip_distance && std::abs(draw.z) > 0.0) {
          double d = std::abs(raw_z) / std::abs(draw.z);
          double& slot = flip_distance->data[size_t(g.ty[k].index)];
          slot = std::min(slot, d);
        }
      }
    }
  }
  return grad;
}

inline PointCloud point_cloud_from_depth(const ScalarGrid& depth, const CameraIntrinsics& K,
                                         const ValidMask& mask, const ImageGrid* rgb = nullptr) {
  require_mask_shape(depth, mask, "point_cloud_from_depth");
  if (rgb && (rgb->width != depth.width || rgb->height != depth.height || rgb->channel_count() != 3))
    throw invalid_input("point_cloud_from_depth: rgb shape mismatch");
  PointCloud cloud;
  cloud.points.reserve(size_t(mask.count_valid()));
  for (int r = 0; r < depth.height; ++r)
    for (int c = 0; c < depth.width; ++c) {
      if (!mask.at(r, c)) continue;
      double z = depth.at(r, c);
      if (!(z > 0.0))
        throw invalid_input("point_cloud_from_depth: non-positive depth at a valid pixel");
      cloud.points.push_back(K.ray(double(c), double(r)) * z);
      if (rgb) cloud.colors.push_back({rgb->at(0, r, c), rgb->at(1, r, c), rgb->at(2, r, c)});
    }
  return cloud;
}

namespace detail {

inline ScalarGrid invert_positive(const ScalarGrid& g, const ValidMask& mask, const char* what) {
  require_mask_shape(g, mask, what);
  ScalarGrid out(g.width, g.height, 0.0);
  for (size_t i = 0; i < g.size(); ++i) {
    if (!mask.flags[i]) continue;
    if (!(g.data[i] > 0.0))
      throw invalid_input(std::string(what) + ": non-positive value at a valid pixel");
    out.data[i] = 1.0 / g.data[i];
  }
  return out;
}

}  // namespace detail

inline ScalarGrid disparity_from_depth(const ScalarGrid& depth, const ValidMask& mask) {
  return detail::invert_positive(depth, mask, "disparity_from_depth");
}

inline ScalarGrid depth_from_disparity(const ScalarGrid& disparity, const ValidMask& mask) {
  return detail::invert_positive(disparity, mask, "depth_from_disparity");
}

}  // namespace mondepth
