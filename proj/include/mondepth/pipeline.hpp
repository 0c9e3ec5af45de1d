#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "mondepth/align.hpp"
#include "mondepth/distance_transform.hpp"
#include "mondepth/errors.hpp"
#include "mondepth/geometry.hpp"
#include "mondepth/grid.hpp"
#include "mondepth/toy_model.hpp"

namespace mondepth {

struct ResolutionTarget {
  int width = 0, height = 0;
  double scale = 1.0;
  double d_max = 0.0;  // pixels to the farthest point from any edge
  bool edgeless = false;
};

namespace detail {

inline ScalarGrid luminance(const ImageGrid& rgb) {
  ScalarGrid g(rgb.width, rgb.height);
  for (size_t i = 0; i < g.size(); ++i)
    g.data[i] = (rgb.channels[0].data[i] + rgb.channels[1].data[i] + rgb.channels[2].data[i]) / 3.0;
  return g;
}

inline int round_to_32(double v) { return std::max(32, int(std::lround(v / 32.0)) * 32); }

}  // namespace detail

// Content-adaptive output resolution: a stand-in for the edge-density
// measurement in the source framework (whose exact definition lives
// elsewhere). Gradient-magnitude edges at the top decile; the scale is the
// receptive field over twice the largest edge-free radius, so images dense
// in detail are upsampled harder. Flat images keep native resolution and
// set the edgeless flag.
inline ResolutionTarget select_high_resolution(const ImageGrid& rgb, double receptive_field,
                                               double max_factor) {
  if (rgb.width < 2 || rgb.height < 2 || rgb.channel_count() < 1)
    throw invalid_input("select_high_resolution: empty image");
  if (receptive_field < 32.0)
    throw invalid_input("select_high_resolution: receptive field below 32");
  if (max_factor < 1.0) throw invalid_input("select_high_resolution: max_factor below 1");
  ScalarGrid lum = rgb.channel_count() >= 3 ? detail::luminance(rgb) : rgb.channels[0];
  int w = lum.width, h = lum.height;
  ScalarGrid mag(w, h, 0.0);
  double peak = 0.0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double gx = c + 1 < w ? lum.at(r, c + 1) - lum.at(r, c) : 0.0;
      double gy = r + 1 < h ? lum.at(r + 1, c) - lum.at(r, c) : 0.0;
      double m = std::abs(gx) + std::abs(gy);
      mag.at(r, c) = m;
      peak = std::max(peak, m);
    }
  ResolutionTarget out;
  out.width = w;
  out.height = h;
  if (peak <= 1e-12) {
    out.edgeless = true;
    return out;
  }
  std::vector<double> sorted = mag.data;
  size_t q = size_t(0.9 * double(sorted.size() - 1));
  std::nth_element(sorted.begin(), sorted.begin() + ptrdiff_t(q), sorted.end());
  double threshold = std::max(sorted[q], 1e-12);
  ValidMask edges(w, h, false);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (mag.at(r, c) >= threshold) edges.set(r, c, true);
  ScalarGrid dist = distance_transform(edges);
  double d_max = 0.0;
  for (double d : dist.data) d_max = std::max(d_max, d);
  out.d_max = d_max;
  double s = d_max > 0.0 ? receptive_field / (2.0 * d_max) : max_factor;
  s = std::clamp(s, 1.0, max_factor);
  out.scale = s;
  out.width = detail::round_to_32(w * s);
  out.height = detail::round_to_32(h * s);
  // Keep targets in [native, max_factor*native] after rounding.
  auto clamp_axis = [&](int v, int native) {
    int lo = ((native + 31) / 32) * 32;
    int hi = std::max(lo, (int(native * max_factor) / 32) * 32);
    return std::clamp(v, lo, hi);
  };
  out.width = clamp_axis(out.width, w);
  out.height = clamp_axis(out.height, h);
  return out;
}

// Channels ordered [R, G, B, o_low, o_high]; RGB clamped into [0,1], the
// two disparity channels passed through untouched (o_high is expected to be
// align_mean_scale'd against o_low already).
inline ImageGrid assemble_si_input(const ImageGrid& rgb, const ScalarGrid& o_low,
                                   const ScalarGrid& o_high) {
  if (rgb.channel_count() != 3) throw invalid_input("assemble_si_input: rgb must have 3 channels");
  if (rgb.width != o_low.width || rgb.height != o_low.height || !o_low.same_shape(o_high))
    throw invalid_input("assemble_si_input: dimension mismatch");
  ImageGrid out(rgb.width, rgb.height, 5);
  for (int ch = 0; ch < 3; ++ch) {
    out.channels[size_t(ch)] = rgb.channels[size_t(ch)];
    for (double& v : out.channels[size_t(ch)].data) v = std::clamp(v, 0.0, 1.0);
  }
  out.channels[3] = o_low;
  out.channels[4] = o_high;
  return out;
}

// Rescales ground truth into the frame of the first-stage prediction:
// gt := c*gt with c minimizing sum((c*gt - o_low)^2) over the mask.
inline ScalarGrid fix_gt_scale(const ScalarGrid& gt_inverse_depth, const ScalarGrid& o_low,
                               const ValidMask& mask) {
  double c = fit_scale_only(o_low, gt_inverse_depth, mask);
  ScalarGrid out = gt_inverse_depth;
  for (double& v : out.data) v *= c;
  return out;
}

enum class DownFilter { Bilinear, Area };

struct SsiSource {
  const ScalarGrid* low = nullptr;   // precomputed disparity, any resolution
  const ScalarGrid* high = nullptr;
  const ToyNet* net = nullptr;       // alternatively: run this net at two scales
};

struct TwoStageResult {
  ScalarGrid disparity;  // raw second-stage output in (0,1)
  ScalarGrid depth;
  NormalsResult normals;
  PointCloud cloud;
  ResolutionTarget target;
  AffineFit high_alignment;
  ScalarGrid o_low, o_high;  // the assembled SSI channels at native resolution
};

namespace detail {

inline ScalarGrid resample(const ScalarGrid& in, int w, int h, DownFilter filter) {
  if (in.width == w && in.height == h) return in;
  if (filter == DownFilter::Area && (w < in.width || h < in.height)) return resize_area(in, w, h);
  return resize_bilinear(in, w, h);
}

}  // namespace detail

// Full second-stage flow: obtain the two first-stage disparities (from files
// or by running an SSI net at the receptive-field and content-selected
// resolutions), bring both to native resolution, align the high one onto the
// low one, assemble the 5-channel input, predict, and lift to geometry.
inline TwoStageResult run_two_stage(const ImageGrid& rgb, const SsiSource& src,
                                    const ToyNet& si_net, const CameraIntrinsics& intrinsics,
                                    double receptive_field = 64.0, double max_factor = 3.0,
                                    DownFilter filter = DownFilter::Bilinear) {
  if (rgb.channel_count() != 3) throw invalid_input("run_two_stage: rgb must have 3 channels");
  if (si_net.input_channels() != 5)
    throw invalid_input("run_two_stage: second-stage net must take 5 channels");
  bool from_files = src.low && src.high;
  if (!from_files && !src.net)
    throw invalid_input("run_two_stage: need either two disparity grids or an SSI net");
  int w = rgb.width, h = rgb.height;

  TwoStageResult res;
  res.target = select_high_resolution(rgb, receptive_field, max_factor);
  ScalarGrid o_low, o_high;
  if (from_files) {
    o_low = detail::resample(*src.low, w, h, filter);
    o_high = detail::resample(*src.high, w, h, filter);
  } else {
    int rf = std::max(32, int(std::lround(receptive_field)));
    ImageGrid rgb_low = resize_bilinear(rgb, rf, rf);
    o_low = detail::resample(toy_forward(*src.net, rgb_low), w, h, filter);
    ImageGrid rgb_high = resize_bilinear(rgb, res.target.width, res.target.height);
    o_high = detail::resample(toy_forward(*src.net, rgb_high), w, h, filter);
  }
  ScalarGrid o_high_al =
      align_mean_scale(o_high, o_low, ValidMask(w, h, true), &res.high_alignment);
  ImageGrid input = assemble_si_input(rgb, o_low, o_high_al);
  res.o_low = std::move(o_low);
  res.o_high = std::move(o_high_al);
  res.disparity = toy_forward(si_net, input);
  ValidMask all(w, h, true);
  res.depth = depth_from_disparity(res.disparity, all);
  res.normals = normals_from_depth(res.depth, intrinsics, all);
  res.cloud = point_cloud_from_depth(res.depth, intrinsics, all, &rgb);
  return res;
}

}  // namespace mondepth
