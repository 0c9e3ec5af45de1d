#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "mondepth/align.hpp"
#include "mondepth/camera.hpp"
#include "mondepth/distance_transform.hpp"
#include "mondepth/errors.hpp"
#include "mondepth/geometry.hpp"
#include "mondepth/grid.hpp"
#include "mondepth/losses.hpp"

namespace mondepth {

struct MetricConfig {
  int ord_pairs = 5000;
  uint64_t ord_seed = 0;
  double ord_tau = 1.03;
  int d3r_cells_x = 24;
  int d3r_cells_y = 24;
  double d3r_rel_threshold = 0.10;
  double dbe_percentile = 0.95;
  double dbe_truncation = 10.0;
  double angle_threshold_deg = 11.25;
};

inline double rmse(const ScalarGrid& pred, const ScalarGrid& gt, const ValidMask& mask) {
  require_same_shape(pred, gt, "rmse");
  require_mask_shape(pred, mask, "rmse");
  double sum = 0.0;
  int n = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!mask.flags[i]) continue;
    double d = pred.data[i] - gt.data[i];
    sum += d * d;
    ++n;
  }
  if (n < 1) throw insufficient_data("rmse: empty mask");
  return std::sqrt(sum / n);
}

inline double abs_rel(const ScalarGrid& pred, const ScalarGrid& gt, const ValidMask& mask) {
  require_same_shape(pred, gt, "abs_rel");
  require_mask_shape(pred, mask, "abs_rel");
  double sum = 0.0;
  int n = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!mask.flags[i]) continue;
    if (!(gt.data[i] > 0.0)) throw invalid_input("abs_rel: non-positive gt at a valid pixel");
    sum += std::abs(pred.data[i] - gt.data[i]) / gt.data[i];
    ++n;
  }
  if (n < 1) throw insufficient_data("abs_rel: empty mask");
  return sum / n;
}

namespace detail {

// strict=true errors on non-positive values (the documented contract);
// strict=false counts them as outside the threshold, for use on aligned
// predictions that may dip non-positive.
inline double delta1_impl(const ScalarGrid& pred, const ScalarGrid& gt, const ValidMask& mask,
                          bool strict) {
  require_same_shape(pred, gt, "delta1");
  require_mask_shape(pred, mask, "delta1");
  int n = 0, within = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!mask.flags[i]) continue;
    double p = pred.data[i], g = gt.data[i];
    if (!(g > 0.0)) throw invalid_input("delta1: non-positive gt at a valid pixel");
    if (!(p > 0.0)) {
      if (strict) throw invalid_input("delta1: non-positive pred at a valid pixel");
      ++n;
      continue;
    }
    double ratio = std::max(p / g, g / p);
    within += ratio < 1.25;
    ++n;
  }
  if (n < 1) throw insufficient_data("delta1: empty mask");
  return double(within) / n;
}

}  // namespace detail

inline double delta1(const ScalarGrid& pred, const ScalarGrid& gt, const ValidMask& mask) {
  return detail::delta1_impl(pred, gt, mask, true);
}

// ---------------------------------------------------------------------------
// Ordinal relation error over sampled pairs: classify each pair as
// closer/farther/equal on both sides (equal iff max ratio < tau for positive
// values) and count disagreements.
// ---------------------------------------------------------------------------

struct OrdinalErrorResult {
  double error = 0.0;        // disagreement fraction over all sampled pairs
  int pairs = 0;
  int flagged = 0;           // pairs whose gt relation is not "equal"
  double error_on_flagged = 0.0;
};

namespace detail {

inline int ordinal_class(double a, double b, double tau) {
  if (a > 0.0 && b > 0.0) {
    double ratio = a > b ? a / b : b / a;
    if (ratio < tau) return 0;
  } else if (a == b) {
    return 0;
  }
  return a > b ? 1 : -1;
}

}  // namespace detail

inline OrdinalErrorResult ordinal_error(const ScalarGrid& pred, const ScalarGrid& gt,
                                        const ValidMask& mask, const PairSampleConfig& cfg,
                                        double tau = 1.03) {
  require_same_shape(pred, gt, "ordinal_error");
  require_mask_shape(pred, mask, "ordinal_error");
  if (!(tau > 1.0)) throw invalid_input("ordinal_error: tau must exceed 1");
  for (size_t i = 0; i < gt.size(); ++i)
    if (mask.flags[i] && !(gt.data[i] > 0.0))
      throw invalid_input("ordinal_error: non-positive gt at a valid pixel");
  std::vector<PixelPair> pairs = sample_pixel_pairs(mask, cfg.pair_count, cfg.seed);
  OrdinalErrorResult res;
  res.pairs = int(pairs.size());
  int disagree = 0, disagree_flagged = 0;
  for (const PixelPair& p : pairs) {
    int cg = detail::ordinal_class(gt.data[size_t(p.i)], gt.data[size_t(p.j)], tau);
    int cp = detail::ordinal_class(pred.data[size_t(p.i)], pred.data[size_t(p.j)], tau);
    bool miss = cg != cp;
    disagree += miss;
    if (cg != 0) {
      ++res.flagged;
      disagree_flagged += miss;
    }
  }
  res.error = double(disagree) / double(pairs.size());
  res.error_on_flagged = res.flagged > 0 ? double(disagree_flagged) / res.flagged : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// D3R variant: regular grid of cells, valid-pixel medians as representatives,
// ordinal disagreement over 4-adjacent cell pairs whose gt representatives
// differ by more than a relative threshold. This is a documented stand-in
// for the superpixel formulation in the literature and is labeled as such
// in every report.
// ---------------------------------------------------------------------------

struct D3rResult {
  double value = 0.0;
  int flagged_pairs = 0;
  int cells_with_reps = 0;
};

inline D3rResult d3r(const ScalarGrid& pred, const ScalarGrid& gt, const ValidMask& mask,
                     int cells_x = 24, int cells_y = 24, double rel_threshold = 0.10) {
  require_same_shape(pred, gt, "d3r");
  require_mask_shape(pred, mask, "d3r");
  if (cells_x < 1 || cells_y < 1) throw invalid_input("d3r: cell counts must be positive");
  int cx = std::min(cells_x, pred.width);
  int cy = std::min(cells_y, pred.height);
  std::vector<double> rep_gt(size_t(cx) * cy), rep_pred(size_t(cx) * cy);
  std::vector<uint8_t> has_rep(size_t(cx) * cy, 0);
  auto median = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  std::vector<double> bucket_gt, bucket_pred;
  for (int j = 0; j < cy; ++j) {
    int r0 = j * pred.height / cy, r1 = (j + 1) * pred.height / cy;
    for (int i = 0; i < cx; ++i) {
      int c0 = i * pred.width / cx, c1 = (i + 1) * pred.width / cx;
      bucket_gt.clear();
      bucket_pred.clear();
      for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) {
          if (!mask.at(r, c)) continue;
          bucket_gt.push_back(gt.at(r, c));
          bucket_pred.push_back(pred.at(r, c));
        }
      if (bucket_gt.empty()) continue;
      size_t cell = size_t(j) * cx + i;
      rep_gt[cell] = median(bucket_gt);
      rep_pred[cell] = median(bucket_pred);
      has_rep[cell] = 1;
    }
  }
  D3rResult res;
  for (uint8_t h : has_rep) res.cells_with_reps += h;
  if (res.cells_with_reps < 2) throw insufficient_data("d3r: fewer than 2 cells with representatives");
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (size_t i = 0; i < gt.size(); ++i) {
    if (!mask.flags[i]) continue;
    if (first) {
      lo = hi = gt.data[i];
      first = false;
    } else {
      lo = std::min(lo, gt.data[i]);
      hi = std::max(hi, gt.data[i]);
    }
  }
  double threshold = rel_threshold * (hi - lo);
  int disagree = 0;
  auto visit = [&](size_t a, size_t b) {
    if (!has_rep[a] || !has_rep[b]) return;
    double dg = rep_gt[a] - rep_gt[b];
    if (!(std::abs(dg) > threshold)) return;
    ++res.flagged_pairs;
    double dp = rep_pred[a] - rep_pred[b];
    bool agree = (dg > 0.0 && dp > 0.0) || (dg < 0.0 && dp < 0.0);
    disagree += !agree;
  };
  for (int j = 0; j < cy; ++j)
    for (int i = 0; i < cx; ++i) {
      if (i + 1 < cx) visit(size_t(j) * cx + i, size_t(j) * cx + i + 1);
      if (j + 1 < cy) visit(size_t(j) * cx + i, size_t(j + 1) * cx + i);
    }
  res.value = res.flagged_pairs > 0 ? double(disagree) / res.flagged_pairs : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// DBE variant: truncated chamfer distances between thresholded log-depth
// gradient edge maps (top-(1-q) of gradient magnitudes). Also a documented
// stand-in, labeled in reports.
// ---------------------------------------------------------------------------

struct DbeResult {
  double acc = 0.0;   // predicted edges -> nearest gt edge
  double comp = 0.0;  // gt edges -> nearest predicted edge
  bool pred_edges_empty = false;
  bool gt_edges_empty = false;
};

namespace detail {

inline ValidMask log_gradient_edges(const ScalarGrid& src, const ValidMask& mask,
                                    double percentile) {
  int w = src.width, h = src.height;
  auto log_ok = [&](int r, int c) { return mask.at(r, c) && src.at(r, c) > 0.0; };
  ScalarGrid mag(w, h, 0.0);
  ValidMask has(w, h, false);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!log_ok(r, c)) continue;
      double lv = std::log(src.at(r, c));
      double gx = 0.0, gy = 0.0;
      bool any = false;
      if (c + 1 < w && log_ok(r, c + 1)) {
        gx = std::log(src.at(r, c + 1)) - lv;
        any = true;
      }
      if (r + 1 < h && log_ok(r + 1, c)) {
        gy = std::log(src.at(r + 1, c)) - lv;
        any = true;
      }
      if (!any) continue;
      mag.at(r, c) = std::sqrt(gx * gx + gy * gy);
      has.set(r, c, true);
    }
  std::vector<double> vals;
  vals.reserve(size_t(has.count_valid()));
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (has.at(r, c)) vals.push_back(mag.at(r, c));
  ValidMask edges(w, h, false);
  if (vals.empty()) return edges;
  size_t k = size_t(std::floor(percentile * double(vals.size() - 1)));
  std::nth_element(vals.begin(), vals.begin() + std::ptrdiff_t(k), vals.end());
  double thr = vals[k];
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (has.at(r, c) && mag.at(r, c) > thr) edges.set(r, c, true);
  return edges;
}

inline double truncated_mean_distance(const ValidMask& from, const ValidMask& to,
                                      double truncation) {
  ScalarGrid dt = distance_transform(to);
  double sum = 0.0;
  int n = 0;
  for (int r = 0; r < from.height; ++r)
    for (int c = 0; c < from.width; ++c) {
      if (!from.at(r, c)) continue;
      sum += std::min(dt.at(r, c), truncation);
      ++n;
    }
  return n > 0 ? sum / n : truncation;
}

}  // namespace detail

inline DbeResult dbe(const ScalarGrid& pred_edges_source, const ScalarGrid& gt_edges_source,
                     const ValidMask& mask, double percentile = 0.95, double truncation = 10.0) {
  require_same_shape(pred_edges_source, gt_edges_source, "dbe");
  require_mask_shape(pred_edges_source, mask, "dbe");
  ValidMask pe = detail::log_gradient_edges(pred_edges_source, mask, percentile);
  ValidMask ge = detail::log_gradient_edges(gt_edges_source, mask, percentile);
  DbeResult res;
  res.pred_edges_empty = pe.count_valid() == 0;
  res.gt_edges_empty = ge.count_valid() == 0;
  res.acc = res.pred_edges_empty ? truncation : detail::truncated_mean_distance(pe, ge, truncation);
  res.comp = res.gt_edges_empty ? truncation : detail::truncated_mean_distance(ge, pe, truncation);
  return res;
}

// ---------------------------------------------------------------------------
// Surface orientation metrics.
// ---------------------------------------------------------------------------

struct AngleMetrics {
  double mean_deg = 0.0;
  double pct_within = 0.0;  // fraction strictly below the threshold
};

inline AngleMetrics normal_angle_metrics(const NormalGrid& pred_normals,
                                         const NormalGrid& gt_normals, const ValidMask& mask,
                                         double t_deg = 11.25) {
  if (pred_normals.width != gt_normals.width || pred_normals.height != gt_normals.height ||
      pred_normals.width != mask.width || pred_normals.height != mask.height)
    throw invalid_input("normal_angle_metrics: shape mismatch");
  detail::check_unit_normals(pred_normals, mask, "normal_angle_metrics(pred)");
  detail::check_unit_normals(gt_normals, mask, "normal_angle_metrics(gt)");
  double sum = 0.0;
  int n = 0, within = 0;
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c) {
      if (!mask.at(r, c)) continue;
      double px = pred_normals.x.at(r, c), py = pred_normals.y.at(r, c),
             pz = pred_normals.z.at(r, c);
      double gx = gt_normals.x.at(r, c), gy = gt_normals.y.at(r, c),
             gz = gt_normals.z.at(r, c);
      // atan2 of the chord lengths instead of acos of the dot product: acos
      // loses half the significant digits near 0 and pi, and identical
      // normals must come out as exactly zero.
      double dn = std::hypot(px - gx, py - gy, pz - gz);
      double sn = std::hypot(px + gx, py + gy, pz + gz);
      double angle = 2.0 * std::atan2(dn, sn) * 180.0 / std::numbers::pi;
      sum += angle;
      within += angle < t_deg;
      ++n;
    }
  if (n < 1) throw insufficient_data("normal_angle_metrics: empty mask");
  return {sum / n, double(within) / n};
}

// ---------------------------------------------------------------------------
// One-call evaluation battery.
// ---------------------------------------------------------------------------

enum class EvalMode { SSI, SI };

struct EvalReport {
  EvalMode mode = EvalMode::SSI;
  double align_a = 1.0, align_b = 0.0;  // SSI-mode affine fit
  double align_c = 1.0;                 // SI-mode scale fit
  bool align_clamped = false;
  bool has_normals = false;
  std::map<std::string, double> metrics;
  std::map<std::string, double> flags;
};

// Aligns pred onto gt per the mode (affine for SSI, scale-only for SI), then
// runs the full battery in depth space. delta1 counts non-positive aligned
// predictions as outside threshold rather than erroring; normal metrics are
// computed where the aligned depth is positive and a stencil exists.
inline EvalReport evaluate_all(const ScalarGrid& pred_depth, const ScalarGrid& gt_depth,
                               const NormalGrid* gt_normals, const CameraIntrinsics* intrinsics,
                               const ValidMask& mask, EvalMode mode,
                               const MetricConfig& cfg = MetricConfig{}) {
  require_same_shape(pred_depth, gt_depth, "evaluate_all");
  require_mask_shape(pred_depth, mask, "evaluate_all");
  EvalReport rep;
  rep.mode = mode;
  ScalarGrid aligned;
  if (mode == EvalMode::SSI) {
    AffineFit fit = fit_scale_shift(pred_depth, gt_depth, mask);
    rep.align_a = fit.a;
    rep.align_b = fit.b;
    rep.align_clamped = fit.clamped;
    aligned = apply_affine(pred_depth, fit);
  } else {
    rep.align_c = fit_scale_only(gt_depth, pred_depth, mask);
    aligned = pred_depth;
    for (double& v : aligned.data) v *= rep.align_c;
  }
  rep.metrics["rmse"] = rmse(aligned, gt_depth, mask);
  rep.metrics["abs_rel"] = abs_rel(aligned, gt_depth, mask);
  rep.metrics["delta1"] = detail::delta1_impl(aligned, gt_depth, mask, false);
  PairSampleConfig ord_cfg;
  ord_cfg.pair_count = cfg.ord_pairs;
  ord_cfg.seed = cfg.ord_seed;
  OrdinalErrorResult ord = ordinal_error(aligned, gt_depth, mask, ord_cfg, cfg.ord_tau);
  rep.metrics["ord"] = ord.error;
  rep.flags["ord_flagged_pairs"] = ord.flagged;
  rep.flags["ord_error_on_flagged"] = ord.error_on_flagged;
  D3rResult d3 = d3r(aligned, gt_depth, mask, cfg.d3r_cells_x, cfg.d3r_cells_y,
                     cfg.d3r_rel_threshold);
  rep.metrics["d3r"] = d3.value;
  rep.flags["d3r_flagged_pairs"] = d3.flagged_pairs;
  DbeResult db = dbe(aligned, gt_depth, mask, cfg.dbe_percentile, cfg.dbe_truncation);
  rep.metrics["dbe_acc"] = db.acc;
  rep.metrics["dbe_comp"] = db.comp;
  rep.flags["dbe_pred_edges_empty"] = db.pred_edges_empty;
  rep.flags["dbe_gt_edges_empty"] = db.gt_edges_empty;
  if (gt_normals) {
    rep.has_normals = true;
    CameraIntrinsics k =
        intrinsics ? *intrinsics : CameraIntrinsics::default_for(pred_depth.width, pred_depth.height);
    ValidMask pos(mask.width, mask.height, false);
    int dropped = 0;
    for (int r = 0; r < mask.height; ++r)
      for (int c = 0; c < mask.width; ++c) {
        bool ok = mask.at(r, c) && aligned.at(r, c) > 0.0;
        pos.set(r, c, ok);
        dropped += mask.at(r, c) && !ok;
      }
    rep.flags["normals_nonpositive_dropped"] = dropped;
    NormalsResult pn = normals_from_depth(aligned, k, pos);
    AngleMetrics am =
        normal_angle_metrics(pn.normals, *gt_normals, pn.valid, cfg.angle_threshold_deg);
    rep.metrics["angle_mean_deg"] = am.mean_deg;
    rep.metrics["pct_within_t"] = am.pct_within;
  }
  return rep;
}

}  // namespace mondepth
