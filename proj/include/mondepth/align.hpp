#pragma once

#include <cmath>

#include "mondepth/errors.hpp"
#include "mondepth/grid.hpp"

namespace mondepth {

struct AffineFit {
  double a = 1.0;
  double b = 0.0;
  double residual_sse = 0.0;
  bool clamped = false;

  // Fit statistics kept for gradients through the fit.
  double mean_pred = 0.0;
  double mean_target = 0.0;
  double spp = 0.0;      // sum (p - mean_pred)^2
  double a_unc = 0.0;    // slope before the positivity clamp
  int valid_count = 0;
};

constexpr double kMinSlope = 1e-6;

// Least-squares scale and shift mapping pred onto target, slope clamped to
// stay positive (depth orderings are never allowed to flip). Two-pass,
// mean-centered for conditioning.
inline AffineFit fit_scale_shift(const ScalarGrid& pred, const ScalarGrid& target,
                                 const ValidMask& mask) {
  require_same_shape(pred, target, "fit_scale_shift");
  require_mask_shape(pred, mask, "fit_scale_shift");
  double sp = 0.0, st = 0.0;
  int n = 0;
  for (int i = 0; i < int(pred.size()); ++i) {
    if (!mask.flags[size_t(i)]) continue;
    sp += pred.data[size_t(i)];
    st += target.data[size_t(i)];
    ++n;
  }
  if (n < 2) throw insufficient_data("fit_scale_shift: fewer than 2 valid pixels");
  double mp = sp / n, mt = st / n;
  double spp = 0.0, spt = 0.0;
  for (int i = 0; i < int(pred.size()); ++i) {
    if (!mask.flags[size_t(i)]) continue;
    double dp = pred.data[size_t(i)] - mp;
    spp += dp * dp;
    spt += dp * (target.data[size_t(i)] - mt);
  }
  if (spp <= 0.0) throw degenerate_fit("fit_scale_shift: constant prediction");
  AffineFit fit;
  fit.mean_pred = mp;
  fit.mean_target = mt;
  fit.spp = spp;
  fit.valid_count = n;
  fit.a_unc = spt / spp;
  if (fit.a_unc > kMinSlope) {
    fit.a = fit.a_unc;
  } else {
    fit.a = kMinSlope;
    fit.clamped = true;
  }
  fit.b = mt - fit.a * mp;
  for (int i = 0; i < int(pred.size()); ++i) {
    if (!mask.flags[size_t(i)]) continue;
    double r = fit.a * pred.data[size_t(i)] + fit.b - target.data[size_t(i)];
    fit.residual_sse += r * r;
  }
  return fit;
}

inline ScalarGrid apply_affine(const ScalarGrid& g, const AffineFit& fit) {
  ScalarGrid out(g.width, g.height);
  for (size_t i = 0; i < g.size(); ++i) out.data[i] = fit.a * g.data[i] + fit.b;
  return out;
}

// Derivatives of the fitted (a, b) with respect to one prediction sample.
// For the clamped branch a is constant. b follows the means either way.
inline void fit_jacobian(const AffineFit& fit, double pred_i, double target_i, double& da,
                         double& db) {
  if (fit.clamped) {
    da = 0.0;
  } else {
    da = ((target_i - fit.mean_target) - 2.0 * fit.a * (pred_i - fit.mean_pred)) / fit.spp;
  }
  db = -fit.a / fit.valid_count - fit.mean_pred * da;
}

// Least-squares scale-only factor c minimizing |c * target - reference|^2.
// Used to pin a free global scale to a reference signal; no positivity
// clamp by default (callers may enforce one as policy).
inline double fit_scale_only(const ScalarGrid& reference, const ScalarGrid& target,
                             const ValidMask& mask, bool clamp_positive = false) {
  require_same_shape(reference, target, "fit_scale_only");
  require_mask_shape(reference, mask, "fit_scale_only");
  double num = 0.0, den = 0.0;
  int n = 0;
  for (size_t i = 0; i < reference.size(); ++i) {
    if (!mask.flags[i]) continue;
    num += target.data[i] * reference.data[i];
    den += target.data[i] * target.data[i];
    ++n;
  }
  if (n < 2) throw insufficient_data("fit_scale_only: fewer than 2 valid pixels");
  if (den <= 0.0) throw degenerate_fit("fit_scale_only: all-zero target");
  double c = num / den;
  if (clamp_positive && c < kMinSlope) c = kMinSlope;
  return c;
}

// Affine-aligns `high` onto `low` (the merge step before the two signals are
// stacked as network inputs).
inline ScalarGrid align_mean_scale(const ScalarGrid& high, const ScalarGrid& low,
                                   const ValidMask& mask, AffineFit* fit_out = nullptr) {
  AffineFit fit = fit_scale_shift(high, low, mask);
  if (fit_out) *fit_out = fit;
  return apply_affine(high, fit);
}

inline ScalarGrid align_mean_scale(const ScalarGrid& high, const ScalarGrid& low) {
  return align_mean_scale(high, low, ValidMask(high.width, high.height, true));
}

}  // namespace mondepth
