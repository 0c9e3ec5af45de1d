#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "mondepth/grid.hpp"

namespace mondepth {

namespace detail {

// Felzenszwalb & Huttenlocher 1D squared distance transform (lower envelope
// of parabolas).
inline void dt1d(const std::vector<double>& f, std::vector<double>& d) {
  int n = int(f.size());
  d.assign(size_t(n), 0.0);
  std::vector<int> v(size_t(n), 0);
  std::vector<double> z(size_t(n) + 1, 0.0);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    for (;;) {
      int p = v[size_t(k)];
      s = ((f[size_t(q)] + double(q) * q) - (f[size_t(p)] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s > z[size_t(k)]) break;
      --k;
    }
    ++k;
    v[size_t(k)] = q;
    z[size_t(k)] = s;
    z[size_t(k) + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[size_t(k) + 1] < double(q)) ++k;
    int p = v[size_t(k)];
    d[size_t(q)] = double(q - p) * (q - p) + f[size_t(p)];
  }
}

}  // namespace detail

// Exact Euclidean distance (in pixels) from every pixel to the nearest
// feature pixel. Pixels unreachable because the feature set is empty come
// back as +inf.
inline ScalarGrid distance_transform(const ValidMask& features) {
  const double kFar = 1e20;
  int w = features.width, h = features.height;
  ScalarGrid sq(w, h);
  std::vector<double> col(static_cast<size_t>(h)), out(static_cast<size_t>(h));
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) col[size_t(r)] = features.at(r, c) ? 0.0 : kFar;
    detail::dt1d(col, out);
    for (int r = 0; r < h; ++r) sq.at(r, c) = out[size_t(r)];
  }
  std::vector<double> row(static_cast<size_t>(w)), out2(static_cast<size_t>(w));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) row[size_t(c)] = sq.at(r, c);
    detail::dt1d(row, out2);
    for (int c = 0; c < w; ++c)
      sq.at(r, c) = out2[size_t(c)] >= kFar ? std::numeric_limits<double>::infinity()
                                            : std::sqrt(out2[size_t(c)]);
  }
  return sq;
}

}  // namespace mondepth
