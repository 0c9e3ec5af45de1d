#include <gtest/gtest.h>

#include <cmath>

#include "mondepth/errors.hpp"
#include "mondepth/geometry.hpp"
#include "mondepth/rng.hpp"

using namespace mondepth;

namespace {

// Depth of the plane n . p = dist sampled along the ray of pixel (u, v).
double plane_depth(const CameraIntrinsics& k, const Vec3& n, double dist, double u, double v) {
  Vec3 ray = k.ray(u, v);
  return dist / dot(n, ray);
}

ScalarGrid plane_depth_grid(int w, int h, const CameraIntrinsics& k, const Vec3& n, double dist) {
  ScalarGrid g(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) g.at(r, c) = plane_depth(k, n, dist, double(c), double(r));
  return g;
}

}  // namespace

TEST(Camera, PrincipalPointBackprojectsOnAxis) {
  CameraIntrinsics k = CameraIntrinsics::default_for(64, 48);
  EXPECT_DOUBLE_EQ(k.fx, 56.0);
  EXPECT_DOUBLE_EQ(k.cx, 31.5);
  EXPECT_DOUBLE_EQ(k.cy, 23.5);
  Vec3 p = k.ray(k.cx, k.cy) * 2.5;
  EXPECT_DOUBLE_EQ(p.x, 0.0);
  EXPECT_DOUBLE_EQ(p.y, 0.0);
  EXPECT_DOUBLE_EQ(p.z, 2.5);
  Vec3 q = k.ray(k.cx + k.fx, k.cy) * 3.0;
  EXPECT_DOUBLE_EQ(q.x, 3.0);
  EXPECT_DOUBLE_EQ(q.y, 0.0);
  EXPECT_DOUBLE_EQ(q.z, 3.0);
}

TEST(Camera, ProjectInvertsBackprojection) {
  CameraIntrinsics k = CameraIntrinsics::default_for(64, 64);
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    double u = rng.next_range(0.0, 63.0), v = rng.next_range(0.0, 63.0);
    double d = rng.next_range(0.5, 20.0);
    double u2, v2;
    k.project(k.ray(u, v) * d, u2, v2);
    EXPECT_NEAR(u2, u, 1e-9);
    EXPECT_NEAR(v2, v, 1e-9);
  }
}

TEST(PointCloud, ScalesLinearlyWithDepth) {
  CameraIntrinsics k = CameraIntrinsics::default_for(8, 8);
  Rng rng(4);
  ScalarGrid d(8, 8);
  for (double& v : d.data) v = rng.next_range(1.0, 5.0);
  ScalarGrid d3(8, 8);
  for (size_t i = 0; i < d.size(); ++i) d3.data[i] = 3.0 * d.data[i];
  PointCloud a = point_cloud_from_depth(d, k, ValidMask(8, 8));
  PointCloud b = point_cloud_from_depth(d3, k, ValidMask(8, 8));
  ASSERT_EQ(a.points.size(), 64u);
  for (size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_DOUBLE_EQ(b.points[i].x, 3.0 * a.points[i].x);
    EXPECT_DOUBLE_EQ(b.points[i].y, 3.0 * a.points[i].y);
    EXPECT_DOUBLE_EQ(b.points[i].z, 3.0 * a.points[i].z);
  }
}

TEST(PointCloud, SkipsMaskedAndCarriesColor) {
  CameraIntrinsics k = CameraIntrinsics::default_for(4, 4);
  ScalarGrid d(4, 4, 2.0);
  ValidMask m(4, 4);
  m.set(1, 1, false);
  ImageGrid rgb(4, 4, 3);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) rgb.at(0, r, c) = 0.5;
  PointCloud cloud = point_cloud_from_depth(d, k, m, &rgb);
  EXPECT_EQ(cloud.points.size(), 15u);
  ASSERT_EQ(cloud.colors.size(), 15u);
  EXPECT_DOUBLE_EQ(cloud.colors[0].x, 0.5);
}

TEST(PointCloud, RejectsNonPositiveDepth) {
  CameraIntrinsics k = CameraIntrinsics::default_for(4, 4);
  ScalarGrid d(4, 4, 2.0);
  d.at(2, 2) = 0.0;
  EXPECT_THROW(point_cloud_from_depth(d, k, ValidMask(4, 4)), invalid_input);
  ValidMask m(4, 4);
  m.set(2, 2, false);
  EXPECT_NO_THROW(point_cloud_from_depth(d, k, m));
}

TEST(Normals, UnitLengthFacingCamera) {
  CameraIntrinsics k = CameraIntrinsics::default_for(16, 16);
  Rng rng(5);
  ScalarGrid d(16, 16);
  for (double& v : d.data) v = rng.next_range(2.0, 6.0);
  NormalsResult res = normals_from_depth(d, k, ValidMask(16, 16));
  int checked = 0;
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) {
      if (!res.valid.at(r, c)) continue;
      double len = std::sqrt(res.normals.x.at(r, c) * res.normals.x.at(r, c) +
                             res.normals.y.at(r, c) * res.normals.y.at(r, c) +
                             res.normals.z.at(r, c) * res.normals.z.at(r, c));
      EXPECT_NEAR(len, 1.0, 1e-6);
      EXPECT_LE(res.normals.z.at(r, c), 0.0);
      ++checked;
    }
  EXPECT_GT(checked, 200);
}

TEST(Normals, ConstantAcrossSlantedPlane) {
  CameraIntrinsics k = CameraIntrinsics::default_for(32, 32);
  Vec3 n = normalized({0.3, -0.2, -1.0});
  ScalarGrid d = plane_depth_grid(32, 32, k, n * -1.0, 4.0);
  NormalsResult res = normals_from_depth(d, k, ValidMask(32, 32));
  for (int r = 1; r < 31; ++r)
    for (int c = 1; c < 31; ++c) {
      ASSERT_TRUE(res.valid.at(r, c));
      double cosang = res.normals.x.at(r, c) * n.x + res.normals.y.at(r, c) * n.y +
                      res.normals.z.at(r, c) * n.z;
      EXPECT_GT(cosang, std::cos(0.5 * M_PI / 180.0));
    }
}

TEST(Normals, FrontoParallelPlane) {
  CameraIntrinsics k = CameraIntrinsics::default_for(8, 8);
  ScalarGrid d(8, 8, 3.0);
  NormalsResult res = normals_from_depth(d, k, ValidMask(8, 8));
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      ASSERT_TRUE(res.valid.at(r, c));
      EXPECT_NEAR(res.normals.x.at(r, c), 0.0, 1e-9);
      EXPECT_NEAR(res.normals.y.at(r, c), 0.0, 1e-9);
      EXPECT_NEAR(res.normals.z.at(r, c), -1.0, 1e-9);
    }
}

TEST(Normals, MaskedPixelFallsBackOneSided) {
  CameraIntrinsics k = CameraIntrinsics::default_for(9, 9);
  Vec3 n = normalized({0.2, 0.1, -1.0});
  ScalarGrid d = plane_depth_grid(9, 9, k, n * -1.0, 4.0);
  d.at(4, 4) = 1e6;  // poison the hole so any leak through the stencil shows
  ValidMask m(9, 9);
  m.set(4, 4, false);
  NormalsResult res = normals_from_depth(d, k, m);
  EXPECT_FALSE(res.valid.at(4, 4));
  for (int r = 3; r <= 5; ++r)
    for (int c = 3; c <= 5; ++c) {
      if (r == 4 && c == 4) continue;
      ASSERT_TRUE(res.valid.at(r, c));
      double cosang = res.normals.x.at(r, c) * n.x + res.normals.y.at(r, c) * n.y +
                      res.normals.z.at(r, c) * n.z;
      EXPECT_GT(cosang, std::cos(0.5 * M_PI / 180.0));
    }
}

TEST(Normals, SobelNeedsFullNeighborhood) {
  CameraIntrinsics k = CameraIntrinsics::default_for(8, 8);
  ScalarGrid d(8, 8, 3.0);
  NormalsResult res = normals_from_depth(d, k, ValidMask(8, 8), StencilKind::Sobel);
  EXPECT_EQ(res.kind, StencilKind::Sobel);
  // Interior pixels get the Sobel taps, borders fall back to one-sided.
  uint8_t interior = res.modes[size_t(3 * 8 + 3)];
  EXPECT_EQ(interior & 3u, detail::kTapSobel);
  EXPECT_EQ((interior >> 2) & 3u, detail::kTapSobel);
  EXPECT_TRUE(res.valid.at(0, 0));
  EXPECT_NE(res.modes[0] & 3u, detail::kTapSobel);
}

TEST(Normals, RejectsNonPositiveDepth) {
  CameraIntrinsics k = CameraIntrinsics::default_for(4, 4);
  ScalarGrid d(4, 4, 1.0);
  d.at(0, 0) = -2.0;
  EXPECT_THROW(normals_from_depth(d, k, ValidMask(4, 4)), invalid_input);
}

TEST(NormalsBackward, MatchesFiniteDifferences) {
  CameraIntrinsics k = CameraIntrinsics::default_for(8, 8);
  Rng rng(6);
  ScalarGrid d(8, 8);
  for (double& v : d.data) v = rng.next_range(2.0, 4.0);
  ValidMask m(8, 8);
  NormalsResult fwd = normals_from_depth(d, k, m);
  std::vector<Vec3> dl_dn(d.size());
  for (size_t i = 0; i < dl_dn.size(); ++i)
    dl_dn[i] = {rng.next_range(-1.0, 1.0), rng.next_range(-1.0, 1.0), rng.next_range(-1.0, 1.0)};
  auto scalar_loss = [&](const ScalarGrid& depth) {
    NormalsResult r = normals_from_depth(depth, k, m);
    double s = 0.0;
    for (int rr = 0; rr < 8; ++rr)
      for (int cc = 0; cc < 8; ++cc) {
        if (!r.valid.at(rr, cc)) continue;
        const Vec3& g = dl_dn[size_t(rr * 8 + cc)];
        s += g.x * r.normals.x.at(rr, cc) + g.y * r.normals.y.at(rr, cc) +
             g.z * r.normals.z.at(rr, cc);
      }
    return s;
  };
  ScalarGrid flips;
  ScalarGrid grad = normals_backward(fwd, d, k, dl_dn, &flips);
  const double eps = 1e-6;
  ScalarGrid work = d;
  for (int idx = 0; idx < 64; idx += 7) {
    if (flips.data[size_t(idx)] < 10.0 * eps) continue;
    double orig = work.data[size_t(idx)];
    work.data[size_t(idx)] = orig + eps;
    double vp = scalar_loss(work);
    work.data[size_t(idx)] = orig - eps;
    double vm = scalar_loss(work);
    work.data[size_t(idx)] = orig;
    double fd = (vp - vm) / (2.0 * eps);
    EXPECT_NEAR(grad.data[size_t(idx)], fd, 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Disparity, RoundTripsThroughDepth) {
  Rng rng(7);
  ScalarGrid d(8, 8);
  for (double& v : d.data) v = rng.next_range(0.5, 10.0);
  ValidMask m(8, 8);
  m.set(2, 3, false);
  ScalarGrid disp = disparity_from_depth(d, m);
  ScalarGrid back = depth_from_disparity(disp, m);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      if (!m.at(r, c)) continue;
      EXPECT_NEAR(back.at(r, c), d.at(r, c), 1e-9);
      EXPECT_NEAR(disp.at(r, c), 1.0 / d.at(r, c), 1e-12);
    }
  EXPECT_DOUBLE_EQ(disp.at(2, 3), 0.0);
}

TEST(Disparity, RejectsNonPositiveValues) {
  ScalarGrid d(4, 4, 1.0);
  d.at(1, 1) = 0.0;
  EXPECT_THROW(disparity_from_depth(d, ValidMask(4, 4)), invalid_input);
}
