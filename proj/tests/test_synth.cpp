#include <gtest/gtest.h>

#include <cmath>

#include "mondepth/errors.hpp"
#include "mondepth/geometry.hpp"
#include "mondepth/metrics.hpp"
#include "mondepth/synth.hpp"

using namespace mondepth;

TEST(RenderScene, FrontoParallelBackgroundOnly) {
  SceneSpec spec;
  spec.seed = 4;
  spec.primitive_count = 0;
  spec.plane_tilt_max = 0.0;
  RenderedScene scene = render_scene(spec);
  double d0 = scene.depth.at(0, 0);
  EXPECT_GT(d0, spec.near);
  EXPECT_LT(d0, spec.far);
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      ASSERT_DOUBLE_EQ(scene.depth.at(r, c), d0);
      ASSERT_DOUBLE_EQ(scene.normals.x.at(r, c), 0.0);
      ASSERT_DOUBLE_EQ(scene.normals.y.at(r, c), 0.0);
      ASSERT_DOUBLE_EQ(scene.normals.z.at(r, c), -1.0);
      ASSERT_TRUE(scene.mask.at(r, c));
      ASSERT_EQ(scene.primitive_id[size_t(r) * 64 + c], 0);
    }
}

TEST(RenderScene, DeterministicPerSeed) {
  SceneSpec spec;
  spec.seed = 11;
  RenderedScene a = render_scene(spec);
  RenderedScene b = render_scene(spec);
  EXPECT_EQ(a.depth.data, b.depth.data);
  for (int ch = 0; ch < 3; ++ch)
    EXPECT_EQ(a.rgb.channels[size_t(ch)].data, b.rgb.channels[size_t(ch)].data);
  EXPECT_EQ(a.normals.x.data, b.normals.x.data);
  EXPECT_EQ(a.mask.flags, b.mask.flags);
  EXPECT_EQ(a.primitive_id, b.primitive_id);
  spec.seed = 12;
  RenderedScene c = render_scene(spec);
  EXPECT_NE(a.depth.data, c.depth.data);
}

TEST(RenderScene, DepthRespectsBoundsAndRgbIsNormalized) {
  for (uint64_t seed : {1u, 7u, 23u}) {
    SceneSpec spec;
    spec.seed = seed;
    RenderedScene scene = render_scene(spec);
    for (double d : scene.depth.data) {
      EXPECT_GE(d, spec.near);
      EXPECT_LE(d, spec.far);
    }
    for (const ScalarGrid& ch : scene.rgb.channels)
      for (double v : ch.data) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    EXPECT_GT(scene.mask.count_valid(), 64 * 64 * 95 / 100);
  }
}

TEST(RenderScene, SphereSilhouetteAndAnalyticNormals) {
  SceneSpec spec;
  spec.seed = 3;
  spec.primitive_count = 1;
  spec.kinds = {PrimitiveKind::Sphere};
  spec.focal = 2.0 * 64;
  RenderedScene scene = render_scene(spec);
  int sphere_px = 0;
  for (int id : scene.primitive_id) sphere_px += id == 1;
  ASSERT_GT(sphere_px, 50);

  // Depth jumps across the silhouette.
  double max_jump = 0.0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c + 1 < 64; ++c)
      if (scene.primitive_id[size_t(r) * 64 + c] != scene.primitive_id[size_t(r) * 64 + c + 1])
        max_jump = std::max(max_jump, std::abs(scene.depth.at(r, c) - scene.depth.at(r, c + 1)));
  EXPECT_GT(max_jump, 0.1);

  // Analytic normals agree with finite differences away from the silhouette.
  NormalsResult fd = normals_from_depth(scene.depth, scene.intrinsics, scene.mask);
  auto id_at = [&](int r, int c) { return scene.primitive_id[size_t(r) * 64 + c]; };
  int considered = 0, within = 0;
  const double cos2 = std::cos(2.0 * std::numbers::pi / 180.0);
  for (int r = 1; r < 63; ++r)
    for (int c = 1; c < 63; ++c) {
      if (!fd.valid.at(r, c)) continue;
      int id = id_at(r, c);
      if (id_at(r - 1, c) != id || id_at(r + 1, c) != id || id_at(r, c - 1) != id ||
          id_at(r, c + 1) != id)
        continue;
      double d = fd.normals.x.at(r, c) * scene.normals.x.at(r, c) +
                 fd.normals.y.at(r, c) * scene.normals.y.at(r, c) +
                 fd.normals.z.at(r, c) * scene.normals.z.at(r, c);
      ++considered;
      within += d > cos2;
    }
  ASSERT_GT(considered, 1000);
  EXPECT_GE(double(within) / considered, 0.95);
}

TEST(RenderScene, MultiPrimitiveSceneHasDepthEdges) {
  SceneSpec spec;
  spec.seed = 19;
  RenderedScene scene = render_scene(spec);
  DbeResult res = dbe(scene.depth, scene.depth, scene.mask);
  EXPECT_FALSE(res.gt_edges_empty);
}

TEST(RenderScene, ShadingCarriesDistanceCue) {
  SceneSpec spec;
  spec.seed = 2;
  spec.primitive_count = 0;
  RenderedScene scene = render_scene(spec);
  int lo = 0, hi = 0;
  for (int i = 1; i < 64 * 64; ++i) {
    if (scene.depth.data[size_t(i)] < scene.depth.data[size_t(lo)]) lo = i;
    if (scene.depth.data[size_t(i)] > scene.depth.data[size_t(hi)]) hi = i;
  }
  ASSERT_GT(scene.depth.data[size_t(hi)] - scene.depth.data[size_t(lo)], 0.05);
  // Same plane, same normal: the shade ratio must be exactly the attenuation
  // ratio of the two depths.
  auto fog = [&](double t) { return 1.0 - 0.55 * (t - spec.near) / (spec.far - spec.near); };
  double got = scene.rgb.channels[0].data[size_t(lo)] / scene.rgb.channels[0].data[size_t(hi)];
  double want = fog(scene.depth.data[size_t(lo)]) / fog(scene.depth.data[size_t(hi)]);
  EXPECT_NEAR(got, want, 1e-9);
}

TEST(RenderScene, NoiseMovesDepthNotNormals) {
  SceneSpec spec;
  spec.seed = 6;
  RenderedScene clean = render_scene(spec);
  spec.noise_sigma = 0.05;
  RenderedScene noisy = render_scene(spec);
  RenderedScene noisy2 = render_scene(spec);
  EXPECT_NE(noisy.depth.data, clean.depth.data);
  EXPECT_EQ(noisy.depth.data, noisy2.depth.data);
  EXPECT_EQ(noisy.normals.x.data, clean.normals.x.data);
  EXPECT_EQ(noisy.normals.z.data, clean.normals.z.data);
  for (double d : noisy.depth.data) {
    EXPECT_GE(d, spec.near);
    EXPECT_LE(d, spec.far);
  }
}

TEST(RenderScene, RejectsBadSpecs) {
  SceneSpec spec;
  spec.width = 1;
  EXPECT_THROW(render_scene(spec), invalid_input);
  spec = SceneSpec{};
  spec.near = 0.0;
  EXPECT_THROW(render_scene(spec), invalid_input);
  spec = SceneSpec{};
  spec.far = spec.near;
  EXPECT_THROW(render_scene(spec), invalid_input);
  spec = SceneSpec{};
  spec.primitive_count = -1;
  EXPECT_THROW(render_scene(spec), invalid_input);
}

TEST(Corrupt, AffineAndNoiseIdentities) {
  RenderedScene scene = render_scene(SceneSpec{.seed = 8, .width = 16, .height = 16});
  CorruptParams p;
  EXPECT_EQ(corrupt(scene.depth, CorruptKind::Affine, p).data, scene.depth.data);
  p.sigma = 0.0;
  EXPECT_EQ(corrupt(scene.depth, CorruptKind::Noise, p).data, scene.depth.data);
}

TEST(Corrupt, AffineRemapsValues) {
  RenderedScene scene = render_scene(SceneSpec{.seed = 8, .width = 16, .height = 16});
  CorruptParams p;
  p.a = 2.0;
  p.b = 1.0;
  ScalarGrid out = corrupt(scene.depth, CorruptKind::Affine, p);
  for (size_t i = 0; i < out.size(); ++i)
    EXPECT_DOUBLE_EQ(out.data[i], 2.0 * scene.depth.data[i] + 1.0);
}

TEST(Corrupt, BlurPreservesConstants) {
  ScalarGrid g(16, 16, 4.2);
  CorruptParams p;
  p.sigma = 1.5;
  ScalarGrid out = corrupt(g, CorruptKind::Blur, p);
  for (double v : out.data) EXPECT_NEAR(v, 4.2, 1e-12);
}

TEST(Corrupt, NoiseIsSeeded) {
  RenderedScene scene = render_scene(SceneSpec{.seed = 8, .width = 16, .height = 16});
  CorruptParams p;
  p.sigma = 0.1;
  p.seed = 5;
  ScalarGrid a = corrupt(scene.depth, CorruptKind::Noise, p);
  ScalarGrid b = corrupt(scene.depth, CorruptKind::Noise, p);
  EXPECT_EQ(a.data, b.data);
  p.seed = 6;
  ScalarGrid c = corrupt(scene.depth, CorruptKind::Noise, p);
  EXPECT_NE(a.data, c.data);
}
