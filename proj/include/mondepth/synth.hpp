#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mondepth/camera.hpp"
#include "mondepth/errors.hpp"
#include "mondepth/grid.hpp"
#include "mondepth/rng.hpp"

namespace mondepth {

enum class PrimitiveKind { Plane, Sphere, Box };

struct SceneSpec {
  uint64_t seed = 0;
  int width = 64;
  int height = 64;
  int primitive_count = 3;  // foreground primitives over the background plane
  std::vector<PrimitiveKind> kinds = {PrimitiveKind::Plane, PrimitiveKind::Sphere,
                                      PrimitiveKind::Box};
  double near = 2.0;
  double far = 8.0;
  double noise_sigma = 0.0;  // additive depth noise; normals stay those of the clean surface
  double focal = 0.0;        // pixels; 0 selects the default intrinsics
  double plane_tilt_max = 0.25;
};

struct RenderedScene {
  ScalarGrid depth;
  NormalGrid normals;  // analytic per-primitive normals, not finite differences
  ImageGrid rgb;
  ValidMask mask;
  std::vector<int> primitive_id;  // 0 = background, then 1-based primitive index
  CameraIntrinsics intrinsics;
};

namespace detail {

struct ScenePrimitive {
  PrimitiveKind kind = PrimitiveKind::Sphere;
  Vec3 center;
  double radius = 0.0;  // sphere and disk
  Vec3 normal;          // disk
  Vec3 half;            // box half extents
  Vec3 albedo;
};

// Intersects one primitive with the ray t*rho (rho.z = 1, so t is depth).
// Returns false on miss; on hit fills depth t and the outward unit normal.
inline bool intersect(const ScenePrimitive& p, const Vec3& rho, double& t, Vec3& n) {
  switch (p.kind) {
    case PrimitiveKind::Plane: {
      double denom = dot(p.normal, rho);
      if (std::abs(denom) < 1e-12) return false;
      double tt = dot(p.normal, p.center) / denom;
      if (tt <= 0.0) return false;
      Vec3 hit = rho * tt;
      if (norm(hit - p.center) > p.radius) return false;
      t = tt;
      n = p.normal;
      return true;
    }
    case PrimitiveKind::Sphere: {
      double a = dot(rho, rho);
      double b = -2.0 * dot(rho, p.center);
      double c = dot(p.center, p.center) - p.radius * p.radius;
      double disc = b * b - 4.0 * a * c;
      if (disc < 0.0) return false;
      double tt = (-b - std::sqrt(disc)) / (2.0 * a);
      if (tt <= 0.0) return false;
      t = tt;
      n = (rho * tt - p.center) * (1.0 / p.radius);
      return true;
    }
    case PrimitiveKind::Box: {
      double tmin = -1e30, tmax = 1e30;
      int axis = -1;
      const double rc[3] = {rho.x, rho.y, rho.z};
      const double cc[3] = {p.center.x, p.center.y, p.center.z};
      const double hh[3] = {p.half.x, p.half.y, p.half.z};
      for (int a = 0; a < 3; ++a) {
        if (std::abs(rc[a]) < 1e-12) {
          if (std::abs(cc[a]) > hh[a]) return false;
          continue;
        }
        double t0 = (cc[a] - hh[a]) / rc[a];
        double t1 = (cc[a] + hh[a]) / rc[a];
        if (t0 > t1) std::swap(t0, t1);
        if (t0 > tmin) {
          tmin = t0;
          axis = a;
        }
        tmax = std::min(tmax, t1);
      }
      if (tmax < tmin || tmin <= 0.0 || axis < 0) return false;
      t = tmin;
      n = Vec3{0.0, 0.0, 0.0};
      double s = rc[axis] > 0.0 ? -1.0 : 1.0;
      if (axis == 0)
        n.x = s;
      else if (axis == 1)
        n.y = s;
      else
        n.z = s;
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Procedural scene: z-buffer composition of primitives over a tilted
// background plane, exact analytic normals, Lambertian shading. Depth is
// strictly inside (near, far); the rare grazing pixels whose true normal
// tips past the image plane (positive z) are masked invalid so every exposed
// normal honors the camera-facing convention.
inline RenderedScene render_scene(const SceneSpec& spec) {
  if (spec.width < 2 || spec.height < 2) throw invalid_input("render_scene: grid too small");
  if (!(spec.near > 0.0) || !(spec.far > spec.near))
    throw invalid_input("render_scene: need 0 < near < far");
  if (spec.primitive_count < 0) throw invalid_input("render_scene: negative primitive count");
  Rng rng(spec.seed);
  RenderedScene scene;
  scene.intrinsics = CameraIntrinsics::default_for(spec.width, spec.height);
  if (spec.focal > 0.0) scene.intrinsics.fx = scene.intrinsics.fy = spec.focal;
  const CameraIntrinsics& K = scene.intrinsics;
  double span = spec.far - spec.near;

  // Background plane anchored on the optical axis; tilt shrinks until the
  // whole image stays inside the depth bounds.
  Vec3 bg_normal{0.0, 0.0, -1.0};
  double bg_z = spec.far * 0.75 >= spec.near ? rng.next_range(spec.far * 0.78, spec.far * 0.92)
                                             : 0.5 * (spec.near + spec.far);
  {
    double tx = rng.next_range(-spec.plane_tilt_max, spec.plane_tilt_max);
    double ty = rng.next_range(-spec.plane_tilt_max, spec.plane_tilt_max);
    for (int attempt = 0; attempt < 16; ++attempt) {
      Vec3 n = normalized(Vec3{tx, ty, -1.0});
      double tmin = 1e30, tmax = -1e30;
      const double us[2] = {0.0, double(spec.width - 1)};
      const double vs[2] = {0.0, double(spec.height - 1)};
      bool ok = true;
      for (double u : us)
        for (double v : vs) {
          double denom = dot(n, K.ray(u, v));
          if (denom >= -1e-9) {
            ok = false;
            break;
          }
          double t = n.z * bg_z / denom;
          tmin = std::min(tmin, t);
          tmax = std::max(tmax, t);
        }
      if (ok && tmin > spec.near * 1.02 && tmax < spec.far * 0.999) {
        bg_normal = n;
        break;
      }
      tx *= 0.5;
      ty *= 0.5;
    }
  }
  detail::ScenePrimitive background;
  background.kind = PrimitiveKind::Plane;
  background.normal = bg_normal;
  background.center = Vec3{0.0, 0.0, bg_z};
  background.radius = 1e30;
  background.albedo = Vec3{rng.next_range(0.3, 0.9), rng.next_range(0.3, 0.9),
                           rng.next_range(0.3, 0.9)};

  std::vector<detail::ScenePrimitive> prims;
  for (int i = 0; i < spec.primitive_count; ++i) {
    detail::ScenePrimitive p;
    p.kind = spec.kinds.empty() ? PrimitiveKind::Sphere
                                : spec.kinds[size_t(rng.next_below(spec.kinds.size()))];
    double u = rng.next_range(0.18, 0.82) * (spec.width - 1);
    double v = rng.next_range(0.18, 0.82) * (spec.height - 1);
    Vec3 dir = K.ray(u, v);
    switch (p.kind) {
      case PrimitiveKind::Sphere: {
        double r = rng.next_range(0.08, 0.22) * span;
        double zlo = spec.near * 1.05 + r;
        double zhi = spec.far * 0.95 - r;
        if (zlo >= zhi) {
          r = 0.2 * (spec.far * 0.95 - spec.near * 1.05);
          zlo = spec.near * 1.05 + r;
          zhi = spec.far * 0.95 - r;
        }
        double zc = rng.next_range(zlo, std::min(zhi, bg_z - r * 1.05));
        p.center = dir * zc;
        p.radius = r;
        break;
      }
      case PrimitiveKind::Box: {
        p.half = Vec3{rng.next_range(0.06, 0.18) * span, rng.next_range(0.06, 0.18) * span,
                      rng.next_range(0.06, 0.18) * span};
        double zlo = spec.near * 1.05 + p.half.z;
        double zhi = std::min(spec.far * 0.95, bg_z) - p.half.z * 1.05;
        if (zlo >= zhi) {
          p.half = p.half * 0.3;
          zlo = spec.near * 1.05 + p.half.z;
          zhi = std::min(spec.far * 0.95, bg_z) - p.half.z * 1.05;
        }
        double zc = rng.next_range(zlo, zhi);
        p.center = dir * zc;
        break;
      }
      case PrimitiveKind::Plane: {
        double zc = rng.next_range(spec.near + 0.25 * span, std::min(spec.far * 0.9, bg_z * 0.95));
        p.center = dir * zc;
        double frustum = zc * 0.5 * spec.width / K.fx;
        p.radius = rng.next_range(0.25, 0.55) * frustum;
        double tx = rng.next_range(-spec.plane_tilt_max, spec.plane_tilt_max);
        double ty = rng.next_range(-spec.plane_tilt_max, spec.plane_tilt_max);
        p.normal = normalized(Vec3{tx, ty, -1.0});
        break;
      }
    }
    p.albedo = Vec3{rng.next_range(0.15, 0.95), rng.next_range(0.15, 0.95),
                    rng.next_range(0.15, 0.95)};
    prims.push_back(p);
  }

  scene.depth = ScalarGrid(spec.width, spec.height);
  scene.normals = NormalGrid(spec.width, spec.height);
  scene.rgb = ImageGrid(spec.width, spec.height, 3);
  scene.mask = ValidMask(spec.width, spec.height, true);
  scene.primitive_id.assign(size_t(spec.width) * spec.height, 0);
  const Vec3 light = normalized(Vec3{0.35, -0.45, -0.8});

  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      Vec3 rho = K.ray(double(c), double(r));
      double t;
      Vec3 n;
      if (!detail::intersect(background, rho, t, n)) {
        t = bg_z;
        n = Vec3{0.0, 0.0, -1.0};
      }
      Vec3 albedo = background.albedo;
      int id = 0;
      for (size_t i = 0; i < prims.size(); ++i) {
        double ti;
        Vec3 ni;
        if (detail::intersect(prims[i], rho, ti, ni) && ti < t) {
          t = ti;
          n = ni;
          albedo = prims[i].albedo;
          id = int(i) + 1;
        }
      }
      t = std::clamp(t, spec.near, spec.far);
      scene.depth.at(r, c) = t;
      scene.normals.x.at(r, c) = n.x;
      scene.normals.y.at(r, c) = n.y;
      scene.normals.z.at(r, c) = n.z;
      scene.primitive_id[size_t(r) * spec.width + c] = id;
      if (n.z > 0.0) scene.mask.set(r, c, false);
      double shade = 0.25 + 0.75 * std::max(0.0, dot(n, light));
      // Aerial perspective: attenuate with distance so flat regions carry a
      // local depth cue (a tilted plane has constant Lambertian shade, which
      // would otherwise leave most pixels with no appearance-depth signal).
      double fog = 1.0 - 0.55 * (t - spec.near) / (spec.far - spec.near);
      shade *= fog;
      scene.rgb.at(0, r, c) = std::clamp(albedo.x * shade, 0.0, 1.0);
      scene.rgb.at(1, r, c) = std::clamp(albedo.y * shade, 0.0, 1.0);
      scene.rgb.at(2, r, c) = std::clamp(albedo.z * shade, 0.0, 1.0);
    }
  }

  if (spec.noise_sigma > 0.0) {
    Rng noise(mix_seed(spec.seed, 0x6e6f6973));
    for (double& d : scene.depth.data)
      d = std::clamp(d + spec.noise_sigma * noise.next_gaussian(), spec.near, spec.far);
  }
  return scene;
}

enum class CorruptKind { Blur, Noise, Affine };

struct CorruptParams {
  double sigma = 1.0;
  double a = 1.0;
  double b = 0.0;
  uint64_t seed = 0;
};

inline ScalarGrid corrupt(const ScalarGrid& depth, CorruptKind kind, const CorruptParams& params) {
  switch (kind) {
    case CorruptKind::Blur:
      return gaussian_blur(depth, params.sigma);
    case CorruptKind::Noise: {
      ScalarGrid out = depth;
      if (params.sigma > 0.0) {
        Rng rng(params.seed);
        for (double& d : out.data) d += params.sigma * rng.next_gaussian();
      }
      return out;
    }
    case CorruptKind::Affine: {
      ScalarGrid out = depth;
      for (double& d : out.data) d = params.a * d + params.b;
      return out;
    }
  }
  throw invalid_input("corrupt: unknown kind");
}

}  // namespace mondepth
