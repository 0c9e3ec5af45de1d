#pragma once

#include <cmath>
#include <vector>

namespace mondepth {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) {
  double n = norm(a);
  return n > 0.0 ? a * (1.0 / n) : Vec3{0.0, 0.0, 0.0};
}

// Pinhole intrinsics. Pixel (u, v) back-projects along
// ray(u, v) = ((u - cx) / fx, (v - cy) / fy, 1), camera looks down +z.
struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;

  // Default used when no calibration is given; callers must state the source.
  static CameraIntrinsics default_for(int width, int height) {
    CameraIntrinsics k;
    k.fx = k.fy = 0.5 * double(width + height);
    k.cx = 0.5 * double(width - 1);
    k.cy = 0.5 * double(height - 1);
    return k;
  }

  Vec3 ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }

  // Perspective projection of a camera-space point with z > 0.
  void project(const Vec3& p, double& u, double& v) const {
    u = p.x * fx / p.z + cx;
    v = p.y * fy / p.z + cy;
  }
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> colors;  // empty, or one RGB in [0,1] per point
};

}  // namespace mondepth
