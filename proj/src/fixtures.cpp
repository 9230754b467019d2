#include "ergodic/fixtures.hpp"

#include "ergodic/errors.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <utility>

namespace ergodic::fixtures {

PointCloud grid(int nx, int ny, double spacing) {
  if (nx < 1 || ny < 1 || !(spacing > 0.0)) throw DomainError("grid: bad dimensions");
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) pts.emplace_back(i * spacing, j * spacing, 0.0);
  }
  return PointCloud(std::move(pts));
}

PointCloud icosphere(int level, double radius) {
  if (level < 0 || !(radius > 0.0)) throw DomainError("icosphere: bad parameters");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& p : v) p.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = mid.find(key); it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int a = midpoint(f[0], f[1]);
      const int b = midpoint(f[1], f[2]);
      const int c = midpoint(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    faces = std::move(next);
  }
  for (Vec3& p : v) p *= radius;
  return PointCloud(std::move(v));
}

PointCloud fibonacci_sphere(int n, double radius) {
  if (n < 2 || !(radius > 0.0)) throw DomainError("fibonacci_sphere: bad parameters");
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden * i;
    pts.emplace_back(radius * r * std::cos(phi), radius * r * std::sin(phi), radius * z);
  }
  return PointCloud(std::move(pts));
}

PointCloud wavy_sheet(int n, double extent) {
  if (n < 2 || !(extent > 0.0)) throw DomainError("wavy_sheet: bad parameters");
  const double step = extent / (n - 1);
  const double len = extent / 4.0;
  const double amp = extent / 20.0;
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double x = i * step;
      const double y = j * step;
      pts.emplace_back(x, y, amp * std::sin(x / len) * std::cos(y / len));
    }
  }
  return PointCloud(std::move(pts));
}

PointCloud downsample_to(const PointCloud& cloud, std::size_t count) {
  if (count == 0) throw DomainError("downsample_to: count must be positive");
  if (count >= cloud.size()) return cloud;
  Vec3 lo = cloud.position(0);
  Vec3 hi = lo;
  for (const Vec3& p : cloud.positions()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  double a = 1e-9 * (hi - lo).norm();  // too fine: keeps everything
  double b = (hi - lo).norm() + 1.0;   // one voxel
  PointCloud best = voxel_downsample(cloud, b);
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (a + b);
    PointCloud d = voxel_downsample(cloud, mid);
    const auto diff = [&](const PointCloud& c) {
      return std::abs(static_cast<double>(c.size()) - static_cast<double>(count));
    };
    if (diff(d) < diff(best)) best = d;
    if (d.size() > count) {
      a = mid;
    } else {
      b = mid;
    }
    if (best.size() == count) break;
  }
  return best;
}

std::vector<double> painted_disks(const PointCloud& cloud, const std::vector<Disk>& disks) {
  std::vector<double> p(cloud.size(), 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (const Disk& d : disks) {
      if ((cloud.position(i) - d.center).norm() <= d.radius) p[i] += d.mass;
    }
  }
  return p;
}

}  // namespace ergodic::fixtures
