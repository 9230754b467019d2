#pragma once

#include "ergodic/pointcloud.hpp"

#include <vector>

namespace ergodic::fixtures {

/// nx × ny planar grid in z = 0 starting at the origin.
PointCloud grid(int nx, int ny, double spacing);

/// Vertices of a subdivided icosahedron (10·4^level + 2 points).
PointCloud icosphere(int level, double radius = 1.0);

/// n points on a Fibonacci spiral over the sphere.
PointCloud fibonacci_sphere(int n, double radius = 1.0);

/// Gently curved square sheet z = a sin(x/L) cos(y/L), sampled on an n × n lattice.
PointCloud wavy_sheet(int n, double extent);

/// Voxel-filters `cloud` to approximately `count` points by bisecting the voxel size.
PointCloud downsample_to(const PointCloud& cloud, std::size_t count);

struct Disk {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  double mass = 1.0;
};

/// Target masses: each point inside a disk receives that disk's mass (summed over disks).
std::vector<double> painted_disks(const PointCloud& cloud, const std::vector<Disk>& disks);

}  // namespace ergodic::fixtures
