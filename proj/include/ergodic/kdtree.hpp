#pragma once

#include "ergodic/pointcloud.hpp"

#include <cstddef>
#include <vector>

namespace ergodic {

/// Balanced k-d tree over a fixed set of 3-D points.
///
/// Built once by median splits and never modified. Queries are exact: radius
/// search returns every index within the (closed) ball, ascending; k-nearest
/// returns distance-ascending indices with ties resolved by lower index.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points, std::size_t leaf_size = 8);
  explicit KdTree(const PointCloud& cloud, std::size_t leaf_size = 8)
      : KdTree(cloud.positions(), leaf_size) {}

  std::size_t size() const noexcept { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  std::vector<std::size_t> radius_neighbors(const Vec3& center, double radius) const;
  std::vector<std::size_t> knn(const Vec3& center, std::size_t k) const;
  std::size_t nearest(const Vec3& center) const { return knn(center, 1).front(); }

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end);

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

using SpatialIndex = KdTree;

}  // namespace ergodic
