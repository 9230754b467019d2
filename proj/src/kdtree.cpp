#include "ergodic/kdtree.hpp"

#include "ergodic/errors.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <utility>

namespace ergodic {

KdTree::KdTree(std::vector<Vec3> points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  if (points_.empty()) throw DomainError("KdTree: empty point set");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
  build(0, points_.size());
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (std::size_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident; keep as leaf

  const std::size_t mid = begin + (end - begin) / 2;
  auto first = order_.begin() + static_cast<std::ptrdiff_t>(begin);
  std::nth_element(first, order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];

  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

std::vector<std::size_t> KdTree::radius_neighbors(const Vec3& center, double radius) const {
  if (!(radius > 0.0)) throw DomainError("radius_neighbors: radius must be positive");
  const double r2 = radius * radius;
  std::vector<std::size_t> out;
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t p = order_[i];
        if ((points_[p] - center).squaredNorm() <= r2) out.push_back(p);
      }
      continue;
    }
    // Left holds coordinates <= split, right holds >= split.
    const double delta = center[node.axis] - node.split;
    if (delta <= radius) stack.push_back(node.left);
    if (delta >= -radius) stack.push_back(node.right);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> KdTree::knn(const Vec3& center, std::size_t k) const {
  if (k < 1 || k > points_.size()) throw DomainError("knn: k out of range");
  using Entry = std::pair<double, std::size_t>;  // lexicographic: distance, then index
  std::priority_queue<Entry> heap;

  auto visit = [&](auto&& self, std::size_t id) -> void {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t p = order_[i];
        const Entry e{(points_[p] - center).squaredNorm(), p};
        if (heap.size() < k) {
          heap.push(e);
        } else if (e < heap.top()) {
          heap.pop();
          heap.push(e);
        }
      }
      return;
    }
    const double delta = center[node.axis] - node.split;
    const std::size_t near = delta <= 0.0 ? node.left : node.right;
    const std::size_t far = delta <= 0.0 ? node.right : node.left;
    self(self, near);
    if (heap.size() < k || delta * delta <= heap.top().first) self(self, far);
  };
  visit(visit, 0);

  std::vector<std::size_t> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top().second;
    heap.pop();
  }
  return out;
}

}  // namespace ergodic
