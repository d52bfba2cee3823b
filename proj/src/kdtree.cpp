#include "scp/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <queue>

#include "scp/error.hpp"

namespace scp {

namespace {

constexpr std::uint32_t kLeafSize = 12;

bool closer(const KdTree::Neighbor& a, const KdTree::Neighbor& b) {
  return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
}

}  // namespace

KdTree::KdTree(std::span<const Vec3> points) : points_(points) {
  if (points.size() >= std::numeric_limits<std::uint32_t>::max())
    fail(ErrorKind::argument, "point cloud too large for the spatial index");
  order_.resize(points.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (!points.empty()) build(0, static_cast<std::uint32_t>(points.size()));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    const Vec3& p = points_[order_[i]];
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  const Vec3 spread = hi - lo;
  int axis = 0;
  if (spread.y > spread[axis]) axis = 1;
  if (spread.z > spread[axis]) axis = 2;
  if (spread[axis] == 0) return id;  // all coincident

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& node = nodes_[static_cast<std::size_t>(id)];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

template <typename Visit>
void KdTree::search(std::int32_t id, Vec3 query, double& bound, Visit&& visit) const {
  const Node& node = nodes_[static_cast<std::size_t>(id)];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      visit(Neighbor{idx, squared_distance(query, points_[idx])});
    }
    return;
  }
  // Left subtree holds coordinates <= split, right subtree >= split.
  const double diff = query[node.axis] - node.split;
  const std::int32_t near = diff < 0 ? node.left : node.right;
  const std::int32_t far = diff < 0 ? node.right : node.left;
  search(near, query, bound, visit);
  if (diff * diff <= bound) search(far, query, bound, visit);
}

KdTree::Neighbor KdTree::nearest(Vec3 query) const {
  if (points_.empty()) fail(ErrorKind::argument, "nearest-neighbour query on empty index");
  Neighbor best{std::numeric_limits<std::size_t>::max(),
                std::numeric_limits<double>::infinity()};
  double bound = best.sq_dist;
  search(0, query, bound, [&](const Neighbor& n) {
    if (closer(n, best)) {
      best = n;
      bound = n.sq_dist;
    }
  });
  return best;
}

std::vector<KdTree::Neighbor> KdTree::knn(Vec3 query, std::size_t k) const {
  std::vector<Neighbor> heap;  // max-heap under `closer`
  if (k == 0 || points_.empty()) return heap;
  heap.reserve(k + 1);
  double bound = std::numeric_limits<double>::infinity();
  search(0, query, bound, [&](const Neighbor& n) {
    if (heap.size() < k) {
      heap.push_back(n);
      std::push_heap(heap.begin(), heap.end(), closer);
    } else if (closer(n, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), closer);
      heap.back() = n;
      std::push_heap(heap.begin(), heap.end(), closer);
    } else {
      return;
    }
    if (heap.size() == k) bound = heap.front().sq_dist;
  });
  std::sort_heap(heap.begin(), heap.end(), closer);
  return heap;
}

}  // namespace scp
