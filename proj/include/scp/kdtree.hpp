#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scp/point_cloud.hpp"

namespace scp {

// Static 3-d tree for exact nearest-neighbour queries. Ties in distance are
// broken towards the smaller point index, so results are reproducible and
// match an exhaustive scan exactly.
class KdTree {
public:
  struct Neighbor {
    std::size_t index;
    double sq_dist;
  };

  explicit KdTree(std::span<const Vec3> points);

  Neighbor nearest(Vec3 query) const;
  // Up to k neighbours ordered by (distance, index).
  std::vector<Neighbor> knn(Vec3 query, std::size_t k) const;

  std::size_t size() const { return points_.size(); }

private:
  struct Node {
    std::uint32_t begin, end;  // leaf range in order_
    std::int32_t left = -1, right = -1;
    int axis = 0;
    double split = 0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  template <typename Visit>
  void search(std::int32_t node, Vec3 query, double& bound, Visit&& visit) const;

  std::span<const Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace scp
