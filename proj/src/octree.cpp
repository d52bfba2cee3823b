#include "scp/octree.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "scp/error.hpp"

namespace scp {

bool operator==(const OctreeNode& a, const OctreeNode& b) {
  return a.occupancy == b.occupancy && a.child_base == b.child_base;
}

bool operator==(const Octree& a, const Octree& b) {
  return a.depth == b.depth && a.levels == b.levels;
}

std::size_t Octree::node_count() const {
  std::size_t n = 0;
  for (const auto& level : levels) n += level.size();
  return n;
}

Octree build(const QuantizedCloud& qc) {
  return build(qc.indices, qc.steps.depth);
}

Octree build(std::span<const Index3> sorted_indices, int depth) {
  if (depth < 1 || depth > kMaxDepth)
    fail(ErrorKind::argument, "octree depth out of range: " + std::to_string(depth));
  Octree tree;
  tree.depth = depth;
  if (sorted_indices.empty()) return tree;

  const std::uint32_t top = (std::uint32_t{1} << depth) - 1;
  std::vector<std::uint64_t> keys;
  keys.reserve(sorted_indices.size());
  for (const auto& idx : sorted_indices) {
    if (idx[0] > top || idx[1] > top || idx[2] > top)
      fail(ErrorKind::argument, "index out of range for octree depth " + std::to_string(depth));
    keys.push_back(morton_key(idx, depth));
  }
  if (!std::is_sorted(keys.begin(), keys.end()) ||
      std::adjacent_find(keys.begin(), keys.end()) != keys.end())
    fail(ErrorKind::argument, "octree input must be unique and in Morton order");

  tree.levels.resize(static_cast<std::size_t>(depth));
  for (int level = 1; level <= depth; ++level) {
    const int prefix_shift = 3 * (depth - level + 1);
    const int digit_shift = 3 * (depth - level);
    auto& nodes = tree.levels[static_cast<std::size_t>(level - 1)];
    std::uint32_t child_base = 0;
    for (std::size_t i = 0; i < keys.size();) {
      const std::uint64_t prefix = keys[i] >> prefix_shift;
      Symbol occupancy = 0;
      for (; i < keys.size() && (keys[i] >> prefix_shift) == prefix; ++i)
        occupancy |= static_cast<Symbol>(1u << ((keys[i] >> digit_shift) & 7u));
      nodes.push_back({occupancy, child_base});
      child_base += static_cast<std::uint32_t>(std::popcount(occupancy));
    }
  }
  return tree;
}

StreamWalker::StreamWalker(int depth, bool empty_tree) : depth_(depth) {
  if (depth < 1 || depth > kMaxDepth)
    fail(ErrorKind::argument, "octree depth out of range: " + std::to_string(depth));
  if (empty_tree) return;
  Pending root;
  root.context.octant = 1;
  root.context.level = 1;
  root.context.position = {0.5, 0.5, 0.5};
  root.origin = {0, 0, 0};
  queue_.push_back(root);
}

void StreamWalker::push(Symbol symbol) {
  if (queue_.empty())
    fail(ErrorKind::corrupt_stream,
         "leftover symbol at node " + std::to_string(consumed_));
  if (symbol == 0)
    fail(ErrorKind::corrupt_stream,
         "zero occupancy byte at node " + std::to_string(consumed_));

  const Pending node = queue_.front();
  queue_.pop_front();
  ++consumed_;

  const int level = node.context.level;
  const std::uint32_t child_side = std::uint32_t{1} << (depth_ - level);
  const double cube = std::ldexp(1.0, depth_);
  for (int c = 0; c < 8; ++c) {
    if (!(symbol & (1u << c))) continue;
    const std::array<std::uint32_t, 3> bits{(c >> 2) & 1u, (c >> 1) & 1u, c & 1u};
    std::array<std::uint32_t, 3> origin{};
    for (int k = 0; k < 3; ++k) origin[k] = node.origin[k] + bits[k] * child_side;

    if (level == depth_) {
      leaves_.push_back({origin[0], origin[1], origin[2]});
      continue;
    }
    Pending child;
    child.origin = origin;
    child.context.octant = static_cast<std::uint8_t>(c + 1);
    child.context.level = static_cast<std::uint8_t>(level + 1);
    child.context.ancestors = {
        AncestorInfo{symbol, node.context.octant, node.context.level},
        node.context.ancestors[0], node.context.ancestors[1]};
    const double half = 0.5 * child_side;
    for (int k = 0; k < 3; ++k)
      child.context.position[k] = (origin[k] + half) / cube;
    queue_.push_back(child);
  }
}

std::vector<StreamEntry> occupancy_stream(const Octree& tree) {
  std::vector<StreamEntry> stream;
  if (tree.empty()) return stream;
  stream.reserve(tree.node_count());
  StreamWalker walker(tree.depth);
  for (const auto& level : tree.levels) {
    for (const auto& node : level) {
      stream.push_back({node.occupancy, walker.next_context()});
      walker.push(node.occupancy);
    }
  }
  return stream;
}

Octree rebuild(std::span<const Symbol> symbols, int depth) {
  Octree tree;
  tree.depth = depth;
  if (symbols.empty()) return tree;

  StreamWalker walker(depth);
  tree.levels.resize(static_cast<std::size_t>(depth));
  std::vector<std::uint32_t> child_base(static_cast<std::size_t>(depth), 0);
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (walker.done())
      fail(ErrorKind::corrupt_stream, "leftover symbols from node " + std::to_string(i));
    const auto level = static_cast<std::size_t>(walker.next_context().level - 1);
    tree.levels[level].push_back({symbols[i], child_base[level]});
    child_base[level] += static_cast<std::uint32_t>(std::popcount(symbols[i]));
    walker.push(symbols[i]);
  }
  if (!walker.done())
    fail(ErrorKind::corrupt_stream,
         "occupancy stream exhausted at node " + std::to_string(symbols.size()));
  return tree;
}

std::vector<Index3> leaves(const Octree& tree) {
  if (tree.empty()) return {};
  StreamWalker walker(tree.depth);
  for (const auto& level : tree.levels)
    for (const auto& node : level) walker.push(node.occupancy);
  return walker.leaves();
}

void MultiLevelConfig::validate() const {
  if (thresholds.empty())
    fail(ErrorKind::config, "multi-level config needs at least one part");
  if (thresholds.front() != 0.0)
    fail(ErrorKind::config, "first threshold must be 0");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1]))
      fail(ErrorKind::config, "thresholds must be strictly increasing");
  if (!(thresholds.back() < 1.0))
    fail(ErrorKind::config, "thresholds must be below 1");
}

std::size_t part_of(double rho, const MultiLevelConfig& cfg, double rho_max) {
  std::size_t part = 0;
  for (std::size_t n = 1; n < cfg.parts(); ++n)
    if (rho >= cfg.thresholds[n] * rho_max) part = n;
  return part;
}

std::vector<PointCloud> partition_multilevel(const PointCloud& cloud,
                                             const MultiLevelConfig& cfg,
                                             double rho_max) {
  cfg.validate();
  std::vector<PointCloud> parts(cfg.parts());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    auto& part = parts[part_of(norm(p), cfg, rho_max)];
    part.points.push_back(p);
    if (cloud.attr) {
      if (!part.attr) part.attr.emplace();
      part.attr->push_back((*cloud.attr)[i]);
    }
  }
  if (cloud.attr)
    for (auto& part : parts)
      if (!part.attr) part.attr.emplace();
  return parts;
}

QuantSteps part_steps(const QuantSteps& base, std::size_t n) {
  QuantSteps s = base;
  if (n == 0) return s;
  const double scale = std::ldexp(1.0, -static_cast<int>(n));
  s.q_primary *= scale;
  s.q_theta *= scale;
  s.q_phi *= scale;
  s.depth = base.depth + static_cast<int>(n);
  if (s.depth > kMaxDepth)
    fail(ErrorKind::config, "multi-level part " + std::to_string(n) +
                                " exceeds maximum octree depth");
  if (s.system == CoordSystem::cartesian)
    s.bins = base.bins << n;
  else
    s.bins = (base.bins - 1) * (std::int64_t{1} << n) + 1;
  return s;
}

}  // namespace scp
