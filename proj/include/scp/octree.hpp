#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "scp/coords.hpp"

namespace scp {

using Symbol = std::uint8_t;  // occupancy byte, never 0

struct OctreeNode {
  Symbol occupancy = 0;
  // Position of the first child in the next level's node list.
  std::uint32_t child_base = 0;
};

// Occupancy levels 1..depth, breadth-first. Children of the level-`depth`
// nodes are the leaves (quantized index triples).
//
// Child octant c = 4*b0 + 2*b1 + b2, where b_k is the bit of index coordinate
// k selected at that level (most significant first); bit c of the parent's
// occupancy byte has value 2^c.
struct Octree {
  int depth = 0;
  std::vector<std::vector<OctreeNode>> levels;

  std::size_t node_count() const;
  bool empty() const { return levels.empty(); }
  friend bool operator==(const Octree&, const Octree&);
};

bool operator==(const OctreeNode& a, const OctreeNode& b);

struct AncestorInfo {
  Symbol occupancy = 0;
  std::uint8_t octant = 0;
  std::uint8_t level = 0;
};

struct NodeContext {
  std::uint8_t octant = 1;  // 1..8, root is 1
  std::uint8_t level = 1;   // 1..depth
  // Parent, grandparent, great-grandparent; zero above the root.
  std::array<AncestorInfo, 3> ancestors{};
  // Node centre divided by the index cube side, each component in (0, 1).
  std::array<double, 3> position{};
};

struct StreamEntry {
  Symbol symbol;
  NodeContext context;
};

Octree build(const QuantizedCloud& qc);
Octree build(std::span<const Index3> sorted_indices, int depth);

// Breadth-first (symbol, context) sequence in the same order as build().
std::vector<StreamEntry> occupancy_stream(const Octree& tree);

// Inverse of the symbol part of occupancy_stream. Throws
// ErrorKind::corrupt_stream on early exhaustion or leftover symbols.
Octree rebuild(std::span<const Symbol> symbols, int depth);

// Leaf index triples in breadth-first (ascending Morton) order.
std::vector<Index3> leaves(const Octree& tree);

// Walks a breadth-first occupancy stream one node at a time, producing the
// coding context of the next node from the symbols consumed so far. Encoder
// and decoder both drive their models through this class.
class StreamWalker {
public:
  explicit StreamWalker(int depth, bool empty_tree = false);

  bool done() const { return queue_.empty(); }
  // Context of the next node; valid only while !done().
  const NodeContext& next_context() const { return queue_.front().context; }
  // Record the occupancy of the next node. Throws on a zero symbol or when
  // the tree is already complete.
  void push(Symbol symbol);

  std::size_t consumed() const { return consumed_; }
  const std::vector<Index3>& leaves() const { return leaves_; }

private:
  struct Pending {
    NodeContext context;
    std::array<std::uint32_t, 3> origin;
  };

  int depth_;
  std::deque<Pending> queue_;
  std::vector<Index3> leaves_;
  std::size_t consumed_ = 0;
};

// Radial partition for the multi-level octree.
struct MultiLevelConfig {
  // t_0 = 0 < t_1 < ... < t_{N-1} < 1; t_N = 1 is implicit. Part n receives
  // n extra octree levels.
  std::vector<double> thresholds{0.0, 0.25, 0.5};

  std::size_t parts() const { return thresholds.size(); }
  double lower(std::size_t n) const { return thresholds[n]; }
  double upper(std::size_t n) const {
    return n + 1 < thresholds.size() ? thresholds[n + 1] : 1.0;
  }
  // Throws ErrorKind::config when thresholds are not strictly increasing in
  // [0, 1) starting at 0.
  void validate() const;
};

// Part n holds points with t_n*rho_max <= rho < t_{n+1}*rho_max (last part
// closed at rho_max), rho being the unquantized spherical radius. Relative
// order is preserved within each part.
std::vector<PointCloud> partition_multilevel(const PointCloud& cloud,
                                             const MultiLevelConfig& cfg,
                                             double rho_max);
std::size_t part_of(double rho, const MultiLevelConfig& cfg, double rho_max);

// Steps for part n: every axis step divided by 2^n, depth + n, same rho_max.
QuantSteps part_steps(const QuantSteps& base, std::size_t n);

}  // namespace scp
