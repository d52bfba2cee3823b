#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "scp/point_cloud.hpp"

namespace scp {

enum class CoordSystem : std::uint8_t { cartesian = 0, cylindrical = 1, spherical = 2 };

const char* to_string(CoordSystem system);
CoordSystem parse_coord_system(const std::string& name);

// rho >= 0, theta in [0, 2pi), phi in [0, pi]; theta = phi = 0 at the origin.
struct SphPoint {
  double rho = 0, theta = 0, phi = 0;
};

// rho >= 0, theta in [0, 2pi); theta = 0 on the z axis.
struct CylPoint {
  double rho = 0, theta = 0, z = 0;
};

SphPoint cart_to_sph(Vec3 p);
Vec3 sph_to_cart(SphPoint s);
CylPoint cart_to_cyl(Vec3 p);
Vec3 cyl_to_cart(CylPoint c);

// Quantization parameters for one octree.
//
// Spherical: axis steps (q, 2pi/(bins-1), pi/(bins-1)) over (rho, theta, phi).
// Cylindrical: (q, 2pi/(bins-1), q) over (rho, theta, z - origin_offset.z).
// Cartesian: q on every axis after subtracting origin_offset.
//
// For spherical and cylindrical, bins = ceil(rho_max / q). Indices live in
// [0, 2^depth - 1] on every axis.
struct QuantSteps {
  CoordSystem system = CoordSystem::spherical;
  double q_primary = 1.0;
  double q_theta = 0.0;
  double q_phi = 0.0;
  std::int64_t bins = 2;
  int depth = 1;
  double rho_max = 0.0;
  Vec3 origin_offset;

  std::array<double, 3> axis_steps() const;
  std::uint32_t max_index() const { return (std::uint32_t{1} << depth) - 1; }
};

inline constexpr int kMaxDepth = 21;

using Index3 = std::array<std::uint32_t, 3>;

struct QuantizedCloud {
  // Deduplicated, ascending in octree (Morton) order.
  std::vector<Index3> indices;
  QuantSteps steps;
  std::size_t original_count = 0;
};

// b = ceil(rho_max / q), tolerant to last-ulp noise in q so that
// q = 400 / 4095 with rho_max = 400 yields exactly 4095 bins.
std::int64_t count_bins(double rho_max, double q);

// Smallest depth whose index cube holds indices 0..max_index.
int depth_for_max_index(std::uint64_t max_index);

// Steps for `system` with base step q measured on `cloud`.
// Throws ErrorKind::config when fewer than two bins result.
QuantSteps derive_steps(CoordSystem system, double q, const PointCloud& cloud);

// Steps reconstructed from container header fields.
QuantSteps steps_from_header(CoordSystem system, double q, double rho_max,
                             Vec3 origin_offset, int depth);

// Per-point index before deduplication (rounded and clamped).
Index3 quantize_point(Vec3 p, const QuantSteps& steps);
Vec3 dequantize_index(const Index3& index, const QuantSteps& steps);

QuantizedCloud quantize(const PointCloud& cloud, const QuantSteps& steps);
PointCloud dequantize(const QuantizedCloud& qc);

// Sort key placing index triples in breadth-first octree leaf order.
std::uint64_t morton_key(const Index3& index, int depth);
void sort_unique_morton(std::vector<Index3>& indices, int depth);

}  // namespace scp
